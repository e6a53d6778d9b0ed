"""Split search: SSE decrease, threshold sweeps, and direction strategies.

The quality of a candidate split is the decrease in sum-of-squares error
it buys, normalized by the full sample size n:

    decrease = (SSE(node) - SSE(left) - SSE(right)) / n
             = (n_L * n_R / n(node)) * (mean_L - mean_R)^2 / n

Four search strategies are provided: axis-aligned scan, exhaustive
oblique enumeration (exact on small nodes), coordinate-wise hill
climbing, and sparse random projections.  All are pure functions of
(dataset, node, strategy) and deterministic given the strategy seed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, Direction, axis_direction, project, validate_index_set

# Two decreases within this absolute tolerance are treated as tied, and
# the deterministic tie-breaking order decides, so argmax results do not
# flip with platform rounding.
DECREASE_TOL = 1e-12

STRATEGY_KINDS = ("axis_aligned", "hill_climb", "random_projection", "exhaustive_oblique")

_GOLDEN_BRACKET = 2.5
_GOLDEN_ITERS = 32


class NoValidSplitError(ValueError):
    """No threshold separates the node into two non-empty children."""


@dataclass(frozen=True)
class Split:
    """A chosen hyperplane split: direction, threshold, and its decrease."""

    direction: Direction
    threshold: float
    decrease: float
    left_count: int
    right_count: int

    def to_dict(self) -> dict:
        return {
            "direction": list(self.direction.coefficients),
            "threshold": self.threshold,
            "decrease": self.decrease,
            "left_count": self.left_count,
            "right_count": self.right_count,
        }

    @staticmethod
    def from_dict(data: dict) -> "Split":
        return Split(
            direction=Direction(tuple(float(c) for c in data["direction"])),
            threshold=float(data["threshold"]),
            decrease=float(data["decrease"]),
            left_count=int(data["left_count"]),
            right_count=int(data["right_count"]),
        )


@dataclass(frozen=True)
class SearchStrategy:
    """Configuration of one candidate-direction strategy.

    sparsity_d caps the number of nonzero direction coefficients,
    num_candidates is the random-projection draw count, restarts and
    max_iterations budget the hill climb, and node_cap bounds the node
    size the exhaustive search will accept.
    """

    kind: str
    sparsity_d: int = 1
    num_candidates: int = 100
    restarts: int = 1
    max_iterations: int = 20
    seed: int = 0
    node_cap: int = 64

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.sparsity_d < 1:
            raise ValueError("sparsity_d must be >= 1")
        if self.num_candidates < 0:
            raise ValueError("num_candidates must be >= 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sparsity_d": self.sparsity_d,
            "num_candidates": self.num_candidates,
            "restarts": self.restarts,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
            "node_cap": self.node_cap,
        }

    @staticmethod
    def from_dict(data: dict) -> "SearchStrategy":
        return SearchStrategy(**{k: data[k] for k in data})


@dataclass(frozen=True)
class SuboptimalityReport:
    """Empirical success profile of a strategy against the exact oracle."""

    kappa: float
    trials: int
    success_fraction: float
    oracle_decrease: float
    per_trial_decreases: tuple[float, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "trials": self.trials,
            "success_fraction": self.success_fraction,
            "oracle_decrease": self.oracle_decrease,
            "per_trial_decreases": list(self.per_trial_decreases),
        }


def sse_decrease(dataset: Dataset, node, direction: Direction, threshold: float) -> float:
    """SSE decrease of splitting `node` at direction/threshold.

    Routing convention: projection <= threshold goes left, > goes right.
    Raises NoValidSplitError if either side would be empty.
    """
    idx = validate_index_set(node, dataset.n)
    values = dataset.features[idx] @ direction.as_array()
    left = values <= threshold
    n_left = int(np.count_nonzero(left))
    if n_left == 0 or n_left == idx.size:
        raise NoValidSplitError("split leaves an empty side")
    y = dataset.response[idx]
    sse_node = float(np.sum((y - y.mean()) ** 2))
    y_left = y[left]
    y_right = y[~left]
    sse_left = float(np.sum((y_left - y_left.mean()) ** 2))
    sse_right = float(np.sum((y_right - y_right.mean()) ** 2))
    return (sse_node - sse_left - sse_right) / dataset.n


def _sweep_gains(values: np.ndarray, y: np.ndarray, n_full: int):
    """Prefix-sum sweep over the sorted projections of one direction.

    values must be sorted ascending.  Returns (gains, thresholds, valid)
    over the m-1 boundaries; a boundary is valid only when its midpoint
    lies strictly between two distinct consecutive values.
    """
    m = values.shape[0]
    csum = np.cumsum(y)
    total = csum[-1]
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    sum_left = csum[:-1]
    gains = (
        sum_left**2 / n_left + (total - sum_left) ** 2 / n_right - total**2 / m
    ) / n_full
    thresholds = 0.5 * (values[:-1] + values[1:])
    valid = (values[:-1] < thresholds) & (thresholds < values[1:])
    return gains, thresholds, valid


def best_threshold(dataset: Dataset, node, direction: Direction) -> Split:
    """Best midpoint threshold along a fixed direction.

    Evaluates every midpoint between consecutive distinct projections in
    one left-to-right prefix-sum sweep and returns the maximizer; ties
    are broken toward the smallest threshold.  The stored decrease is
    re-evaluated with sse_decrease so it matches exactly.
    """
    values, idx = project(dataset, node, direction)
    if values.shape[0] < 2 or values[0] == values[-1]:
        raise NoValidSplitError("no valid split: projections not separable")
    y = dataset.response[idx]
    gains, thresholds, valid = _sweep_gains(values, y, dataset.n)
    if not np.any(valid):
        raise NoValidSplitError("no valid split: projections not separable")
    gains = np.where(valid, gains, -np.inf)
    best_gain = float(np.max(gains))
    # First boundary within tolerance of the max = smallest threshold.
    candidates = np.nonzero(gains >= best_gain - DECREASE_TOL)[0]
    boundary = int(candidates[0])
    threshold = float(thresholds[boundary])
    decrease = sse_decrease(dataset, node, direction, threshold)
    return Split(
        direction=direction,
        threshold=threshold,
        decrease=decrease,
        left_count=boundary + 1,
        right_count=values.shape[0] - boundary - 1,
    )


def _tie_key(split: Split):
    return (
        split.direction.support_size,
        split.direction.coefficients,
        split.threshold,
    )


def better_split(challenger: Split, incumbent: Split) -> bool:
    """Deterministic total order on splits.

    Larger decrease wins; decreases within DECREASE_TOL are resolved by
    smaller support size, then lexicographically smaller canonical
    direction, then smaller threshold.
    """
    if challenger.decrease > incumbent.decrease + DECREASE_TOL:
        return True
    if incumbent.decrease > challenger.decrease + DECREASE_TOL:
        return False
    return _tie_key(challenger) < _tie_key(incumbent)


def search_axis_aligned(dataset: Dataset, node) -> Split:
    """Best split over the p standard basis directions.

    Ties are broken toward the lowest coordinate index, then the lowest
    threshold (both realized by keeping the earliest maximizer).
    """
    best = None
    for j in range(dataset.p):
        try:
            split = best_threshold(dataset, node, axis_direction(dataset.p, j))
        except NoValidSplitError:
            continue
        if best is None or split.decrease > best.decrease + DECREASE_TOL:
            best = split
    if best is None:
        raise NoValidSplitError("no coordinate admits a valid split")
    return best


def _canonical_rows(matrix: np.ndarray) -> np.ndarray:
    """Canonicalize direction rows in bulk and drop duplicates/zeros."""
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, arr.shape[-1] if arr.ndim == 2 else 0)
    peak = np.max(np.abs(arr), axis=1, keepdims=True)
    keep = peak[:, 0] > 0.0
    arr = arr[keep]
    peak = peak[keep]
    if arr.shape[0] == 0:
        return arr
    arr = np.where(np.abs(arr) <= 1e-12 * peak, 0.0, arr)
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    keep = norms[:, 0] > 0.0
    arr = arr[keep] / norms[keep]
    if arr.shape[0] == 0:
        return arr
    first_nz = np.argmax(arr != 0.0, axis=1)
    signs = np.sign(arr[np.arange(arr.shape[0]), first_nz])
    arr = arr * signs[:, None]
    return np.unique(arr, axis=0)


def _candidate_directions(points: np.ndarray, support, p: int, size: int) -> np.ndarray:
    """Directions (embedded in R^p) spanned by node points on one support.

    size 1: the axis itself.  size 2: perpendiculars of all point-pair
    differences in the 2-D restriction.  size 3: normals of all 3-point
    subsets plus cross products of disjoint pair differences; the latter
    cover optimal hyperplanes whose margin touches two points on each
    side without passing through three points.
    """
    if size == 1:
        local = np.ones((1, 1))
    elif size == 2:
        diffs = points[:, None, :] - points[None, :, :]
        iu = np.triu_indices(points.shape[0], k=1)
        d = diffs[iu]
        d = d[np.any(d != 0.0, axis=1)]
        local = np.stack([-d[:, 1], d[:, 0]], axis=1) if d.shape[0] else np.zeros((0, 2))
    elif size == 3:
        iu = np.triu_indices(points.shape[0], k=1)
        diffs = points[iu[0]] - points[iu[1]]
        diffs = diffs[np.any(diffs != 0.0, axis=1)]
        if diffs.shape[0] >= 2:
            a, b = np.triu_indices(diffs.shape[0], k=1)
            # Crosses of overlapping pairs are the 3-point-subset normals;
            # crosses of disjoint pairs cover two-points-per-side margins.
            local = np.cross(diffs[a], diffs[b])
        else:
            local = np.zeros((0, 3))
    else:
        raise ValueError("exhaustive search supports sparsity up to 3")
    out = np.zeros((local.shape[0], p))
    out[:, list(support)] = local
    return out


def _best_over_directions(dataset: Dataset, node, directions: np.ndarray, chunk=4096):
    """Best split over a matrix of candidate directions (rows).

    Vectorizes the threshold sweep across directions and then resolves
    near-ties by the deterministic order of better_split.  Returns None
    when no direction admits a valid split.
    """
    idx = validate_index_set(node, dataset.n)
    X = dataset.features[idx]
    y = dataset.response[idx]
    m = idx.size
    if m < 2 or directions.shape[0] == 0:
        return None
    best_gain = -np.inf
    candidates: list[tuple[np.ndarray, float]] = []
    n_left_idx = np.arange(1, m, dtype=np.float64)
    for lo in range(0, directions.shape[0], chunk):
        dirs = directions[lo : lo + chunk]
        proj = X @ dirs.T
        order = np.argsort(proj, axis=0, kind="stable")
        vals = np.take_along_axis(proj, order, axis=0)
        ys = y[order]
        csum = np.cumsum(ys, axis=0)
        total = csum[-1]
        sum_left = csum[:-1]
        gains = (
            sum_left**2 / n_left_idx[:, None]
            + (total - sum_left) ** 2 / (m - n_left_idx)[:, None]
            - total**2 / m
        ) / dataset.n
        mids = 0.5 * (vals[:-1] + vals[1:])
        valid = (vals[:-1] < mids) & (mids < vals[1:])
        gains = np.where(valid, gains, -np.inf)
        chunk_best = float(np.max(gains)) if gains.size else -np.inf
        if chunk_best <= -np.inf:
            continue
        if chunk_best > best_gain:
            best_gain = chunk_best
            candidates = [c for c in candidates if c[1] >= best_gain - DECREASE_TOL]
        rows, cols = np.nonzero(gains >= best_gain - DECREASE_TOL)
        for r, c in zip(rows, cols):
            candidates.append((dirs[c].copy(), float(gains[r, c])))
    if best_gain == -np.inf:
        return None
    # Re-solve the per-direction sweep for every near-tied candidate so
    # stored thresholds/counts are exact, then apply the global order.
    best = None
    seen: set[tuple[float, ...]] = set()
    for vec, _gain in candidates:
        direction = Direction.canonical(vec)
        if direction.coefficients in seen:
            continue
        seen.add(direction.coefficients)
        try:
            split = best_threshold(dataset, node, direction)
        except NoValidSplitError:
            continue
        if best is None or better_split(split, best):
            best = split
    return best


def search_exhaustive_oblique(
    dataset: Dataset, node, sparsity_d: int, node_cap: int = 64
) -> Split:
    """Exact maximizer of the SSE decrease over sparsity-d hyperplanes.

    Enumerates, for every support of size <= sparsity_d, the directions
    spanned by node-point subsets (see _candidate_directions) and sweeps
    every midpoint threshold along each.  This realizes every dichotomy
    of the node achievable by a hyperplane with at most sparsity_d
    nonzero coefficients, so the returned split is a true maximizer over
    the restricted space.  Restricted to small instances by node_cap.
    """
    idx = validate_index_set(node, dataset.n)
    if idx.size > node_cap:
        raise ValueError(
            f"node size {idx.size} exceeds exhaustive search cap {node_cap}"
        )
    if sparsity_d > 3:
        raise ValueError("exhaustive search supports sparsity_d <= 3")
    d = min(sparsity_d, dataset.p)
    X = dataset.features[idx]
    blocks = []
    for size in range(1, d + 1):
        for support in itertools.combinations(range(dataset.p), size):
            pts = X[:, list(support)]
            blocks.append(_candidate_directions(pts, support, dataset.p, size))
    directions = _canonical_rows(np.concatenate(blocks, axis=0))
    best = _best_over_directions(dataset, node, directions)
    if best is None:
        raise NoValidSplitError("no valid split on this node")
    return best


def _random_sparse_directions(rng, p: int, sparsity_d: int, count: int) -> np.ndarray:
    out = np.zeros((count, p))
    for i in range(count):
        support = rng.choice(p, size=sparsity_d, replace=False)
        out[i, support] = rng.choice([-1.0, 1.0], size=sparsity_d)
    return out / np.sqrt(sparsity_d)


def search_random_projection(dataset: Dataset, node, strategy: SearchStrategy) -> Split:
    """Axis-aligned baseline plus num_candidates sparse random directions.

    Each candidate has a uniformly chosen support of size sparsity_d and
    coefficients drawn i.i.d. from {-1, +1}, scaled to unit norm.  With
    zero candidates this reduces to the axis-aligned search.
    """
    if strategy.sparsity_d > dataset.p:
        raise ValueError("sparsity_d exceeds dimension p")
    best = search_axis_aligned(dataset, node)
    if strategy.num_candidates == 0:
        return best
    rng = np.random.default_rng(strategy.seed)
    raw = _random_sparse_directions(rng, dataset.p, strategy.sparsity_d, strategy.num_candidates)
    directions = _canonical_rows(raw)
    challenger = _best_over_directions(dataset, node, directions)
    if challenger is not None and better_split(challenger, best):
        return challenger
    return best


def _golden_probe(objective, lo: float, hi: float, iters: int):
    """Golden-section maximization that remembers the best probed point."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = objective(c), objective(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = objective(d)
        if fc > best_f:
            best_x, best_f = c, fc
        if fd > best_f:
            best_x, best_f = d, fd
    return best_x, best_f


def search_hill_climb(dataset: Dataset, node, strategy: SearchStrategy) -> Split:
    """Coordinate-wise hill climb from the axis-aligned optimum.

    Starts at the best axis split plus (restarts - 1) random unit
    directions; each pass runs a golden-section line search over every
    coefficient with the threshold re-solved per candidate, until a full
    pass yields no improvement or max_iterations passes elapse.  With a
    zero iteration budget the axis-aligned result is returned unchanged.
    """
    base = search_axis_aligned(dataset, node)
    if strategy.max_iterations == 0:
        return base
    rng = np.random.default_rng(strategy.seed)
    starts = [base.direction]
    for _ in range(strategy.restarts - 1):
        starts.append(Direction.canonical(rng.standard_normal(dataset.p)))
    best = base

    def evaluate(vector):
        try:
            direction = Direction.canonical(vector)
        except ValueError:
            return None
        try:
            return best_threshold(dataset, node, direction)
        except NoValidSplitError:
            return None

    for start in starts:
        current = evaluate(start.as_array())
        if current is None:
            continue
        vec = start.as_array().copy()
        for _ in range(strategy.max_iterations):
            improved = False
            for j in range(dataset.p):
                def coeff_objective(c, _j=j):
                    trial = vec.copy()
                    trial[_j] = c
                    split = evaluate(trial)
                    return split.decrease if split is not None else -np.inf

                c_best, f_best = _golden_probe(
                    coeff_objective, -_GOLDEN_BRACKET, _GOLDEN_BRACKET, _GOLDEN_ITERS
                )
                if f_best > current.decrease + DECREASE_TOL:
                    vec[j] = c_best
                    vec = Direction.canonical(vec).as_array()
                    current = evaluate(vec)
                    improved = True
            if not improved:
                break
        if better_split(current, best):
            best = current
    return best


def run_search(dataset: Dataset, node, strategy: SearchStrategy) -> Split:
    """Dispatch a search strategy on one node."""
    if strategy.kind == "axis_aligned":
        return search_axis_aligned(dataset, node)
    if strategy.kind == "exhaustive_oblique":
        return search_exhaustive_oblique(
            dataset, node, strategy.sparsity_d, strategy.node_cap
        )
    if strategy.kind == "hill_climb":
        return search_hill_climb(dataset, node, strategy)
    if strategy.kind == "random_projection":
        return search_random_projection(dataset, node, strategy)
    raise ValueError(f"unknown strategy kind {strategy.kind!r}")


def estimate_suboptimality(
    dataset: Dataset, node, strategy: SearchStrategy, kappa: float, trials: int
) -> SuboptimalityReport:
    """Fraction of trials reaching a kappa fraction of the exact optimum.

    The oracle decrease is computed once with the exhaustive search at
    full sparsity (hence p <= 3 is required so the restricted space is
    the whole of R^p); the strategy is re-run with seeds seed .. seed +
    trials - 1.  Deterministic strategies yield a fraction of 0 or 1.
    """
    if not 0.0 < kappa <= 1.0:
        raise ValueError("kappa must lie in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if dataset.p > 3:
        raise ValueError("sub-optimality estimation needs p <= 3 for the exact oracle")
    oracle = search_exhaustive_oblique(dataset, node, dataset.p, strategy.node_cap)
    decreases = []
    successes = 0
    for trial in range(trials):
        trial_strategy = replace(strategy, seed=strategy.seed + trial)
        try:
            result = run_search(dataset, node, trial_strategy)
            achieved = result.decrease
        except NoValidSplitError:
            achieved = 0.0
        decreases.append(achieved)
        if achieved >= kappa * oracle.decrease - DECREASE_TOL:
            successes += 1
    return SuboptimalityReport(
        kappa=kappa,
        trials=trials,
        success_fraction=successes / trials,
        oracle_decrease=oracle.decrease,
        per_trial_decreases=tuple(decreases),
    )
