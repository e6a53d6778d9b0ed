"""Ridge-function models: evaluation, exact total variation, generators.

A RidgeModel is an intercept plus a sum of univariate components, each
composed with a direction: g(x) = c + Sum_k h_k(x . a_k).  Component
kinds are restricted to shapes whose derivative sign changes have closed
forms, so the total variation of h_k over an interval is computed
exactly by splitting at the critical points and summing the monotone
increments.

The capacity norm of a model on a node sums the component variations
over the node's empirical projection intervals.  Note this is the norm
of the *given* representation, not the infimum over all equivalent
representations, so it upper-bounds the tightest possible value; it is
also exactly the quantity that the split-quality lower bounds control.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, Direction, validate_index_set

COMPONENT_KINDS = ("linear", "relu", "sigmoid", "sine", "cubic")

_DEFAULT_PARAMS = {
    "linear": {"slope": 1.0},
    "relu": {"slope": 1.0, "kink": 0.0},
    "sigmoid": {"amplitude": 1.0, "gain": 1.0, "center": 0.0},
    "sine": {"amplitude": 1.0, "frequency": 1.0, "phase": 0.0},
    "cubic": {"c3": 1.0, "c2": 0.0, "c1": 0.0, "c0": 0.0},
}


@dataclass(frozen=True)
class RidgeComponent:
    """One univariate shape composed with a direction."""

    kind: str
    direction: Direction
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in COMPONENT_KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}")
        params = dict(_DEFAULT_PARAMS[self.kind])
        unknown = set(self.parameters) - set(params)
        if unknown:
            raise ValueError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        params.update({k: float(v) for k, v in self.parameters.items()})
        for name, value in params.items():
            if not math.isfinite(value):
                raise ValueError(f"parameter {name} must be finite")
        object.__setattr__(self, "parameters", params)

    def profile(self, z):
        """The univariate shape h(z), vectorized over z."""
        z = np.asarray(z, dtype=np.float64)
        q = self.parameters
        if self.kind == "linear":
            return q["slope"] * z
        if self.kind == "relu":
            return q["slope"] * np.maximum(z - q["kink"], 0.0)
        if self.kind == "sigmoid":
            return q["amplitude"] / (1.0 + np.exp(-q["gain"] * (z - q["center"])))
        if self.kind == "sine":
            return q["amplitude"] * np.sin(q["frequency"] * z + q["phase"])
        return q["c3"] * z**3 + q["c2"] * z**2 + q["c1"] * z + q["c0"]

    def critical_points(self, lo: float, hi: float) -> list[float]:
        """Interior points where the shape's derivative can change sign."""
        q = self.parameters
        if self.kind == "relu":
            return [q["kink"]] if lo < q["kink"] < hi else []
        if self.kind == "sine":
            freq, phase = q["frequency"], q["phase"]
            if freq == 0.0 or q["amplitude"] == 0.0:
                return []
            # Extrema at freq*z + phase = pi/2 + k*pi; handle either sign of freq.
            u1, u2 = freq * lo + phase, freq * hi + phase
            u_lo, u_hi = min(u1, u2), max(u1, u2)
            k_lo = math.ceil((u_lo - math.pi / 2) / math.pi)
            k_hi = math.floor((u_hi - math.pi / 2) / math.pi)
            points = [(math.pi / 2 + k * math.pi - phase) / freq for k in range(k_lo, k_hi + 1)]
            return sorted(z for z in points if lo < z < hi)
        if self.kind == "cubic":
            a, b, c = 3.0 * q["c3"], 2.0 * q["c2"], q["c1"]
            roots: list[float] = []
            if a == 0.0:
                if b != 0.0:
                    roots = [-c / b]
            else:
                disc = b * b - 4.0 * a * c
                if disc > 0.0:
                    s = math.sqrt(disc)
                    roots = [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)]
                elif disc == 0.0:
                    roots = [-b / (2.0 * a)]
            return sorted(z for z in roots if lo < z < hi)
        return []  # linear and sigmoid are monotone

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "parameters": dict(sorted(self.parameters.items())),
            "direction": list(self.direction.coefficients),
        }


@dataclass(frozen=True)
class RidgeModel:
    components: tuple[RidgeComponent, ...]
    intercept: float = 0.0

    def __post_init__(self):
        if not self.components:
            raise ValueError("model needs at least one component")
        dims = {len(c.direction.coefficients) for c in self.components}
        if len(dims) != 1:
            raise ValueError("components disagree on dimension")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def p(self) -> int:
        return len(self.components[0].direction.coefficients)

    def to_dict(self) -> dict:
        return {
            "intercept": self.intercept,
            "components": [c.to_dict() for c in self.components],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @staticmethod
    def from_dict(data: dict) -> "RidgeModel":
        comps = tuple(
            RidgeComponent(
                kind=c["kind"],
                direction=Direction.canonical(c["direction"]),
                parameters=c.get("parameters", {}),
            )
            for c in data["components"]
        )
        return RidgeModel(components=comps, intercept=float(data.get("intercept", 0.0)))

    @staticmethod
    def from_json(text: str) -> "RidgeModel":
        return RidgeModel.from_dict(json.loads(text))


@dataclass(frozen=True)
class TVReport:
    """Per-component total variations over node intervals, plus their sum."""

    per_component: tuple[tuple[RidgeComponent, tuple[float, float], float], ...]
    total: float

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "per_component": [
                {
                    "kind": comp.kind,
                    "direction": list(comp.direction.coefficients),
                    "interval": [interval[0], interval[1]],
                    "tv": tv,
                }
                for comp, interval, tv in self.per_component
            ],
        }


def eval_ridge(model: RidgeModel, x) -> float:
    """Model value at a single point."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != model.p:
        raise ValueError(f"expected a length-{model.p} vector")
    total = model.intercept
    for comp in model.components:
        total += float(comp.profile(float(vec @ comp.direction.as_array())))
    return total


def eval_ridge_batch(model: RidgeModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.p:
        raise ValueError(f"expected an (m, {model.p}) matrix")
    out = np.full(X.shape[0], model.intercept)
    for comp in model.components:
        out += comp.profile(X @ comp.direction.as_array())
    return out


def total_variation(component: RidgeComponent, interval) -> float:
    """Exact variation of the component's shape over [lo, hi].

    The interval is split at the shape's critical points; on each
    monotone piece the variation is the absolute increment, so the sum
    is exact up to floating point.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("interval endpoints must be finite")
    if lo > hi:
        raise ValueError("interval must satisfy lo <= hi")
    if lo == hi:
        return 0.0
    knots = [lo] + component.critical_points(lo, hi) + [hi]
    values = component.profile(np.asarray(knots))
    return float(np.sum(np.abs(np.diff(values))))


def projection_interval(dataset: Dataset, node, direction: Direction) -> tuple[float, float]:
    """Empirical hull [min, max] of node-point projections on a direction."""
    idx = validate_index_set(node, dataset.n)
    values = dataset.features[idx] @ direction.as_array()
    return float(values.min()), float(values.max())


def l1_tv_norm(model: RidgeModel, dataset: Dataset, node) -> TVReport:
    """Capacity norm of the model over a node's empirical hull.

    Each component contributes its variation over the interval spanned
    by the node's projections onto that component's direction; the total
    is their sum.  A singleton node has zero-length intervals and norm 0.
    """
    rows = []
    total = 0.0
    for comp in model.components:
        interval = projection_interval(dataset, node, comp.direction)
        tv = total_variation(comp, interval)
        rows.append((comp, interval, tv))
        total += tv
    return TVReport(per_component=tuple(rows), total=total)


def generate_dataset(
    model: RidgeModel, n: int, noise_std: float, domain_box, seed: int
) -> Dataset:
    """Sample x uniformly on a box and y from the model plus Gaussian noise."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    box = [(float(lo), float(hi)) for lo, hi in domain_box]
    if len(box) != model.p:
        raise ValueError(f"domain box must have {model.p} sides")
    for lo, hi in box:
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ValueError("invalid domain box")
    rng = np.random.default_rng(seed)
    lows = np.asarray([b[0] for b in box])
    highs = np.asarray([b[1] for b in box])
    X = rng.uniform(lows, highs, size=(n, model.p))
    y = eval_ridge_batch(model, X)
    if noise_std > 0:
        y = y + rng.normal(0.0, noise_std, size=n)
    return Dataset(X, y)


def node_tv_profile(model: RidgeModel, tree, dataset: Dataset, q: float):
    """Per-leaf capacity norms and their q-th power sum.

    Used to find the smallest (V, q) pair for which the grown tree's
    leaf norms satisfy Sum_t norm_t^q <= V^q empirically.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    per_leaf = []
    for nid in tree.leaf_ids():
        node = tree.nodes[nid]
        if node.index_set is None:
            raise ValueError("index sets not attached")
        per_leaf.append(l1_tv_norm(model, dataset, node.index_set).total)
    power_sum = float(sum(v**q for v in per_leaf))
    return per_leaf, power_sum


def node_size_profile(tree) -> tuple[int, float]:
    """Largest terminal node size and the implied balancedness factor.

    With K the realized depth, the factor A = 2^K * max_t n(t) / n makes
    max_t n(t) = A * n / 2^K hold exactly for this tree.
    """
    max_size = max(tree.nodes[nid].count for nid in tree.leaf_ids())
    factor = (2**tree.max_depth_reached) * max_size / tree.n
    return max_size, factor


def leaf_intervals_1d(tree, dataset: Dataset) -> dict[int, tuple[float, float]]:
    """Tree-induced interval of each leaf for 1-D data.

    Intersects the ancestor threshold constraints and clips to the root
    empirical hull, so the leaf intervals tile the hull exactly (unlike
    per-leaf empirical hulls, which leave gaps between leaves).
    """
    if tree.p != 1:
        raise ValueError("leaf intervals are defined for p = 1")
    root_lo = float(dataset.features[:, 0].min())
    root_hi = float(dataset.features[:, 0].max())
    out: dict[int, tuple[float, float]] = {}
    stack = [(tree.root_id, root_lo, root_hi)]
    while stack:
        nid, lo, hi = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            out[nid] = (lo, hi)
            continue
        # 1-D directions are canonically +1, so the threshold is in x units.
        b = node.split.threshold
        stack.append((node.left_child, lo, min(hi, b)))
        stack.append((node.right_child, max(lo, b), hi))
    return out


def leaf_additivity_gap_1d(model: RidgeModel, tree, dataset: Dataset) -> float:
    """|sum of leaf norms - root norm| on the tree's 1-D interval partition.

    Because the intervals tile the root hull and variation is additive
    over abutting intervals, the gap is zero up to floating point.
    """
    intervals = leaf_intervals_1d(tree, dataset)
    root_lo = float(dataset.features[:, 0].min())
    root_hi = float(dataset.features[:, 0].max())
    leaf_sum = 0.0
    root_total = 0.0
    for comp in model.components:
        root_total += total_variation(comp, (root_lo, root_hi))
        for lo, hi in intervals.values():
            leaf_sum += total_variation(comp, (lo, hi))
    return abs(leaf_sum - root_total)
