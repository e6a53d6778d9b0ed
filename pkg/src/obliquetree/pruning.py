"""Weakest-link pruning and penalized subtree selection.

Collapsing an internal node t raises the training error by
(SSE(t) - Sum of SSE over the leaves under t) / n while removing
leaves(t) - 1 terminal nodes; the ratio of the two is the node's
critical alpha.  Repeatedly collapsing the node with the smallest alpha
yields a nested sequence of subtrees whose alphas are non-decreasing,
and for every penalty coefficient the smallest minimizer of
train_error + lambda * |leaves| lies on that sequence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, subset
from .splitting import SearchStrategy
from .tree import Tree, TreeNode, grow, predict_batch, replace_node

_OBJECTIVE_TOL = 1e-12


@dataclass(frozen=True)
class PruneStep:
    critical_alpha: float
    collapsed_node_id: int
    leaf_count_after: int
    train_error_after: float


@dataclass(frozen=True)
class PenalizedObjective:
    """train_error + lam * leaf_count for one candidate subtree."""

    lam: float
    value: float

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not np.isfinite(self.value):
            raise ValueError("objective value must be finite")


def penalized_objective(tree: Tree, dataset: Dataset, lam: float) -> PenalizedObjective:
    from .tree import training_error

    return PenalizedObjective(lam=lam, value=training_error(tree, dataset) + lam * tree.leaf_count())


@dataclass(frozen=True)
class PruneSequence:
    """The weakest-link path from the full tree down to its root."""

    steps: tuple[PruneStep, ...]
    initial_leaf_count: int
    initial_train_error: float

    def to_dict(self) -> dict:
        return {
            "initial_leaf_count": self.initial_leaf_count,
            "initial_train_error": self.initial_train_error,
            "steps": [
                {
                    "critical_alpha": s.critical_alpha,
                    "collapsed_node_id": s.collapsed_node_id,
                    "leaf_count_after": s.leaf_count_after,
                    "train_error_after": s.train_error_after,
                }
                for s in self.steps
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _subtree_leaf_stats(tree: Tree, collapsed: set[int]) -> dict[int, tuple[int, float]]:
    """Per-node (leaf count, summed leaf SSE) treating `collapsed` as leaves."""
    stats: dict[int, tuple[int, float]] = {}

    order = sorted(
        tree.nodes.values(), key=lambda nd: nd.depth, reverse=True
    )
    for node in order:
        if node.is_leaf or node.node_id in collapsed:
            stats[node.node_id] = (1, node.sse)
        else:
            lc, ls = stats[node.left_child]
            rc, rs = stats[node.right_child]
            stats[node.node_id] = (lc + rc, ls + rs)
    return stats


def _live_internal_ids(tree: Tree, collapsed: set[int]) -> list[int]:
    """Internal nodes still expanded, i.e. not under or at a collapse."""
    live = []
    stack = [tree.root_id]
    while stack:
        nid = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf or nid in collapsed:
            continue
        live.append(nid)
        stack.extend((node.left_child, node.right_child))
    return sorted(live)


def weakest_link_sequence(tree: Tree, dataset: Dataset) -> PruneSequence:
    """Successively collapse the internal node that costs least per leaf.

    Ties on alpha collapse the smaller node id first.  A root-only tree
    yields an empty sequence.
    """
    if dataset.n != tree.n:
        raise ValueError("dataset does not match the tree")
    collapsed: set[int] = set()
    steps: list[PruneStep] = []
    stats = _subtree_leaf_stats(tree, collapsed)
    initial_leaves = stats[tree.root_id][0]
    error = (
        sum(tree.nodes[nid].sse for nid in tree.leaf_ids()) / tree.n
    )
    initial_error = error
    while True:
        live = _live_internal_ids(tree, collapsed)
        if not live:
            break
        best_alpha = None
        best_nid = None
        for nid in live:
            node = tree.nodes[nid]
            leaves, leaf_sse = stats[nid]
            alpha = (node.sse - leaf_sse) / tree.n / (leaves - 1)
            if best_alpha is None or alpha < best_alpha - _OBJECTIVE_TOL:
                best_alpha = alpha
                best_nid = nid
            elif abs(alpha - best_alpha) <= _OBJECTIVE_TOL and nid < best_nid:
                best_nid = nid
                best_alpha = min(best_alpha, alpha)
        node = tree.nodes[best_nid]
        leaves, leaf_sse = stats[best_nid]
        error += (node.sse - leaf_sse) / tree.n
        collapsed.add(best_nid)
        stats = _subtree_leaf_stats(tree, collapsed)
        steps.append(
            PruneStep(
                critical_alpha=best_alpha,
                collapsed_node_id=best_nid,
                leaf_count_after=stats[tree.root_id][0],
                train_error_after=error,
            )
        )
    return PruneSequence(
        steps=tuple(steps),
        initial_leaf_count=initial_leaves,
        initial_train_error=initial_error,
    )


def _collapse_to_tree(tree: Tree, collapsed: set[int]) -> Tree:
    """Materialize the pruned subtree for a set of collapse points."""
    kept: dict[int, TreeNode] = {}
    deepest = 0
    stack = [tree.root_id]
    while stack:
        nid = stack.pop()
        node = replace_node(tree.nodes[nid])
        if nid in collapsed and not node.is_leaf:
            node.split = None
            node.left_child = None
            node.right_child = None
        kept[nid] = node
        if not node.is_leaf:
            deepest = max(deepest, node.depth + 1)
            stack.extend((node.left_child, node.right_child))
    return Tree(
        nodes=kept,
        root_id=tree.root_id,
        n=tree.n,
        p=tree.p,
        max_depth_reached=deepest,
        strategy=tree.strategy,
    )


def select_subtree(tree: Tree, dataset: Dataset, lam: float) -> Tree:
    """Smallest subtree minimizing train_error + lam * leaf_count.

    Walks the weakest-link sequence and keeps the last candidate whose
    objective is within tolerance of the minimum, which is the candidate
    with the fewest leaves (leaf counts strictly decrease along the
    path).
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    seq = weakest_link_sequence(tree, dataset)
    best_obj = seq.initial_train_error + lam * seq.initial_leaf_count
    best_prefix = 0
    for k, step in enumerate(seq.steps, start=1):
        objective = step.train_error_after + lam * step.leaf_count_after
        scale = max(1.0, abs(best_obj))
        if objective <= best_obj + _OBJECTIVE_TOL * scale:
            best_obj = min(best_obj, objective)
            best_prefix = k
    collapsed = {s.collapsed_node_id for s in seq.steps[:best_prefix]}
    return _collapse_to_tree(tree, collapsed)


def default_lambda_grid(dataset: Dataset, size: int = 20) -> list[float]:
    """Geometric grid spanning [1e-6, 1] times the response energy."""
    energy = float(np.mean(dataset.response**2))
    if energy == 0.0:
        energy = 1.0
    return [float(v) for v in energy * np.geomspace(1e-6, 1.0, size)]


def holdout_lambda(
    dataset: Dataset,
    strategy: SearchStrategy,
    max_depth: int,
    lambda_grid,
    holdout_fraction: float,
    seed: int,
    min_node_size: int = 1,
) -> tuple[float, list[float]]:
    """Pick the penalty by error on a held-out part of the sample.

    Grows on the remaining rows, evaluates each grid value's selected
    subtree on the holdout rows, and returns the lambda with the lowest
    holdout MSE (ties resolved toward the larger lambda) together with
    the per-lambda errors.
    """
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid must be non-empty")
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError("holdout_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n)
    n_hold = int(round(holdout_fraction * dataset.n))
    n_hold = min(max(n_hold, 1), dataset.n - 1)
    hold_rows = np.sort(perm[:n_hold])
    train_rows = np.sort(perm[n_hold:])
    train_ds = subset(dataset, train_rows)
    full = grow(train_ds, strategy, max_depth, min_node_size)
    X_hold = dataset.features[hold_rows]
    y_hold = dataset.response[hold_rows]
    errors = []
    best_lam = None
    best_err = None
    for lam in grid:
        pruned = select_subtree(full, train_ds, lam)
        err = float(np.mean((y_hold - predict_batch(pruned, X_hold)) ** 2))
        errors.append(err)
        if best_err is None:
            best_lam, best_err = lam, err
            continue
        tol = _OBJECTIVE_TOL * max(1.0, abs(best_err))
        if err < best_err - tol or (abs(err - best_err) <= tol and lam > best_lam):
            best_lam = lam
            best_err = min(best_err, err)
    return best_lam, errors
