"""Orthonormal decision-stump features and the tree's orthogonal expansion.

Every internal node of a grown tree carries a two-valued stump feature:
it takes the value n_R / sqrt(w * n_L * n_R) on the node's left child,
-n_L / sqrt(w * n_L * n_R) on the right child, and zero outside the
node, where w is the node's share of the full sample.  Together with the
constant feature (index 0, owned by the distinguished "empty node"),
these form an orthonormal family under the empirical inner product, and
the tree's prediction function is exactly their expansion with
coefficients <y, feature>_n.  The verifier functions below recompute the
defining identities numerically and report worst-case deviations; what
counts as a failure is left to the test layer.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .tree import Tree, predict_batch, training_error

# Owner id of the constant feature (the conventional "empty node").
EMPTY_NODE_ID = -1


@dataclass(frozen=True)
class StumpFeature:
    """One orthonormal stump, stored intensionally.

    Only the two values and the children's index sets are kept; values
    at fresh points are produced by routing through the tree, so the
    feature is a function on the whole input space, not just the sample.
    """

    owner_node_id: int
    left_value: float
    right_value: float
    weight: float
    left_ids: np.ndarray | None
    right_ids: np.ndarray | None

    @property
    def is_constant(self) -> bool:
        return self.owner_node_id == EMPTY_NODE_ID


@dataclass(frozen=True)
class Expansion:
    """Stump features plus their empirical inner-product coefficients."""

    features: tuple[StumpFeature, ...]
    coefficients: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "features": [
                {
                    "owner_node_id": f.owner_node_id,
                    "left_value": f.left_value,
                    "right_value": f.right_value,
                    "weight": f.weight,
                }
                for f in self.features
            ],
            "coefficients": list(self.coefficients),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def stump(tree: Tree, dataset: Dataset, internal_node_id: int) -> StumpFeature:
    """The orthonormal stump attached to one internal node.

    Passing EMPTY_NODE_ID returns the constant feature (identically 1).
    Raises ValueError on terminal nodes, which own no stump.
    """
    if internal_node_id == EMPTY_NODE_ID:
        return StumpFeature(
            owner_node_id=EMPTY_NODE_ID,
            left_value=1.0,
            right_value=1.0,
            weight=1.0,
            left_ids=None,
            right_ids=None,
        )
    node = tree.nodes[internal_node_id]
    if node.is_leaf:
        raise ValueError(f"node {internal_node_id} is terminal and has no stump")
    left = tree.nodes[node.left_child]
    right = tree.nodes[node.right_child]
    if left.index_set is None or right.index_set is None:
        raise ValueError("index sets not attached; call attach_index_sets first")
    n_left, n_right = left.count, right.count
    weight = node.count / tree.n
    scale = np.sqrt(weight * n_left * n_right)
    return StumpFeature(
        owner_node_id=internal_node_id,
        left_value=n_right / scale,
        right_value=-n_left / scale,
        weight=weight,
        left_ids=left.index_set,
        right_ids=right.index_set,
    )


def feature_column(feature: StumpFeature, n: int) -> np.ndarray:
    """The feature evaluated at all training points, as a length-n vector."""
    if feature.is_constant:
        return np.ones(n)
    col = np.zeros(n)
    col[feature.left_ids] = feature.left_value
    col[feature.right_ids] = feature.right_value
    return col


def feature_at(tree: Tree, feature: StumpFeature, x) -> float:
    """Evaluate a stump at an arbitrary point by routing through the tree."""
    if feature.is_constant:
        return 1.0
    vec = np.asarray(x, dtype=np.float64)
    node = tree.nodes[tree.root_id]
    while not node.is_leaf:
        goes_left = float(vec @ node.split.direction.as_array()) <= node.split.threshold
        if node.node_id == feature.owner_node_id:
            return feature.left_value if goes_left else feature.right_value
        node = tree.nodes[node.left_child if goes_left else node.right_child]
    return 0.0


def build_expansion(tree: Tree, dataset: Dataset) -> Expansion:
    """Expansion of the tree output over its stump features.

    Feature order is the constant feature first, then internal nodes by
    id.  Coefficients are the empirical inner products (1/n) Sum y_i *
    feature(x_i); the constant's coefficient is the grand mean.
    """
    features = [stump(tree, dataset, EMPTY_NODE_ID)]
    coefficients = [float(dataset.response.mean())]
    for nid in tree.internal_ids():
        feat = stump(tree, dataset, nid)
        y = dataset.response
        coef = (
            feat.left_value * float(y[feat.left_ids].sum())
            + feat.right_value * float(y[feat.right_ids].sum())
        ) / dataset.n
        features.append(feat)
        coefficients.append(float(coef))
    return Expansion(features=tuple(features), coefficients=tuple(coefficients))


def verify_orthonormality(expansion: Expansion, dataset: Dataset) -> float:
    """Largest absolute deviation of the feature Gram matrix from identity."""
    cols = np.stack(
        [feature_column(f, dataset.n) for f in expansion.features], axis=1
    )
    gram = cols.T @ cols / dataset.n
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def verify_impurity_identity(tree: Tree, dataset: Dataset) -> tuple[float, int | None]:
    """Worst relative gap between squared coefficients and split decreases.

    For every internal node the squared expansion coefficient must equal
    the SSE decrease of the split actually taken there.  Returns the max
    relative deviation and the offending node id (None for a root-only
    tree, whose deviation is vacuously zero).
    """
    expansion = build_expansion(tree, dataset)
    worst = 0.0
    worst_node = None
    for feat, coef in zip(expansion.features, expansion.coefficients):
        if feat.is_constant:
            continue
        decrease = tree.nodes[feat.owner_node_id].split.decrease
        gap = abs(coef**2 - decrease) / max(abs(decrease), abs(coef**2), 1e-300)
        if gap >= worst:
            worst = gap
            worst_node = feat.owner_node_id
    return worst, worst_node


def reconstruct_at(tree: Tree, expansion: Expansion, x) -> float:
    """Evaluate the orthogonal expansion at an arbitrary point."""
    return float(
        sum(
            coef * feature_at(tree, feat, x)
            for feat, coef in zip(expansion.features, expansion.coefficients)
        )
    )


def reconstruct_batch(tree: Tree, expansion: Expansion, X: np.ndarray) -> np.ndarray:
    """Vectorized expansion evaluation: one routing pass accumulates every
    stump's contribution for all rows at once."""
    X = np.asarray(X, dtype=np.float64)
    by_owner = {
        f.owner_node_id: (f, c)
        for f, c in zip(expansion.features, expansion.coefficients)
        if not f.is_constant
    }
    constant = sum(
        c for f, c in zip(expansion.features, expansion.coefficients) if f.is_constant
    )
    out = np.full(X.shape[0], constant)
    stack = [(tree.root_id, np.arange(X.shape[0]))]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf or rows.size == 0:
            continue
        values = X[rows] @ node.split.direction.as_array()
        left = values <= node.split.threshold
        if nid in by_owner:
            feat, coef = by_owner[nid]
            out[rows[left]] += coef * feat.left_value
            out[rows[~left]] += coef * feat.right_value
        stack.append((node.left_child, rows[left]))
        stack.append((node.right_child, rows[~left]))
    return out


def verify_expansion_reconstruction(
    tree: Tree, dataset: Dataset, fresh_points: np.ndarray | None = None
) -> float:
    """Max |expansion - tree prediction| over training and fresh points."""
    expansion = build_expansion(tree, dataset)
    cols = np.stack(
        [feature_column(f, dataset.n) for f in expansion.features], axis=1
    )
    fitted = cols @ np.asarray(expansion.coefficients)
    preds = predict_batch(tree, dataset.features)
    worst = float(np.max(np.abs(fitted - preds)))
    if fresh_points is not None:
        fresh = np.asarray(fresh_points, dtype=np.float64)
        gap = np.abs(
            reconstruct_batch(tree, expansion, fresh) - predict_batch(tree, fresh)
        )
        worst = max(worst, float(np.max(gap)))
    return worst


def _route(tree: Tree, x) -> float:
    node = tree.nodes[tree.root_id]
    vec = np.asarray(x, dtype=np.float64)
    while not node.is_leaf:
        value = float(vec @ node.split.direction.as_array())
        node = tree.nodes[
            node.left_child if value <= node.split.threshold else node.right_child
        ]
    return node.mean


def verify_training_recursion(
    dataset: Dataset, strategy, max_depth: int, grow_fn=None
) -> list[float]:
    """Per-depth residuals of the training-error recursion.

    For each K in 1..max_depth, the training error must drop from its
    depth K-1 value by exactly the summed squared coefficients of the
    stumps created at level K.  Requires a deterministic strategy (or a
    fixed seed) so depth prefixes are nested.
    """
    from .tree import grow, prune_to_depth

    if grow_fn is None:
        grow_fn = grow
    full = grow_fn(dataset, strategy, max_depth)
    expansion = build_expansion(full, dataset)
    level_drop = {}
    for feat, coef in zip(expansion.features, expansion.coefficients):
        if feat.is_constant:
            continue
        owner_depth = full.nodes[feat.owner_node_id].depth
        level_drop[owner_depth + 1] = level_drop.get(owner_depth + 1, 0.0) + coef**2
    residuals = []
    prev_error = training_error(prune_to_depth(full, 0), dataset)
    for depth in range(1, max_depth + 1):
        error = training_error(prune_to_depth(full, depth), dataset)
        residuals.append(abs(error - prev_error + level_drop.get(depth, 0.0)))
        prev_error = error
    return residuals


def parseval_gap(tree: Tree, dataset: Dataset) -> float:
    """|  ||y||^2_n - Sum coef^2 - training error  | for the given tree."""
    expansion = build_expansion(tree, dataset)
    energy = float(np.mean(dataset.response**2))
    explained = sum(c**2 for c in expansion.coefficients)
    return abs(energy - explained - training_error(tree, dataset))
