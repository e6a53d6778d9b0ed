"""Greedy depth-limited tree growth, prediction, and training error.

Growth is breadth-first (level-synchronous): every node on the current
frontier is searched before any child is, so a depth-K tree is exactly
the depth-(K-1) tree plus one more round of splits.  Node ids are
assigned in frontier order, which makes construction deterministic and
gives the greedy-prefix property for deterministic strategies.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .dataset import Dataset, node_stats, root_index_set, validate_index_set
from .splitting import (
    DECREASE_TOL,
    NoValidSplitError,
    SearchStrategy,
    Split,
    run_search,
)

# Responses whose spread is below this are treated as constant (pure node).
PURITY_TOL = 1e-12


@dataclass
class TreeNode:
    node_id: int
    depth: int
    mean: float
    sse: float
    count: int
    index_set: Optional[np.ndarray] = None
    split: Optional[Split] = None
    left_child: Optional[int] = None
    right_child: Optional[int] = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass
class Tree:
    """Binary hierarchy of nodes keyed by node_id, root at id 0."""

    nodes: dict[int, TreeNode]
    root_id: int
    n: int
    p: int
    max_depth_reached: int
    strategy: SearchStrategy

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def leaf_ids(self) -> list[int]:
        return sorted(nid for nid, nd in self.nodes.items() if nd.is_leaf)

    def internal_ids(self) -> list[int]:
        return sorted(nid for nid, nd in self.nodes.items() if not nd.is_leaf)

    def leaf_count(self) -> int:
        return sum(1 for nd in self.nodes.values() if nd.is_leaf)


def _derived_strategy(strategy: SearchStrategy, node_id: int) -> SearchStrategy:
    # Per-node seed so random strategies draw fresh candidates at every
    # node while the whole tree stays a function of the base seed.
    return replace(strategy, seed=strategy.seed + node_id)


def grow(
    dataset: Dataset,
    strategy: SearchStrategy,
    max_depth: int,
    min_node_size: int = 1,
) -> Tree:
    """Grow a depth-limited greedy tree.

    A node is split only if its depth is below max_depth, it holds at
    least 2 * min_node_size points, its responses are not all equal
    (within PURITY_TOL), the strategy finds a split with positive
    decrease, and both children keep min_node_size points.  Degenerate
    inputs simply produce a root-only tree.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be >= 0")
    if min_node_size < 1:
        raise ValueError("min_node_size must be >= 1")
    root_idx = root_index_set(dataset)
    mean, sse = node_stats(dataset, root_idx)
    nodes = {
        0: TreeNode(
            node_id=0, depth=0, mean=mean, sse=sse, count=dataset.n, index_set=root_idx
        )
    }
    frontier = [0]
    next_id = 1
    deepest = 0
    for depth in range(max_depth):
        next_frontier: list[int] = []
        for nid in frontier:
            node = nodes[nid]
            idx = node.index_set
            if idx.size < 2 * min_node_size:
                continue
            y = dataset.response[idx]
            if float(y.max() - y.min()) <= PURITY_TOL:
                continue
            try:
                split = run_search(dataset, idx, _derived_strategy(strategy, nid))
            except NoValidSplitError:
                continue
            if split.decrease <= DECREASE_TOL:
                continue
            values = dataset.features[idx] @ split.direction.as_array()
            left_mask = values <= split.threshold
            left_idx = idx[left_mask]
            right_idx = idx[~left_mask]
            if left_idx.size < min_node_size or right_idx.size < min_node_size:
                continue
            if left_idx.size != split.left_count or right_idx.size != split.right_count:
                raise AssertionError("split counts disagree with routing")
            left_mean, left_sse = node_stats(dataset, left_idx)
            right_mean, right_sse = node_stats(dataset, right_idx)
            lid, rid = next_id, next_id + 1
            next_id += 2
            nodes[lid] = TreeNode(
                node_id=lid, depth=depth + 1, mean=left_mean, sse=left_sse,
                count=left_idx.size, index_set=left_idx,
            )
            nodes[rid] = TreeNode(
                node_id=rid, depth=depth + 1, mean=right_mean, sse=right_sse,
                count=right_idx.size, index_set=right_idx,
            )
            node.split = split
            node.left_child = lid
            node.right_child = rid
            next_frontier.extend((lid, rid))
            deepest = depth + 1
        if not next_frontier:
            break
        frontier = next_frontier
    return Tree(
        nodes=nodes,
        root_id=0,
        n=dataset.n,
        p=dataset.p,
        max_depth_reached=deepest,
        strategy=strategy,
    )


def predict(tree: Tree, x) -> float:
    """Route a single point to its terminal node and return that mean."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.ndim != 1 or vec.shape[0] != tree.p:
        raise ValueError(f"expected a length-{tree.p} vector")
    if not np.all(np.isfinite(vec)):
        raise ValueError("point has non-finite coordinates")
    node = tree.nodes[tree.root_id]
    while not node.is_leaf:
        value = float(vec @ node.split.direction.as_array())
        child = node.left_child if value <= node.split.threshold else node.right_child
        node = tree.nodes[child]
    return node.mean


def predict_batch(tree: Tree, X: np.ndarray) -> np.ndarray:
    """Vectorized prediction for a matrix of row points."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != tree.p:
        raise ValueError(f"expected an (m, {tree.p}) matrix")
    out = np.empty(X.shape[0])
    stack = [(tree.root_id, np.arange(X.shape[0]))]
    while stack:
        nid, rows = stack.pop()
        node = tree.nodes[nid]
        if node.is_leaf:
            out[rows] = node.mean
            continue
        values = X[rows] @ node.split.direction.as_array()
        left = values <= node.split.threshold
        if np.any(left):
            stack.append((node.left_child, rows[left]))
        if not np.all(left):
            stack.append((node.right_child, rows[~left]))
    return out


def training_error(tree: Tree, dataset: Dataset) -> float:
    """Mean squared training residual (1/n) * Sum (y_i - prediction)^2."""
    preds = predict_batch(tree, dataset.features)
    return float(np.mean((dataset.response - preds) ** 2))


def prune_to_depth(tree: Tree, depth: int) -> Tree:
    """The tree truncated at `depth`: deeper nodes dropped, boundary
    nodes turned into leaves.  For deterministic strategies this equals
    the tree grown directly with max_depth=depth (greedy prefix)."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    kept: dict[int, TreeNode] = {}
    deepest = 0
    for nid, node in tree.nodes.items():
        if node.depth > depth:
            continue
        clone = replace_node(node)
        if node.depth == depth:
            clone.split = None
            clone.left_child = None
            clone.right_child = None
        if not clone.is_leaf:
            deepest = max(deepest, node.depth + 1)
        kept[nid] = clone
    return Tree(
        nodes=kept,
        root_id=tree.root_id,
        n=tree.n,
        p=tree.p,
        max_depth_reached=deepest,
        strategy=tree.strategy,
    )


def replace_node(node: TreeNode) -> TreeNode:
    return TreeNode(
        node_id=node.node_id,
        depth=node.depth,
        mean=node.mean,
        sse=node.sse,
        count=node.count,
        index_set=node.index_set,
        split=node.split,
        left_child=node.left_child,
        right_child=node.right_child,
    )


def to_dict(tree: Tree) -> dict:
    """JSON-ready representation (index sets are not serialized; use
    attach_index_sets to rebuild them from the training data)."""
    nodes = []
    for nid in sorted(tree.nodes):
        node = tree.nodes[nid]
        nodes.append(
            {
                "node_id": node.node_id,
                "depth": node.depth,
                "mean": node.mean,
                "sse": node.sse,
                "count": node.count,
                "split": node.split.to_dict() if node.split else None,
                "left_child": node.left_child,
                "right_child": node.right_child,
            }
        )
    return {
        "root_id": tree.root_id,
        "n": tree.n,
        "p": tree.p,
        "max_depth_reached": tree.max_depth_reached,
        "strategy": tree.strategy.to_dict(),
        "nodes": nodes,
    }


def from_dict(data: dict) -> Tree:
    nodes = {}
    for entry in data["nodes"]:
        nodes[int(entry["node_id"])] = TreeNode(
            node_id=int(entry["node_id"]),
            depth=int(entry["depth"]),
            mean=float(entry["mean"]),
            sse=float(entry["sse"]),
            count=int(entry["count"]),
            split=Split.from_dict(entry["split"]) if entry["split"] else None,
            left_child=entry["left_child"],
            right_child=entry["right_child"],
        )
    return Tree(
        nodes=nodes,
        root_id=int(data["root_id"]),
        n=int(data["n"]),
        p=int(data["p"]),
        max_depth_reached=int(data["max_depth_reached"]),
        strategy=SearchStrategy.from_dict(data["strategy"]),
    )


def to_json(tree: Tree) -> str:
    return json.dumps(to_dict(tree), indent=2, sort_keys=True)


def from_json(text: str) -> Tree:
    return from_dict(json.loads(text))


def attach_index_sets(tree: Tree, dataset: Dataset) -> None:
    """Recompute every node's index set by routing the training data.

    Raises if the routed counts disagree with the stored ones, which
    catches a tree paired with the wrong dataset.
    """
    if dataset.n != tree.n or dataset.p != tree.p:
        raise ValueError("dataset shape does not match the tree")
    tree.nodes[tree.root_id].index_set = root_index_set(dataset)
    order = sorted(tree.nodes.values(), key=lambda nd: (nd.depth, nd.node_id))
    for node in order:
        if node.is_leaf:
            if node.index_set is None:
                raise ValueError("unreachable node in tree")
            continue
        idx = node.index_set
        values = dataset.features[idx] @ node.split.direction.as_array()
        left_mask = values <= node.split.threshold
        left_idx = idx[left_mask]
        right_idx = idx[~left_mask]
        if (
            left_idx.size != tree.nodes[node.left_child].count
            or right_idx.size != tree.nodes[node.right_child].count
        ):
            raise ValueError("routed counts disagree with stored counts")
        tree.nodes[node.left_child].index_set = left_idx
        tree.nodes[node.right_child].index_set = right_idx


def validate_partition(tree: Tree) -> None:
    """Terminal index sets must partition [0, n)."""
    pieces = []
    for nid in tree.leaf_ids():
        idx = tree.nodes[nid].index_set
        if idx is None:
            raise ValueError("index sets not attached")
        validate_index_set(idx, tree.n)
        pieces.append(idx)
    merged = np.sort(np.concatenate(pieces))
    if merged.size != tree.n or not np.array_equal(merged, np.arange(tree.n)):
        raise ValueError("terminal index sets do not partition the sample")
