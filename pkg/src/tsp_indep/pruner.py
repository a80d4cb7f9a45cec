"""Greedy embedded family of maximum-information pruned trees and its penalised selection."""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np

from .infostat import CellMeasures, cell_counts, divergence_terms, restricted_divergence, tree_node_counts
from .partition import AxisCell, Dataset, TspTree
from .regularizer import penalty_r

__all__ = [
    "LeafSet",
    "EmbeddedFamily",
    "embedded_family",
    "select_regularized",
    "pruned_subtrees",
    "brute_force_best_of_size",
    "exact_best_by_size",
    "BRUTE_FORCE_MAX_LEAVES",
]

BRUTE_FORCE_MAX_LEAVES = 10


@dataclass(frozen=True, eq=False)
class LeafSet:
    """Leaf frontier of a pruned subtree sharing the full tree's root."""

    tree: TspTree
    leaf_ids: tuple[int, ...]
    divergence: float

    @property
    def size(self) -> int:
        return len(self.leaf_ids)

    def cells(self) -> list[AxisCell]:
        return [self.tree.nodes[i].cell for i in self.leaf_ids]

    def locate_many(self, points: np.ndarray) -> np.ndarray:
        return self.tree.locate_many(points, frontier=self.leaf_ids)


@dataclass(eq=False)
class EmbeddedFamily:
    """Nested leaf sets of sizes 1..K; member ``k`` expands ``expansions[k-2]``."""

    tree: TspTree
    expansions: list[int]
    divergences: np.ndarray
    node_counts: CellMeasures = field(repr=False)

    def __len__(self) -> int:
        return len(self.divergences)

    @cached_property
    def _frontiers(self) -> list[tuple[int, ...]]:
        frontier = {self.tree.root}
        out = [(self.tree.root,)]
        for v in self.expansions:
            node = self.tree.nodes[v]
            frontier.remove(v)
            frontier.update((node.left, node.right))
            out.append(tuple(sorted(frontier)))
        return out

    def member(self, k: int) -> LeafSet:
        """Leaf set of size ``k`` (1-based)."""
        if not 1 <= k <= len(self):
            raise IndexError(f"family has sizes 1..{len(self)}, asked for {k}")
        return LeafSet(self.tree, self._frontiers[k - 1], float(self.divergences[k - 1]))

    def __iter__(self) -> Iterator[LeafSet]:
        return (self.member(k) for k in range(1, len(self) + 1))

    def objectives(self, n, b, delta, alpha) -> tuple[np.ndarray, np.ndarray]:
        pens = np.array([penalty_r(n, b, self.tree.d, delta, k) for k in range(1, len(self) + 1)])
        return pens, self.divergences - alpha * pens

    def to_csv(self, path, n, b, delta, alpha) -> None:
        pens, obj = self.objectives(n, b, delta, alpha)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "divergence_nats", "penalty", "objective"])
            for k, (dv, pe, ob) in enumerate(zip(self.divergences, pens, obj), start=1):
                w.writerow([k, repr(float(dv)), repr(float(pe)), repr(float(ob))])


def embedded_family(data: Dataset, tree: TspTree, node_counts: CellMeasures | None = None) -> EmbeddedFamily:
    """Grow the pruned subtree one split at a time, always taking the split
    that maximises the resulting divergence.

    Only the expanded leaf's term changes at each step, so candidates are
    ranked by their gain ``term(left) + term(right) - term(v)`` in a heap.
    Equal gains go to the smaller node id.
    """
    if node_counts is None:
        node_counts = tree_node_counts(data, tree)
    terms = divergence_terms(node_counts.counts, node_counts.x_counts, node_counts.y_counts, data.n)
    nodes = tree.nodes

    def gain(v: int) -> float:
        nd = nodes[v]
        return terms[nd.left] + terms[nd.right] - terms[v]

    heap: list[tuple[float, int]] = []
    if not nodes[tree.root].is_leaf:
        heap.append((-gain(tree.root), tree.root))
    expansions: list[int] = []
    divs = [float(terms[tree.root])]
    while heap:
        neg_gain, v = heapq.heappop(heap)
        expansions.append(v)
        divs.append(divs[-1] - neg_gain)
        for child in (nodes[v].left, nodes[v].right):
            if not nodes[child].is_leaf:
                heapq.heappush(heap, (-gain(child), child))
    return EmbeddedFamily(tree, expansions, np.asarray(divs), node_counts)


def select_regularized(
    family: EmbeddedFamily,
    n: int | None = None,
    b: float | None = None,
    delta: float = 0.1,
    alpha: float = 1.0,
) -> tuple[LeafSet, float]:
    """Member maximising ``D_k - alpha * penalty_r(k)``; ties go to the smaller k."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    n = family.tree.n if n is None else n
    b = family.tree.b if b is None else b
    _, obj = family.objectives(n, b, delta, alpha)
    k = int(np.argmax(obj)) + 1  # argmax returns the first maximiser
    return family.member(k), float(obj[k - 1])


def pruned_subtrees(tree: TspTree, node_id: int | None = None) -> list[tuple[int, ...]]:
    """Every leaf frontier of a pruned subtree rooted at ``node_id``."""
    v = tree.root if node_id is None else node_id
    node = tree.nodes[v]
    out = [(v,)]
    if not node.is_leaf:
        for lf in pruned_subtrees(tree, node.left):
            for rf in pruned_subtrees(tree, node.right):
                out.append(lf + rf)
    return out


def exact_best_by_size(data: Dataset, tree: TspTree, node_counts: CellMeasures | None = None) -> np.ndarray:
    """Largest divergence attainable by any pruned subtree of each size 1..K.

    Tree knapsack over leaf budgets, ``O(K^2)``.  Diagnostic for the greedy
    family, which can fall short of these values when the best tree of one
    size is not nested inside the best tree of the next.
    """
    if node_counts is None:
        node_counts = tree_node_counts(data, tree)
    terms = divergence_terms(node_counts.counts, node_counts.x_counts, node_counts.y_counts, data.n)
    best: dict[int, np.ndarray] = {}
    for node in reversed(tree.nodes):  # children always have larger ids
        if node.is_leaf:
            best[node.id] = np.array([terms[node.id]])
            continue
        bl, br = best.pop(node.left), best.pop(node.right)
        combo = np.full(len(bl) + len(br), -np.inf)
        combo[0] = terms[node.id]
        for i, vl in enumerate(bl):
            # sizes (i+1) + (j+1) occupy combo index i+j+1
            np.maximum(combo[i + 1 : i + 1 + len(br)], vl + br, out=combo[i + 1 : i + 1 + len(br)])
        best[node.id] = combo
    return best[tree.root]


def brute_force_best_of_size(data: Dataset, tree: TspTree, k: int) -> tuple[LeafSet, float]:
    """Exhaustive maximiser of the divergence over pruned subtrees with ``k`` leaves.

    Test oracle only: every candidate is rescored from scratch by box counting.
    """
    if tree.leaf_count > BRUTE_FORCE_MAX_LEAVES:
        raise ValueError(
            f"brute force limited to {BRUTE_FORCE_MAX_LEAVES} leaves, tree has {tree.leaf_count}"
        )
    best = None
    for frontier in pruned_subtrees(tree):
        if len(frontier) != k:
            continue
        ids = tuple(sorted(frontier))
        dv = restricted_divergence(cell_counts(data, [tree.nodes[i].cell for i in ids]))
        if best is None or dv > best[1] or (dv == best[1] and ids < best[0]):
            best = (ids, dv)
    if best is None:
        raise ValueError(f"no pruned subtree has {k} leaves")
    return LeafSet(tree, best[0], best[1]), best[1]
