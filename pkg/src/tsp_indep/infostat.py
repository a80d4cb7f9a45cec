"""Empirical joint/product measures on a partition and the plug-in divergence.

All logarithms here are natural.  Probabilities are carried as integer counts
so that a cell whose joint mass equals its product mass contributes exactly
zero, which matters for the tie rules in the pruner.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .partition import AxisCell, Dataset, TspTree

__all__ = [
    "AbsoluteContinuityError",
    "CellMeasures",
    "cell_counts",
    "empirical_joint",
    "empirical_product",
    "cell_measures",
    "divergence_terms",
    "restricted_divergence",
    "quantized_log_likelihood",
    "tree_node_counts",
]


class AbsoluteContinuityError(ValueError):
    """A cell has joint mass but zero product mass."""


@dataclass(frozen=True, eq=False)
class CellMeasures:
    """Per-cell counts of the joint sample and of its two marginal strips.

    ``x_counts[j]`` counts samples whose X-block falls in the X-factor of cell
    ``j`` (anywhere in Y), and symmetrically for ``y_counts``.
    """

    counts: np.ndarray
    x_counts: np.ndarray
    y_counts: np.ndarray
    n: int

    @property
    def joint_prob(self) -> np.ndarray:
        return self.counts / self.n

    @property
    def product_prob(self) -> np.ndarray:
        return (self.x_counts / self.n) * (self.y_counts / self.n)

    def to_csv(self, path, leaf_ids: Sequence[int] | None = None) -> None:
        ids = range(len(self.counts)) if leaf_ids is None else leaf_ids
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["leaf_id", "count", "p_joint", "q_product"])
            for i, c, pj, qp in zip(ids, self.counts, self.joint_prob, self.product_prob):
                w.writerow([i, int(c), repr(float(pj)), repr(float(qp))])


def _as_cells(cells) -> list[AxisCell]:
    return list(cells.cells()) if hasattr(cells, "cells") else list(cells)


def cell_counts(data: Dataset, cells) -> CellMeasures:
    """Count joint and marginal-strip memberships by direct box tests."""
    cells = _as_cells(cells)
    p, d = data.p, data.d
    counts = np.empty(len(cells), dtype=np.int64)
    xc = np.empty_like(counts)
    yc = np.empty_like(counts)
    x, y = data.x, data.y
    for j, cell in enumerate(cells):
        if cell.d != d:
            raise ValueError(f"cell {j} has dimension {cell.d}, data has {d}")
        in_x = cell.block(0, p).contains(x)
        in_y = cell.block(p, d).contains(y)
        counts[j] = np.count_nonzero(in_x & in_y)
        xc[j] = np.count_nonzero(in_x)
        yc[j] = np.count_nonzero(in_y)
    return CellMeasures(counts, xc, yc, data.n)


def empirical_joint(data: Dataset, cells) -> np.ndarray:
    return cell_counts(data, cells).joint_prob


def empirical_product(data: Dataset, cells) -> np.ndarray:
    return cell_counts(data, cells).product_prob


cell_measures = cell_counts


def divergence_terms(counts, x_counts, y_counts, n: int) -> np.ndarray:
    """``P(A) ln(P(A)/Q(A))`` per cell, with ``0 ln 0 = 0``."""
    c = np.asarray(counts, dtype=np.int64)
    denom = np.asarray(x_counts, dtype=np.int64) * np.asarray(y_counts, dtype=np.int64)
    occupied = c > 0
    if np.any(occupied & (denom == 0)):
        bad = np.flatnonzero(occupied & (denom == 0))
        raise AbsoluteContinuityError(f"cells {bad.tolist()} have mass but zero product mass")
    out = np.zeros(c.shape, dtype=float)
    # c*n and x*y are exact integers below 2**53, so equal masses give log(1.0) == 0
    ratio = (c[occupied] * n).astype(float) / denom[occupied].astype(float)
    out[occupied] = (c[occupied] / n) * np.log(ratio)
    return out


def restricted_divergence(measures: CellMeasures) -> float:
    """Plug-in divergence of the joint from the product measure over the cells (nats)."""
    terms = divergence_terms(measures.counts, measures.x_counts, measures.y_counts, measures.n)
    return float(np.sum(terms))


def quantized_log_likelihood(data: Dataset, cells) -> float:
    """Average per-sample log ratio of the quantized joint to product pmf (nats).

    Each sample is mapped to the index of its cell first; the result agrees with
    :func:`restricted_divergence` on the same cells up to summation order.
    """
    cells = _as_cells(cells)
    m = cell_counts(data, cells)
    labels = np.full(data.n, -1, dtype=np.int64)
    for j, cell in enumerate(cells):
        labels[cell.contains(data.points)] = j
    if np.any(labels < 0):
        raise ValueError("cells do not cover every sample")
    c = m.counts[labels]
    denom = (m.x_counts[labels] * m.y_counts[labels]).astype(float)
    if np.any(denom == 0):
        raise AbsoluteContinuityError("sample falls in a cell with zero product mass")
    return float(np.mean(np.log((c * data.n).astype(float) / denom)))


def tree_node_counts(data: Dataset, tree: TspTree) -> CellMeasures:
    """Joint and marginal-strip counts for every node of ``tree`` (indexed by id).

    The X-strip of a child equals its parent's unless the split coordinate lies
    in the X-block, in which case the parent's strip is filtered by the cut.
    The same holds for Y.  This avoids a full data pass per node.
    """
    pts = data.points
    p = data.p
    k = len(tree.nodes)
    counts = np.empty(k, dtype=np.int64)
    xc = np.empty(k, dtype=np.int64)
    yc = np.empty(k, dtype=np.int64)
    all_rows = np.arange(data.n)
    stack = [(tree.root, all_rows, all_rows)]
    while stack:
        nid, xrows, yrows = stack.pop()
        node = tree.nodes[nid]
        counts[nid] = node.member_count
        xc[nid] = len(xrows)
        yc[nid] = len(yrows)
        if node.is_leaf:
            continue
        c, thr = node.split_coord, node.split_threshold
        if c < p:
            go = pts[xrows, c] <= thr
            stack.append((node.left, xrows[go], yrows))
            stack.append((node.right, xrows[~go], yrows))
        else:
            go = pts[yrows, c] <= thr
            stack.append((node.left, xrows, yrows[go]))
            stack.append((node.right, xrows, yrows[~go]))
    return CellMeasures(counts, xc, yc, data.n)
