"""Tree-structured partitions grown by statistically equivalent median splits.

The grower cuts each cell at the median of one coordinate, cycling through the
coordinates by depth, and stops when a child would hold fewer than
``ceil(b * n)`` samples.  Every cell is an axis-aligned box with half-open
intervals ``(lower, upper]`` so the leaves of any pruned subtree partition
``R^d`` and factor as an X-block box times a Y-block box.
"""

from __future__ import annotations

import csv
import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Dataset",
    "AxisCell",
    "TspNode",
    "TspTree",
    "SplitRefused",
    "DegenerateSplit",
    "median_split",
    "min_cell_count",
    "grow_full_tree",
    "locate",
]


class SplitRefused(ValueError):
    """A cell cannot be split (too few points)."""


class DegenerateSplit(SplitRefused):
    """The median cut along this coordinate would leave one side empty."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """n samples of ``(X, Y)`` stored row-wise; the first ``p`` columns are X."""

    points: np.ndarray
    p: int
    q: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array")
        if self.p < 1 or self.q < 1:
            raise ValueError(f"p and q must be >= 1, got p={self.p}, q={self.q}")
        if pts.shape[1] != self.p + self.q:
            raise ValueError(
                f"points have {pts.shape[1]} columns but p + q = {self.p + self.q}"
            )
        if pts.shape[0] < 1:
            raise ValueError("dataset must contain at least one sample")
        if not np.all(np.isfinite(pts)):
            raise ValueError("all coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.p + self.q

    @property
    def x(self) -> np.ndarray:
        return self.points[:, : self.p]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, self.p :]

    def prefix(self, n: int) -> "Dataset":
        """First ``n`` samples, as used along one growing sample path."""
        if not 1 <= n <= self.n:
            raise ValueError(f"prefix length {n} outside [1, {self.n}]")
        return Dataset(self.points[:n], self.p, self.q)

    @classmethod
    def from_csv(cls, path: str | Path, p: int, q: int) -> "Dataset":
        """Read one sample per row; a non-numeric first row is taken as a header."""
        rows = []
        with open(path, newline="") as fh:
            for i, row in enumerate(csv.reader(fh)):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError:
                    if i == 0 or not rows:
                        continue  # header
                    raise ValueError(f"{path}: non-numeric value on line {i + 1}")
        if not rows:
            raise ValueError(f"{path}: no data rows")
        return cls(np.asarray(rows, dtype=float), p, q)

    def to_csv(self, path: str | Path, header: bool = True) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if header:
                names = [f"x{i + 1}" for i in range(self.p)]
                names += [f"y{j + 1}" for j in range(self.q)]
                writer.writerow(names)
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])


@dataclass(frozen=True, eq=False)
class AxisCell:
    """Product of half-open intervals ``(lower[j], upper[j]]``."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def whole_space(cls, d: int) -> "AxisCell":
        return cls(np.full(d, -np.inf), np.full(d, np.inf))

    @property
    def d(self) -> int:
        return len(self.lower)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts > self.lower) & (pts <= self.upper), axis=1)

    def block(self, start: int, stop: int) -> "AxisCell":
        """Restriction to coordinates ``start:stop`` (e.g. the X or Y factor)."""
        return AxisCell(self.lower[start:stop], self.upper[start:stop])

    def split(self, coord: int, threshold: float) -> tuple["AxisCell", "AxisCell"]:
        lo_up = self.upper.copy()
        lo_up[coord] = threshold
        hi_lo = self.lower.copy()
        hi_lo[coord] = threshold
        return AxisCell(self.lower, lo_up), AxisCell(hi_lo, self.upper)

    def to_list(self) -> list[list[float | None]]:
        def enc(v):
            return None if np.isinf(v) else float(v)

        return [[enc(lo), enc(hi)] for lo, hi in zip(self.lower, self.upper)]

    @classmethod
    def from_list(cls, bounds) -> "AxisCell":
        lo = [-np.inf if a is None else a for a, _ in bounds]
        hi = [np.inf if b is None else b for _, b in bounds]
        return cls(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))


@dataclass(eq=False)
class TspNode:
    id: int
    cell: AxisCell
    member_indices: np.ndarray
    depth: int = 0
    split_coord: int | None = None
    split_threshold: float | None = None
    left: int | None = None
    right: int | None = None

    @property
    def member_count(self) -> int:
        return len(self.member_indices)

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(eq=False)
class TspTree:
    """Full tree; node ids are assigned breadth-first, the root is 0."""

    nodes: list[TspNode]
    n: int
    b: float
    p: int
    q: int
    root: int = 0
    _leaf_ids: tuple[int, ...] | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.p + self.q

    def __getitem__(self, node_id: int) -> TspNode:
        return self.nodes[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    def leaf_ids(self) -> tuple[int, ...]:
        if self._leaf_ids is None:
            self._leaf_ids = tuple(nd.id for nd in self.nodes if nd.is_leaf)
        return self._leaf_ids

    @property
    def leaf_count(self) -> int:
        return len(self.leaf_ids())

    def locate(self, point: Sequence[float]) -> int:
        return locate(self, point)

    def locate_many(self, points: np.ndarray, frontier: Iterable[int] | None = None) -> np.ndarray:
        """Vectorised descent; stops at ``frontier`` nodes if given (a pruned subtree)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        stop = None if frontier is None else set(frontier)
        out = np.empty(len(pts), dtype=np.int64)
        stack = [(self.root, np.arange(len(pts)))]
        while stack:
            nid, rows = stack.pop()
            node = self.nodes[nid]
            if node.is_leaf or (stop is not None and nid in stop):
                out[rows] = nid
                continue
            go_left = pts[rows, node.split_coord] <= node.split_threshold
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "b": self.b,
            "p": self.p,
            "q": self.q,
            "root": self.root,
            "nodes": [
                {
                    "id": nd.id,
                    "depth": nd.depth,
                    "bounds": nd.cell.to_list(),
                    "count": nd.member_count,
                    "split": None
                    if nd.is_leaf
                    else {"coord": nd.split_coord, "threshold": nd.split_threshold},
                    "children": None if nd.is_leaf else [nd.left, nd.right],
                }
                for nd in self.nodes
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, doc: dict, data: Dataset | None = None) -> "TspTree":
        """Rebuild a tree; member indices are recomputed when ``data`` is given."""
        nodes = []
        for rec in doc["nodes"]:
            split = rec.get("split")
            children = rec.get("children")
            nodes.append(
                TspNode(
                    id=rec["id"],
                    cell=AxisCell.from_list(rec["bounds"]),
                    member_indices=np.empty(0, dtype=np.int64),
                    depth=rec.get("depth", 0),
                    split_coord=None if split is None else split["coord"],
                    split_threshold=None if split is None else split["threshold"],
                    left=None if children is None else children[0],
                    right=None if children is None else children[1],
                )
            )
        tree = cls(nodes, doc["n"], doc["b"], doc["p"], doc["q"], doc.get("root", 0))
        if data is not None:
            for nd in nodes:
                nd.member_indices = np.flatnonzero(nd.cell.contains(data.points))
        return tree


def min_cell_count(b: float, n: int) -> int:
    """``ceil(b * n)`` with a guard against round-off pushing exact products up."""
    return max(1, math.ceil(b * n - 1e-9))


def median_split(values: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Cut ``values`` at their ``ceil(m/2)``-th order statistic.

    Returns the threshold and the positions going left (``<= threshold``) and
    right.  Raises :class:`SplitRefused` for fewer than two values and
    :class:`DegenerateSplit` when the right side would be empty, which covers
    the all-identical case.
    """
    values = np.asarray(values, dtype=float)
    m = len(values)
    if m < 2:
        raise SplitRefused(f"cannot split {m} value(s)")
    k = (m + 1) // 2
    threshold = float(np.partition(values, k - 1)[k - 1])
    go_left = values <= threshold
    if go_left.all():
        raise DegenerateSplit(f"no value exceeds the median {threshold!r}")
    return threshold, np.flatnonzero(go_left), np.flatnonzero(~go_left)


def grow_full_tree(data: Dataset, b: float) -> TspTree:
    """Grow the full TSP breadth-first with probability floor ``b``.

    The split coordinate at depth ``t`` is ``t mod d``; a degenerate coordinate
    is skipped in favour of the next one, and a split is refused unless both
    children keep at least ``ceil(b * n)`` samples.
    """
    if not 0.0 < b < 1.0:
        raise ValueError(f"b must lie in (0, 1), got {b}")
    pts = data.points
    n, d = pts.shape
    floor = min_cell_count(b, n)

    root = TspNode(0, AxisCell.whole_space(d), np.arange(n), depth=0)
    nodes = [root]
    queue = deque([root])
    while queue:
        node = queue.popleft()
        if node.member_count < 2 * floor:
            continue
        for offset in range(d):
            coord = (node.depth + offset) % d
            try:
                thr, left_pos, right_pos = median_split(pts[node.member_indices, coord])
            except DegenerateSplit:
                continue
            if len(left_pos) >= floor and len(right_pos) >= floor:
                lcell, rcell = node.cell.split(coord, thr)
                left = TspNode(len(nodes), lcell, node.member_indices[left_pos], node.depth + 1)
                right = TspNode(len(nodes) + 1, rcell, node.member_indices[right_pos], node.depth + 1)
                nodes.extend((left, right))
                node.split_coord, node.split_threshold = coord, thr
                node.left, node.right = left.id, right.id
                queue.extend((left, right))
            break
    return TspTree(nodes, n, b, data.p, data.q)


def locate(tree: TspTree, point: Sequence[float]) -> int:
    """Id of the leaf whose cell contains ``point`` (ties at a threshold go left)."""
    node = tree.nodes[tree.root]
    while not node.is_leaf:
        node = tree.nodes[node.left if point[node.split_coord] <= node.split_threshold else node.right]
    return node.id
