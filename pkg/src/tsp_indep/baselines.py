"""Non-adaptive product-grid independence tests: L1, log-likelihood and Pearson chi-square.

Each coordinate is cut into ``m(n) = floor(n**p_exp)`` bins and the joint
empirical measure on the product grid is compared with the product of the
X-block and Y-block marginals.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .partition import AxisCell, Dataset

__all__ = [
    "GridSpec",
    "ProductGrid",
    "GridCounts",
    "KINDS",
    "product_grid",
    "grid_counts",
    "l1_statistic",
    "loglik_statistic",
    "chi2_statistic",
    "statistic",
    "threshold_shape",
    "BaselineDecision",
    "baseline_decide",
]

log = logging.getLogger(__name__)

KINDS = ("l1", "loglik", "chi2")


@dataclass(frozen=True)
class GridSpec:
    p_exp: float = 0.2
    C: float = 1.0
    mode: str = "quantile"

    def __post_init__(self):
        if not 0 < self.p_exp < 0.5:
            raise ValueError(f"p_exp must lie in (0, 0.5), got {self.p_exp}")
        if self.C < 0:
            raise ValueError(f"C must be >= 0, got {self.C}")
        if self.mode not in ("quantile", "equal_width"):
            raise ValueError(f"unknown binning mode {self.mode!r}")

    def bins(self, n: int) -> int:
        # the epsilon keeps exact powers such as 32**0.2 from rounding down
        return max(1, math.floor(n**self.p_exp + 1e-9))


@dataclass(frozen=True, eq=False)
class ProductGrid:
    """Interior bin edges per coordinate; bins are half-open ``(e_j, e_{j+1}]``."""

    edges: tuple[np.ndarray, ...]
    p: int
    q: int

    @property
    def bins(self) -> tuple[int, ...]:
        return tuple(len(e) + 1 for e in self.edges)

    @property
    def m_x(self) -> int:
        return math.prod(self.bins[: self.p])

    @property
    def m_y(self) -> int:
        return math.prod(self.bins[self.p :])

    def bin_indices(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.column_stack(
            [np.searchsorted(e, pts[:, j], side="left") for j, e in enumerate(self.edges)]
        )

    def cells(self) -> list[AxisCell]:
        """Every grid cell as a box (only sensible for small grids)."""
        bounds = [np.concatenate(([-np.inf], e, [np.inf])) for e in self.edges]
        out = []
        for idx in itertools.product(*(range(len(b) - 1) for b in bounds)):
            lo = np.array([bounds[j][i] for j, i in enumerate(idx)])
            hi = np.array([bounds[j][i + 1] for j, i in enumerate(idx)])
            out.append(AxisCell(lo, hi))
        return out


def _quantile_edges(values: np.ndarray, m: int) -> np.ndarray:
    srt = np.sort(values)
    n = len(srt)
    ranks = [math.ceil(j * n / m - 1e-9) for j in range(1, m)]
    edges = np.unique(srt[[max(r, 1) - 1 for r in ranks]])
    # an edge at the maximum would leave an empty top bin
    return edges[edges < srt[-1]]


def product_grid(data: Dataset, m: int, mode: str = "quantile") -> ProductGrid:
    """``m`` bins per coordinate; quantile mode puts edges at the ``j/m`` empirical quantiles."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    edges = []
    for j in range(data.d):
        col = data.points[:, j]
        if m == 1:
            e = np.empty(0)
        elif mode == "quantile":
            e = _quantile_edges(col, m)
        elif mode == "equal_width":
            lo, hi = col.min(), col.max()
            e = np.unique(lo + (hi - lo) * np.arange(1, m) / m) if hi > lo else np.empty(0)
        else:
            raise ValueError(f"unknown binning mode {mode!r}")
        if len(e) + 1 < m:
            log.warning("coordinate %d: %d duplicate edges merged, %d bins left", j, m - 1 - len(e), len(e) + 1)
        edges.append(np.asarray(e, dtype=float))
    return ProductGrid(tuple(edges), data.p, data.q)


@dataclass(frozen=True, eq=False)
class GridCounts:
    """Counts on occupied grid cells plus the marginal counts of their X/Y blocks."""

    counts: np.ndarray
    x_counts: np.ndarray
    y_counts: np.ndarray
    n: int


def _block_codes(idx: np.ndarray) -> np.ndarray:
    if idx.shape[1] == 0:
        return np.zeros(len(idx), dtype=np.int64)
    return np.unique(idx, axis=0, return_inverse=True)[1].ravel()


def grid_counts(data: Dataset, grid: ProductGrid) -> GridCounts:
    idx = grid.bin_indices(data.points)
    xcode = _block_codes(idx[:, : data.p])
    ycode = _block_codes(idx[:, data.p :])
    xtot = np.bincount(xcode)
    ytot = np.bincount(ycode)
    pair = xcode * (ycode.max() + 1) + ycode
    cells, counts = np.unique(pair, return_counts=True)
    cx, cy = np.divmod(cells, ycode.max() + 1)
    return GridCounts(counts.astype(np.int64), xtot[cx].astype(np.int64), ytot[cy].astype(np.int64), data.n)


def _counts(data, grid) -> GridCounts:
    return grid if isinstance(grid, GridCounts) else grid_counts(data, grid)


def l1_statistic(data: Dataset, grid) -> float:
    """``sum |P(A) - Q(A)|`` over every grid cell, empty ones included."""
    g = _counts(data, grid)
    n2 = g.n * g.n
    prod = g.x_counts * g.y_counts
    occupied = np.sum(np.abs(g.counts * g.n - prod))
    # product mass on empty cells is exactly 1 - (product mass on occupied cells)
    empty = n2 - int(np.sum(prod))
    return float((int(occupied) + empty) / n2)


def loglik_statistic(data: Dataset, grid) -> float:
    """Plug-in divergence on the grid (nats)."""
    g = _counts(data, grid)
    ratio = (g.counts * g.n).astype(float) / (g.x_counts * g.y_counts).astype(float)
    return float(np.sum(g.counts / g.n * np.log(ratio)))


def chi2_statistic(data: Dataset, grid) -> float:
    """Pearson statistic ``n * sum (P - Q)^2 / Q`` over cells with ``Q > 0``."""
    g = _counts(data, grid)
    n2 = g.n * g.n
    prod = g.x_counts * g.y_counts
    diff = (g.counts * g.n - prod).astype(float)
    occupied = np.sum(diff * diff / prod.astype(float)) / n2
    empty = (n2 - int(np.sum(prod))) / n2
    return float(g.n * (occupied + empty))


_STATS = {"l1": l1_statistic, "loglik": loglik_statistic, "chi2": chi2_statistic}


def statistic(kind: str, data: Dataset, grid) -> float:
    try:
        return _STATS[kind](data, grid)
    except KeyError:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {KINDS}") from None


def threshold_shape(kind: str, n: int, m_x: int, m_y: int) -> float:
    """Threshold before the multiplier C.

    L1 uses ``sqrt(m_x m_y / n)``; log-likelihood and chi-square use
    ``m_x m_y / n``.  The chi-square statistic is compared after dividing by n
    so that both sides scale alike.
    """
    if kind == "l1":
        return math.sqrt(m_x * m_y / n)
    if kind in ("loglik", "chi2"):
        return m_x * m_y / n
    raise ValueError(f"unknown baseline {kind!r}")


def decision_statistic(kind: str, value: float, n: int) -> float:
    return value / n if kind == "chi2" else value


@dataclass(frozen=True)
class BaselineDecision:
    kind: str
    decision: int
    statistic: float
    threshold: float
    n: int
    p: int
    q: int
    m: int
    m_x: int
    m_y: int
    spec: GridSpec

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "p_exp": self.spec.p_exp,
            "C": self.spec.C,
            "binning": self.spec.mode,
            "m": self.m,
            "m_x": self.m_x,
            "m_y": self.m_y,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "decision": self.decision,
        }


def baseline_decide(data: Dataset, spec: GridSpec, kind: str) -> BaselineDecision:
    """Decision 1 iff the (normalised) statistic reaches ``C * threshold_shape``."""
    m = spec.bins(data.n)
    grid = product_grid(data, m, spec.mode)
    value = statistic(kind, data, grid)
    thr = spec.C * threshold_shape(kind, data.n, grid.m_x, grid.m_y)
    decision = int(decision_statistic(kind, value, data.n) >= thr) if math.isfinite(thr) else 0
    return BaselineDecision(kind, decision, value, thr, data.n, data.p, data.q, m, grid.m_x, grid.m_y, spec)
