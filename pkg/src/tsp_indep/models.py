"""Synthetic scenarios with known dependence, analytic Gaussian MI and regret diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy import integrate, special

from .infostat import cell_counts, restricted_divergence
from .partition import AxisCell, Dataset

__all__ = [
    "KINDS",
    "GENERATOR",
    "ModelConfig",
    "sample",
    "null_model",
    "gaussian_mi",
    "gaussian_mi_nats",
    "sigma_for_target_mi",
    "oracle_statistic",
    "bivariate_normal_rect",
    "RegretTerms",
    "regret_report",
]

KINDS = ("gaussian", "gaussian_multi", "student_t", "rotated_mixture")
GENERATOR = "numpy.PCG64"
STUDENT_T_CONSTRUCTION = "student_t_elliptical"

MIXTURE_MEANS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
MIXTURE_VAR = 0.05
TAIL_CLIP = 10.0


@dataclass(frozen=True)
class ModelConfig:
    """One synthetic scenario.

    ``pairs`` is the number of (X_i, Y_i) coordinate pairs, so ``p = q = pairs``;
    ``sigma`` is the within-pair correlation.  ``target_mi`` (bits), when set
    for a Gaussian kind, overrides ``sigma`` via :func:`sigma_for_target_mi`.
    """

    kind: str = "gaussian"
    sigma: float = 0.0
    pairs: int = 1
    dof: float = 2.0
    theta: float = 0.0
    target_mi: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if self.target_mi is not None:
            if self.target_mi < 0:
                raise ValueError("target_mi must be >= 0")
            object.__setattr__(self, "sigma", sigma_for_target_mi(self.target_mi, self.pairs))
        if not abs(self.sigma) < 1:
            raise ValueError(f"|sigma| must be < 1, got {self.sigma}")
        if self.pairs < 1:
            raise ValueError("pairs must be >= 1")
        if self.kind in ("gaussian", "rotated_mixture") and self.pairs != 1:
            raise ValueError(f"{self.kind} is bivariate; pairs must be 1")
        if self.dof < 1:
            raise ValueError("dof must be >= 1")
        if not 0 <= self.theta <= math.pi / 4 + 1e-12:
            raise ValueError("theta must lie in [0, pi/4]")

    @property
    def p(self) -> int:
        return self.pairs

    @property
    def q(self) -> int:
        return self.pairs

    @property
    def is_null(self) -> bool:
        return self.theta == 0.0 if self.kind == "rotated_mixture" else self.sigma == 0.0

    def to_dict(self) -> dict:
        doc = asdict(self)
        if self.kind == "student_t":
            doc["construction"] = STUDENT_T_CONSTRUCTION
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelConfig":
        doc = {k: v for k, v in doc.items() if k != "construction"}
        return cls(**doc)


def null_model(model: ModelConfig) -> ModelConfig:
    """Independent counterpart of ``model`` (zero correlation, or no rotation)."""
    if model.kind == "rotated_mixture":
        return replace(model, theta=0.0)
    return replace(model, sigma=0.0, target_mi=None)


def _correlated_normals(rng, n, pairs, sigma):
    z = rng.standard_normal((n, 2 * pairs))
    x = z[:, :pairs]
    y = sigma * x + math.sqrt(1.0 - sigma * sigma) * z[:, pairs:]
    return x, y


def sample(model: ModelConfig, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. samples; ``seed`` is anything ``numpy.random.default_rng`` accepts.

    Student-t uses the elliptical construction (correlated normals divided by
    one shared ``sqrt(chi2_dof / dof)``).  That shared scale makes X and Y
    dependent even at zero correlation, so ``sigma == 0`` draws the X and Y
    blocks with separate scales, i.e. the product of the two marginal laws.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    k = model.pairs
    if model.kind in ("gaussian", "gaussian_multi"):
        x, y = _correlated_normals(rng, n, k, model.sigma)
        pts = np.hstack([x, y])
    elif model.kind == "student_t":
        x, y = _correlated_normals(rng, n, k, model.sigma)
        if model.sigma == 0.0:
            sx = np.sqrt(rng.chisquare(model.dof, n) / model.dof)
            sy = np.sqrt(rng.chisquare(model.dof, n) / model.dof)
            pts = np.hstack([x / sx[:, None], y / sy[:, None]])
        else:
            s = np.sqrt(rng.chisquare(model.dof, n) / model.dof)
            pts = np.hstack([x, y]) / s[:, None]
    else:
        comp = rng.integers(0, 4, n)
        pts = MIXTURE_MEANS[comp] + math.sqrt(MIXTURE_VAR) * rng.standard_normal((n, 2))
        c, s = math.cos(model.theta), math.sin(model.theta)
        pts = pts @ np.array([[c, s], [-s, c]])  # counter-clockwise rotation of row vectors
    return Dataset(pts, k, k)


def gaussian_mi_nats(sigma: float, pairs: int = 1) -> float:
    if not abs(sigma) < 1:
        raise ValueError(f"|sigma| must be < 1, got {sigma}")
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    return -0.5 * pairs * math.log1p(-sigma * sigma)


def gaussian_mi(sigma: float, pairs: int = 1) -> float:
    """Mutual information in bits of ``pairs`` independent pairs with correlation ``sigma``."""
    return gaussian_mi_nats(sigma, pairs) / math.log(2.0)


def sigma_for_target_mi(target_bits: float, pairs: int = 1) -> float:
    """Per-pair correlation giving ``target_bits`` of total mutual information."""
    if target_bits < 0:
        raise ValueError("target must be >= 0")
    return math.sqrt(-math.expm1(-2.0 * target_bits / pairs * math.log(2.0)))


def _require_gaussian(model: ModelConfig) -> None:
    if model.kind not in ("gaussian", "gaussian_multi"):
        raise NotImplementedError(f"oracle quantities need a Gaussian model, got {model.kind!r}")


def oracle_statistic(data: Dataset, model: ModelConfig) -> float:
    """Sample mean of the true log density ratio ``ln dP/dQ*`` (nats)."""
    _require_gaussian(model)
    if data.p != model.pairs or data.q != model.pairs:
        raise ValueError("data shape does not match the model's pairs")
    r = model.sigma
    if r == 0.0:
        return 0.0
    x, y = data.x, data.y
    quad = (r * r * (x * x + y * y) - 2.0 * r * x * y) / (2.0 * (1.0 - r * r))
    per_sample = np.sum(-0.5 * math.log1p(-r * r) - quad, axis=1)
    return float(np.mean(per_sample))


def _clip(v: float) -> float:
    return min(max(v, -TAIL_CLIP), TAIL_CLIP)


def _ndtr_interval(a: float, b: float) -> float:
    return float(special.ndtr(b) - special.ndtr(a))


def bivariate_normal_rect(x0, x1, y0, y1, rho: float, tol: float = 1e-12) -> float:
    """``P(x0 < X <= x1, y0 < Y <= y1)`` for standard normals with correlation ``rho``.

    Integrates ``phi(x) * P(y0 < Y <= y1 | X = x)`` over x; infinite limits are
    clipped at +-10 standard deviations.
    """
    a, b = _clip(x0), _clip(x1)
    if b <= a:
        return 0.0
    if rho == 0.0:
        return _ndtr_interval(x0, x1) * _ndtr_interval(y0, y1)
    s = math.sqrt(1.0 - rho * rho)

    def f(x):
        return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * _ndtr_interval((y0 - rho * x) / s, (y1 - rho * x) / s)

    val, _ = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=200, points=[0.0] if a < 0 < b else None)
    return val


class RegretTerms(NamedTuple):
    """Regret split into sampling (I), approximation (II) and estimation (III) parts, nats."""

    term_I: float
    term_II: float
    term_III: float
    oracle_statistic: float
    empirical_statistic: float
    true_divergence: float
    mutual_information: float


def _true_cell_masses(cell: AxisCell, model: ModelConfig) -> tuple[float, float]:
    k = model.pairs
    joint, prod = 1.0, 1.0
    for i in range(k):
        xl, xu = cell.lower[i], cell.upper[i]
        yl, yu = cell.lower[k + i], cell.upper[k + i]
        joint *= bivariate_normal_rect(xl, xu, yl, yu, model.sigma)
        prod *= _ndtr_interval(xl, xu) * _ndtr_interval(yl, yu)
    return joint, prod


def regret_report(data: Dataset, cells, model: ModelConfig) -> RegretTerms:
    """Decompose ``oracle_statistic - empirical_statistic`` over the given cells.

    ``term_I = i_n - I``, ``term_II = I - D_pi(P||Q*)`` and
    ``term_III = D_pi(P||Q*) - D_pi(P_n||Q_n*)``, so the three add up to the
    regret exactly; the true masses come from quadrature.
    """
    _require_gaussian(model)
    cells = list(cells.cells()) if hasattr(cells, "cells") else list(cells)
    i_n = oracle_statistic(data, model)
    mi = gaussian_mi_nats(model.sigma, model.pairs)
    emp = restricted_divergence(cell_counts(data, cells))
    true_div = 0.0
    if len(cells) > 1 and model.sigma != 0.0:
        for j, cell in enumerate(cells):
            pj, qj = _true_cell_masses(cell, model)
            if pj <= 0.0:
                continue
            if qj <= 0.0:
                raise ArithmeticError(f"cell {j}: product mass underflowed to 0")
            true_div += pj * math.log(pj / qj)
    return RegretTerms(i_n - mi, mi - true_div, true_div - emp, i_n, emp, true_div, mi)
