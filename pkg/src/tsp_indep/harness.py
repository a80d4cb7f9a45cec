"""Monte-Carlo detection times, sampling complexities and trade-off sweeps.

One trial draws a single sample path of length ``N_max`` and evaluates every
method on its prefixes at the grid sizes, so within a trial the datasets are
nested and all methods and parameter values see the same draws.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .baselines import GridSpec, decision_statistic, product_grid, statistic, threshold_shape
from .independence import Schedule, decide_independence, fit_tsp
from .models import ModelConfig, null_model, sample

__all__ = [
    "CENSORED",
    "size_grid",
    "trial_seed",
    "TspMethod",
    "BaselineMethod",
    "DetectionRecord",
    "detection_time",
    "run_trials",
    "detection_times",
    "sampling_complexity",
    "detection_pmf",
    "TradeoffCurve",
    "tradeoff_curves",
    "tradeoff_sweep",
    "heuristic_w",
    "SignificanceEstimate",
    "significance_estimate",
    "default_jobs",
]

CENSORED = math.inf
HYPOTHESES = ("H0", "H1")


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TSP_INDEP_JOBS", "1")))
    except ValueError:
        return 1


def size_grid(n_max: int = 100_000, n_min: int = 10, per_decade: int = 30) -> np.ndarray:
    """Log-spaced integer sample sizes from ``n_min`` to ``n_max`` inclusive."""
    if not 1 <= n_min <= n_max:
        raise ValueError("need 1 <= n_min <= n_max")
    steps = max(1, math.ceil(per_decade * math.log10(n_max / n_min) - 1e-9))
    raw = np.round(n_min * (n_max / n_min) ** (np.arange(steps + 1) / steps)).astype(np.int64)
    grid = np.unique(raw)
    grid[-1] = n_max
    return grid


def trial_seed(master_seed: int, trial: int, hypothesis: str = "H1") -> int:
    """64-bit seed for one trial, derived from the master seed and the trial index."""
    code = HYPOTHESES.index(hypothesis)
    return int(np.random.SeedSequence([master_seed, trial, code]).generate_state(1, np.uint64)[0])


class Method(Protocol):
    name: str

    @property
    def params(self) -> Sequence[float]: ...

    def decisions(self, path, grid: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class TspMethod:
    """The TSP test at several regularisation multipliers sharing one fit per size."""

    schedule: Schedule
    alphas: tuple[float, ...]
    name: str = "tsp"

    @property
    def params(self) -> tuple[float, ...]:
        return self.alphas

    def decisions(self, path, grid) -> np.ndarray:
        out = np.zeros((len(self.alphas), len(grid)), dtype=np.uint8)
        for g, n in enumerate(grid):
            fit = fit_tsp(path.prefix(int(n)), self.schedule)
            sizes, divs = fit.selected_sizes(self.alphas)
            out[:, g] = (sizes > 1) & (divs >= fit.values.a)
        return out


@dataclass(frozen=True)
class BaselineMethod:
    """A product-grid test at several threshold multipliers C."""

    kind: str
    p_exp: float
    Cs: tuple[float, ...]
    mode: str = "quantile"

    @property
    def name(self) -> str:
        return self.kind

    @property
    def params(self) -> tuple[float, ...]:
        return self.Cs

    def decisions(self, path, grid) -> np.ndarray:
        spec = GridSpec(self.p_exp, 1.0, self.mode)
        cs = np.asarray(self.Cs, dtype=float)
        out = np.zeros((len(cs), len(grid)), dtype=np.uint8)
        for g, n in enumerate(grid):
            data = path.prefix(int(n))
            pg = product_grid(data, spec.bins(data.n), self.mode)
            value = decision_statistic(self.kind, statistic(self.kind, data, pg), data.n)
            out[:, g] = value >= cs * threshold_shape(self.kind, data.n, pg.m_x, pg.m_y)
        return out


@dataclass(frozen=True)
class DetectionRecord:
    """Decisions of one trial along the grid and the last wrong sample size."""

    trial: int
    seed: int
    hypothesis: str
    decisions: tuple[int, ...]
    t_tilde: int
    censored: bool
    method: str = "tsp"
    param: float = float("nan")
    grid: tuple[int, ...] = field(default=(), repr=False, compare=False)

    def packed(self) -> str:
        return "".join(str(int(v)) for v in self.decisions)


def detection_time(decisions: Sequence[int], grid: Sequence[int], hypothesis: str) -> tuple[int, bool]:
    """Largest grid size with the wrong decision (0 if none) and whether it is the last."""
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}")
    wrong_value = 1 if hypothesis == "H0" else 0
    wrong = np.flatnonzero(np.asarray(decisions) == wrong_value)
    if len(wrong) == 0:
        return 0, False
    last = int(wrong[-1])
    return int(grid[last]), last == len(grid) - 1


def _run_trial(args):
    model, methods, grid, seed = args
    path = sample(model, int(grid[-1]), seed)
    return [m.decisions(path, grid) for m in methods]


def run_trials(
    model: ModelConfig,
    methods: Sequence[Method],
    grid: np.ndarray,
    trials: int,
    master_seed: int,
    hypothesis: str,
    jobs: int = 1,
) -> dict[tuple[str, float], list[DetectionRecord]]:
    """Detection records for every (method, parameter), keyed by ``(method.name, param)``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    grid = np.asarray(grid, dtype=np.int64)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    seeds = [trial_seed(master_seed, t, hypothesis) for t in range(trials)]
    tasks = [(model, tuple(methods), grid, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_trial, tasks, chunksize=max(1, trials // (4 * jobs))))
    else:
        results = [_run_trial(t) for t in tasks]

    grid_t = tuple(int(v) for v in grid)
    out: dict[tuple[str, float], list[DetectionRecord]] = {}
    for t, (seed, per_method) in enumerate(zip(seeds, results)):
        for method, mat in zip(methods, per_method):
            for param, row in zip(method.params, mat):
                tt, cens = detection_time(row, grid_t, hypothesis)
                rec = DetectionRecord(t, seed, hypothesis, tuple(int(v) for v in row), tt, cens,
                                      method.name, float(param), grid_t)
                out.setdefault((method.name, float(param)), []).append(rec)
    return out


def detection_times(
    model: ModelConfig,
    schedule: Schedule,
    grid: np.ndarray,
    trials: int,
    master_seed: int,
    hypothesis: str,
    jobs: int = 1,
) -> list[DetectionRecord]:
    method = TspMethod(schedule, (schedule.alpha,))
    res = run_trials(model, [method], grid, trials, master_seed, hypothesis, jobs)
    return res[("tsp", float(schedule.alpha))]


def sampling_complexity(records: Sequence[DetectionRecord], eps: float, grid: Sequence[int] | None = None):
    """Smallest grid size m with ``P(T <= m) >= 1 - eps``; :data:`CENSORED` if none.

    Censored trials count as exceeding every grid size.
    """
    if not records:
        raise ValueError("records must be nonempty")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    grid = records[0].grid if grid is None else grid
    if len(grid) == 0:
        raise ValueError("a size grid is required")
    t = np.array([math.inf if r.censored else r.t_tilde for r in records])
    need = (1.0 - eps) * len(t) - 1e-9
    for m in grid:
        if np.count_nonzero(t <= m) >= need:
            return int(m)
    return CENSORED


def detection_pmf(records: Sequence[DetectionRecord], grid: Sequence[int] | None = None) -> list[tuple[str, float]]:
    """Empirical pmf of the detection time over ``{0} | grid[:-1] | {censored}``."""
    grid = records[0].grid if grid is None else grid
    total = len(records)
    zero = sum(1 for r in records if r.t_tilde == 0)
    rows = [("0", zero / total)]
    for m in grid[:-1]:
        rows.append((str(int(m)), sum(1 for r in records if not r.censored and r.t_tilde == m) / total))
    rows.append(("censored", sum(1 for r in records if r.censored) / total))
    return rows


@dataclass
class TradeoffCurve:
    """(param, M0, M1) points for one method under one alternative."""

    method: str
    params: list[float]
    m0: list[float]
    m1: list[float]
    epsilon: float
    model: dict
    metadata: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        return [
            {"method": self.method, "param": a, "M0": m0, "M1": m1, "epsilon": self.epsilon, **self.model}
            for a, m0, m1 in zip(self.params, self.m0, self.m1)
        ]


def tradeoff_curves(
    model_h1: ModelConfig,
    methods: Sequence[Method],
    eps: float,
    trials: int,
    seed: int,
    grid: np.ndarray | None = None,
    jobs: int = 1,
) -> list[TradeoffCurve]:
    """M0 under the independent counterpart and M1 under ``model_h1`` for each method."""
    grid = size_grid() if grid is None else np.asarray(grid)
    h0 = run_trials(null_model(model_h1), methods, grid, trials, seed, "H0", jobs)
    h1 = run_trials(model_h1, methods, grid, trials, seed, "H1", jobs)
    curves = []
    for method in methods:
        params = sorted(float(v) for v in method.params)
        curves.append(
            TradeoffCurve(
                method=method.name,
                params=params,
                m0=[sampling_complexity(h0[(method.name, a)], eps) for a in params],
                m1=[sampling_complexity(h1[(method.name, a)], eps) for a in params],
                epsilon=eps,
                model=model_h1.to_dict(),
                metadata={"trials": trials, "seed": seed, "grid_min": int(grid[0]),
                          "grid_max": int(grid[-1]), "grid_points": len(grid)},
            )
        )
    return curves


def tradeoff_sweep(
    model_h1: ModelConfig,
    schedule_base: Schedule,
    alpha_list: Sequence[float],
    eps: float,
    trials: int,
    seed: int,
    grid: np.ndarray | None = None,
    jobs: int = 1,
) -> TradeoffCurve:
    if len(alpha_list) == 0:
        raise ValueError("alpha_list must be nonempty")
    method = TspMethod(schedule_base, tuple(float(a) for a in alpha_list))
    return tradeoff_curves(model_h1, [method], eps, trials, seed, grid, jobs)[0]


def heuristic_w(d: int, C: float, p_exp: float) -> float:
    """Dimension-dependent probability scale ``C ** (p_exp * d)``."""
    if not 0 < C < 1:
        raise ValueError("C must lie in (0, 1)")
    if p_exp <= 0:
        raise ValueError("p_exp must be positive")
    if d < 2:
        raise ValueError("d must be >= 2")
    return C ** (p_exp * d)


@dataclass(frozen=True)
class SignificanceEstimate:
    fraction: float
    half_width: float
    rejections: int
    trials: int


def significance_estimate(model_h0: ModelConfig, schedule: Schedule, n: int, trials: int, seed: int) -> SignificanceEstimate:
    """Rejection rate at fixed n under independence, with a 95% Wilson half-width."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rejections = 0
    for t in range(trials):
        data = sample(model_h0, n, trial_seed(seed, t, "H0"))
        rejections += decide_independence(data, schedule).decision
    phat = rejections / trials
    z = 1.959963984540054
    denom = 1 + z * z / trials
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return SignificanceEstimate(phat, half, rejections, trials)
