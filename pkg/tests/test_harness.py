import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsp_indep.harness import (
    CENSORED,
    BaselineMethod,
    DetectionRecord,
    TspMethod,
    detection_pmf,
    detection_time,
    detection_times,
    heuristic_w,
    run_trials,
    sampling_complexity,
    significance_estimate,
    size_grid,
    tradeoff_curves,
    tradeoff_sweep,
    trial_seed,
)
from tsp_indep.baselines import GridSpec, baseline_decide
from tsp_indep.independence import Schedule, decide_independence
from tsp_indep.models import ModelConfig, sample

GRID = (10, 20, 40, 80)


def records(values, censored=None, hypothesis="H0"):
    censored = censored or [False] * len(values)
    return [DetectionRecord(i, i, hypothesis, (), v, c, grid=GRID) for i, (v, c) in enumerate(zip(values, censored))]


class TestGrid:
    def test_default(self):
        g = size_grid()
        assert g[0] == 10 and g[-1] == 100_000 and len(g) == 121
        assert np.all(np.diff(g) > 0)

    def test_coarse(self):
        assert size_grid(80, 10, 3).tolist() == list(GRID)

    @given(n_min=st.integers(1, 1000), span=st.integers(0, 10**6), per=st.integers(1, 60))
    def test_invariants(self, n_min, span, per):
        g = size_grid(n_min + span, n_min, per)
        assert g[0] == n_min and g[-1] == n_min + span
        assert np.all(np.diff(g) > 0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            size_grid(5, 10)


class TestDetectionTime:
    def test_last_wrong(self):
        assert detection_time([1, 1, 0, 0], GRID, "H0") == (20, False)

    def test_never_wrong(self):
        assert detection_time([0, 0, 0, 0], GRID, "H0") == (0, False)

    def test_censored(self):
        assert detection_time([0, 0, 0, 1], GRID, "H0") == (80, True)

    def test_h1_counts_zeros(self):
        assert detection_time([0, 1, 0, 1], GRID, "H1") == (40, False)
        assert detection_time([1, 1, 1, 1], GRID, "H1") == (0, False)

    def test_bad_hypothesis(self):
        with pytest.raises(ValueError):
            detection_time([0], (10,), "H2")


class TestSamplingComplexity:
    def test_quantile(self):
        assert sampling_complexity(records([10, 20, 20, 40]), 0.25) == 20

    def test_all_zero(self):
        assert sampling_complexity(records([0, 0, 0]), 0.05) == 10

    def test_censored_marker(self):
        recs = records([10, 80, 80, 0], [False, True, True, False])
        assert sampling_complexity(recs, 0.25) is CENSORED
        assert math.isinf(sampling_complexity(recs, 0.5)) is False

    def test_uncensored_top_value_counts(self):
        # T equal to a value below N_max is attained at that grid point
        assert sampling_complexity(records([40, 40, 40, 40]), 0.05) == 40

    @pytest.mark.parametrize("eps", [0.0, 1.0])
    def test_invalid_eps(self, eps):
        with pytest.raises(ValueError):
            sampling_complexity(records([10]), eps)

    def test_empty(self):
        with pytest.raises(ValueError):
            sampling_complexity([], 0.1)

    def test_pmf_normalised(self):
        recs = records([0, 10, 40, 80, 80], [False, False, False, True, True])
        pmf = dict(detection_pmf(recs))
        assert set(pmf) == {"0", "10", "20", "40", "censored"}
        assert sum(pmf.values()) == pytest.approx(1.0, abs=1e-12)
        assert pmf["censored"] == pytest.approx(0.4)


class TestTrials:
    MODEL = ModelConfig(sigma=0.5)
    GRID = size_grid(300, 10, 6)

    def test_seeds_distinct_and_stable(self):
        seeds = {trial_seed(7, t, h) for t in range(50) for h in ("H0", "H1")}
        assert len(seeds) == 100
        assert trial_seed(7, 3, "H1") == trial_seed(7, 3, "H1")

    def test_nested_prefixes(self):
        s = Schedule(w=0.05, l=0.167, alpha=1e-4)
        recs = detection_times(self.MODEL, s, self.GRID, 3, 11, "H1")
        for rec in recs:
            path = sample(self.MODEL, int(self.GRID[-1]), rec.seed)
            want = [decide_independence(path.prefix(int(n)), s).decision for n in self.GRID]
            assert list(rec.decisions) == want

    def test_baseline_method_matches_direct_calls(self):
        method = BaselineMethod("loglik", 0.25, (0.3, 1.0))
        res = run_trials(self.MODEL, [method], self.GRID, 2, 5, "H1")
        for C in (0.3, 1.0):
            for rec in res[("loglik", C)]:
                path = sample(self.MODEL, int(self.GRID[-1]), rec.seed)
                want = [baseline_decide(path.prefix(int(n)), GridSpec(0.25, C), "loglik").decision for n in self.GRID]
                assert list(rec.decisions) == want

    def test_reproducible_and_parallel_safe(self):
        methods = [TspMethod(Schedule(), (1e-5, 1e-4)), BaselineMethod("l1", 0.2, (0.5,))]
        a = run_trials(self.MODEL, methods, self.GRID, 4, 3, "H0")
        b = run_trials(self.MODEL, methods, self.GRID, 4, 3, "H0")
        c = run_trials(self.MODEL, methods, self.GRID, 4, 3, "H0", jobs=2)
        assert a == b == c

    def test_invalid(self):
        with pytest.raises(ValueError):
            run_trials(self.MODEL, [], self.GRID, 0, 1, "H0")
        with pytest.raises(ValueError):
            run_trials(self.MODEL, [], [10, 10], 1, 1, "H0")

    def test_sweep_sorted_and_alpha_zero_dominates_m0(self):
        curve = tradeoff_sweep(self.MODEL, Schedule(), [1e-3, 0.0, 1e-5, 1e-4], 0.1, 12, 4, size_grid(1000, 10, 8))
        assert curve.params == sorted(curve.params)
        assert all(curve.m0[0] >= m for m in curve.m0[1:])
        assert all(m in size_grid(1000, 10, 8) or m is CENSORED for m in curve.m0 + curve.m1)
        rows = curve.rows()
        assert len(rows) == 4 and rows[0]["sigma"] == 0.5

    def test_empty_alpha_list(self):
        with pytest.raises(ValueError):
            tradeoff_sweep(self.MODEL, Schedule(), [], 0.1, 1, 1)


class TestHeuristicW:
    @pytest.mark.parametrize(
        "d, C, p, want", [(2, 0.225, 0.5, 0.225), (4, 0.225, 0.5, 0.050625), (2, 0.1, 0.5, 0.1)]
    )
    def test_examples(self, d, C, p, want):
        assert heuristic_w(d, C, p) == pytest.approx(want, rel=1e-14)

    @pytest.mark.parametrize("args", [(1, 0.2, 0.5), (2, 1.0, 0.5), (2, 0.2, 0.0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            heuristic_w(*args)


class TestSignificance:
    def test_structural_zero(self):
        est = significance_estimate(ModelConfig(), Schedule(alpha=1e9), 500, 20, 1)
        assert est.rejections == 0 and est.fraction == 0.0
        assert 0 < est.half_width < 0.2

    def test_fraction_in_unit_interval(self):
        est = significance_estimate(ModelConfig(), Schedule(alpha=0.0), 200, 10, 2)
        assert 0.0 <= est.fraction <= 1.0
        assert est.fraction == est.rejections / 10


@pytest.mark.slow
def test_m1_nonincreasing_in_sigma():
    grid = size_grid()
    method = TspMethod(Schedule(), (1e-4,))
    m1 = []
    for sigma in (0.3, 0.5, 0.7):
        res = run_trials(ModelConfig(sigma=sigma), [method], grid, 60, 21, "H1")
        m1.append(sampling_complexity(res[("tsp", 1e-4)], 0.05))
    assert m1[0] >= m1[1] >= m1[2]
