import json
import math

import numpy as np
import pytest

from negmem.covariance import CovarianceModel
from negmem.market import MarketParams, gstar_constant
from negmem.moments import analytic_profit_terms, q_of_t
from negmem.montecarlo import (
    _wls,
    estimate_expected_profit,
    fit_growth_exponent,
    lambda_sweep,
    theory_exponent,
)
from negmem.strategies import Strategy

FGN = CovarianceModel.fgn(0.25)
PARAMS = MarketParams(2.0, 0.01)
SMALL_HORIZONS = (30, 60, 120, 240, 480, 960)


class TestTheoryExponent:
    @pytest.mark.parametrize("chi, alpha, expect", [(-1.5, 2.0, 1.5), (-1.5, 3.0, 1.375), (-1.8, 2.0, 1.2)])
    def test_values(self, chi, alpha, expect):
        assert theory_exponent(chi, alpha) == pytest.approx(expect, rel=1e-15)

    def test_large_alpha_limit(self):
        assert theory_exponent(-1.5, 1e12) == pytest.approx(1.25, rel=1e-10)


class TestWls:
    def test_exact_line(self):
        x = np.log([1.0, 2.0, 4.0, 8.0])
        slope, se = _wls(x, 3.0 + 1.7 * x)
        assert slope == pytest.approx(1.7, rel=1e-12)
        assert math.isnan(se)  # no weights, no variance to propagate

    def test_delta_se(self):
        # with weights 1/var the slope variance is [(X'WX)^-1]_11
        x = np.array([0.0, 1.0, 2.0])
        w = np.array([4.0, 1.0, 4.0])
        _, se = _wls(x, 2 * x, w)
        X = np.column_stack([np.ones(3), x])
        assert se == pytest.approx(math.sqrt(np.linalg.inv(X.T @ np.diag(w) @ X)[1, 1]), rel=1e-14)

    def test_weights_pull_toward_heavy_points(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        y = np.array([0.0, 1.0, 2.0, 10.0])
        flat, _ = _wls(x, y)
        weighted, _ = _wls(x, y, np.array([1e6, 1e6, 1e6, 1e-6]))
        assert weighted == pytest.approx(1.0, rel=1e-4)
        assert flat > 2


class TestEstimate:
    def test_zero_strategy_exact(self):
        est = estimate_expected_profit(FGN, Strategy("zero", 60), 60, 300, 1, PARAMS)
        assert est.mean == 0.0 and est.se == 0.0
        assert est.term_means == {}

    def test_terms_match_analytic(self):
        T = 120
        est = estimate_expected_profit(FGN, Strategy("contrarian", T, 2.0), T, 4000, 5, PARAMS)
        ref = analytic_profit_terms(FGN, T, 2.0, 0.01)
        for name, val in (("I1", ref.ei1), ("I2", ref.ei2), ("I3", ref.ei3)):
            assert abs(est.term_means[name] - val) < 3 * est.term_ses[name], name
        assert abs(est.term_means["I4"]) <= est.term_means["I2"] + 3 * est.term_ses["I2"]

    @pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
    def test_decomposition_identity(self, alpha):
        p = MarketParams(alpha, 0.05)
        est = estimate_expected_profit(FGN, Strategy("contrarian", 90, alpha), 90, 300, 2, p)
        assert est.decomposition_error < 1e-9

    @pytest.mark.parametrize("kind", ["contrarian", "random", "hold-liquidate"])
    def test_upper_envelope(self, kind):
        T = 60
        est = estimate_expected_profit(FGN, Strategy(kind, T, 2.0, seed=3), T, 500, 4, PARAMS)
        assert est.gstar_violations == 0
        envelope = gstar_constant(PARAMS) * q_of_t(FGN, T, 2.0)
        assert est.mean <= envelope
        assert est.mean_gstar_bound == pytest.approx(envelope, rel=0.1)

    def test_workers_identical(self):
        strat = Strategy("contrarian", 66, 2.0)
        a = estimate_expected_profit(FGN, strat, 66, 700, 9, PARAMS, workers=1)
        b = estimate_expected_profit(FGN, strat, 66, 700, 9, PARAMS, workers=3)
        assert a.cash.tobytes() == b.cash.tobytes()
        assert a.to_dict() == b.to_dict()

    @pytest.mark.parametrize("sampler", ["durbin-levinson", "cholesky"])
    def test_other_samplers(self, sampler):
        est = estimate_expected_profit(FGN, Strategy("contrarian", 60), 60, 200, 0, PARAMS, sampler=sampler)
        assert est.decomposition_error < 1e-9

    def test_minimum_paths(self):
        with pytest.raises(ValueError, match="at least 100"):
            estimate_expected_profit(FGN, Strategy("zero", 60), 60, 99, 0, PARAMS)

    def test_horizon_mismatch(self):
        with pytest.raises(ValueError, match="differs"):
            estimate_expected_profit(FGN, Strategy("zero", 30), 60, 100, 0, PARAMS)


@pytest.fixture(scope="module")
def small_report():
    return fit_growth_exponent(FGN, "contrarian", SMALL_HORIZONS, n_paths=600, seed=3)


class TestGrowth:
    def test_report_fields(self, small_report):
        r = small_report
        assert r.horizons == list(SMALL_HORIZONS)
        assert r.theory_exponent == 1.5
        assert r.fitted_slope is not None and r.slope_ci[0] < r.fitted_slope < r.slope_ci[1]
        assert r.nonpositive == []
        assert all(e["gstar_violations"] == 0 for e in r.estimates)
        assert all(e["mean"] <= u for e, u in zip(r.estimates, r.upper_env))

    def test_slopes_near_theory(self, small_report):
        assert abs(small_report.fitted_slope - 1.5) < 0.25
        assert abs(small_report.lower_slope - 1.5) < 0.1
        assert abs(small_report.upper_slope - 1.5) < 0.05

    def test_deterministic_and_worker_free(self, small_report):
        again = fit_growth_exponent(FGN, "contrarian", SMALL_HORIZONS, n_paths=600, seed=3, workers=2)
        assert again.to_json() == small_report.to_json()
        assert again.to_csv() == small_report.to_csv()

    def test_csv_columns(self, small_report):
        lines = small_report.to_csv().splitlines()
        assert lines[0] == "T,mean,se,analytic_lower,upper_env"
        assert len(lines) == 1 + len(SMALL_HORIZONS)

    def test_json(self, small_report):
        doc = json.loads(small_report.to_json())
        assert doc["theory_exponent"] == 1.5
        assert doc["ci_method"] == "delta"

    def test_zero_strategy_not_fitted(self):
        r = fit_growth_exponent(FGN, "zero", SMALL_HORIZONS, n_paths=100)
        assert r.fitted_slope is None and r.slope_ci is None
        assert r.nonpositive == list(SMALL_HORIZONS)
        assert all(e["mean"] == 0.0 for e in r.estimates)

    def test_heavy_friction_flags_nonpositive(self):
        r = fit_growth_exponent(FGN, "contrarian", SMALL_HORIZONS, n_paths=100, params=MarketParams(2.0, 100.0))
        assert r.fitted_slope is None
        assert r.nonpositive == list(SMALL_HORIZONS)

    def test_bootstrap_interval(self):
        r = fit_growth_exponent(FGN, "contrarian", SMALL_HORIZONS, n_paths=200, seed=1, bootstrap=40)
        assert r.ci_method == "bootstrap-40"
        lo, hi = r.slope_ci
        assert lo < hi and lo < r.fitted_slope + 0.2 and hi > r.fitted_slope - 0.2

    @pytest.mark.parametrize(
        "horizons, msg",
        [((60, 120, 240), "at least 4"), ((60, 240, 120, 960), "increasing"), ((60, 120, 240, 480), "1.5 decades")],
    )
    def test_rejects_horizons(self, horizons, msg):
        with pytest.raises(ValueError, match=msg):
            fit_growth_exponent(FGN, "contrarian", horizons, n_paths=100)

    def test_needs_tail(self):
        m = CovarianceModel.explicit([1.0, -0.5], compact=True)
        with pytest.raises(ValueError, match="tail exponent"):
            fit_growth_exponent(m, "contrarian", SMALL_HORIZONS, n_paths=100)


@pytest.fixture(scope="module")
def sweep():
    return lambda_sweep(FGN, "contrarian", 120, [0.0, 0.01, 0.1, 1.0, 1000.0], 2000, 6)


class TestLambdaSweep:
    def test_zero_lambda_matches_analytic(self, sweep):
        row = sweep.rows[0]
        assert abs(row["mean"] - sweep.analytic_lower_zero) < 3 * row["se"]
        assert sweep.analytic_lower_zero > 0

    def test_huge_lambda_negative(self, sweep):
        assert sweep.rows[-1]["mean"] < 0
        assert sweep.threshold is not None and sweep.threshold[1] <= 1000.0

    def test_common_random_numbers(self, sweep):
        # cash is affine in lambda on common paths, so the means are too
        m = [r["mean"] for r in sweep.rows]
        lam = [r["lambda"] for r in sweep.rows]
        slope = (m[1] - m[0]) / (lam[1] - lam[0])
        for li, mi in zip(lam[2:], m[2:]):
            assert mi == pytest.approx(m[0] + slope * li, rel=1e-9, abs=1e-9 * abs(slope * li))

    def test_profitable_below_certified_lambda(self, sweep):
        assert sweep.epsilon_over_3 is not None and sweep.epsilon_over_3 > 0
        for row in sweep.rows:
            if row["lambda"] < sweep.epsilon_over_3:
                assert row["mean"] > 0

    def test_csv(self, sweep):
        lines = sweep.to_csv().splitlines()
        assert lines[0] == "lambda,mean,se"
        assert len(lines) == 6

    @pytest.mark.parametrize("lams", [[], [0.1, 0.01], [-0.1, 0.1]])
    def test_rejects(self, lams):
        with pytest.raises(ValueError):
            lambda_sweep(FGN, "contrarian", 60, lams, 100, 0)
