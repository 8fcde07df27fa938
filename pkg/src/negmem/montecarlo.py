"""Monte Carlo estimates of expected terminal cash and its growth in ``T``.

Paths are processed in fixed blocks of path indices.  Each block is a pure
function of ``(model, T, seed, block range)``, workers only change the
schedule, and every reduction runs over the reassembled, index-ordered
per-path arrays with ``math.fsum``.  Results are therefore identical for any
worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._numerics import compensated_rowsum
from .covariance import CovarianceModel, _finite_or_none
from .market import MarketParams, gstar_constant, settle_batch
from .moments import SecondOrderTable, analytic_profit_terms, certify_lemmas, q_of_t
from .paths import BLOCK_SIZE, PathSampler, derive_seed, prices_from_increments
from .strategies import Strategy, contrarian_windows

__all__ = [
    "GrowthReport",
    "ProfitEstimate",
    "SweepReport",
    "estimate_expected_profit",
    "fit_growth_exponent",
    "lambda_sweep",
    "theory_exponent",
]

DEFAULT_HORIZONS = (300, 600, 1200, 2400, 4800, 9600)
TERMS = ("I1", "I2", "I3", "I4")


def theory_exponent(chi: float, alpha: float) -> float:
    """Growth exponent ``(chi/2 + 1)(1 + 1/(alpha - 1)) + 1``."""
    return (chi / 2.0 + 1.0) * (1.0 + 1.0 / (alpha - 1.0)) + 1.0


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    n = x.size
    mean = math.fsum(x) / n
    if n < 2:
        return mean, float("nan")
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def _contrarian_terms(S: np.ndarray, T: int, alpha: float, lam: float) -> np.ndarray:
    """Per-path ``(I1, I2, I3, I4)`` computed directly from prices."""
    m, end = contrarian_windows(T)
    a = S[:, : m + 1]
    p = alpha / (alpha - 1.0)
    i1 = (np.abs(a) ** p).sum(axis=1)
    pos = compensated_rowsum(np.sign(a) * np.abs(a) ** (1.0 / (alpha - 1.0)))
    i3 = S[:, m + 1 : end + 1].sum(axis=1) * pos / m
    i4 = lam * m * np.abs(pos / m) ** alpha
    return np.stack([i1, lam * i1, i3, i4], axis=1)


def _run_blocks(fn, n_paths: int, workers: int):
    blocks = [(a, min(a + BLOCK_SIZE, n_paths)) for a in range(0, n_paths, BLOCK_SIZE)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return blocks, list(ex.map(fn, blocks))
    return blocks, [fn(b) for b in blocks]


@dataclass
class ProfitEstimate:
    T: int
    n_paths: int
    mean: float
    se: float
    term_means: dict = field(default_factory=dict)
    term_ses: dict = field(default_factory=dict)
    decomposition_error: float | None = None
    gstar_violations: int = 0
    mean_gstar_bound: float = float("nan")
    cash: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "n_paths": self.n_paths,
            "mean": self.mean,
            "se": self.se,
            "term_means": self.term_means,
            "term_ses": self.term_ses,
            "decomposition_error": self.decomposition_error,
            "gstar_violations": self.gstar_violations,
            "mean_gstar_bound": self.mean_gstar_bound,
        }


def _simulate(model, strategy, T, n_paths, seed, sampler, workers, alpha, lambdas):
    """Per-path ``gross``, ``impact``, ``sum G*`` core and contrarian terms."""
    if n_paths < 100:
        raise ValueError(f"n_paths must be at least 100, got {n_paths}")
    if strategy.T != T:
        raise ValueError(f"strategy horizon {strategy.T} differs from T={T}")
    ps = PathSampler(model, T, sampler)
    p = alpha / (alpha - 1.0)
    want_terms = strategy.kind == "contrarian" and T >= 6

    def work(block):
        a, b = block
        S = prices_from_increments(ps.increments(seed, a, b))
        phi = strategy.speeds(S, path_index=a)
        gross, impact, residual = settle_batch(S, phi, alpha)
        tol = 1e-9 * np.maximum(1.0, np.abs(phi).sum(axis=1))
        if np.any(np.abs(residual) > tol):
            raise RuntimeError("strategy failed to liquidate on a simulated path")
        gpow = (np.abs(S) ** p).sum(axis=1)
        terms = [_contrarian_terms(S, T, alpha, lam) for lam in lambdas] if want_terms else None
        return gross, impact, gpow, terms

    blocks, results = _run_blocks(work, n_paths, workers)
    gross = np.concatenate([r[0] for r in results])
    impact = np.concatenate([r[1] for r in results])
    gpow = np.concatenate([r[2] for r in results])
    terms = None
    if want_terms:
        terms = [np.concatenate([r[3][k] for r in results]) for k in range(len(lambdas))]
    return gross, impact, gpow, terms


def _estimate_from(T, gross, impact, gpow, terms, params) -> ProfitEstimate:
    cash = gross - params.lam * impact
    mean, se = _mean_se(cash)
    bound = gstar_constant(params) * gpow
    scale = np.maximum(1.0, np.abs(bound))
    est = ProfitEstimate(
        T=T,
        n_paths=int(cash.size),
        mean=mean,
        se=se,
        gstar_violations=int(np.count_nonzero(cash > bound + 1e-9 * scale)),
        mean_gstar_bound=math.fsum(bound) / bound.size,
        cash=cash,
    )
    if terms is not None:
        for k, name in enumerate(TERMS):
            est.term_means[name], est.term_ses[name] = _mean_se(terms[:, k])
        recon = terms[:, 0] - terms[:, 1] - terms[:, 2] - terms[:, 3]
        mag = np.abs(terms).sum(axis=1) + np.finfo(float).tiny
        est.decomposition_error = float(np.max(np.abs(cash - recon) / mag))
    return est


def estimate_expected_profit(
    model: CovarianceModel,
    strategy: Strategy,
    T: int,
    n_paths: int,
    seed: int,
    params: MarketParams,
    sampler: str = "circulant",
    workers: int = 1,
) -> ProfitEstimate:
    """Sample mean and standard error of ``X_T`` over ``n_paths`` paths.

    For the contrarian strategy the four terms ``I1..I4`` of
    ``X_T = I1 - I2 - I3 - I4`` are computed per path straight from the
    prices, and ``decomposition_error`` records the largest relative gap to
    the ledger value.  ``gstar_violations`` counts paths whose cash exceeds
    ``sum_t G*(-S_t)``.
    """
    gross, impact, gpow, terms = _simulate(
        model, strategy, T, n_paths, seed, sampler, workers, params.alpha, [params.lam]
    )
    return _estimate_from(T, gross, impact, gpow, None if terms is None else terms[0], params)


def _wls(x: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> tuple[float, float]:
    """Weighted least-squares slope and its standard error (weights = 1/var)."""
    X = np.column_stack([np.ones_like(x), x])
    if w is None:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        return float(coef[1]), float("nan")
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    coef = cov @ (XtW @ y)
    return float(coef[1]), float(math.sqrt(cov[1, 1]))


@dataclass
class GrowthReport:
    model: dict
    strategy: str
    alpha: float
    lam: float
    horizons: list
    estimates: list
    analytic_lower: list
    upper_env: list
    fitted_slope: float | None
    slope_se: float | None
    slope_ci: tuple | None
    ci_method: str
    lower_slope: float | None
    upper_slope: float | None
    theory_exponent: float
    nonpositive: list
    n_paths: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "strategy": self.strategy,
            "alpha": self.alpha,
            "lambda": self.lam,
            "horizons": self.horizons,
            "estimates": self.estimates,
            "analytic_lower": self.analytic_lower,
            "upper_env": self.upper_env,
            "fitted_slope": self.fitted_slope,
            "slope_se": self.slope_se,
            "slope_ci": None if self.slope_ci is None else list(self.slope_ci),
            "ci_method": self.ci_method,
            "lower_slope": self.lower_slope,
            "upper_slope": self.upper_slope,
            "theory_exponent": self.theory_exponent,
            "nonpositive_horizons": self.nonpositive,
            "n_paths": self.n_paths,
            "seed": self.seed,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(_finite_or_none(self.to_dict()), **kw)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["T", "mean", "se", "analytic_lower", "upper_env"])
        for T, e, lo, up in zip(self.horizons, self.estimates, self.analytic_lower, self.upper_env):
            w.writerow([T, repr(e["mean"]), repr(e["se"]), "" if lo is None else repr(lo), repr(up)])
        if path is None:
            return buf.getvalue()
        Path(path).write_text(buf.getvalue())
        return None


def fit_growth_exponent(
    model: CovarianceModel,
    strategy: str,
    horizons=DEFAULT_HORIZONS,
    n_paths: int = 10_000,
    seed: int = 0,
    params: MarketParams = MarketParams(2.0, 0.01),
    sampler: str = "circulant",
    workers: int = 1,
    bootstrap: int = 0,
) -> GrowthReport:
    """Estimate ``E X_T`` per horizon and fit its log-log slope.

    The slope is a weighted least-squares fit of ``log mean`` on ``log T``
    with weights ``(mean/se)^2``; the default interval is the 95% delta-method
    interval.  ``bootstrap=B`` instead resamples paths within each horizon
    ``B`` times and reports the percentile interval.  Horizon ``T`` uses the
    seed ``derive_seed(seed, T)``.  If any mean is nonpositive the slope is
    not fitted and the horizons are listed in ``nonpositive``.
    """
    horizons = [int(T) for T in horizons]
    if len(horizons) < 4 or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ValueError("need at least 4 strictly increasing horizons")
    if math.log10(horizons[-1] / horizons[0]) < 1.5 - 1e-9:
        raise ValueError("horizons must span at least 1.5 decades")
    if model.chi is None:
        raise ValueError("model has no tail exponent; attach one with model.with_tail(report)")

    table = SecondOrderTable(model, horizons[-1])
    C = gstar_constant(params)
    estimates, lower, upper, cash = [], [], [], []
    for T in horizons:
        strat = Strategy(strategy, T, alpha=params.alpha, seed=derive_seed(seed, T, 1))
        est = estimate_expected_profit(
            model, strat, T, n_paths, derive_seed(seed, T), params, sampler, workers
        )
        estimates.append({"T": T, "mean": est.mean, "se": est.se, "n_paths": est.n_paths,
                          "nonpositive": not est.mean > 0, "gstar_violations": est.gstar_violations,
                          "term_means": est.term_means})
        cash.append(est.cash)
        if strategy == "contrarian" and T % 6 == 0:
            lower.append(analytic_profit_terms(model, T, params.alpha, params.lam, table).lower)
        else:
            lower.append(None)
        upper.append(C * q_of_t(model, T, params.alpha, table))

    x = np.log(horizons)
    means = np.array([e["mean"] for e in estimates])
    ses = np.array([e["se"] for e in estimates])
    nonpositive = [T for T, e in zip(horizons, estimates) if e["nonpositive"]]
    slope = slope_se = ci = None
    ci_method = "delta"
    if not nonpositive and np.all(ses > 0):
        slope, slope_se = _wls(x, np.log(means), (means / ses) ** 2)
        ci = (slope - 1.959963984540054 * slope_se, slope + 1.959963984540054 * slope_se)
        if bootstrap:
            ci_method = f"bootstrap-{bootstrap}"
            rng = np.random.default_rng(derive_seed(seed, 0xB007))
            draws = []
            for _ in range(bootstrap):
                bm, bs = [], []
                for c in cash:
                    m_, s_ = _mean_se(c[rng.integers(0, c.size, c.size)])
                    bm.append(m_)
                    bs.append(s_)
                bm, bs = np.array(bm), np.array(bs)
                if np.all(bm > 0):
                    draws.append(_wls(x, np.log(bm), (bm / bs) ** 2)[0])
            ci = tuple(float(q) for q in np.percentile(draws, [2.5, 97.5]))

    lower_slope = None
    if all(v is not None and v > 0 for v in lower):
        lower_slope = _wls(x, np.log(np.array(lower, dtype=float)))[0]
    upper_slope = _wls(x, np.log(np.array(upper)))[0]

    return GrowthReport(
        model=model.describe(),
        strategy=strategy,
        alpha=params.alpha,
        lam=params.lam,
        horizons=horizons,
        estimates=estimates,
        analytic_lower=lower,
        upper_env=upper,
        fitted_slope=slope,
        slope_se=slope_se,
        slope_ci=ci,
        ci_method=ci_method,
        lower_slope=lower_slope,
        upper_slope=upper_slope,
        theory_exponent=theory_exponent(model.chi, params.alpha),
        nonpositive=nonpositive,
        n_paths=n_paths,
        seed=seed,
    )


@dataclass
class SweepReport:
    T: int
    alpha: float
    rows: list
    threshold: tuple | None
    epsilon_over_3: float | None
    analytic_lower_zero: float | None

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "alpha": self.alpha,
            "rows": self.rows,
            "threshold": None if self.threshold is None else list(self.threshold),
            "epsilon_over_3": self.epsilon_over_3,
            "analytic_lower_zero": self.analytic_lower_zero,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(_finite_or_none(self.to_dict()), **kw)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "mean", "se"])
        for r in self.rows:
            w.writerow([repr(r["lambda"]), repr(r["mean"]), repr(r["se"])])
        if path is None:
            return buf.getvalue()
        Path(path).write_text(buf.getvalue())
        return None


def lambda_sweep(
    model: CovarianceModel,
    strategy: str,
    T: int,
    lambdas,
    n_paths: int,
    seed: int,
    alpha: float = 2.0,
    sampler: str = "circulant",
    workers: int = 1,
) -> SweepReport:
    """Mean terminal cash across impact scales on common paths.

    One set of paths and trades is reused for every ``lambda`` (the trades
    of the implemented strategies do not depend on it), so differences
    between rows carry no sampling noise from the paths.  ``lambda = 0`` is
    allowed here.  ``threshold`` is the bracket ``(last profitable, first
    unprofitable)``; ``epsilon_over_3`` comes from the lemma certificate at
    horizon ``max(T, 1000)``.
    """
    lambdas = [float(v) for v in lambdas]
    if not lambdas or lambdas[0] < 0 or any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be nonnegative and strictly increasing")
    strat = Strategy(strategy, T, alpha=alpha, seed=derive_seed(seed, T, 1))
    gross, impact, _, _ = _simulate(model, strat, T, n_paths, seed, sampler, workers, alpha, [])
    rows = []
    for lam in lambdas:
        m, se = _mean_se(gross - lam * impact)
        rows.append({"lambda": lam, "mean": m, "se": se})

    threshold = None
    for prev, row in zip([None] + rows[:-1], rows):
        if not row["mean"] > 0:
            threshold = (None if prev is None else prev["lambda"], row["lambda"])
            break

    eps3 = None
    if model.chi is not None:
        cert = certify_lemmas(model, max(T, 1000), raise_on_failure=False)
        eps3 = cert.epsilon / 3.0 if cert.passed else None
    lower0 = None
    if strategy == "contrarian" and T % 6 == 0:
        lower0 = analytic_profit_terms(model, T, alpha, 0.0).lower
    return SweepReport(T=T, alpha=alpha, rows=rows, threshold=threshold,
                       epsilon_over_3=eps3, analytic_lower_zero=lower0)
