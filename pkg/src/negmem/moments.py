"""Exact second-order analytics of the cumulative price process.

Everything here is a deterministic function of the covariance sequence
``r``; nothing is estimated from sampled paths.  The central object is the
:class:`SecondOrderTable`, which stores ``var(S_t)`` for ``t = 0..T`` built
from running partial sums of ``r``, and answers covariance and regression
coefficient queries in O(1).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._numerics import neumaier_cumsum
from .covariance import CovarianceModel, _finite_or_none, geometric_lags

__all__ = [
    "BoundsCertificate",
    "LemmaViolation",
    "ProfitTerms",
    "SecondOrderTable",
    "abs_moment_constant",
    "analytic_profit_terms",
    "certify_lemmas",
    "cov_increment_past",
    "q_of_t",
    "rho",
    "var_s",
]

ETA = 2.0 / 3.0
# Added to max(rho) - 1 so that rho < 1 + R holds strictly with R > 0.
R_SLACK = 1e-9


class LemmaViolation(RuntimeError):
    """A variance or covariance bound failed on the certified grid."""

    def __init__(self, certificate: BoundsCertificate):
        self.certificate = certificate
        super().__init__("; ".join(certificate.diagnostics) or "lemma violated")


class SecondOrderTable:
    """Variances ``var(S_t)`` for ``t = 0..T`` and derived queries.

    With ``P_n = r(0) + 2 (r(1) + ... + r(n))`` the double sum for the
    variance regroups row by row into ``var(S_t) = P_0 + ... + P_{t-1}``.
    Both running sums are compensated, which keeps the result accurate even
    when ``t * r(0)`` is many orders of magnitude above ``var(S_t)``.
    """

    def __init__(self, model: CovarianceModel, T: int):
        if T < 0:
            raise ValueError("T must be nonnegative")
        self.model = model
        self.T = int(T)
        self.r = model.sequence(max(self.T, 1))
        r = self.r[: self.T + 1]
        self.partial = neumaier_cumsum(np.concatenate([[r[0]], 2.0 * r[1:]]))
        self.var = np.concatenate([[0.0], neumaier_cumsum(self.partial[: self.T])])

    def cov(self, s, t):
        """``cov(S_s - S_t, S_t)`` for ``s > t >= 1`` (arrays broadcast).

        The double sum over ``i in (t, s]``, ``j in [1, t]`` of ``r(i - j)``
        collapses, through the running sums ``P``, to
        ``(P_t + ... + P_{s-1} - P_0 - ... - P_{s-t-1}) / 2``.
        """
        s = np.asarray(s)
        t = np.asarray(t)
        v = self.var
        return 0.5 * ((v[s] - v[t]) - v[s - t])

    def cov_prices(self, s, t):
        """``cov(S_s, S_t)`` for any ``s, t >= 0``."""
        s = np.asarray(s)
        t = np.asarray(t)
        v = self.var
        return 0.5 * (v[s] + v[t] - v[np.abs(s - t)])

    def rho(self, s, t):
        """Regression coefficient ``cov(S_s, S_t) / var(S_t)``."""
        t = np.asarray(t)
        vt = self.var[t]
        if np.any(vt < 1e-14 * self.model.variance_scale):
            raise ZeroDivisionError("var(S_t) vanishes; rho is undefined")
        return self.cov_prices(s, t) / vt

    def scaled_variance(self, H: float) -> np.ndarray:
        """``var(S_t) / t^{2H}`` for ``t = 1..T``."""
        t = np.arange(1, self.T + 1, dtype=np.float64)
        return self.var[1:] / t ** (2.0 * H)

    def variance_csv(self, H: float, path=None):
        """CSV of ``(t, var(S_t), var(S_t)/t^{2H})`` for plotting."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "var_s", "var_over_t2h"])
        ratio = self.scaled_variance(H)
        for t in range(1, self.T + 1):
            w.writerow([t, repr(float(self.var[t])), repr(float(ratio[t - 1]))])
        return _emit(buf, path)

    def rho_csv(self, path=None, per_decade: int = 12):
        """CSV of ``(s, t, rho)`` on a geometric grid of ``s > t``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["s", "t", "rho"])
        if self.T >= 2:
            grid = geometric_lags(1, self.T, per_decade)
            for t in grid:
                for s in grid[grid > t]:
                    w.writerow([int(s), int(t), repr(float(self.rho(s, t)))])
        return _emit(buf, path)


def _emit(buf: io.StringIO, path):
    if path is None:
        return buf.getvalue()
    Path(path).write_text(buf.getvalue())
    return None


def var_s(model: CovarianceModel, t: int) -> float:
    """``var(S_t)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(SecondOrderTable(model, t).var[t])


def cov_increment_past(model: CovarianceModel, s: int, t: int) -> float:
    """``cov(S_s - S_t, S_t)`` for ``s > t >= 1``."""
    if not s > t >= 1:
        raise ValueError(f"need s > t >= 1, got s={s}, t={t}")
    return float(SecondOrderTable(model, s).cov(s, t))


def rho(model: CovarianceModel, s: int, t: int) -> float:
    if t < 1 or s < 0:
        raise ValueError(f"need t >= 1 and s >= 0, got s={s}, t={t}")
    if s == t:
        return 1.0
    return float(SecondOrderTable(model, max(s, t)).rho(s, t))


def abs_moment_constant(p: float) -> float:
    """``E|N(0,1)|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)``."""
    if not p > 0:
        raise ValueError(f"p must be positive, got {p!r}")
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0))) / math.sqrt(math.pi)


def _moment_power(alpha: float) -> float:
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha!r}")
    return alpha / (alpha - 1.0)


def q_of_t(model: CovarianceModel, T: int, alpha: float, table: SecondOrderTable | None = None) -> float:
    """``sum_{t=0}^{T} E|S_t|^{alpha/(alpha-1)}``."""
    p = _moment_power(alpha)
    if T < 0:
        raise ValueError("T must be nonnegative")
    if table is None or table.T < T:
        table = SecondOrderTable(model, T)
    return abs_moment_constant(p) * math.fsum(table.var[1 : T + 1] ** (0.5 * p))


@dataclass
class ProfitTerms:
    """Expected terms of the contrarian strategy's terminal cash.

    ``lower`` is ``(1 - 2 lambda) E I1 - E I3``, a lower bound for the
    expected terminal cash since ``|E I4| <= E I2 = lambda E I1``.
    """

    T: int
    alpha: float
    lam: float
    ei1: float
    ei2: float
    ei3: float
    ei4_bound: float
    lower: float

    def to_dict(self) -> dict:
        return asdict(self)


def analytic_profit_terms(
    model: CovarianceModel,
    T: int,
    alpha: float,
    lam: float,
    table: SecondOrderTable | None = None,
) -> ProfitTerms:
    """Exact expectations of the profit decomposition for ``T`` divisible by 6.

    ``E I3`` uses that ``S_s = rho(s,t) S_t + W`` with ``W`` independent of
    ``S_t``, so each summand is ``rho(s,t) E|S_t|^p``.
    """
    if T <= 0 or T % 6:
        raise ValueError(f"T must be a positive multiple of 6, got {T}")
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    p = _moment_power(alpha)
    if table is None or table.T < T:
        table = SecondOrderTable(model, T)
    h = T // 2
    cp = abs_moment_constant(p)
    moments = cp * table.var[: h + 1] ** (0.5 * p)
    ei1 = math.fsum(moments)

    s = np.arange(h + 1, T + 1)
    rowsums = np.zeros(h + 1)
    for t in range(1, h + 1):
        rowsums[t] = table.rho(s, t).sum()
    ei3 = math.fsum(rowsums * moments) / h

    ei2 = lam * ei1
    return ProfitTerms(
        T=T,
        alpha=float(alpha),
        lam=float(lam),
        ei1=ei1,
        ei2=ei2,
        ei3=ei3,
        ei4_bound=ei2,
        lower=(1.0 - 2.0 * lam) * ei1 - ei3,
    )


@dataclass
class BoundsCertificate:
    """Concrete witnesses for the variance and covariance bounds.

    The constants are extrema over the recorded grid.  ``R`` is
    ``max(rho) - 1`` floored at zero plus :data:`R_SLACK`; ``r_raw`` keeps
    the unfloored value.  ``u_4_3`` is informational and needs the tail
    constant ``J2``.
    """

    horizon: int
    H: float
    B1: float
    B2: float
    T1: int
    T2: int
    D1: float
    T3: int
    K: int
    T4: int
    R: float
    r_raw: float
    eta: float
    epsilon: float
    T_bar: int
    cov_max: float
    cov_negative_everywhere: bool
    u_4_3: float | None
    grid: dict
    passed: bool
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(_finite_or_none(self.to_dict()), **kw)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(indent=2) + "\n")


def _model_hurst(model: CovarianceModel) -> float:
    if model.chi is None:
        raise ValueError(
            "model has no tail exponent; run verify_assumption and use model.with_tail(report)"
        )
    return model.chi / 2.0 + 1.0


def certify_lemmas(
    model: CovarianceModel,
    horizon: int,
    tail_start: int = 10,
    full_grid_limit: int = 20_000,
    raise_on_failure: bool = True,
) -> BoundsCertificate:
    """Grid search for the variance sandwich, covariance sign and rho bounds.

    Searches ``1 <= t < s <= horizon``: every ``s`` when ``horizon`` is at
    most ``full_grid_limit``, otherwise geometrically spaced gaps ``s - t``.

    * ``B1``/``B2``: min/max of ``var(S_t)/t^{2H}`` over ``[tail_start, horizon]``.
    * ``D1``: max of ``cov(S_s - S_t, S_t)`` over ``t > tail_start``.
    * ``K``: smallest integer ``>= 1`` with the covariance nonpositive for
      every ``s - t > K`` and ``t > T4 = tail_start``.
    * ``epsilon``: min of ``1 - rho(s,t)`` over ``T_bar < t < horizon/2``,
      ``s > eta * horizon`` with ``eta = 2/3``, ``T_bar = max(tail_start, 3K)``.
    * ``R``: from the max of ``rho`` over the whole grid.
    """
    if horizon < 1000:
        raise ValueError(f"horizon must be at least 1000, got {horizon}")
    H = _model_hurst(model)
    table = SecondOrderTable(model, horizon)
    v = table.var
    diagnostics = []

    ratio = table.scaled_variance(H)[tail_start - 1 :]
    B1, B2 = float(ratio.min()), float(ratio.max())
    if not B1 > 0:
        diagnostics.append(f"variance lower bound fails: min var/t^2H = {B1!r}")

    full = horizon <= full_grid_limit
    if full:
        gaps = None
        grid = {"t": [1, horizon - 1], "s": "all s in (t, horizon]"}
    else:
        gaps = np.union1d(np.arange(1, 65), geometric_lags(1, horizon - 1, 40))
        grid = {"t": [1, horizon - 1], "s": "t + gap, gaps 1..64 and 40 per decade"}

    s_eta = int(math.floor(ETA * horizon)) + 1
    cov_max = -np.inf
    d1 = -np.inf
    rho_max = -np.inf
    pos_gap = 0
    eta_rho = np.full(horizon + 1, -np.inf)
    for t in range(1, horizon):
        if full:
            s = np.arange(t + 1, horizon + 1)
        else:
            s = t + gaps[gaps <= horizon - t]
            if t < horizon / 2:
                s = np.union1d(s, np.arange(max(s_eta, t + 1), horizon + 1))
        c = 0.5 * ((v[s] - v[t]) - v[s - t])
        cm = c.max()
        cov_max = max(cov_max, cm)
        rho_max = max(rho_max, 1.0 + cm / v[t])
        if t > tail_start:
            d1 = max(d1, cm)
            if cm > 0:
                pos_gap = max(pos_gap, int((s[c > 0] - t).max()))
        if t < horizon / 2:
            sel = s >= s_eta
            if sel.any():
                eta_rho[t] = 1.0 + c[sel].max() / v[t]

    K = max(1, pos_gap)
    T4 = T3 = tail_start
    T_bar = max(tail_start, T4, 3 * K)
    region = np.arange(T_bar + 1, int(math.ceil(horizon / 2)))
    region = region[region < horizon / 2]
    if region.size:
        epsilon = float(1.0 - eta_rho[region].max())
    else:
        epsilon = float("nan")
        diagnostics.append(f"empty rho region: T_bar={T_bar} too large for horizon {horizon}")
    if not epsilon > 0:
        diagnostics.append(f"rho(s,t) <= 1 - epsilon fails: epsilon = {epsilon!r}")
    if 6 * K >= horizon:
        diagnostics.append(f"covariance sign gap K={K} not small against horizon {horizon}")
    r_raw = float(rho_max - 1.0)
    if not math.isfinite(r_raw):
        diagnostics.append("rho is unbounded on the grid")

    u43 = None
    if model.j2 is not None:
        v43 = 4.0 / 3.0
        u43 = model.j2 / (2 * H) / (2 * H - 1) * (1.0 - (v43 ** (2 * H) - (v43 - 1) ** (2 * H)))

    cert = BoundsCertificate(
        horizon=int(horizon),
        H=H,
        B1=B1,
        B2=B2,
        T1=tail_start,
        T2=tail_start,
        D1=float(d1),
        T3=T3,
        K=K,
        T4=T4,
        R=max(r_raw, 0.0) + R_SLACK,
        r_raw=r_raw,
        eta=ETA,
        epsilon=epsilon,
        T_bar=T_bar,
        cov_max=float(cov_max),
        cov_negative_everywhere=bool(cov_max < 0),
        u_4_3=u43,
        grid=grid,
        passed=not diagnostics,
        diagnostics=diagnostics,
    )
    if diagnostics and raise_on_failure:
        raise LemmaViolation(cert)
    return cert
