"""Stationary covariance sequences for the increment process.

A :class:`CovarianceModel` describes ``r(t) = cov(Z_0, Z_t)`` for a
zero-mean stationary Gaussian sequence ``Z``.  Two kinds are supported:

* fractional Gaussian noise (``kind="fgn"``) with Hurst index ``H < 1/2``,
* an explicit finite table of lags ``r(0), r(1), ...`` (``kind="explicit"``).

:func:`verify_assumption` checks numerically, over a finite lag window,
that a model has *negative memory*: a strictly negative power-law tail
``J1 t^chi <= r(t) <= J2 t^chi`` with ``chi`` in ``(-2, -1)`` and partial
sums ``sum_{|t| <= N} r(t)`` that decay to zero.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "AssumptionReport",
    "CovarianceModel",
    "fgn_covariance",
    "geometric_lags",
    "partial_sum",
    "verify_assumption",
]

# Lags at or beyond this use the binomial series for the FGN second difference.
_SERIES_CUTOFF = 3
_SERIES_TERMS = 24


def _fgn_unit(hurst: float, lags: np.ndarray) -> np.ndarray:
    """FGN autocovariance with unit variance at integer lags >= 0."""
    a = 2.0 * hurst
    k = lags.astype(np.float64)
    out = np.empty_like(k)

    near = lags < _SERIES_CUTOFF
    kn = k[near]
    out[near] = 0.5 * ((kn + 1.0) ** a - 2.0 * kn**a + np.abs(kn - 1.0) ** a)

    # (1+x)^a + (1-x)^a - 2 = 2 * sum_j binom(a, 2j) x^(2j), x = 1/k.  The
    # direct formula cancels catastrophically once k^a >> |r(k)|.
    far = ~near
    if np.any(far):
        kf = k[far]
        x2 = kf**-2.0
        coef = 1.0
        total = np.zeros_like(kf)
        power = np.ones_like(kf)
        for n in range(1, 2 * _SERIES_TERMS + 1):
            coef *= (a - n + 1) / n
            if n % 2 == 0:
                power = power * x2
                total += coef * power
        out[far] = kf**a * total
    return out


def fgn_covariance(hurst: float, variance_scale: float, lag):
    """Autocovariance of fractional Gaussian noise.

    ``variance_scale * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2``, evaluated
    with a series expansion at large lags so that the tail keeps full
    relative precision.  Accepts a scalar or an array of integer lags.
    """
    _check_hurst(hurst)
    if not variance_scale > 0:
        raise ValueError(f"variance_scale must be positive, got {variance_scale!r}")
    lags = np.abs(np.asarray(lag, dtype=np.int64))
    vals = variance_scale * _fgn_unit(hurst, np.atleast_1d(lags))
    if np.ndim(lag) == 0:
        return float(vals[0])
    return vals.reshape(lags.shape)


def _check_hurst(hurst: float) -> None:
    if not 0.0 < hurst < 0.5:
        raise ValueError(
            f"hurst must lie in (0, 1/2) for a negative-memory model, got {hurst!r}"
        )


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """A stationary covariance sequence ``r(t)``.

    Build instances with :meth:`fgn`, :meth:`explicit` or :meth:`from_file`.
    Explicit tables are evaluated beyond their last lag only when marked
    ``compact`` (then ``r(t) = 0`` there); otherwise such lags raise.

    Tail metadata (``chi``, ``j1``, ``j2``, ``t0``) is exact for FGN where
    known and otherwise filled from an :class:`AssumptionReport` through
    :meth:`with_tail`.
    """

    kind: str
    variance_scale: float
    hurst: float | None = None
    values: np.ndarray | None = None
    compact: bool = False
    chi: float | None = None
    j1: float | None = None
    j2: float | None = None
    t0: int | None = None

    @classmethod
    def fgn(cls, hurst: float, variance_scale: float = 1.0) -> CovarianceModel:
        _check_hurst(hurst)
        if not variance_scale > 0:
            raise ValueError(f"variance_scale must be positive, got {variance_scale!r}")
        return cls("fgn", float(variance_scale), hurst=float(hurst), chi=2.0 * hurst - 2.0)

    @classmethod
    def explicit(cls, values, compact: bool = False) -> CovarianceModel:
        vals = np.array(values, dtype=np.float64).ravel()
        if vals.size == 0:
            raise ValueError("explicit covariance needs at least r(0)")
        if not np.all(np.isfinite(vals)):
            raise ValueError("explicit covariance contains non-finite values")
        if not vals[0] > 0:
            raise ValueError(f"r(0) must be positive, got {vals[0]!r}")
        vals.setflags(write=False)
        return cls("explicit", float(vals[0]), values=vals, compact=bool(compact))

    @classmethod
    def from_file(cls, path, compact: bool = False) -> CovarianceModel:
        """Load a one-column text file holding ``r(0), r(1), ...`` in lag order."""
        vals = np.loadtxt(path, dtype=np.float64, ndmin=1, comments="#")
        if vals.ndim != 1:
            raise ValueError(f"{path}: expected a single numeric column")
        return cls.explicit(vals, compact=compact)

    @property
    def max_lag(self) -> int | None:
        """Largest evaluable lag, or ``None`` if unbounded."""
        if self.kind == "fgn" or self.compact:
            return None
        return int(self.values.size - 1)

    def __call__(self, lag):
        """Evaluate ``r`` at integer lag(s); symmetric in the sign of the lag."""
        lags = np.abs(np.asarray(lag, dtype=np.int64))
        if self.kind == "fgn":
            return fgn_covariance(self.hurst, self.variance_scale, lag)
        flat = np.atleast_1d(lags)
        n = self.values.size
        if flat.size and flat.max() >= n and not self.compact:
            raise ValueError(
                f"lag {int(flat.max())} beyond the explicit table (max lag {n - 1}); "
                "mark the model compact to zero-extend it"
            )
        out = np.zeros(flat.shape, dtype=np.float64)
        inside = flat < n
        out[inside] = self.values[flat[inside]]
        if np.ndim(lag) == 0:
            return float(out[0])
        return out.reshape(lags.shape)

    def sequence(self, n_lags: int) -> np.ndarray:
        """``r(0), ..., r(n_lags)`` as an array."""
        return np.asarray(self(np.arange(n_lags + 1)), dtype=np.float64)

    def with_tail(self, report: AssumptionReport) -> CovarianceModel:
        return replace(
            self,
            chi=self.chi if self.kind == "fgn" else report.chi_fit,
            j1=report.j1,
            j2=report.j2,
            t0=report.t0,
        )

    def describe(self) -> dict:
        """JSON-friendly description used in headers and manifests."""
        d = {"kind": self.kind, "variance_scale": self.variance_scale}
        if self.kind == "fgn":
            d["hurst"] = self.hurst
        else:
            d["n_lags"] = int(self.values.size)
            d["compact"] = self.compact
        return d


def partial_sum(model: CovarianceModel, N: int) -> float:
    """Symmetric partial sum ``r(0) + 2 * sum_{t=1}^{N} r(t)``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    r = model.sequence(N)
    return math.fsum([r[0], *(2.0 * r[1:])])


def geometric_lags(lo: int, hi: int, per_decade: int = 40) -> np.ndarray:
    """Distinct integer lags spaced geometrically on ``[lo, hi]``."""
    if not 1 <= lo < hi:
        raise ValueError(f"need 1 <= lo < hi, got [{lo}, {hi}]")
    n = max(2, int(math.ceil(per_decade * math.log10(hi / lo))) + 1)
    return np.unique(np.rint(np.geomspace(lo, hi, n)).astype(np.int64))


@dataclass
class AssumptionReport:
    """Outcome of :func:`verify_assumption`."""

    chi_fit: float
    j1: float
    j2: float
    t0: int
    passed: bool
    window: tuple[int, int]
    checks: dict = field(default_factory=dict)
    partial_sum_slope: float = float("nan")
    zero_sum_residual: float = float("nan")
    diagnostics: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chi_fit": self.chi_fit,
            "j1": self.j1,
            "j2": self.j2,
            "t0": self.t0,
            "pass": self.passed,
            "window": list(self.window),
            "checks": dict(self.checks),
            "partial_sum_slope": self.partial_sum_slope,
            "zero_sum_residual": self.zero_sum_residual,
            "diagnostics": list(self.diagnostics),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(_finite_or_none(self.to_dict()), **kw)

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(indent=2) + "\n")


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    return obj


def _ols_slope(x: np.ndarray, y: np.ndarray) -> float:
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def verify_assumption(
    model: CovarianceModel, lag_range: tuple[int, int] = (10, 100_000)
) -> AssumptionReport:
    """Certify negative memory of ``model`` over ``lag_range``.

    The tail exponent is fitted by least squares of ``log|r(t)|`` on
    ``log t`` at geometrically spaced lags.  ``(J1, J2)`` is the tightest
    sandwich of ``r(t) / t^chi`` over every integer lag from ``max(T0, lo)``
    to ``hi``; ``T0`` is the smallest lag from which ``r`` stays strictly
    negative up to ``hi``.  The report fails (it does not raise) when the
    tail has a nonnegative value, the fitted exponent is outside
    ``(-2, -1)``, or the symmetric partial sums do not decay.
    """
    lo, hi = int(lag_range[0]), int(lag_range[1])
    if lo < 1 or hi < 100 * lo:
        raise ValueError(f"lag_range must span at least two decades, got [{lo}, {hi}]")
    if model.max_lag is not None and hi > model.max_lag:
        raise ValueError(
            f"lag_range reaches {hi} but the explicit table ends at lag {model.max_lag}"
        )

    r = model.sequence(hi)
    diagnostics = []
    checks = {}

    nonneg = np.flatnonzero(r[1:] >= 0.0) + 1
    t0 = int(nonneg[-1] + 1) if nonneg.size else 1
    tail = r[lo : hi + 1]
    checks["tail_negative"] = bool(np.all(tail < 0.0))
    if not checks["tail_negative"]:
        bad = int(nonneg[nonneg >= lo][0])
        diagnostics.append(f"r({bad}) = {float(r[bad])!r} is not strictly negative")

    lags = geometric_lags(lo, hi)
    mags = np.abs(r[lags])
    usable = mags > 0
    if usable.sum() >= 2:
        chi = _ols_slope(np.log(lags[usable]), np.log(mags[usable]))
    else:
        chi = float("nan")
    checks["chi_in_range"] = bool(-2.0 < chi < -1.0)
    if not checks["chi_in_range"]:
        diagnostics.append(f"fitted tail exponent {chi!r} outside (-2, -1)")

    start = max(t0, lo)
    if math.isfinite(chi) and start <= hi:
        t = np.arange(start, hi + 1, dtype=np.float64)
        ratio = r[start : hi + 1] / t**chi
        j1, j2 = float(ratio.min()), float(ratio.max())
    else:
        j1 = j2 = float("nan")
    checks["sandwich_negative"] = bool(j1 <= j2 < 0.0)
    if not checks["sandwich_negative"] and checks["tail_negative"]:
        diagnostics.append(f"no negative sandwich: J1={j1!r}, J2={j2!r}")

    # Symmetric partial sums P_N = r(0) + 2 sum_{1..N} r(t) must shrink to zero.
    cums = r[0] + 2.0 * np.cumsum(r[1:])
    p = np.abs(cums[lags - 1])
    floor = 1e-14 * r[0]
    if np.all(p <= floor):
        ps_slope = float("-inf")
        checks["partial_sum_decay"] = True
    else:
        pos = p > floor
        ps_slope = _ols_slope(np.log(lags[pos]), np.log(p[pos])) if pos.sum() >= 2 else float("nan")
        checks["partial_sum_decay"] = bool(ps_slope < 0.0 and p[-1] < p[0])
    if not checks["partial_sum_decay"]:
        diagnostics.append(
            f"partial sums do not decay: |P({lags[0]})|={float(p[0])!r}, |P({lags[-1]})|={float(p[-1])!r}"
        )
    zero_sum_residual = float(cums[-1] / r[0])

    return AssumptionReport(
        chi_fit=chi,
        j1=j1,
        j2=j2,
        t0=t0,
        passed=all(checks.values()),
        window=(lo, hi),
        checks=checks,
        partial_sum_slope=ps_slope,
        zero_sum_residual=zero_sum_residual,
        diagnostics=diagnostics,
    )
