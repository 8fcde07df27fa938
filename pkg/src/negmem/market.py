"""Cash ledger of a single risky asset under temporary power-law price impact.

Trading ``phi_u`` shares at time ``u`` costs ``phi_u * S_u`` plus an impact
charge ``lam * |phi_u|^alpha``.  A strategy is *liquidating* when the share
position returns to zero, ``sum_u phi_u = 0``; its terminal cash is then

    X_T = -sum_{u=0}^{T} phi_u S_u - lam * sum_{u=0}^{T} |phi_u|^alpha.

For any liquidating strategy, ``X_T <= sum_t G*(-S_t)`` path by path, where
``G*`` is the convex conjugate of ``x -> lam |x|^alpha``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._numerics import compensated_rowsum

__all__ = [
    "LedgerReport",
    "LiquidationViolation",
    "MarketParams",
    "frictionless_check",
    "gstar",
    "gstar_constant",
    "settle",
    "settle_batch",
]


class LiquidationViolation(ValueError):
    """The strategy leaves a nonzero share position at ``T + 1``."""

    def __init__(self, residual, tolerance):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"strategy is not liquidating: Phi_(T+1) = {residual!r} exceeds tolerance {tolerance!r}"
        )


@dataclass(frozen=True)
class MarketParams:
    alpha: float
    lam: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"impact exponent alpha must exceed 1, got {self.alpha!r}")
        if not self.lam > 0:
            raise ValueError(f"impact scale lambda must be positive, got {self.lam!r}")


def gstar_constant(params: MarketParams) -> float:
    """``C`` in ``G*(y) = C |y|^{alpha/(alpha-1)}``."""
    a, lam = params.alpha, params.lam
    return (a - 1.0) / a * a ** (1.0 / (1.0 - a)) * lam ** (1.0 / (1.0 - a))


def gstar(y, params: MarketParams):
    """Convex conjugate ``sup_x (x y - lam |x|^alpha)``."""
    p = params.alpha / (params.alpha - 1.0)
    out = gstar_constant(params) * np.abs(np.asarray(y, dtype=np.float64)) ** p
    return float(out) if np.ndim(out) == 0 else out


def _liquidation_tolerance(phi) -> float:
    return 1e-9 * max(1.0, math.fsum(np.abs(phi)))


@dataclass
class LedgerReport:
    prices: np.ndarray
    phi: np.ndarray
    Phi: np.ndarray
    gross_pnl: float
    friction: float
    terminal_cash: float
    gstar_bound: float
    params: MarketParams

    def rows(self):
        """``(t, S_t, phi_t, Phi_t, running_cash)`` for ``t = 0..T+1``."""
        T = self.phi.size - 1
        cash = 0.0
        out = []
        for t in range(T + 2):
            s = float(self.prices[t]) if t < self.prices.size else float("nan")
            if t <= T:
                f = float(self.phi[t])
                cash -= f * s + self.params.lam * abs(f) ** self.params.alpha
                out.append((t, s, f, float(self.Phi[t]), cash))
            else:
                out.append((t, s, None, float(self.Phi[t]), cash))
        return out

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "S_t", "phi_t", "Phi_t", "running_cash"])
        for t, s, f, big, cash in self.rows():
            w.writerow([t, "" if math.isnan(s) else repr(s), "" if f is None else repr(f), repr(big), repr(cash)])
        if path is None:
            return buf.getvalue()
        Path(path).write_text(buf.getvalue())
        return None


def settle(prices, phi, params: MarketParams, liquidation_tolerance: float | None = None) -> LedgerReport:
    """Terminal cash and friction of a liquidating trade-speed sequence.

    ``prices`` holds ``S_0..S_T`` and optionally ``S_{T+1}``; ``phi`` holds
    ``phi_0..phi_T``.  Sums are exactly rounded (``math.fsum``).
    """
    phi = np.asarray(phi, dtype=np.float64)
    prices = np.asarray(prices, dtype=np.float64)
    T = phi.size - 1
    if T < 0:
        raise ValueError("phi must hold at least phi_0")
    if prices.size not in (T + 1, T + 2):
        raise ValueError(f"expected {T + 1} or {T + 2} prices for {T + 1} trades, got {prices.size}")
    tol = _liquidation_tolerance(phi) if liquidation_tolerance is None else liquidation_tolerance
    residual = math.fsum(phi)
    if abs(residual) > tol:
        raise LiquidationViolation(residual, tol)

    S = prices[: T + 1]
    Phi = np.concatenate([[0.0], np.cumsum(phi)])
    gross = -math.fsum(phi * S)
    friction = params.lam * math.fsum(np.abs(phi) ** params.alpha)
    return LedgerReport(
        prices=prices,
        phi=phi,
        Phi=Phi,
        gross_pnl=gross,
        friction=friction,
        terminal_cash=gross - friction,
        gstar_bound=math.fsum(gstar(-S, params)),
        params=params,
    )


def settle_batch(S: np.ndarray, phi: np.ndarray, alpha: float):
    """Row-wise ledger totals for a batch of paths.

    Returns ``(gross, impact, residual)`` where ``impact`` is
    ``sum |phi|^alpha`` without the ``lam`` factor, so the terminal cash for
    any impact scale is ``gross - lam * impact``.  Signed sums are
    compensated; the impact sum has no cancellation and is summed pairwise.
    """
    T1 = phi.shape[1]
    S = S[:, :T1]
    gross = -compensated_rowsum(phi * S)
    impact = (np.abs(phi) ** alpha).sum(axis=1)
    residual = compensated_rowsum(phi)
    return gross, impact, residual


def frictionless_check(prices, phi, rtol: float = 1e-12) -> float:
    """Frictionless cash ``sum_{u=1}^{T+1} Phi_u (S_u - S_{u-1})``.

    Needs ``S_0..S_{T+1}``.  Raises ``ArithmeticError`` unless it matches the
    summation-by-parts form ``-sum phi_u S_u + S_{T+1} sum phi_u``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    S = np.asarray(prices, dtype=np.float64)
    T = phi.size - 1
    if S.size != T + 2:
        raise ValueError(f"need {T + 2} prices S_0..S_(T+1), got {S.size}")
    Phi = np.cumsum(phi)  # Phi_1..Phi_{T+1}
    wealth = math.fsum(Phi * np.diff(S))
    by_parts = math.fsum(np.concatenate([-(phi * S[:-1]), [S[-1] * math.fsum(phi)]]))
    scale = math.fsum(np.abs(Phi * np.diff(S))) + math.fsum(np.abs(phi * S[:-1])) + 1.0
    if abs(wealth - by_parts) > rtol * scale:
        raise ArithmeticError(f"summation by parts mismatch: {wealth!r} vs {by_parts!r}")
    return wealth
