"""Adapted, liquidating trade-speed rules.

Every rule maps a price prefix ``S_0..S_t`` to the trade ``phi_t`` and ends
flat: ``sum_u phi_u = 0`` up to one rounding of the final trade.  All
functions accept a single path (1-D) or a batch of paths (2-D, one per row).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numerics import compensated_rowsum
from .paths import derive_seed

__all__ = ["KINDS", "Strategy", "baselines", "contrarian_speeds", "contrarian_windows", "paper_contrarian"]

KINDS = ("contrarian", "zero", "hold-liquidate", "random")


def contrarian_windows(T: int) -> tuple[int, int]:
    """``(m, 2m)`` with ``m = 3 floor(T/6)``: trade on ``[0, m]``, unwind on ``(m, 2m]``."""
    m = 3 * (T // 6)
    return m, 2 * m


def _close(phi: np.ndarray, last: int) -> np.ndarray:
    # Fold the rounding residual of the position into the final trade.
    phi[..., last] = -compensated_rowsum(np.atleast_2d(phi[..., :last])).reshape(phi.shape[:-1])
    return phi


def contrarian_speeds(S, T: int, alpha: float) -> np.ndarray:
    """Trade against the price sign, then unwind at constant speed.

    With ``m = 3 floor(T/6)``::

        phi_t = -sgn(S_t) |S_t|^{1/(alpha-1)}        0 <= t <= m
        phi_t = -(phi_0 + ... + phi_m) / m           m < t <= 2m
        phi_t = 0                                     otherwise

    ``sgn(0) = 0``, so ``phi_0 = 0`` because ``S_0 = 0``.
    """
    if T < 6:
        raise ValueError(f"T must be at least 6, got {T}")
    if not alpha > 1:
        raise ValueError(f"alpha must exceed 1, got {alpha!r}")
    S = np.asarray(S, dtype=np.float64)
    if S.shape[-1] < T + 1:
        raise ValueError(f"need prices S_0..S_T ({T + 1} values), got {S.shape[-1]}")
    m, end = contrarian_windows(T)
    phi = np.zeros(S.shape[:-1] + (T + 1,))
    active = S[..., : m + 1]
    phi[..., : m + 1] = -np.sign(active) * np.abs(active) ** (1.0 / (alpha - 1.0))
    total = compensated_rowsum(np.atleast_2d(phi[..., : m + 1])).reshape(S.shape[:-1])
    phi[..., m + 1 : end + 1] = (-total / m)[..., None]
    return _close(phi, end) + 0.0  # drop signed zeros


paper_contrarian = contrarian_speeds


def baselines(kind: str, S, T: int, seed: int = 0, path_index: int = 0) -> np.ndarray:
    """Control strategies.

    ``zero`` never trades.  ``hold-liquidate`` buys one share at ``t = 0``
    and sells ``1/T`` per step.  ``random`` trades i.i.d. uniform speeds on
    ``[-1, 1]`` for ``t < T`` and closes at ``T``; row ``i`` of a batch uses
    the seed ``derive_seed(seed, path_index + i)``.
    """
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    S = np.asarray(S, dtype=np.float64)
    shape = S.shape[:-1] + (T + 1,)
    if kind == "zero":
        return np.zeros(shape)
    if kind == "hold-liquidate":
        phi = np.full(shape, -1.0 / T)
        phi[..., 0] = 1.0
        return _close(phi, T)
    if kind == "random":
        phi = np.empty(shape)
        flat = phi.reshape(-1, T + 1)
        for i in range(flat.shape[0]):
            rng = np.random.default_rng(derive_seed(seed, path_index + i))
            flat[i, :T] = rng.uniform(-1.0, 1.0, T)
        return _close(phi, T)
    raise ValueError(f"unknown baseline {kind!r}")


@dataclass(frozen=True)
class Strategy:
    """A trade-speed rule for horizon ``T``."""

    kind: str
    T: int
    alpha: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; choose from {KINDS}")

    def speeds(self, S, path_index: int = 0) -> np.ndarray:
        if self.kind == "contrarian":
            return contrarian_speeds(S, self.T, self.alpha)
        return baselines(self.kind, S, self.T, self.seed, path_index)

    def describe(self) -> dict:
        d = {"kind": self.kind, "T": self.T}
        if self.kind == "contrarian":
            d["alpha"] = self.alpha
        if self.kind == "random":
            d["seed"] = self.seed
        return d
