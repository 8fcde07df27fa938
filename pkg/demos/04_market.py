# %% [markdown]
# # Trading with price impact
#
# Trading at speed ``phi_t`` costs ``lambda |phi_t|^alpha`` per step.  For a
# liquidating strategy the terminal cash never exceeds the pathwise bound
# ``sum G*(S_t)`` given by the convex conjugate of the cost.

# %%
import numpy as np

from negmem import LiquidationViolation, MarketParams, gstar, settle

params = MarketParams(alpha=2.0, lam=1.0)
led = settle([0.0, 1.0, 0.0], [-1.0, 1.0], params)
print(led.to_csv())
print(f"gross {led.gross_pnl}  friction {led.friction}  cash {led.terminal_cash}  bound {led.gstar_bound}")

# %% [markdown]
# The bound holds for any liquidating path, random or not.

# %%
rng = np.random.default_rng(1)
worst = -np.inf
for _ in range(1000):
    S = np.r_[0.0, np.cumsum(rng.normal(size=50))]
    phi = rng.uniform(-2, 2, size=51)
    phi[-1] = -phi[:-1].sum()
    led = settle(S, phi, MarketParams(1.5, 0.1))
    worst = max(worst, led.terminal_cash - led.gstar_bound)
print("max(cash - bound) over 1000 random ledgers:", worst)

# %%
print("G*(y) for alpha=2, lambda=0.25:", gstar(np.array([-2.0, 0.0, 1.0, 2.0]), MarketParams(2.0, 0.25)))

# %% [markdown]
# A strategy that does not return to a flat position is rejected.

# %%
try:
    settle([0.0, 1.0], [1.0, 0.0], params)
except LiquidationViolation as exc:
    print("rejected:", exc)
