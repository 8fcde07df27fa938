# %% [markdown]
# # Contrarian and baseline strategies
#
# The contrarian strategy sells after rises and buys after falls, with size
# ``|S_t|^(1/(alpha-1))``, for the first half of the horizon and unwinds
# at constant speed in the next quarter.  Every generator is adapted and
# liquidating.

# %%
import numpy as np

from negmem import CovarianceModel, MarketParams, Strategy, baselines, contrarian_speeds, sample_paths, settle
from negmem.strategies import contrarian_windows

S = np.array([0.0, 1.0, -2.0, 1.0, 0.7, -0.4, 9.0])
print("phi =", contrarian_speeds(S, 6, 2.0))
print("windows for T=600:", contrarian_windows(600))

# %%
paths = sample_paths(CovarianceModel.fgn(0.25), 600, 500, master_seed=2).S
params = MarketParams(2.0, 0.01)
for kind in ("contrarian", "zero", "hold-liquidate", "random"):
    phi = Strategy(kind, 600, 2.0, seed=5).speeds(paths)
    cash = [settle(paths[i], phi[i], params).terminal_cash for i in range(len(paths))]
    print(f"{kind:>15}: mean cash {np.mean(cash):9.2f}  (se {np.std(cash, ddof=1) / np.sqrt(len(cash)):.2f})")

# %% [markdown]
# Random trading gains nothing on average; contrarian trading earns from
# the negative memory.

# %%
phi = baselines("random", paths[:2], 600, seed=1)
print("random speeds are bounded and closed:", np.abs(phi[:, :-1]).max() <= 1, np.abs(phi.sum(axis=1)).max())
