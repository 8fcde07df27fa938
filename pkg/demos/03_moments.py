# %% [markdown]
# # Second-order moments and the bound certificate
#
# `SecondOrderTable` computes ``var(S_t)`` exactly from the covariance, and
# `certify_lemmas` records constants for the variance sandwich and for the
# negative covariance between a future increment and the current price.

# %%
from negmem import CovarianceModel, SecondOrderTable, analytic_profit_terms, certify_lemmas, q_of_t, rho

fgn = CovarianceModel.fgn(0.25)
table = SecondOrderTable(fgn, 4096)
for t in (1, 10, 100, 4096):
    print(f"var(S_{t}) = {table.var[t]:.10f}   t^(2H) = {t ** 0.5:.10f}")

# %%
for s, t in ((30, 10), (1000, 500), (10_000, 10)):
    print(f"rho({s},{t}) = {rho(fgn, s, t):.4f}   cov(S_s - S_t, S_t) = {table.cov(s, t) if s <= table.T else float('nan'):.4f}")

# %%
cert = certify_lemmas(fgn, 10_000)
print(f"B1={cert.B1:.12f}  B2={cert.B2:.12f}  K={cert.K}  R={cert.R:.1e}")
print(f"eps={cert.epsilon:.4f}  eta={cert.eta:.4f}  max cov={cert.cov_max:.4f}  grid={cert.grid}")

# %% [markdown]
# Closed-form expected terms of the contrarian strategy.  ``lower`` is a
# lower bound on expected terminal cash; it stays positive for small
# friction and grows with the horizon.

# %%
for T in (600, 1200, 2400):
    p = analytic_profit_terms(fgn, T, 2.0, 0.01)
    print(f"T={T}: E I1={p.ei1:10.1f}  E I3={p.ei3:8.1f}  lower={p.lower:10.1f}  Q(T)={q_of_t(fgn, T, 2.0):10.1f}")
