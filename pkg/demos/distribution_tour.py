"""A walk through the GB3 family in both parameterizations.

Run with ``python3 demos/distribution_tour.py``.
"""

import numpy as np

from gb3reg.gb3 import (
    Gb3Params,
    QuantileGb3Params,
    beta_quantile,
    gb1_pdf,
    gb3_cdf,
    gb3_pdf,
    gb3_quantile,
    gb3_rvs,
    gb3_to_gb1,
    lambda_from_quantile,
    qgb3_quantile,
)

ys = np.array([0.05, 0.25, 0.5, 0.75, 0.95])

print("Densities on a few points; lam = 1 is the ordinary beta law")
for lam in (0.25, 1.0, 4.0):
    p = Gb3Params(lam, 2.0, 2.0)
    print(f"  lam={lam:<5}", " ".join(f"{d:7.4f}" for d in gb3_pdf(ys, p)))

# lam < 1 pushes mass toward 1, lam > 1 toward 0
for lam in (0.25, 4.0):
    p = Gb3Params(lam, 2.0, 2.0)
    print(f"  median at lam={lam}: {gb3_quantile(0.5, p):.4f}")

print("\nQuantile parameterization: mu is the tau-quantile by construction")
qp = QuantileGb3Params(mu=0.03, alpha=2.5, beta=4.0, tau=0.5)
lam = lambda_from_quantile(qp)
print(f"  lam = {lam:.4f}, beta median z = {beta_quantile(0.5, 2.5, 4.0):.4f}")
print(f"  F(mu) = {gb3_cdf(qp.mu, Gb3Params(lam, 2.5, 4.0)):.12f}")
print(f"  90% quantile: {qgb3_quantile(0.9, qp):.5f}")

print("\nSampling as a ratio of gamma variates")
rng = np.random.default_rng(7)
p = Gb3Params(0.5, 3.0, 1.5)
draws = gb3_rvs(p.lam, p.alpha, p.beta, rng, size=20000)
for t in (0.1, 0.5, 0.9):
    print(f"  tau={t}: empirical {np.quantile(draws, t):.4f}  exact {gb3_quantile(t, p):.4f}")

print("\nThe same law written as a GB1 density")
p = Gb3Params(0.7, 2.0, 4.0)
print(f"  GB3 {gb3_pdf(0.25, p):.12f}  GB1 {gb1_pdf(0.25, *gb3_to_gb1(p)):.12f}")
