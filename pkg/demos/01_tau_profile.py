"""How correlated is the response with the slow eigenfeatures?

Build a synthetic set with a known tau, rotate it into eigenfeatures and
look at rho_j^2 against sigma_j^2.
"""
from __future__ import annotations

import numpy as np

from hopt.data import generate_synthetic, tau_bounded_spec
from hopt.spectral import count_above, decompose, export_scatter, measure_tau

spec = tau_bounded_spec(n=2000, d=20, tau=0.5, kappa=1e3, seed=0)
data = generate_synthetic(spec)
print("n, d =", data.n, data.d)

dec = decompose(data)
prof = measure_tau(dec)
print("measured tau:", round(prof.tau, 4))

# the ratio rho^2 / sigma^2 per eigenfeature; the max is tau
table = export_scatter(prof)
print(table.HEADER)
for row in list(table.rows())[:5]:
    print(" ".join(f"{v:.3g}" for v in row))

# r(zeta) counts the "fast" eigenfeatures
for zeta in np.logspace(-3, 0, 4):
    print(f"r({zeta:.0e}) = {count_above(dec, zeta)}")
