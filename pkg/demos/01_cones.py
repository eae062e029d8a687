"""Cone conditions on Schouten spectra.

The hyperbolic product H^{k+1} x S^{n-k-1} has Schouten spectrum
(-1/2)^k, (1/2)^{n-k}. Its A^(p) spectrum sits exactly on the boundary of
the cone at p = n - 2k + 2, inside it below and outside it above.
"""

import numpy as np

from plaplace.spectra import (
    ConeSpec,
    EigenSpectrum,
    ap_functional,
    ap_spectrum,
    bochner_form_eigenvalue,
    cone_membership,
    model_spectrum,
)

for n, k in [(5, 1), (6, 2), (8, 3)]:
    s = model_spectrum(n, k)
    p0 = n - 2 * k + 2
    print(f"n={n} k={k}: spectrum {s.values}")
    print(f"  A^(p) spectrum at p0={p0}: {ap_spectrum(s, p0).values}")
    for p in (p0 - 0.5, p0, p0 + 0.5):
        print(f"  p={p:4.1f}  functional={ap_functional(s, p):+.4f}  member={cone_membership(s, ConeSpec.ap(p))}")

# The smallest eigenvalue of the Bochner form on r-forms.
lam = EigenSpectrum.from_values([1.0, 1.0, 0.5, -1.0])
for r in (1, 2):
    print(f"Bochner eigenvalue on {r}-forms for {lam.values}: {bochner_form_eigenvalue(lam, r):+.3f}")

# Nesting of the Bochner cones: membership for small r implies it for larger r.
rng = np.random.default_rng(0)
hits = {(1, 2): 0, (2, 1): 0}
for _ in range(20_000):
    s = EigenSpectrum.from_values(rng.normal(size=4))
    m1, m2 = cone_membership(s, ConeSpec.rr(1)), cone_membership(s, ConeSpec.rr(2))
    hits[(1, 2)] += m1 and not m2
    hits[(2, 1)] += m2 and not m1
print(f"R^(1) but not R^(2): {hits[(1, 2)]},  R^(2) but not R^(1): {hits[(2, 1)]}")
