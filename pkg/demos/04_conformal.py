"""Conformally flat metrics singular along a plane.

The metric d^-2 |dx|^2, with d the distance to a (k-1)-plane, is the
hyperbolic product H^k x S^(n-k). Its A^(p) spectrum is non-negative at
p = n - 2k + 2 and the conformal length of rays into the plane diverges, so
the metric is complete. Box counting recovers the dimension k - 1 of the
singular plane.
"""

import numpy as np

from plaplace.conformal import LogForm, conformal_ray_length, curvature_at
from plaplace.dimension import theorem4_experiment

n, k = 5, 2
f = LogForm.plane_log(n, k)
x = np.array([0.3, -0.2, 0.4, 0.1, 0.2])
rep = curvature_at(f, x, n - 2 * k + 2)
print(f"Schouten spectrum  {np.round(rep.schouten_spectrum.values, 12)}")
print(f"A^(p) spectrum     {np.round(rep.ap_spectrum.values, 12)}")

# The singular set is the x1-axis. Rays leave its point (0.2, 0, 0, 0, 0).
foot = np.array([0.2, 0.0, 0.0, 0.0, 0.0])
for theta in ([0.0, 0.1, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0, 1.0]):
    ray = conformal_ray_length(f, (foot, np.array(theta), 0.0, 1.0))
    print(f"ray from the singular line along {theta}: length={ray.length} exponent={ray.local_exponent:.3f}")

# A ray parallel to the axis stays at distance 1 and has unit density.
side = conformal_ray_length(f, (np.array([0.0, 0.0, 0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0, 0.0, 0.0]), 0.0, 1.0))
print(f"ray parallel to it: length={side.length:.4f} divergent={side.divergent}")

out = theorem4_experiment({"n": n, "k": k, "n_points": 100, "n_rays": 4, "count": 4000})
print(f"experiment ok={out['ok']}, singular-set dimension {out['checks']['dimension']['dim']:.3f}")
