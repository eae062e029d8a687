"""Wolff potentials next to capacities of their level sets.

A point mass in R^3 with p = 2 gives a Wolff potential we can integrate in
closed form. The capacity of a ball inside a larger ball has a closed form
too, and the finite element solver reproduces it as the grid is refined.
"""

import numpy as np

from plaplace.capacity import Condenser, Grid, richardson, solve_condenser, spherical_condenser_oracle
from plaplace.geometry import Ball
from plaplace.measures import Atomic
from plaplace.wolff import WolffParams, dirac_wolff, wolff_potential

mu = Atomic.dirac([0.5, 0.0, 0.0])
for p in (1.5, 2.0, 3.0):
    w = wolff_potential(mu, np.zeros(3), WolffParams(p=p, r=1.0))
    print(f"p={p}: W = {w.value:.10f}  closed form {dirac_wolff(3, p, 0.5, 1.0):.10f}  bracket width {w.upper - w.lower:.1e}")

p, r, R = 2.0, 0.5, 1.0
oracle = spherical_condenser_oracle(3, p, r, R)
values, spacings = [], []
for h in (1 / 8, 1 / 16, 1 / 32):
    grid = Grid.from_bounds((-1.0,) * 3, (1.0,) * 3, h)
    res = solve_condenser(Condenser(Ball((0.0,) * 3, r), Ball((0.0,) * 3, R), grid), p)
    values.append(res.value)
    spacings.append(h)
    print(f"h=1/{round(1 / h)}: capacity {res.value:.4f}  oracle {oracle:.4f}  rel err {res.value / oracle - 1:+.3%}")
est = richardson(values, spacings)
print(f"Richardson order {est.order:.2f}, extrapolated {est.extrapolated:.4f}")
