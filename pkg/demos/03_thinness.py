"""Thinness of ball chains accumulating at the origin.

A chain of balls B(2^-i e1, c 2^-(a i)) is p-thin at 0 when the radii shrink
faster than the dyadic annuli, and fat when they are comparable. Thin sets
leave escape rays to the origin, which we search for and verify. A fat
chain can still miss some rays, since it only fills one direction.
"""

import numpy as np

from plaplace.thinness import ball_chain, find_escape_ray, p_thin_partial_sums

x0 = np.zeros(3)
for a, c in [(2.0, 1.0), (1.0, 0.25)]:
    E = ball_chain(a, c, n=3, i_max=8)
    res = p_thin_partial_sums(E, x0, 2.0, range(1, 9))
    terms = ", ".join(f"{t:.3g}" for t in res.terms)
    print(f"chain a={a} c={c}: terms [{terms}]")
    print(f"  verdict: {res.verdict.status} ({res.verdict.reason})")
    esc = find_escape_ray(E, x0, 1.0, n_directions=256)
    print(f"  escape ray found={esc.found} verified={esc.verified}")
