"""
Three ways to decide fractional stability
=========================================

The eigenvalue sector test is the reference.  The two LMI tests are exact
characterizations of the same property, one per order range.
"""

import math

import numpy as np

from focsyn import sector_check, lmi_check

rot = np.array([[0.0, 1.0], [-1.0, 0.0]])  # eigenvalues +-i
for alpha in (0.8, 1.0, 1.2):
    rep = sector_check(rot, alpha)
    print(f"alpha={alpha}: stable={rep.stable} margin={rep.margin / math.pi:+.2f} pi boundary={rep.boundary}")

r = np.random.default_rng(0)
agree = 0
for i in range(40):
    A = r.standard_normal((3, 3))
    alpha = (0.3, 0.8, 1.1, 1.5)[i % 4]
    agree += lmi_check(A, alpha).stable == sector_check(A, alpha).stable
print(f"LMI and sector verdicts agree on {agree}/40 random matrices")
