"""
Dynamic output feedback for a fractional plant of order 0.8
===========================================================

Design controllers of order 0 to 3 for the bundled three-state plant with
positive-real uncertainty, then check each one on the nominal loop and on
50 random admissible uncertainties.
"""

import math

import numpy as np

from focsyn import SynthesisRequest, bundled_example, synthesize

problem = bundled_example("example1")
plant = problem.system
print("open-loop eigenvalues:", np.round(np.linalg.eigvals(plant.A), 3))

# Below order 1 the regime is the complex Hermitian one.
for nc in range(4):
    res = synthesize(SynthesisRequest(plant, nc))
    v = res.verification
    print(f"\nnc={nc}  regime={res.regime}  gamma={res.gamma:.3g}")
    print("  Dc =", np.array2string(res.controller.Dc, precision=4))
    if nc:
        print("  eig(Ac) =", np.round(np.linalg.eigvals(res.controller.Ac), 3))
    print(f"  nominal margin {v.nominal.margin / math.pi:.3f} pi")
    print(f"  monte-carlo {v.montecarlo.passed}/{v.montecarlo.count}, min margin {v.montecarlo.min_margin:.3f}")
