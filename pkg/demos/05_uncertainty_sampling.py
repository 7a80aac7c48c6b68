"""
Sampling positive-real uncertainty
==================================

``Delta = F (I + J F)^-1`` with ``Sym(F) >= 0`` always lands inside the
set ``Delta Sym(J) Delta^T <= Sym(Delta)``.  Sample ``i`` of a sweep with
seed ``s`` can be rebuilt alone from ``(s, i)``.
"""

import numpy as np

from focsyn import SynthesisRequest, bundled_example, draw_sample, monte_carlo, synthesize
from focsyn.model import ControllerRealization
from focsyn.uncertainty import membership_slack, perturb_plant

plant = bundled_example("example1").system
slacks = [membership_slack(draw_sample(plant, 1.0, 0, i).Delta, plant.J) for i in range(2000)]
print(f"membership slack over 2000 samples: min {min(slacks):.2e}")

smp = draw_sample(plant, 1.0, 0, 7)
dA, dB = perturb_plant(plant, smp)
print("sample (0, 7): |dA| =", round(float(np.linalg.norm(dA)), 3), " |dB| =", round(float(np.linalg.norm(dB)), 3))

ctrl = synthesize(SynthesisRequest(plant, 2)).controller
for mag in (1.0, 5.0, 20.0):
    rep = monte_carlo(plant, ctrl, count=200, magnitude=mag, seed=1)
    print(f"magnitude {mag:>4}: {rep.passed}/{rep.count} stable, min margin {rep.min_margin:.3f}")

# flipping the sign of the static gain breaks the loop everywhere
bad = ControllerRealization(ctrl.Ac, ctrl.Bc, ctrl.Cc, -ctrl.Dc)
print("negated Dc:", monte_carlo(plant, bad, count=20).passed, "/ 20 stable")
