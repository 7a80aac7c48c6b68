"""
Orders between one and two: the Kronecker rotation form
=======================================================

The four-state plant has order 1.2.  Plain pseudo-inverse recovery of
the gains loses part of the certificate here, so the synthesis falls back
to the output-constrained problem, and the flags record that.
"""

import numpy as np

from focsyn import SynthesisRequest, assemble_closed_loop, bundled_example, synthesize

plant = bundled_example("example2").system

# first the unconstrained certificate, to see what recovery alone gives
raw = synthesize(SynthesisRequest(plant, 1, retry=False, output_constrained=False))
print("unconstrained: recovery residual", {k: round(v, 3) for k, v in raw.verification.recovery_residual.items()},
      "flags:", raw.flags)

for nc in range(5):
    res = synthesize(SynthesisRequest(plant, nc))
    v = res.verification
    print(f"nc={nc}  flags={res.flags}  margin={v.nominal.margin:.3f} rad  "
          f"residual={max(v.recovery_residual.values()):.1e}  mc={v.montecarlo.passed}/{v.montecarlo.count}")

print("closed-loop eigenvalues at nc=2:")
print(np.round(np.linalg.eigvals(assemble_closed_loop(plant, synthesize(SynthesisRequest(plant, 2)).controller).Acl), 3))
