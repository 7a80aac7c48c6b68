"""
Grunwald-Letnikov simulation against the Mittag-Leffler solution
================================================================

``D^0.8 x = -x, x(0) = 1`` has the solution ``E_0.8(-t^0.8)``.  Halving the
step halves the error.  The same integrator then runs the closed loops.
"""

import numpy as np

from focsyn import SimulationConfig, SynthesisRequest, bundled_example, mittag_leffler, simulate, synthesize
from focsyn.fracsim import simulate_closed_loop, write_trace_csv

t_ref = np.linspace(0, 5, 501)
ref = np.array([mittag_leffler(0.8, -t**0.8) for t in t_ref])
prev = None
for h in (2e-3, 1e-3, 5e-4):
    tr = simulate([[-1.0]], 0.8, SimulationConfig(5.0, h, [1.0]))
    stride = int(round(0.01 / h))
    err = np.max(np.abs(tr.states[::stride, 0] - ref))
    print(f"h={h:.0e}: max error {err:.2e}" + ("" if prev is None else f"  (ratio {prev / err:.2f})"))
    prev = err

for name in ("example1", "example2", "example3"):
    prob = bundled_example(name)
    ctrl = synthesize(SynthesisRequest(prob.system, 1)).controller
    sim = prob.simulation
    cfg = SimulationConfig(sim["t_end"], sim["h"], list(sim["x0"]) + [0.0])
    tr = simulate_closed_loop(prob.system, ctrl, cfg)
    norms = np.linalg.norm(tr.states, axis=1) / np.linalg.norm(tr.states[0])
    marks = [int(k / sim["h"]) for k in (1, 2, 5, sim["t_end"])]
    print(name, "relative |x| at t=1,2,5,end:", np.round(norms[marks], 4), " peak |u|:",
          round(float(np.max(np.abs(tr.control))), 2))
    if name == "example1":
        write_trace_csv(tr, "example1_trace.csv")
