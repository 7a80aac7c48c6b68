"""Robust fixed-order output feedback design for fractional-order LTI systems."""

from .fracsim import SimulationConfig, SimulationTrace, mittag_leffler, simulate, simulate_closed_loop
from .lmi import LmiProblem, LmiSolution, Verdict, solve_feasibility
from .model import (
    ClosedLoop,
    ControllerRealization,
    DimensionError,
    FoLtiSystem,
    assemble_closed_loop,
    validate_system,
)
from .problem import Problem, ProblemError, bundled_example, load_problem
from .stability import StabilityReport, lemma1_check, lemma2_check, lmi_check, sector_check
from .synthesis import (
    InfeasibleError,
    SynthesisError,
    SynthesisRequest,
    SynthesisResult,
    synthesize,
    synthesize_certain,
    synthesize_t1,
    synthesize_t2,
)
from .uncertainty import RobustnessReport, draw_sample, make_delta, monte_carlo

__version__ = "0.1.0"
