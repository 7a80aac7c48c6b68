"""Command-line front end: ``focsyn synthesize|analyze|simulate|montecarlo``.

Exit codes: 0 success, 1 input error, 2 infeasible (no certificate),
3 controller recovered but not verified, 4 Monte-Carlo robustness failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
import warnings
from typing import Any, Optional, Sequence

import numpy as np

from . import lmi
from .fracsim import SimulationConfig, atomic_write, simulate_closed_loop, write_trace_csv
from .model import DimensionError, assemble_closed_loop
from .problem import (
    ProblemError,
    controller_from_dict,
    controller_to_dict,
    load_problem,
    load_report,
    write_report,
)
from .stability import lmi_check, sector_check
from .synthesis import (
    InfeasibleError,
    SolverError,
    SynthesisError,
    SynthesisRequest,
    regime_for,
    synthesize_certain,
    synthesize_t1,
    synthesize_t2,
)
from .uncertainty import monte_carlo

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_UNVERIFIED, EXIT_ROBUSTNESS = 0, 1, 2, 3, 4
EPS_ENV = "FOCSYN_SOLVER_EPS"

DISPATCH = {"theorem1": synthesize_t1, "theorem2": synthesize_t2, "corollary1": synthesize_certain}


class InputError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"focsyn: {msg}", file=sys.stderr)


def _epsilon(problem_eps: Any) -> float:
    raw = os.environ.get(EPS_ENV)
    if raw is not None:
        try:
            eps = float(raw)
        except ValueError:
            raise InputError(f"{EPS_ENV}={raw!r} is not a number") from None
    elif problem_eps is not None:
        eps = float(problem_eps)
    else:
        eps = lmi.DEFAULT_EPSILON
    if not eps > 0 or not math.isfinite(eps):
        raise InputError(f"epsilon must be a positive number, got {eps}")
    return eps


def _load(path: str, lenient: bool):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prob = load_problem(path, strict=not lenient)
    for w in caught:
        _err(f"warning: {w.message}")
    return prob


def _vector(text: str) -> list[float]:
    text = text.strip()
    try:
        vals = json.loads(text) if text.startswith("[") else [float(v) for v in text.split(",")]
        return [float(v) for v in vals]
    except (ValueError, TypeError):
        raise InputError(f"cannot parse vector {text!r}") from None


def _fmt_pi(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x / math.pi:.4g}π"


def cmd_synthesize(args: argparse.Namespace) -> int:
    prob = _load(args.problem, args.lenient)
    nc = args.nc if args.nc is not None else prob.synthesis.get("nc")
    if nc is None:
        raise InputError("controller order not given (use --nc or synthesis.nc)")
    if nc < 0:
        raise InputError("nc must be ≥ 0")
    mc = prob.montecarlo
    req = SynthesisRequest(
        prob.system,
        nc,
        epsilon=_epsilon(prob.synthesis.get("epsilon")),
        mc_count=int(mc.get("count", 50)),
        mc_magnitude=float(mc.get("magnitude", 1.0)),
        mc_seed=int(mc.get("seed", 0)),
    )
    regime = regime_for(prob.system)
    report: dict[str, Any] = {
        "command": "synthesize",
        "problem": os.path.basename(args.problem),
        "alpha": prob.system.alpha,
        "regime": regime,
        "nc": nc,
        "epsilon": req.epsilon,
    }
    t0 = time.perf_counter()
    try:
        res = DISPATCH[regime](req)
    except InfeasibleError as exc:
        report.update(feasibility="infeasible", solver_status=exc.solution.status,
                      timings={"synthesis_s": time.perf_counter() - t0})
        _finish(report, args.out)
        _err(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    except SolverError as exc:
        report.update(feasibility="inconclusive", solver_status=exc.solution.status,
                      timings={"synthesis_s": time.perf_counter() - t0})
        _finish(report, args.out)
        _err(f"no certificate: {exc}")
        return EXIT_INFEASIBLE
    elapsed = time.perf_counter() - t0
    v = res.verification
    report.update(
        feasibility="feasible",
        solver_status=res.certificate.status,
        solver_margin=res.certificate.margin,
        epsilon=res.epsilon,
        gamma=res.gamma,
        flags=list(res.flags),
        verified=res.verified,
        controller=controller_to_dict(res.controller),
        nominal_margin=v.nominal.margin,
        nominal_margin_over_pi=v.nominal.margin_over_pi,
        certificate_residual=v.certificate_residual,
        recovery_residual=dict(v.recovery_residual),
        montecarlo=None if v.montecarlo is None else v.montecarlo.to_dict(),
        timings={"synthesis_s": elapsed},
    )
    _finish(report, args.out)
    status = "verified" if res.verified else "UNVERIFIED"
    print(f"{regime} nc={nc}: {status}, nominal margin {_fmt_pi(v.nominal.margin)}, "
          f"recovery residual {max(v.recovery_residual.values(), default=0.0):.3g}")
    if v.montecarlo is not None:
        print(f"monte-carlo: {v.montecarlo.passed}/{v.montecarlo.count} stable")
    if not res.verified:
        _err("recovered controller failed verification: " + ", ".join(res.flags))
        return EXIT_UNVERIFIED
    return EXIT_OK


def _finish(report: dict[str, Any], out: Optional[str]) -> None:
    if out:
        write_report(report, out)


def _matrix_arg(text: str) -> np.ndarray:
    try:
        arr = np.array(json.loads(text), dtype=float)
    except (ValueError, TypeError):
        raise InputError(f"cannot parse matrix {text!r}") from None
    return np.atleast_2d(arr)


def cmd_analyze(args: argparse.Namespace) -> int:
    target = args.target
    if os.path.exists(target):
        prob = _load(target, args.lenient)
        A, alpha = np.asarray(prob.system.A), prob.system.alpha
        if args.report:
            ctrl = controller_from_dict(load_report(args.report)["controller"])
            A = np.asarray(assemble_closed_loop(prob.system, ctrl).Acl)
        if args.alpha is not None:
            alpha = args.alpha
    else:
        A = _matrix_arg(target)
        if args.alpha is None:
            raise InputError("--alpha is required with a matrix literal")
        alpha = args.alpha
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"square matrix required, got shape {A.shape}")
    if not (0 < alpha < 2):
        raise InputError(f"alpha out of range: {alpha} not in (0, 2)")
    rep = sector_check(A, alpha)
    print("eigenvalues: " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in rep.eigenvalues))
    verdict = "stable" if rep.stable else "unstable"
    extra = " (on the sector boundary)" if rep.boundary else ""
    print(f"{verdict}, margin {_fmt_pi(rep.margin)}{extra}")
    if args.method == "lemma":
        try:
            lem = lmi_check(A, alpha, epsilon=_epsilon(None))
        except RuntimeError as exc:
            _err(str(exc))
            return EXIT_OK
        agree = "agrees" if lem.stable == rep.stable else "DISAGREES"
        print(f"{lem.method}: {'stable' if lem.stable else 'unstable'} ({agree})")
    return EXIT_OK


def _controller(problem, report_path: str):
    ctrl = controller_from_dict(load_report(report_path)["controller"])
    if ctrl.Dc.shape != (problem.system.l, problem.system.m):
        raise InputError(
            f"controller is {ctrl.l}x{ctrl.m} but the plant needs {problem.system.l}x{problem.system.m}"
        )
    return ctrl


def cmd_simulate(args: argparse.Namespace) -> int:
    prob = _load(args.problem, args.lenient)
    ctrl = _controller(prob, args.report)
    sim = prob.simulation
    n, d = prob.system.n, prob.system.n + ctrl.nc
    x0 = _vector(args.x0) if args.x0 is not None else sim.get("x0", [1.0] * n)
    if len(x0) == n:
        x0 = list(x0) + [0.0] * ctrl.nc  # controller starts at rest
    if len(x0) != d:
        raise InputError(f"x0 must have {n} (plant) or {d} (plant + controller) entries, got {len(x0)}")
    h = args.h if args.h is not None else float(sim.get("h", 1e-3))
    t_end = args.t_end if args.t_end is not None else float(sim.get("t_end", 10.0))
    try:
        cfg = SimulationConfig(t_end=t_end, h=h, x0=x0, memory=args.memory)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        trace = simulate_closed_loop(prob.system, ctrl, cfg)
    for w in caught:
        _err(f"warning: {w.message}")
    if args.out:
        write_trace_csv(trace, args.out)
        if args.gnuplot:
            atomic_write(args.gnuplot, gnuplot_script(args.out, d, prob.system.m, prob.system.l))
    ratio = trace.final_ratio()
    flag = " diverged" if trace.diverged() else ""
    _err(f"simulated {cfg.steps} steps, t_end={t_end:g}, final |x|/|x0| = {ratio:.3g}{flag}")
    return EXIT_OK


def gnuplot_script(csv_path: str, d: int, m: int, l: int) -> str:  # noqa: E741
    name = os.path.basename(csv_path)
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set xlabel 't'",
        "set multiplot layout 2,1",
        "set title 'states'",
        "plot " + ", ".join(f"'{name}' using 1:{2 + i} with lines" for i in range(d)),
        "set title 'control'",
        "plot " + ", ".join(f"'{name}' using 1:{2 + d + m + i} with lines" for i in range(l)),
        "unset multiplot",
    ]
    return "\n".join(lines) + "\n"


def cmd_montecarlo(args: argparse.Namespace) -> int:
    prob = _load(args.problem, args.lenient)
    if prob.system.certain:
        raise InputError("the problem has no uncertainty block")
    ctrl = _controller(prob, args.report)
    mc = prob.montecarlo
    count = args.count if args.count is not None else int(mc.get("count", 50))
    seed = args.seed if args.seed is not None else int(mc.get("seed", 0))
    mag = args.magnitude if args.magnitude is not None else float(mc.get("magnitude", 1.0))
    if count < 0 or mag < 0:
        raise InputError("count and magnitude must be >= 0")
    t0 = time.perf_counter()
    rob = monte_carlo(prob.system, ctrl, count, mag, seed)
    report = {
        "command": "montecarlo",
        "problem": os.path.basename(args.problem),
        "controller_report": os.path.basename(args.report),
        "controller": controller_to_dict(ctrl),
        "montecarlo": rob.to_dict(),
        "timings": {"montecarlo_s": time.perf_counter() - t0},
    }
    _finish(report, args.out)
    print(f"monte-carlo: {rob.passed}/{rob.count} stable (seed {seed}, magnitude {mag:g})")
    if not rob.all_stable:
        _err("unstable samples (seed, index): " + ", ".join(f"({seed}, {i})" for i in rob.failing))
        return EXIT_ROBUSTNESS
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="focsyn", description=__doc__.splitlines()[0])
    p.add_argument("--lenient", action="store_true", help="warn about unknown problem keys instead of failing")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synthesize", help="design and verify a controller")
    s.add_argument("problem")
    s.add_argument("--nc", type=int, help="controller order (default: synthesis.nc)")
    s.add_argument("--out", help="write a JSON run report here")
    s.set_defaults(func=cmd_synthesize)

    a = sub.add_parser("analyze", help="eigenvalue sector test of a matrix or problem")
    a.add_argument("target", help="problem file or a JSON matrix literal such as '[[-1]]'")
    a.add_argument("--alpha", type=float)
    a.add_argument("--report", help="analyze the closed loop with this report's controller")
    a.add_argument("--method", choices=("sector", "lemma"), default="sector")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("simulate", help="Grunwald-Letnikov closed-loop trace")
    m.add_argument("problem")
    m.add_argument("report")
    m.add_argument("--x0", help="initial state, comma separated or a JSON list")
    m.add_argument("--h", type=float)
    m.add_argument("--t-end", type=float, dest="t_end")
    m.add_argument("--memory", type=int, help="GL memory length in steps")
    m.add_argument("--out", help="CSV trace path")
    m.add_argument("--gnuplot", help="also write a gnuplot script for the trace")
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("montecarlo", help="sample the uncertainty set")
    c.add_argument("problem")
    c.add_argument("report")
    c.add_argument("--count", type=int)
    c.add_argument("--seed", type=int)
    c.add_argument("--magnitude", type=float)
    c.add_argument("--out", help="write a JSON report here")
    c.set_defaults(func=cmd_montecarlo)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ProblemError, DimensionError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except SynthesisError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except ValueError as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
