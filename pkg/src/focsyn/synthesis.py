"""Fixed-order dynamic output feedback synthesis by LMIs.

Two regimes, selected by the fractional order:

* ``0 < alpha < 1``: a complex Hermitian block-diagonal ``P = diag(P_S, P_C)``
  enters only through the real matrix ``rP + conj(rP)`` with
  ``r = exp(i (1 - alpha) pi / 2)``.
* ``1 <= alpha < 2``: a real symmetric ``P`` and the Kronecker rotation
  ``Theta`` with angle ``pi - alpha pi / 2``.

In both regimes the bilinear controller/Lyapunov products are replaced by
``T1 = Ac W_C``, ``T2 = Bc C W_S``, ``T3 = Cc W_C``, ``T4 = Dc C W_S``, where
``W_S``, ``W_C`` are the (weighted) Lyapunov blocks.  Recovery divides the
``W`` blocks back out and uses the pseudo-inverse of ``C``.  That inverse is
exact only when the recovered gains see ``T2 W_S^-1`` and ``T4 W_S^-1``
through the row space of ``C``, so every recovered controller is checked
again: nominal eigenvalue sector, the LMI re-evaluated with the recovered
controller, and a Monte-Carlo sweep over the uncertainty set.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import lmi
from .lmi import LmiProblem, LmiSolution, Verdict, bmat, hermitian_embedding, times_identity
from .model import ControllerRealization, FoLtiSystem, assemble_closed_loop, sym, validate_system
from .stability import StabilityReport, hermitian_weight, kron_sym, lemma1_angle, lemma2_angle, rotation_matrix, sector_check
from .uncertainty import RobustnessReport, monte_carlo

__all__ = [
    "SynthesisError",
    "InfeasibleError",
    "RecoveryError",
    "SolverError",
    "SynthesisRequest",
    "Verification",
    "SynthesisResult",
    "regime_for",
    "build_problem",
    "synthesize",
    "synthesize_t1",
    "synthesize_t2",
    "synthesize_certain",
    "recover_controller",
    "change_of_variables",
    "weighted_blocks",
    "output_subspaces",
]

log = logging.getLogger(__name__)

RETRY_FACTOR = 100.0
MAX_COND = 1e12


class SynthesisError(Exception):
    pass


class InfeasibleError(SynthesisError):
    """The LMI has no solution at the requested controller order."""

    def __init__(self, nc: int, regime: str, solution: LmiSolution):
        super().__init__(f"no certificate at nc={nc} ({regime}; solver status {solution.status})")
        self.nc = nc
        self.regime = regime
        self.solution = solution


class SolverError(SynthesisError):
    def __init__(self, solution: LmiSolution):
        super().__init__(f"solver inconclusive: {solution.status} {solution.diagnostics.get('reason', '')}".strip())
        self.solution = solution


class RecoveryError(SynthesisError):
    def __init__(self, what: str, cond: float):
        super().__init__(f"cannot invert {what} (condition number {cond:.3e})")
        self.cond = cond


@dataclass
class SynthesisRequest:
    system: FoLtiSystem
    nc: int
    epsilon: float = lmi.DEFAULT_EPSILON
    verify: bool = True
    retry: bool = True
    mc_count: int = 50
    mc_magnitude: float = 1.0
    mc_seed: int = 0
    output_constrained: bool = True
    backend: Optional[lmi.Backend] = None

    def __post_init__(self):
        if self.nc < 0:
            raise ValueError("nc must be >= 0")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")


@dataclass
class Verification:
    nominal: StabilityReport
    certificate_residual: float
    recovery_residual: dict[str, float]
    montecarlo: Optional[RobustnessReport] = None

    @property
    def certified(self) -> bool:
        """Synthesis LMI still holds after substituting the recovered controller."""
        return self.certificate_residual < 0

    @property
    def verified(self) -> bool:
        if not self.nominal.stable:
            return False
        return self.montecarlo is None or self.montecarlo.all_stable

    def to_dict(self) -> dict[str, Any]:
        return {
            "verified": self.verified,
            "nominal_stable": bool(self.nominal.stable),
            "nominal_margin": self.nominal.margin,
            "certificate_residual": self.certificate_residual,
            "certified": self.certified,
            "recovery_residual": dict(self.recovery_residual),
            "montecarlo": None if self.montecarlo is None else self.montecarlo.to_dict(),
        }


@dataclass
class SynthesisResult:
    controller: ControllerRealization
    certificate: LmiSolution
    regime: str
    nc: int
    epsilon: float
    verification: Optional[Verification] = None
    flags: list[str] = field(default_factory=list)
    problem: Optional[LmiProblem] = field(default=None, repr=False)

    @property
    def verified(self) -> bool:
        return self.verification is not None and self.verification.verified

    @property
    def gamma(self) -> float:
        return float(self.certificate["gamma"][0, 0]) if "gamma" in self.certificate.assignment else math.nan


def regime_for(sys: FoLtiSystem) -> str:
    if sys.certain:
        return "corollary1"
    return "theorem1" if sys.alpha < 1 else "theorem2"


def _lyapunov_variables(prob: LmiProblem, sys: FoLtiSystem, nc: int):
    """Register P blocks; returns (W_S, W_C) as affine expressions."""
    n = sys.n
    if sys.alpha < 1:
        theta = lemma1_angle(sys.alpha)
        PSr = prob.variable("PS_re", "symmetric", n)
        PSi = prob.variable("PS_im", "skew-symmetric", n)
        prob.positive_definite(hermitian_embedding(PSr, PSi), "P_S")
        W_S = hermitian_weight(PSr, PSi, theta)
        W_C = None
        if nc:
            PCr = prob.variable("PC_re", "symmetric", nc)
            PCi = prob.variable("PC_im", "skew-symmetric", nc)
            prob.positive_definite(hermitian_embedding(PCr, PCi), "P_C")
            W_C = hermitian_weight(PCr, PCi, theta)
        return W_S, W_C
    PS = prob.variable("PS", "symmetric", n)
    prob.positive_definite(PS, "P_S")
    W_C = None
    if nc:
        W_C = prob.variable("PC", "symmetric", nc)
        prob.positive_definite(W_C, "P_C")
    return PS, W_C


def output_subspaces(C: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases ``(R, N)`` of the row space and null space of ``C``."""
    _, s, Vt = np.linalg.svd(C)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 0.0)))
    return Vt[:rank].T, Vt[rank:].T


def build_problem(sys: FoLtiSystem, nc: int, epsilon: float = lmi.DEFAULT_EPSILON,
                  output_constrained: bool = False) -> LmiProblem:
    """Synthesis LMI for ``sys`` at controller order ``nc``.

    The main constraint is named ``"synthesis"``; for uncertain plants it is the
    3x3 block matrix with the ``-gamma I`` / ``-Sym(J) - gamma I`` tail, for
    certain plants only its leading block.

    ``output_constrained`` adds ``R^T W_S N = 0``, ``T2 N = 0``, ``T4 N = 0``
    (``N`` spanning the null space of ``C``).  Then ``W_S`` leaves ``ker C``
    invariant and the pseudo-inverse recovery reproduces ``T2``, ``T4``
    exactly, so the certificate carries over to the recovered controller.
    """
    n, l, m0 = sys.n, sys.l, sys.m0
    A, B = sys.A, sys.B
    prob = LmiProblem(epsilon=epsilon)
    W_S, W_C = _lyapunov_variables(prob, sys, nc)
    T4 = prob.variable("T4", "full", l, n)
    # linearized A_ocl @ W
    if nc:
        T1 = prob.variable("T1", "full", nc, nc)
        T2 = prob.variable("T2", "full", nc, n)
        T3 = prob.variable("T3", "full", l, nc)
        AW = bmat([[A @ W_S + B @ T4, B @ T3], [T2, T1]])
    else:
        AW = A @ W_S + B @ T4
    if output_constrained:
        R, N = output_subspaces(sys.C)
        if N.shape[1]:
            prob.equal_zero(R.T @ W_S @ N, "W_S keeps ker C")
            prob.equal_zero(T4 @ N, "T4 ker C")
            if nc:
                prob.equal_zero(T2 @ N, "T2 ker C")
    kron = sys.alpha >= 1
    lead = kron_sym(lemma2_angle(sys.alpha), AW) if kron else AW + AW.T

    if sys.certain:
        prob.negative_definite(lead, "synthesis")
        return prob

    gamma = prob.variable("gamma", "scalar", 1)
    prob.positive_definite(gamma, "gamma")
    Mt = np.vstack([sys.M, np.zeros((nc, m0))])
    q1 = W_S.T @ sys.N1.T + T4.T @ sys.N2.T
    q = bmat([[q1], [T3.T @ sys.N2.T]]) if nc else q1
    E = sym(sys.J)
    if kron:
        Mhat = np.kron(rotation_matrix(lemma2_angle(sys.alpha)), Mt)
        gI = times_identity(gamma, 2 * m0)
        tail = [
            [lead, Mhat, bmat([[q, 0], [0, q]])],
            [None, -gI, gI],
            [None, None, -np.kron(np.eye(2), E) - gI],
        ]
    else:
        gI = times_identity(gamma, m0)
        tail = [
            [lead, Mt, q],
            [None, -gI, gI],
            [None, None, -E - gI],
        ]
    prob.negative_definite(bmat(tail), "synthesis")
    return prob


def weighted_blocks(cert: LmiSolution | dict, sys: FoLtiSystem, nc: int) -> tuple[np.ndarray, np.ndarray]:
    """Numeric ``(W_S, W_C)``: ``rP + conj(rP)`` for ``alpha < 1``, ``P`` otherwise."""
    a = cert.assignment if isinstance(cert, LmiSolution) else cert
    if sys.alpha < 1:
        th = lemma1_angle(sys.alpha)
        c, s = math.cos(th), math.sin(th)
        W_S = 2 * (c * a["PS_re"] - s * a["PS_im"])
        W_C = 2 * (c * a["PC_re"] - s * a["PC_im"]) if nc else np.zeros((0, 0))
    else:
        W_S = np.asarray(a["PS"])
        W_C = np.asarray(a["PC"]) if nc else np.zeros((0, 0))
    return W_S, W_C


def change_of_variables(ctrl: ControllerRealization, sys: FoLtiSystem, W_S: np.ndarray,
                        W_C: np.ndarray) -> dict[str, np.ndarray]:
    """Forward map ``(Ac, Bc, Cc, Dc) -> (T1, T2, T3, T4)``."""
    C = sys.C
    return {
        "T1": ctrl.Ac @ W_C,
        "T2": ctrl.Bc @ C @ W_S,
        "T3": ctrl.Cc @ W_C,
        "T4": ctrl.Dc @ C @ W_S,
    }


def _checked_inv(X: np.ndarray, what: str) -> np.ndarray:
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > MAX_COND:
        raise RecoveryError(what, float(cond))
    return np.linalg.inv(X)


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    na = np.linalg.norm(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / na) if na > 0 else float(np.linalg.norm(b))


def recover_controller(cert: LmiSolution | dict, sys: FoLtiSystem, nc: int,
                       regime: str | None = None) -> tuple[ControllerRealization, dict[str, float]]:
    """Inverse change of variables; returns the controller and relative residuals.

    ``residual["T2"] = ||T2 - Bc C W_S|| / ||T2||`` (likewise ``T4``) measures
    how much of the certificate the pseudo-inverse of ``C`` discards.
    """
    a = cert.assignment if isinstance(cert, LmiSolution) else cert
    W_S, W_C = weighted_blocks(a, sys, nc)
    Cp = np.linalg.pinv(sys.C)
    WSi = _checked_inv(W_S, "plant Lyapunov block")
    T4 = np.asarray(a["T4"])
    Dc = T4 @ WSi @ Cp
    if nc:
        WCi = _checked_inv(W_C, "controller Lyapunov block")
        T1, T2, T3 = (np.asarray(a[k]) for k in ("T1", "T2", "T3"))
        ctrl = ControllerRealization(T1 @ WCi, T2 @ WSi @ Cp, T3 @ WCi, Dc, sys.alpha)
    else:
        ctrl = ControllerRealization.static(Dc, sys.alpha)
    back = change_of_variables(ctrl, sys, W_S, W_C)
    residual = {"T4": _rel(T4, back["T4"])}
    if nc:
        residual["T2"] = _rel(np.asarray(a["T2"]), back["T2"])
    return ctrl, residual


def certificate_residual(prob: LmiProblem, cert: LmiSolution, ctrl: ControllerRealization,
                         sys: FoLtiSystem) -> float:
    """Max eigenvalue of the synthesis LMI with ``T_i`` rebuilt from ``ctrl``."""
    W_S, W_C = weighted_blocks(cert, sys, ctrl.nc)
    T = change_of_variables(ctrl, sys, W_S, W_C)
    assignment = dict(cert.assignment)
    for k, v in T.items():
        if k in assignment:
            assignment[k] = v
    con = next(c for c in prob.constraints if c.name == "synthesis")
    return float(np.linalg.eigvalsh(lmi.evaluate(con, assignment))[-1])


def verify(sys: FoLtiSystem, ctrl: ControllerRealization, prob: LmiProblem, cert: LmiSolution,
           residual: dict[str, float], req: SynthesisRequest) -> Verification:
    nominal = sector_check(assemble_closed_loop(sys, ctrl).Acl, sys.alpha)
    mc = None
    if not sys.certain:
        mc = monte_carlo(sys, ctrl, req.mc_count, req.mc_magnitude, req.mc_seed)
    return Verification(nominal, certificate_residual(prob, cert, ctrl, sys), residual, mc)


def _attempt(req: SynthesisRequest, epsilon: float, output_constrained: bool = False) -> SynthesisResult:
    sys = req.system
    regime = regime_for(sys)
    prob = build_problem(sys, req.nc, epsilon, output_constrained)
    sol = lmi.solve_feasibility(prob, epsilon, req.backend)
    if sol.verdict is Verdict.INFEASIBLE:
        raise InfeasibleError(req.nc, regime, sol)
    if sol.verdict is Verdict.INCONCLUSIVE:
        raise SolverError(sol)
    ctrl, residual = recover_controller(sol, sys, req.nc, regime)
    res = SynthesisResult(ctrl, sol, regime, req.nc, epsilon, problem=prob)
    if output_constrained:
        res.flags.append("output-constrained")
    if req.verify:
        res.verification = verify(sys, ctrl, prob, sol, residual, req)
    return res


def synthesize(req: SynthesisRequest) -> SynthesisResult:
    """Solve, recover and (by default) verify; dispatches on certainty and order.

    If the recovered controller fails verification, the LMI is solved once
    more with ``100 * epsilon`` and then, if ``req.output_constrained`` allows
    it, with the output-space constraints of :func:`build_problem`.  A result
    that survives none of these is returned flagged
    ``recovered-controller-unverified``.

    Raises :class:`InfeasibleError` when the unconstrained LMI has no solution.
    """
    report = validate_system(req.system)
    if not report.ok:
        raise SynthesisError("invalid system: " + "; ".join(report.violations))
    res = _attempt(req, req.epsilon)
    if not req.verify or res.verified:
        return res
    notes: list[str] = []
    fallbacks = []
    if req.retry:
        fallbacks.append(("retried", req.epsilon * RETRY_FACTOR, False))
    if req.output_constrained and output_subspaces(req.system.C)[1].shape[1]:
        fallbacks.append(("output-constrained", req.epsilon, True))
    for label, eps, constrained in fallbacks:
        log.info("nc=%d: recovered controller unverified, trying %s (eps=%g)", req.nc, label, eps)
        try:
            nxt = _attempt(req, eps, constrained)
        except SynthesisError as exc:
            notes.append(f"{label}-failed: {exc}")
            continue
        notes.append(label)
        if nxt.verified:
            nxt.flags[:0] = [n for n in notes if n not in nxt.flags]
            return nxt
    res.flags.extend(notes)
    res.flags.append("recovered-controller-unverified")
    return res


def _require(req: SynthesisRequest, regime: str) -> SynthesisResult:
    got = regime_for(req.system)
    if got != regime:
        raise ValueError(f"{regime} requested but the system falls under {got}")
    return synthesize(req)


def synthesize_t1(req: SynthesisRequest) -> SynthesisResult:
    return _require(req, "theorem1")


def synthesize_t2(req: SynthesisRequest) -> SynthesisResult:
    return _require(req, "theorem2")


def synthesize_certain(req: SynthesisRequest) -> SynthesisResult:
    return _require(req, "corollary1")
