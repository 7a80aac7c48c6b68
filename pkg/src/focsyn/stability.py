"""Stability of ``D^a x = A x``: eigenvalue sector test and LMI characterizations.

The sector test is the ground truth: the system is asymptotically stable iff
every eigenvalue satisfies ``|arg(lambda)| > a*pi/2``.  The two LMI tests
(complex Hermitian form for ``0 < a < 1``, Kronecker rotation form for
``1 <= a < 2``) are equivalent characterizations and mostly serve to
cross-check the LMI layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import lmi
from .lmi import Affine, LmiProblem, LmiSolution, Verdict, bmat, hermitian_embedding

__all__ = [
    "StabilityReport",
    "sector_check",
    "lemma1_check",
    "lemma2_check",
    "lmi_check",
    "lemma1_angle",
    "lemma2_angle",
    "rotation_matrix",
    "BOUNDARY_TOL",
]

BOUNDARY_TOL = 1e-9


@dataclass
class StabilityReport:
    stable: bool
    margin: float
    eigenvalues: np.ndarray
    method: str = "sector"
    boundary: bool = False
    solution: LmiSolution | None = field(default=None, repr=False)

    @property
    def margin_over_pi(self) -> float:
        return self.margin / math.pi


def _check_alpha(alpha: float, lo: float, hi: float, lo_closed: bool = False) -> None:
    ok = (lo <= alpha if lo_closed else lo < alpha) and alpha < hi
    if not ok:
        left = "[" if lo_closed else "("
        raise ValueError(f"alpha={alpha} outside {left}{lo}, {hi})")


def sector_check(Acl: np.ndarray, alpha: float) -> StabilityReport:
    """Margin ``min |arg(lambda)| - a*pi/2`` in radians; boundary cases are unstable."""
    _check_alpha(alpha, 0.0, 2.0)
    Acl = np.atleast_2d(np.asarray(Acl, dtype=float))
    if Acl.shape[0] != Acl.shape[1]:
        raise ValueError(f"square matrix required, got {Acl.shape}")
    if Acl.size == 0:
        return StabilityReport(True, math.inf, np.zeros(0, dtype=complex))
    if not np.all(np.isfinite(Acl)):
        raise np.linalg.LinAlgError("matrix has non-finite entries")
    eig = np.linalg.eigvals(Acl)
    margin = float(np.min(np.abs(np.angle(eig)))) - alpha * math.pi / 2
    boundary = abs(margin) < BOUNDARY_TOL
    return StabilityReport(margin > 0 and not boundary, margin, eig, "sector", boundary)


def lemma1_angle(alpha: float) -> float:
    """Rotation angle ``(1 - a) pi / 2`` of the complex Hermitian test."""
    return (1.0 - alpha) * math.pi / 2


def lemma2_angle(alpha: float) -> float:
    return math.pi - alpha * math.pi / 2


def rotation_matrix(theta: float) -> np.ndarray:
    s, c = math.sin(theta), math.cos(theta)
    return np.array([[s, -c], [c, s]])


def hermitian_weight(real: Affine, imag: Affine, theta: float) -> Affine:
    """``r X + conj(r) conj(X) = 2 (cos t Re X - sin t Im X)``, a real matrix."""
    return real * (2 * math.cos(theta)) - imag * (2 * math.sin(theta))


def kron_sym(theta: float, W: Affine) -> Affine:
    """``Sym(Theta (x) W)`` for the 2x2 rotation ``Theta``."""
    s, c = math.sin(theta), math.cos(theta)
    S = W + W.T
    K = W.T - W
    return bmat([[S * s, K * c], [K * (-c), S * s]])


def _lemma_result(A: np.ndarray, alpha: float, sol: LmiSolution, method: str) -> StabilityReport:
    ref = sector_check(A, alpha)
    if sol.verdict is Verdict.INCONCLUSIVE:
        raise RuntimeError(f"{method}: solver inconclusive ({sol.status})")
    return StabilityReport(sol.feasible, ref.margin, ref.eigenvalues, method, ref.boundary, sol)


def lemma1_check(A: np.ndarray, alpha: float, epsilon: float | None = None,
                 backend: lmi.Backend | None = None) -> StabilityReport:
    """Feasibility of ``Sym(A (rX + conj(r X))) < 0`` over Hermitian ``X > 0``."""
    _check_alpha(alpha, 0.0, 1.0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    prob = LmiProblem()
    XR = prob.variable("X_re", "symmetric", n)
    XI = prob.variable("X_im", "skew-symmetric", n)
    Q = hermitian_weight(XR, XI, lemma1_angle(alpha))
    prob.positive_definite(hermitian_embedding(XR, XI), "X")
    W = A @ Q
    prob.negative_definite(W + W.T, "lyapunov")
    sol = lmi.solve_feasibility(prob, epsilon, backend)
    return _lemma_result(A, alpha, sol, "lmi-lemma1")


def lemma2_check(A: np.ndarray, alpha: float, epsilon: float | None = None,
                 backend: lmi.Backend | None = None) -> StabilityReport:
    """Feasibility of ``Sym(Theta (x) (A X)) < 0`` over symmetric ``X > 0``."""
    _check_alpha(alpha, 1.0, 2.0, lo_closed=True)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    prob = LmiProblem()
    X = prob.variable("X", "symmetric", n)
    prob.positive_definite(X, "X")
    prob.negative_definite(kron_sym(lemma2_angle(alpha), A @ X), "lyapunov")
    sol = lmi.solve_feasibility(prob, epsilon, backend)
    return _lemma_result(A, alpha, sol, "lmi-lemma2")


def lmi_check(A: np.ndarray, alpha: float, **kw) -> StabilityReport:
    """Dispatch to the LMI test matching the order regime."""
    return lemma1_check(A, alpha, **kw) if alpha < 1 else lemma2_check(A, alpha, **kw)
