"""Plants, controllers and closed loops for commensurate fractional-order LTI systems.

The plant is ``D^a x = (A + dA) x + (B + dB) u``, ``y = C x`` with
``[dA dB] = M Delta [N1 N2]``; the controller is
``D^a xc = Ac xc + Bc y``, ``u = Cc xc + Dc y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

__all__ = [
    "DimensionError",
    "FoLtiSystem",
    "ControllerRealization",
    "ClosedLoop",
    "ValidationReport",
    "validate_system",
    "assemble_closed_loop",
    "PD_TOL",
]

PD_TOL = 1e-9


class DimensionError(ValueError):
    """Raised when matrix shapes do not fit together."""


def _frozen(value: Any, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if shape is None else arr.reshape(shape)
    if arr.size == 0 and shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


def sym(X: np.ndarray) -> np.ndarray:
    return X + X.T


@dataclass(frozen=True, eq=False)
class FoLtiSystem:
    """Uncertain fractional-order plant.

    ``M``, ``N1``, ``N2`` and ``J`` describe the positive-real uncertainty
    channel; leave all four as ``None`` for a certain plant.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    alpha: float
    M: Optional[np.ndarray] = None
    N1: Optional[np.ndarray] = None
    N2: Optional[np.ndarray] = None
    J: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("A", "B", "C", "M", "N1", "N2", "J"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _frozen(v))
        object.__setattr__(self, "alpha", float(self.alpha))
        parts = [self.M is None, self.N1 is None, self.N2 is None, self.J is None]
        if any(parts) and not all(parts):
            raise ValueError("uncertainty matrices M, N1, N2, J must be given together")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def m0(self) -> int:
        return 0 if self.M is None else self.M.shape[1]

    @property
    def certain(self) -> bool:
        return self.M is None

    def nominal(self) -> "FoLtiSystem":
        return FoLtiSystem(self.A, self.B, self.C, self.alpha)


@dataclass(frozen=True, eq=False)
class ControllerRealization:
    """Dynamic output feedback controller; ``nc == 0`` is the static gain ``u = Dc y``."""

    Ac: np.ndarray
    Bc: np.ndarray
    Cc: np.ndarray
    Dc: np.ndarray
    alpha: Optional[float] = None

    def __post_init__(self):
        Dc = _frozen(self.Dc)
        l, m = Dc.shape
        Ac = np.array(self.Ac, dtype=float)
        nc = 0 if Ac.size == 0 else int(np.atleast_2d(Ac).shape[0])
        object.__setattr__(self, "Dc", Dc)
        object.__setattr__(self, "Ac", _frozen(self.Ac, (nc, nc)))
        object.__setattr__(self, "Bc", _frozen(self.Bc, (nc, m)))
        object.__setattr__(self, "Cc", _frozen(self.Cc, (l, nc)))
        if self.Ac.shape != (nc, nc) or self.Bc.shape != (nc, m) or self.Cc.shape != (l, nc):
            raise DimensionError(
                f"controller blocks inconsistent: Ac {self.Ac.shape}, Bc {self.Bc.shape}, "
                f"Cc {self.Cc.shape}, Dc {self.Dc.shape}"
            )

    @classmethod
    def static(cls, Dc: Any, alpha: Optional[float] = None) -> "ControllerRealization":
        Dc = _frozen(Dc)
        l, m = Dc.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((l, 0)), Dc, alpha)

    @property
    def nc(self) -> int:
        return self.Ac.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.Dc.shape[0]

    @property
    def m(self) -> int:
        return self.Dc.shape[1]


@dataclass(frozen=True, eq=False)
class ClosedLoop:
    Acl: np.ndarray
    alpha: float
    delta: Optional[np.ndarray] = None
    sample: Any = field(default=None, compare=False)

    @property
    def nominal(self) -> bool:
        return self.delta is None

    @property
    def dim(self) -> int:
        return self.Acl.shape[0]


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_system(sys: FoLtiSystem, pd_tol: float = PD_TOL) -> ValidationReport:
    """Collect every structural problem with ``sys`` instead of raising."""
    out: list[str] = []
    n = sys.A.shape[0]
    if sys.A.shape != (n, n):
        out.append(f"A must be square, got {sys.A.shape}")
    if sys.B.shape[0] != n:
        out.append(f"B must have {n} rows, got {sys.B.shape}")
    if sys.C.shape[1] != n:
        out.append(f"C must have {n} columns, got {sys.C.shape}")
    if not (0.0 < sys.alpha < 2.0):
        out.append(f"alpha out of range: {sys.alpha} not in (0, 2)")
    if not sys.certain:
        m0 = sys.M.shape[1]
        if sys.M.shape[0] != n:
            out.append(f"M must have {n} rows, got {sys.M.shape}")
        if sys.N1.shape != (m0, n):
            out.append(f"N1 must be {m0}x{n}, got {sys.N1.shape}")
        if sys.N2.shape != (m0, sys.B.shape[1]):
            out.append(f"N2 must be {m0}x{sys.B.shape[1]}, got {sys.N2.shape}")
        if sys.J.shape != (m0, m0):
            out.append(f"J must be {m0}x{m0}, got {sys.J.shape}")
        elif np.linalg.eigvalsh(sym(sys.J))[0] <= pd_tol:
            out.append("Sym(J) not positive definite")
    for name in ("A", "B", "C", "M", "N1", "N2", "J"):
        v = getattr(sys, name)
        if v is not None and not np.all(np.isfinite(v)):
            out.append(f"{name} has non-finite entries")
    return ValidationReport(out)


def assemble_closed_loop(
    sys: FoLtiSystem, ctrl: ControllerRealization, delta: Any = None
) -> ClosedLoop:
    """Augmented matrix ``[[A+dA+(B+dB)Dc C, (B+dB)Cc], [Bc C, Ac]]``.

    ``delta`` is an ``m0 x m0`` array or an object with a ``Delta`` attribute.
    """
    A, B, C = sys.A, sys.B, sys.C
    if ctrl.Dc.shape != (sys.l, sys.m):
        raise DimensionError(f"Dc must be {sys.l}x{sys.m}, got {ctrl.Dc.shape}")
    sample = None
    D = None
    if delta is not None:
        if hasattr(delta, "Delta"):
            sample, D = delta, np.asarray(delta.Delta, dtype=float)
        else:
            D = np.atleast_2d(np.asarray(delta, dtype=float))
        if sys.certain:
            raise DimensionError("an uncertainty sample needs a plant with M, N1, N2, J")
        if D.shape != (sys.m0, sys.m0):
            raise DimensionError(f"delta must be {sys.m0}x{sys.m0}, got {D.shape}")
        A = A + sys.M @ D @ sys.N1
        B = B + sys.M @ D @ sys.N2
    top = np.hstack([A + B @ ctrl.Dc @ C, B @ ctrl.Cc])
    bottom = np.hstack([ctrl.Bc @ C, ctrl.Ac])
    Acl = np.vstack([top, bottom])
    Acl.setflags(write=False)
    if D is not None:
        D = D.copy()
        D.setflags(write=False)
    return ClosedLoop(Acl, sys.alpha, D, sample)
