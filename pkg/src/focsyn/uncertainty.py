"""Positive-real uncertainty: construction, membership, sampling and Monte-Carlo checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .model import ControllerRealization, FoLtiSystem, assemble_closed_loop, sym
from .stability import sector_check

__all__ = [
    "UncertaintySample",
    "UncertaintyError",
    "make_delta",
    "membership_slack",
    "sample_F",
    "draw_sample",
    "perturb_plant",
    "RobustnessReport",
    "monte_carlo",
]

PSD_TOL = 1e-9
MEMBERSHIP_TOL = 1e-8
MAX_COND = 1e12


class UncertaintyError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class UncertaintySample:
    F: np.ndarray
    Delta: np.ndarray
    tag: Any = None


def membership_slack(Delta: np.ndarray, J: np.ndarray) -> float:
    """Smallest eigenvalue of ``Sym(Delta) - Delta Sym(J) Delta^T`` (>= 0 inside the set)."""
    G = sym(Delta) - Delta @ sym(J) @ Delta.T
    return float(np.linalg.eigvalsh(0.5 * (G + G.T))[0])


def make_delta(F: Any, J: Any, tag: Any = None) -> UncertaintySample:
    """``Delta = F (I + J F)^-1`` for ``Sym(F) >= 0``, ``Sym(J) > 0``."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    J = np.atleast_2d(np.asarray(J, dtype=float))
    m0 = F.shape[0]
    if F.shape != (m0, m0) or J.shape != (m0, m0):
        raise UncertaintyError(f"F and J must be square of equal size, got {F.shape}, {J.shape}")
    if np.linalg.eigvalsh(sym(F))[0] < -PSD_TOL:
        raise UncertaintyError("Sym(F) is indefinite")
    if np.linalg.eigvalsh(sym(J))[0] <= 0:
        raise UncertaintyError("Sym(J) is not positive definite")
    K = np.eye(m0) + J @ F
    if np.linalg.cond(K) > MAX_COND:
        raise UncertaintyError("I + J F is numerically singular")
    Delta = np.linalg.solve(K.T, F.T).T
    slack = membership_slack(Delta, J)
    # postcondition: Sym(J) > 0 and Sym(F) >= 0 guarantee membership
    assert slack >= -MEMBERSHIP_TOL, f"membership violated (slack {slack:.3e})"
    F.setflags(write=False)
    Delta.setflags(write=False)
    return UncertaintySample(F, Delta, tag)


def sample_F(m0: int, magnitude: float = 1.0, rng: Any = None) -> np.ndarray:
    """Random ``F`` with ``Sym(F) >= 0``: a scaled Gram matrix plus a skew part.

    ``||Sym(F)||_2`` is uniform on ``[0, magnitude]`` and the skew part has
    entries uniform on ``[-magnitude, magnitude]``.
    """
    if magnitude < 0:
        raise ValueError("magnitude must be >= 0")
    rng = np.random.default_rng(rng)
    G = rng.standard_normal((m0, m0))
    GG = G @ G.T
    norm = np.linalg.norm(GG, 2)
    s = 0.0 if norm == 0 else rng.uniform(0.0, 1.0) * magnitude / (2 * norm)
    L = np.tril(rng.uniform(-magnitude, magnitude, (m0, m0)), -1)
    return s * GG + (L - L.T)


def sample_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def draw_sample(sys: FoLtiSystem, magnitude: float, seed: int, index: int) -> UncertaintySample:
    rng = np.random.default_rng(sample_seed(seed, index))
    return make_delta(sample_F(sys.m0, magnitude, rng), sys.J, tag=(seed, index))


def perturb_plant(sys: FoLtiSystem, sample: Any) -> tuple[np.ndarray, np.ndarray]:
    """``(dA, dB) = (M Delta N1, M Delta N2)``."""
    if sys.certain:
        raise UncertaintyError("plant has no uncertainty channel")
    D = np.asarray(getattr(sample, "Delta", sample), dtype=float)
    D = np.atleast_2d(D)
    if D.shape != (sys.m0, sys.m0):
        raise UncertaintyError(f"Delta must be {sys.m0}x{sys.m0}, got {D.shape}")
    return sys.M @ D @ sys.N1, sys.M @ D @ sys.N2


@dataclass
class RobustnessReport:
    count: int
    passed: int
    min_margin: float
    failing: list[int] = field(default_factory=list)
    seed: int = 0
    magnitude: float = 1.0
    margins: list[float] = field(default_factory=list, repr=False)

    @property
    def all_stable(self) -> bool:
        return self.passed == self.count

    def to_dict(self) -> dict[str, Any]:
        return {
            "count": self.count,
            "passed": self.passed,
            "all_stable": self.all_stable,
            "min_margin": None if self.count == 0 else self.min_margin,
            "failing_samples": [[self.seed, i] for i in self.failing],
            "seed": self.seed,
            "magnitude": self.magnitude,
        }


def monte_carlo(
    sys: FoLtiSystem,
    ctrl: ControllerRealization,
    count: int = 50,
    magnitude: float = 1.0,
    seed: int = 0,
    samples: Optional[list[UncertaintySample]] = None,
) -> RobustnessReport:
    """Sector-test the closed loop at ``count`` random admissible uncertainties.

    Sample ``i`` is drawn from ``SeedSequence([seed, i])``, so any failing
    sample can be regenerated on its own with :func:`draw_sample`.
    """
    if samples is None:
        samples = [draw_sample(sys, magnitude, seed, i) for i in range(count)]
    margins, failing = [], []
    for i, smp in enumerate(samples):
        rep = sector_check(assemble_closed_loop(sys, ctrl, smp).Acl, sys.alpha)
        margins.append(rep.margin)
        if not rep.stable:
            failing.append(i)
    return RobustnessReport(
        count=len(samples),
        passed=len(samples) - len(failing),
        min_margin=min(margins, default=float("inf")),
        failing=failing,
        seed=seed,
        magnitude=magnitude,
        margins=margins,
    )
