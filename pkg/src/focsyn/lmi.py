"""Affine linear matrix inequality modeling and a semidefinite feasibility backend.

An :class:`Affine` expression stores a matrix-valued affine map of the decision
variables in fully expanded form: a constant matrix plus, for every variable
it touches, a coefficient tensor ``(n_params, rows, cols)``.  Expressions
compose with ``+``, ``-``, scalar ``*``, ``@`` against constant matrices and
``.T``; this is enough to write the block patterns of the synthesis LMIs the
way they are written by hand.

Strict inequalities are solved as ``M(x) <= -eps I`` (or ``>= eps I``) and
every feasible point the backend returns is re-checked by :func:`evaluate`.
"""

from __future__ import annotations

import enum
import io
import itertools
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Protocol, Sequence

import numpy as np

__all__ = [
    "VariableKind",
    "DecisionVariable",
    "Affine",
    "Sense",
    "LmiConstraint",
    "LmiProblem",
    "Verdict",
    "LmiSolution",
    "Backend",
    "CvxpyBackend",
    "bmat",
    "hermitian_embedding",
    "times_identity",
    "evaluate",
    "solve_feasibility",
    "dump_problem",
    "DEFAULT_EPSILON",
    "POST_TOL",
]

DEFAULT_EPSILON = 1e-6
POST_TOL = 1e-7
_SYM_TOL = 1e-10


class VariableKind(str, enum.Enum):
    SYMMETRIC = "symmetric"
    SKEW = "skew-symmetric"
    FULL = "full"
    SCALAR = "scalar"


@dataclass(frozen=True, eq=False)
class DecisionVariable:
    """A named matrix unknown with a linear parameterization.

    Symmetric variables are parameterized by their lower triangle, skew ones
    by the strictly lower triangle, full ones entrywise.  Hashing is by
    identity so two variables with the same name stay distinct objects.
    """

    name: str
    kind: VariableKind
    rows: int
    cols: int

    def __post_init__(self):
        kind = VariableKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind in (VariableKind.SYMMETRIC, VariableKind.SKEW) and self.rows != self.cols:
            raise ValueError(f"{kind.value} variable {self.name!r} must be square")
        if kind is VariableKind.SCALAR and (self.rows, self.cols) != (1, 1):
            raise ValueError(f"scalar variable {self.name!r} must be 1x1")
        if self.rows < 0 or self.cols < 0:
            raise ValueError("negative variable dimensions")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        n = self.rows
        if self.kind is VariableKind.SYMMETRIC:
            return n * (n + 1) // 2
        if self.kind is VariableKind.SKEW:
            return n * (n - 1) // 2
        return self.rows * self.cols

    def basis(self) -> np.ndarray:
        """Coefficient tensor ``(size, rows, cols)`` mapping parameters to entries."""
        out = np.zeros((self.size, self.rows, self.cols))
        if self.kind is VariableKind.SYMMETRIC:
            for k, (i, j) in enumerate(zip(*np.tril_indices(self.rows))):
                out[k, i, j] = 1.0
                out[k, j, i] = 1.0
        elif self.kind is VariableKind.SKEW:
            for k, (i, j) in enumerate(zip(*np.tril_indices(self.rows, -1))):
                out[k, i, j] = 1.0
                out[k, j, i] = -1.0
        else:
            for k in range(self.size):
                out[k].flat[k] = 1.0
        return out

    def unpack(self, params: np.ndarray) -> np.ndarray:
        params = np.asarray(params, dtype=float).reshape(self.size)
        return np.tensordot(params, self.basis(), axes=1).reshape(self.shape)

    def pack(self, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=float).reshape(self.shape)
        if self.kind is VariableKind.SYMMETRIC:
            return value[np.tril_indices(self.rows)]
        if self.kind is VariableKind.SKEW:
            return value[np.tril_indices(self.rows, -1)]
        return value.reshape(-1).copy()

    def check_value(self, value: Any) -> np.ndarray:
        value = np.atleast_2d(np.asarray(value, dtype=float))
        if value.size == 0:
            value = value.reshape(self.shape)
        if value.shape != self.shape:
            raise ValueError(
                f"variable {self.name!r}: expected shape {self.shape}, got {value.shape}"
            )
        return value

    def __repr__(self) -> str:
        return f"DecisionVariable({self.name!r}, {self.kind.value}, {self.rows}x{self.cols})"


def _as_matrix(value: Any) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


class Affine:
    """Matrix-valued affine function ``const + sum_v coeffs[v] . params(v)``."""

    __array_ufunc__ = None

    def __init__(self, const: np.ndarray, coeffs: Mapping[DecisionVariable, np.ndarray] | None = None):
        self.const = _as_matrix(const)
        self.coeffs: dict[DecisionVariable, np.ndarray] = {}
        for var, c in (coeffs or {}).items():
            c = np.asarray(c, dtype=float)
            if c.shape[1:] != self.const.shape:
                raise ValueError("coefficient shape does not match constant")
            self.coeffs[var] = c

    @classmethod
    def of(cls, var: DecisionVariable) -> "Affine":
        return cls(np.zeros(var.shape), {var: var.basis()})

    @classmethod
    def lift(cls, value: Any) -> "Affine":
        if isinstance(value, Affine):
            return value
        if isinstance(value, DecisionVariable):
            return cls.of(value)
        return cls(_as_matrix(value))

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    @property
    def variables(self) -> list[DecisionVariable]:
        return list(self.coeffs)

    @property
    def T(self) -> "Affine":
        return Affine(self.const.T, {v: c.transpose(0, 2, 1) for v, c in self.coeffs.items()})

    def __add__(self, other: Any) -> "Affine":
        other = Affine.lift(other)
        if other.shape != self.shape:
            raise ValueError(f"shape mismatch in sum: {self.shape} vs {other.shape}")
        coeffs = dict(self.coeffs)
        for v, c in other.coeffs.items():
            coeffs[v] = coeffs[v] + c if v in coeffs else c
        return Affine(self.const + other.const, coeffs)

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return self * -1.0

    def __sub__(self, other: Any) -> "Affine":
        return self + (-Affine.lift(other))

    def __rsub__(self, other: Any) -> "Affine":
        return Affine.lift(other) - self

    def __mul__(self, scalar: float) -> "Affine":
        scalar = float(scalar)
        return Affine(self.const * scalar, {v: c * scalar for v, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __matmul__(self, right: Any) -> "Affine":
        if isinstance(right, (Affine, DecisionVariable)):
            raise TypeError("product of two affine expressions is not affine")
        R = _as_matrix(right)
        return Affine(self.const @ R, {v: c @ R for v, c in self.coeffs.items()})

    def __rmatmul__(self, left: Any) -> "Affine":
        L = _as_matrix(left)
        return Affine(L @ self.const, {v: np.einsum("ij,kjl->kil", L, c) for v, c in self.coeffs.items()})

    def value(self, assignment: Mapping[Any, Any]) -> np.ndarray:
        out = self.const.copy()
        for v, c in self.coeffs.items():
            val = _lookup(assignment, v)
            out += np.tensordot(v.pack(v.check_value(val)), c, axes=1)
        return out

    def is_symmetric(self, tol: float = _SYM_TOL) -> bool:
        if self.shape[0] != self.shape[1]:
            return False
        scale = max(1.0, float(np.max(np.abs(self.const), initial=0.0)))
        if np.max(np.abs(self.const - self.const.T), initial=0.0) > tol * scale:
            return False
        for c in self.coeffs.values():
            scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
            if np.max(np.abs(c - c.transpose(0, 2, 1)), initial=0.0) > tol * scale:
                return False
        return True

    def __repr__(self) -> str:
        names = ", ".join(v.name for v in self.coeffs)
        return f"Affine({self.shape[0]}x{self.shape[1]}; {names or 'constant'})"


def _lookup(assignment: Mapping[Any, Any], var: DecisionVariable) -> Any:
    if var in assignment:
        return assignment[var]
    if var.name in assignment:
        return assignment[var.name]
    raise KeyError(f"assignment is missing variable {var.name!r}")


def _is_zero_literal(x: Any) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and x == 0


def bmat(blocks: Sequence[Sequence[Any]]) -> Affine:
    """Assemble a block matrix of affine expressions or constants.

    ``None`` marks a block to be filled as the transpose of its mirror
    (the bullet of a symmetric block matrix).  ``0`` is a zero block with
    size inferred from the row and column.
    """
    nr = len(blocks)
    nc = len(blocks[0])
    if any(len(row) != nc for row in blocks):
        raise ValueError("ragged block grid")
    grid: list[list[Any]] = [list(row) for row in blocks]
    for i, j in itertools.product(range(nr), range(nc)):
        if grid[i][j] is None:
            if nr != nc or grid[j][i] is None:
                raise ValueError(f"block ({i},{j}) and its mirror are both undetermined")
            mirror = grid[j][i]
            grid[i][j] = 0 if _is_zero_literal(mirror) else Affine.lift(mirror).T

    def known_shape(x: Any) -> tuple[int, int] | None:
        return None if _is_zero_literal(x) else Affine.lift(x).shape

    heights = [None] * nr
    widths = [None] * nc
    for i, j in itertools.product(range(nr), range(nc)):
        s = known_shape(grid[i][j])
        if s is None:
            continue
        for seq, idx, dim in ((heights, i, s[0]), (widths, j, s[1])):
            if seq[idx] is None:
                seq[idx] = dim
            elif seq[idx] != dim:
                raise ValueError(f"inconsistent block size at ({i},{j})")
    if any(h is None for h in heights) or any(w is None for w in widths):
        raise ValueError("cannot infer the size of an all-zero block row or column")

    H, W = sum(heights), sum(widths)
    out = Affine(np.zeros((H, W)))
    r0 = np.cumsum([0] + heights)
    c0 = np.cumsum([0] + widths)
    for i, j in itertools.product(range(nr), range(nc)):
        x = grid[i][j]
        if _is_zero_literal(x):
            continue
        x = Affine.lift(x)
        left = np.zeros((H, heights[i]))
        left[r0[i]:r0[i + 1]] = np.eye(heights[i])
        right = np.zeros((widths[j], W))
        right[:, c0[j]:c0[j + 1]] = np.eye(widths[j])
        out = out + left @ x @ right
    return out


def times_identity(scalar: Any, k: int) -> Affine:
    """``s * I_k`` for a 1x1 expression ``s``."""
    s = Affine.lift(scalar)
    if s.shape != (1, 1):
        raise ValueError("times_identity needs a 1x1 expression")
    I = np.eye(k)
    return Affine(s.const[0, 0] * I, {v: c[:, 0, 0, None, None] * I for v, c in s.coeffs.items()})


def hermitian_embedding(real: Any, imag: Any) -> Affine:
    """Real symmetric image ``[[Re, -Im], [Im, Re]]`` of a Hermitian expression."""
    real = Affine.lift(real)
    imag = Affine.lift(imag)
    return bmat([[real, -imag], [imag, real]])


class Sense(str, enum.Enum):
    NEG = "<"
    POS = ">"


@dataclass
class LmiConstraint:
    expr: Affine
    sense: Sense
    name: str = ""

    def __post_init__(self):
        self.sense = Sense(self.sense)
        if not self.expr.is_symmetric():
            raise ValueError(f"constraint {self.name!r} is not symmetric by construction")

    @property
    def size(self) -> int:
        return self.expr.shape[0]


@dataclass
class LmiProblem:
    """Decision variables plus a list of strict definiteness constraints."""

    variables: list[DecisionVariable] = field(default_factory=list)
    constraints: list[LmiConstraint] = field(default_factory=list)
    epsilon: float = DEFAULT_EPSILON
    equalities: list[tuple[str, Affine]] = field(default_factory=list)

    def variable(self, name: str, kind: VariableKind | str, rows: int, cols: int | None = None) -> Affine:
        if cols is None:
            cols = rows
        if any(v.name == name for v in self.variables):
            raise ValueError(f"duplicate variable name {name!r}")
        var = DecisionVariable(name, VariableKind(kind), rows, cols)
        self.variables.append(var)
        return Affine.of(var)

    def get(self, name: str) -> DecisionVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def negative_definite(self, expr: Any, name: str = "") -> LmiConstraint:
        return self._add(expr, Sense.NEG, name)

    def positive_definite(self, expr: Any, name: str = "") -> LmiConstraint:
        return self._add(expr, Sense.POS, name)

    def equal_zero(self, expr: Any, name: str = "") -> None:
        """Linear equality ``expr == 0`` (entrywise)."""
        expr = Affine.lift(expr)
        unknown = [v.name for v in expr.variables if v not in self.variables]
        if unknown:
            raise ValueError(f"equality {name!r} references unregistered variables {unknown}")
        if expr.const.size:
            self.equalities.append((name or f"e{len(self.equalities)}", expr))

    def _add(self, expr: Any, sense: Sense, name: str) -> LmiConstraint:
        expr = Affine.lift(expr)
        unknown = [v.name for v in expr.variables if v not in self.variables]
        if unknown:
            raise ValueError(f"constraint {name!r} references unregistered variables {unknown}")
        con = LmiConstraint(expr, sense, name or f"c{len(self.constraints)}")
        self.constraints.append(con)
        return con

    @property
    def n_params(self) -> int:
        return sum(v.size for v in self.variables)

    def offsets(self) -> dict[DecisionVariable, slice]:
        out, k = {}, 0
        for v in self.variables:
            out[v] = slice(k, k + v.size)
            k += v.size
        return out

    def compile(self) -> list[tuple[np.ndarray, np.ndarray, Sense]]:
        """Per constraint ``(F0, F, sense)`` with ``M(x) = F0 + sum_k x_k F[k]``."""
        offsets = self.offsets()
        out = []
        for con in self.constraints:
            N = con.size
            F = np.zeros((self.n_params, N, N))
            for v, c in con.expr.coeffs.items():
                F[offsets[v]] += c
            out.append((con.expr.const, F, con.sense))
        return out

    def compile_equalities(self) -> tuple[np.ndarray, np.ndarray]:
        """``(G, g)`` with the equalities stacked as ``G x + g = 0``."""
        offsets = self.offsets()
        rows_G, rows_g = [], []
        for _, expr in self.equalities:
            r = expr.const.size
            G = np.zeros((r, self.n_params))
            for v, c in expr.coeffs.items():
                G[:, offsets[v]] += c.reshape(v.size, r).T
            rows_G.append(G)
            rows_g.append(expr.const.reshape(-1))
        if not rows_G:
            return np.zeros((0, self.n_params)), np.zeros(0)
        return np.vstack(rows_G), np.concatenate(rows_g)

    def unpack(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {v.name: v.unpack(x[s]) for v, s in self.offsets().items()}


class Verdict(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    INCONCLUSIVE = "inconclusive"


@dataclass
class LmiSolution:
    verdict: Verdict
    assignment: dict[str, np.ndarray] = field(default_factory=dict)
    status: str = ""
    margin: float = float("nan")
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.verdict is Verdict.FEASIBLE

    def __getitem__(self, name: str) -> np.ndarray:
        return self.assignment[name]


def evaluate(constraint: LmiConstraint | Affine, assignment: Mapping[Any, Any]) -> np.ndarray:
    """Numeric value of a constraint's matrix, symmetrized."""
    expr = constraint.expr if isinstance(constraint, LmiConstraint) else constraint
    M = expr.value(assignment)
    return 0.5 * (M + M.T)


def constraint_margin(constraint: LmiConstraint, assignment: Mapping[Any, Any]) -> float:
    """Signed distance to violation: ``-max eig`` for ``< 0``, ``min eig`` for ``> 0``."""
    M = evaluate(constraint, assignment)
    if M.size == 0:
        return float("inf")
    w = np.linalg.eigvalsh(M)
    return float(-w[-1]) if constraint.sense is Sense.NEG else float(w[0])


class Backend(Protocol):
    name: str

    def solve(self, problem: LmiProblem, epsilon: float) -> tuple[str, np.ndarray | None, dict[str, Any]]:
        """Return ``(status, x, info)`` with status in feasible/infeasible/inconclusive."""
        ...


class CvxpyBackend:
    """Default backend: cvxpy with an interior-point conic solver.

    Rather than a zero-objective feasibility problem (ill-posed for
    homogeneous LMIs, where ``x = 0`` sits on the boundary), the backend
    maximizes a common margin ``t <= t_max`` with ``M_i(x) <= -t I`` and
    reports feasibility iff ``t >= eps``.  The verdict is the same as for
    ``M_i(x) <= -eps I``.
    """

    name = "cvxpy"

    def __init__(self, solver: str = "CLARABEL", t_max: float = 1.0, **solver_options: Any):
        self.solver = solver
        self.t_max = t_max
        self.solver_options = solver_options

    def solve(self, problem: LmiProblem, epsilon: float):
        import cvxpy as cp

        K = problem.n_params
        x = cp.Variable(K) if K else None
        t = cp.Variable()
        cons = [t <= self.t_max]
        for F0, F, sense in problem.compile():
            N = F0.shape[0]
            if N == 0:
                continue
            if x is None:
                M = cp.Constant(F0)
            else:
                M = F0 + cp.reshape(F.reshape(K, N * N).T @ x, (N, N), order="C")
            M = 0.5 * (M + M.T)
            if sense is Sense.NEG:
                M = -M
            cons.append(M - t * np.eye(N) >> 0)
        G, g = problem.compile_equalities()
        if G.shape[0] and x is not None:
            cons.append(G @ x + g == 0)
        prob = cp.Problem(cp.Maximize(t), cons)
        info: dict[str, Any] = {"solver": self.solver, "t_max": self.t_max}
        try:
            with warnings.catch_warnings():
                # inaccurate statuses are classified below
                warnings.filterwarnings("ignore", message="Solution may be inaccurate")
                prob.solve(solver=self.solver, **self.solver_options)
        except cp.error.SolverError as exc:
            info["error"] = str(exc)
            return Verdict.INCONCLUSIVE.value, None, info
        info["solver_status"] = prob.status
        if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            # only t <= t_max can make the epigraph problem infeasible: never here
            return Verdict.INCONCLUSIVE.value, None, info
        if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            t_opt = float(t.value)
            info["best_margin"] = t_opt
            xv = np.zeros(0) if x is None else np.asarray(x.value, dtype=float).reshape(-1)
            if t_opt >= epsilon:
                return Verdict.FEASIBLE.value, xv, info
            # inaccurate solves of infeasible homogeneous LMIs stall near t = 0
            if prob.status == cp.OPTIMAL or t_opt < 0.1 * epsilon:
                return Verdict.INFEASIBLE.value, None, info
        return Verdict.INCONCLUSIVE.value, None, info


def solve_feasibility(
    problem: LmiProblem,
    epsilon: float | None = None,
    backend: Backend | None = None,
    post_tol: float = POST_TOL,
) -> LmiSolution:
    eps = problem.epsilon if epsilon is None else float(epsilon)
    backend = backend or CvxpyBackend()
    status, x, info = backend.solve(problem, eps)
    info = dict(info, backend=backend.name, epsilon=eps)
    if status != Verdict.FEASIBLE.value or x is None:
        verdict = Verdict(status) if status != Verdict.FEASIBLE.value else Verdict.INCONCLUSIVE
        return LmiSolution(verdict, status=str(info.get("solver_status", status)), diagnostics=info)

    assignment = problem.unpack(x)
    margins = {c.name: constraint_margin(c, assignment) for c in problem.constraints}
    worst = min(margins.values(), default=float("inf"))
    info["constraint_margins"] = margins
    eq_err = max((float(np.max(np.abs(e.value(assignment)))) for _, e in problem.equalities), default=0.0)
    info["equality_error"] = eq_err
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if worst < eps - post_tol or eq_err > post_tol * scale:
        info["reason"] = "re-evaluation of the returned point violates the margin"
        return LmiSolution(
            Verdict.INCONCLUSIVE, assignment, str(info.get("solver_status")), worst, info
        )
    return LmiSolution(Verdict.FEASIBLE, assignment, str(info.get("solver_status")), worst, info)


def _write_matrix(buf: io.StringIO, M: np.ndarray) -> None:
    for row in M:
        buf.write(" ".join(repr(float(v)) for v in row) + "\n")


def dump_problem(problem: LmiProblem, assignment: Mapping[Any, Any] | None = None) -> str:
    """Plain-text dump: one section per constraint, constant then one matrix per parameter."""
    buf = io.StringIO()
    offsets = problem.offsets()
    buf.write(f"# variables {len(problem.variables)} parameters {problem.n_params}\n")
    for v in problem.variables:
        s = offsets[v]
        buf.write(f"# variable {v.name} {v.kind.value} {v.rows}x{v.cols} params {s.start}:{s.stop}\n")
    for (F0, F, sense), con in zip(problem.compile(), problem.constraints):
        N = F0.shape[0]
        buf.write(f"\n[constraint {con.name}] sense {sense.value} 0 size {N}\n")
        buf.write("# constant\n")
        _write_matrix(buf, F0)
        for k in range(problem.n_params):
            if np.any(F[k]):
                buf.write(f"# coefficient {k}\n")
                _write_matrix(buf, F[k])
        if assignment is not None:
            buf.write("# value\n")
            _write_matrix(buf, evaluate(con, assignment))
    if problem.equalities:
        G, g = problem.compile_equalities()
        buf.write(f"\n[equalities] rows {G.shape[0]}: G x + g = 0, columns g then G\n")
        _write_matrix(buf, np.hstack([g[:, None], G]))
    return buf.getvalue()

