import math

import numpy as np
import pytest

from focsyn import lmi
from focsyn.lmi import LmiProblem, Verdict, bmat, evaluate, hermitian_embedding, solve_feasibility
from focsyn.model import sym
from focsyn.stability import hermitian_weight, lemma1_angle
from focsyn.synthesis import build_problem


def test_evaluate_variable_identity():
    p = LmiProblem()
    X = p.variable("X", "symmetric", 2)
    c = p.negative_definite(X)
    np.testing.assert_array_equal(evaluate(c, {"X": np.diag([-1.0, -2.0])}), [[-1, 0], [0, -2]])


def test_evaluate_lyapunov_form():
    p = LmiProblem()
    X = p.variable("X", "symmetric", 2)
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    np.testing.assert_array_equal(evaluate(A @ X + X @ A.T, {"X": np.eye(2)}), [[0, 1], [1, 0]])


def test_pi11_at_identity_example1(ex1):
    sys = ex1.system
    prob = build_problem(sys.nominal(), 0)
    c = next(c for c in prob.constraints if c.name == "synthesis")
    got = evaluate(c, {"PS_re": np.eye(3), "PS_im": np.zeros((3, 3)), "T4": np.zeros((1, 3))})
    want = 2 * math.cos(0.1 * math.pi) * sym(sys.A)
    np.testing.assert_allclose(got, want, atol=1e-12)
    assert lemma1_angle(0.8) == pytest.approx(0.1 * math.pi)


def test_contradictory_scalar_infeasible():
    p = LmiProblem()
    x = p.variable("x", "symmetric", 1)
    p.negative_definite(x)
    p.negative_definite(-x)
    assert solve_feasibility(p).verdict is Verdict.INFEASIBLE


def _lyapunov(A):
    p = LmiProblem()
    X = p.variable("X", "symmetric", A.shape[0])
    p.positive_definite(X, "X")
    p.negative_definite(A @ X + X @ A.T, "lyap")
    return p


def test_stable_lyapunov_feasible():
    sol = solve_feasibility(_lyapunov(np.diag([-1.0, -3.0])))
    assert sol.feasible
    for c in _lyapunov(np.diag([-1.0, -3.0])).constraints:
        assert lmi.constraint_margin(c, sol.assignment) >= lmi.DEFAULT_EPSILON - lmi.POST_TOL


def test_unstable_lyapunov_infeasible():
    assert solve_feasibility(_lyapunov(np.array([[1.0]]))).verdict is Verdict.INFEASIBLE


@pytest.mark.parametrize("seed", range(10))
def test_feasible_assignments_reverify(seed):
    r = np.random.default_rng(seed)
    A = r.standard_normal((3, 3))
    A -= (np.max(np.linalg.eigvals(A).real) + 0.5) * np.eye(3)
    prob = _lyapunov(A)
    sol = solve_feasibility(prob)
    assert sol.feasible
    X = sol["X"]
    assert np.linalg.eigvalsh(X)[0] > 0
    assert np.linalg.eigvalsh(A @ X + X @ A.T)[-1] < 0


@pytest.mark.parametrize("seed", range(10))
def test_scaling_preserves_verdict(seed):
    r = np.random.default_rng(100 + seed)
    A = r.standard_normal((3, 3))
    base = solve_feasibility(_lyapunov(A)).verdict
    scaled = solve_feasibility(_lyapunov(10 * A)).verdict
    assert base is scaled


@pytest.mark.parametrize("seed", range(25))
def test_block_assembly_matches_dense_oracle(seed):
    r = np.random.default_rng(seed)
    p = LmiProblem()
    X = p.variable("X", "symmetric", 2)
    S = p.variable("S", "skew-symmetric", 2)
    T = p.variable("T", "full", 3, 2)
    g = p.variable("g", "scalar", 1)
    A, B, K = r.standard_normal((2, 2)), r.standard_normal((2, 3)), r.standard_normal((3, 3))
    W = hermitian_weight(X, S, 0.3)
    expr = bmat([
        [A @ X + X @ A.T, T.T + B @ K, X @ B],
        [None, lmi.times_identity(g, 3) * -1.0, 0],
        [None, None, K + K.T - B.T @ (W + W.T) @ B],
    ])
    vals = {
        "X": sym(r.standard_normal((2, 2))),
        "S": (lambda L: L - L.T)(r.standard_normal((2, 2))),
        "T": r.standard_normal((3, 2)),
        "g": np.array([[r.standard_normal()]]),
    }
    Xv, Tv, gv = vals["X"], vals["T"], vals["g"][0, 0]
    b12 = Tv.T + B @ K
    b13 = Xv @ B
    Wv = 2 * (math.cos(0.3) * Xv - math.sin(0.3) * vals["S"])
    dense = np.block([
        [A @ Xv + Xv @ A.T, b12, b13],
        [b12.T, -gv * np.eye(3), np.zeros((3, 3))],
        [b13.T, np.zeros((3, 3)), K + K.T - B.T @ (Wv + Wv.T) @ B],
    ])
    np.testing.assert_allclose(evaluate(expr, vals), dense, atol=1e-12)


def test_hermitian_embedding_detects_definiteness(rng):
    L = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = L @ L.conj().T + 0.1 * np.eye(3)
    p = LmiProblem()
    R = p.variable("R", "symmetric", 3)
    I = p.variable("I", "skew-symmetric", 3)
    E = evaluate(hermitian_embedding(R, I), {"R": H.real, "I": H.imag})
    assert np.linalg.eigvalsh(E)[0] > 0
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(E))[::2], np.sort(np.linalg.eigvalsh(H)), atol=1e-10)


def test_asymmetric_constraint_rejected():
    p = LmiProblem()
    T = p.variable("T", "full", 2, 2)
    with pytest.raises(ValueError):
        p.negative_definite(T)


def test_unknown_variable_shape_checked():
    p = LmiProblem()
    X = p.variable("X", "symmetric", 2)
    with pytest.raises(ValueError):
        evaluate(X, {"X": np.eye(3)})


def test_equalities_enforced():
    p = LmiProblem()
    X = p.variable("X", "symmetric", 2)
    p.positive_definite(X, "X")
    p.equal_zero(X @ np.array([[1.0], [0.0]]) - np.array([[2.0], [0.0]]), "pin")
    sol = solve_feasibility(p)
    assert sol.feasible
    np.testing.assert_allclose(sol["X"][:, 0], [2, 0], atol=1e-7)


def test_dump_problem_sections():
    text = lmi.dump_problem(_lyapunov(np.diag([-1.0, -2.0])), {"X": np.eye(2)})
    assert "X" in text and "lyap" in text
    assert "-2" in text
