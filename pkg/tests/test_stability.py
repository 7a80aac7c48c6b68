import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from focsyn.stability import lemma1_check, lemma2_check, lmi_check, sector_check


def test_scalar_stable():
    rep = sector_check([[-1.0]], 0.8)
    assert rep.stable
    assert rep.margin == pytest.approx(0.6 * math.pi)
    assert rep.margin_over_pi == pytest.approx(0.6)


@pytest.mark.parametrize("alpha,stable", [(0.8, True), (1.2, False)])
def test_rotation_matrix(alpha, stable):
    rep = sector_check([[0.0, 1.0], [-1.0, 0.0]], alpha)
    assert rep.stable is stable
    assert rep.margin == pytest.approx(0.5 * math.pi - alpha * math.pi / 2)


@pytest.mark.parametrize("alpha", [0.2, 0.9, 1.0, 1.7])
def test_positive_scalar_unstable(alpha):
    rep = sector_check([[1.0]], alpha)
    assert not rep.stable
    assert rep.margin == pytest.approx(-alpha * math.pi / 2)


def test_boundary_is_unstable():
    rep = sector_check([[0.0, 1.0], [-1.0, 0.0]], 1.0)  # ±i on the alpha = 1 boundary
    assert rep.boundary and not rep.stable


def test_alpha_outside_range():
    with pytest.raises(ValueError):
        sector_check([[-1.0]], 2.0)
    with pytest.raises(ValueError):
        lemma1_check([[-1.0]], 1.0)
    with pytest.raises(ValueError):
        lemma2_check([[-1.0]], 0.9)


def test_empty_matrix_is_stable():
    assert sector_check(np.zeros((0, 0)), 0.5).stable


def test_lemma1_scalars():
    assert lemma1_check([[-1.0]], 0.5).stable
    assert not lemma1_check([[1.0]], 0.5).stable


def test_lemma2_examples():
    assert lemma2_check([[-1.0]], 1.5).stable
    assert not lemma2_check([[0.0, 1.0], [-1.0, 0.0]], 1.2).stable


def test_lemma1_rotation_feasible_below_one():
    # ±i lies inside the stable region for alpha < 1
    rep = lemma1_check([[0.0, 1.0], [-1.0, 0.0]], 0.8)
    assert rep.stable and rep.method == "lmi-lemma1"


def _random_with_margin(r, alpha, band=1e-4):
    while True:
        A = r.standard_normal((3, 3))
        ref = sector_check(A, alpha)
        if abs(ref.margin) > band:
            return A, ref


@pytest.mark.parametrize("alpha", [0.3, 0.8, 1.1, 1.5])
def test_lemma_agrees_with_sector(alpha):
    r = np.random.default_rng(int(alpha * 10))
    for _ in range(100):
        A, ref = _random_with_margin(r, alpha)
        assert lmi_check(A, alpha).stable is ref.stable


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.05, 1.95))
def test_similarity_invariance(seed, alpha):
    r = np.random.default_rng(seed)
    A = r.standard_normal((4, 4))
    T = r.standard_normal((4, 4)) + 4 * np.eye(4)
    if np.linalg.cond(T) > 50:
        return
    B = T @ A @ np.linalg.inv(T)
    assert sector_check(B, alpha).margin == pytest.approx(sector_check(A, alpha).margin, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0.05, 1.95), b=st.floats(0.05, 1.95))
def test_alpha_monotone(seed, a, b):
    lo, hi = sorted((a, b))
    A = np.random.default_rng(seed).standard_normal((3, 3))
    if sector_check(A, hi).stable:
        assert sector_check(A, lo).stable
