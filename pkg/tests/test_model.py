import math

import numpy as np
import pytest

from focsyn.model import (
    ControllerRealization,
    DimensionError,
    FoLtiSystem,
    assemble_closed_loop,
    validate_system,
)
from focsyn.stability import sector_check


def _with(sys, **kw):
    base = dict(A=sys.A, B=sys.B, C=sys.C, alpha=sys.alpha, M=sys.M, N1=sys.N1, N2=sys.N2, J=sys.J)
    base.update(kw)
    return FoLtiSystem(**base)


def test_example1_validates(ex1):
    assert validate_system(ex1.system).ok


def test_alpha_two_rejected(ex1):
    rep = validate_system(_with(ex1.system, alpha=2.0))
    assert not rep.ok
    assert any("alpha out of range" in v for v in rep.violations)


def test_negative_J_rejected(ex1):
    rep = validate_system(_with(ex1.system, J=-np.eye(3)))
    assert "Sym(J) not positive definite" in rep.violations


def test_dimension_violations_are_data():
    sys = FoLtiSystem(A=np.eye(2), B=np.ones((3, 1)), C=np.ones((1, 2)), alpha=0.5)
    rep = validate_system(sys)
    assert not rep.ok and any("B must have 2 rows" in v for v in rep.violations)


def test_partial_uncertainty_rejected():
    with pytest.raises(ValueError):
        FoLtiSystem(A=[[1]], B=[[1]], C=[[1]], alpha=0.5, M=[[1]])


def test_zero_controller_closed_loop():
    sys = FoLtiSystem(A=[[-1]], B=[[1]], C=[[1]], alpha=0.8)
    cl = assemble_closed_loop(sys, ControllerRealization.static([[0]]))
    np.testing.assert_array_equal(cl.Acl, [[-1]])
    assert cl.nominal


def test_dynamic_controller_substitution():
    sys = FoLtiSystem(A=[[0]], B=[[1]], C=[[1]], alpha=0.8)
    ctrl = ControllerRealization([[-2]], [[1]], [[1]], [[-1]])
    np.testing.assert_array_equal(assemble_closed_loop(sys, ctrl).Acl, [[-1, 1], [1, -2]])


def test_reference_nc1_controller_is_stable(ex1):
    ctrl = ControllerRealization([[-45.4]], [[-1.1, -0.8]], [[1.1]], [[-6.4, -1.8]])
    Acl = assemble_closed_loop(ex1.system, ctrl).Acl
    assert Acl.shape == (4, 4)
    ang = np.abs(np.angle(np.linalg.eigvals(Acl)))
    assert np.all(ang > 0.4 * math.pi)


def test_static_zero_gain_gives_perturbed_A(ex1, rng):
    D = rng.standard_normal((3, 3))
    cl = assemble_closed_loop(ex1.system, ControllerRealization.static(np.zeros((1, 2))), D)
    s = ex1.system
    np.testing.assert_array_equal(cl.Acl, s.A + s.M @ D @ s.N1)


@pytest.mark.parametrize("trial", range(20))
def test_block_structure(trial):
    r = np.random.default_rng(trial)
    n, l, m, nc = 3, 2, 2, 2
    sys = FoLtiSystem(r.standard_normal((n, n)), r.standard_normal((n, l)), r.standard_normal((m, n)), 0.7)
    ctrl = ControllerRealization(*(r.standard_normal(s) for s in [(nc, nc), (nc, m), (l, nc), (l, m)]))
    Acl = assemble_closed_loop(sys, ctrl).Acl
    np.testing.assert_allclose(Acl[n:, :n], ctrl.Bc @ sys.C, rtol=0, atol=1e-14)
    np.testing.assert_array_equal(Acl[n:, n:], ctrl.Ac)


def test_spectrum_union_without_input(rng):
    A = rng.standard_normal((3, 3))
    sys = FoLtiSystem(A, np.zeros((3, 1)), rng.standard_normal((2, 3)), 0.9)
    ctrl = ControllerRealization(*(rng.standard_normal(s) for s in [(2, 2), (2, 2), (1, 2), (1, 2)]))
    got = np.sort_complex(np.linalg.eigvals(assemble_closed_loop(sys, ctrl).Acl))
    want = np.sort_complex(np.concatenate([np.linalg.eigvals(A), np.linalg.eigvals(ctrl.Ac)]))
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_static_controller_has_empty_blocks():
    ctrl = ControllerRealization.static([[1.0, 2.0]])
    assert ctrl.nc == 0 and ctrl.Ac.shape == (0, 0) and ctrl.Bc.shape == (0, 2) and ctrl.Cc.shape == (1, 0)


def test_controller_shape_mismatch():
    with pytest.raises(DimensionError):
        ControllerRealization([[1]], [[1, 2, 3]], [[1]], [[1, 1]])


def test_controller_plant_mismatch():
    sys = FoLtiSystem([[1]], [[1]], [[1]], 0.5)
    with pytest.raises(DimensionError):
        assemble_closed_loop(sys, ControllerRealization.static([[1, 1]]))


def test_delta_requires_uncertain_plant():
    sys = FoLtiSystem([[1]], [[1]], [[1]], 0.5)
    with pytest.raises(DimensionError):
        assemble_closed_loop(sys, ControllerRealization.static([[0]]), [[1]])


def test_types_are_immutable(ex1):
    with pytest.raises(ValueError):
        ex1.system.A[0, 0] = 1.0
    cl = assemble_closed_loop(ex1.system, ControllerRealization.static(np.zeros((1, 2))))
    assert sector_check(cl.Acl, 0.8).stable  # open-loop A of this plant is sector-stable at 0.8
