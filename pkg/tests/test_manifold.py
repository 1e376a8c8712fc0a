import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mshe import ConfigError, Field, ManifoldState, build_domain, project_tangent, renormalize, tangency_defect

DOM = build_domain(n_modes=12)
vec = arrays(np.float64, 12, elements=st.floats(-5, 5, allow_nan=False, allow_infinity=False))
nonzero = vec.filter(lambda c: np.linalg.norm(c) > 1e-3)


def unit(c):
    return renormalize(Field.from_modes(DOM, c))


@given(nonzero, vec)
def test_projection_is_tangent(c, h):
    u = unit(c)
    p = project_tangent(u, Field.from_modes(DOM, h))
    assert tangency_defect(u, p) <= 1e-12 * (1 + np.linalg.norm(h))


@given(nonzero, vec)
def test_projection_idempotent_and_pythagorean(c, h):
    u = unit(c)
    hf = Field.from_modes(DOM, h)
    p = project_tangent(u, hf)
    pp = project_tangent(u, p)
    np.testing.assert_allclose(pp.modes, p.modes, atol=1e-12 * (1 + np.linalg.norm(h)))
    normal = float(h @ u.modes)
    assert p.l2**2 + normal**2 == pytest.approx(float(h @ h), abs=1e-11 * (1 + h @ h))


def test_projection_of_normal_is_zero():
    u = unit(np.arange(1.0, 13.0))
    np.testing.assert_allclose(project_tangent(u, u * 3.0).modes, 0.0, atol=1e-14)


@given(nonzero)
def test_renormalize(c):
    assert unit(c).l2 == pytest.approx(1.0, abs=1e-15)
    assert ManifoldState(unit(c)).on_manifold()


def test_manifold_state_defect():
    s = ManifoldState(DOM.basis(1) * 1.5)
    assert s.norm_defect == pytest.approx(0.5)
    assert not s.on_manifold()


def test_zero_field_rejected():
    z = DOM.zeros()
    with pytest.raises(ConfigError):
        renormalize(z)
    with pytest.raises(ConfigError):
        project_tangent(z, DOM.basis(1))
