import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_fourier, random_piecewise
from sharpholder.coeff_field import (AngularField, AngularProfile, DiskDomain, GridField,
                                     IdentityField, SymMatrix2, conjugate_entries, eval_matrix,
                                     field_from_spec, field_to_spec, polar_conjugate, rotation,
                                     validate)
from sharpholder.errors import (AngularCenterSingularity, ConfigError, DeterminantViolation,
                                InvalidProfile, NonPositiveDefinite, PointOutsideDomain)


def literal_angular(k, theta):
    """Entries of J diag(k, 1/k) J^T written out by hand."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[k * c * c + s * s / k, (k - 1 / k) * c * s],
                     [(k - 1 / k) * c * s, k * s * s + c * c / k]])


# -- SymMatrix2 / profiles ------------------------------------------------------

def test_symmatrix_roundtrip_and_invariants():
    m = SymMatrix2.from_array([[2.0, 0.3], [0.3, 0.7]])
    assert m.as_array()[0, 1] == m.as_array()[1, 0] == 0.3
    assert m.det == pytest.approx(2.0 * 0.7 - 0.09)
    lo, hi = m.eigvals()
    np.testing.assert_allclose([lo, hi], np.linalg.eigvalsh(m.as_array()), rtol=1e-14)
    assert m.is_positive_definite()
    assert not SymMatrix2(-1.0, 0.0, -1.0).is_positive_definite()
    assert m.quadratic([1.0, 0.0]) == 2.0


def test_profile_rejects_nonpositive():
    with pytest.raises(InvalidProfile):
        AngularProfile.piecewise([1.0, 0.0])
    with pytest.raises(InvalidProfile):
        AngularProfile.fourier(1.0, [2.0])
    with pytest.raises(InvalidProfile):
        AngularProfile("spline")


def test_profile_bounds_piecewise_exact():
    k = AngularProfile.piecewise([2.0, 3.0, 2.5])
    assert (k.k_min, k.k_max) == (2.0, 3.0)
    assert k(0.0) == 2.0 and k(2 * math.pi / 3) == 3.0
    assert k(2 * math.pi) == 2.0  # periodic


def test_profile_integral_and_cumulative(rng):
    from scipy.integrate import quad
    for _ in range(5):
        k = random_fourier(rng)
        assert k.integral() == pytest.approx(quad(k, 0, 2 * math.pi, limit=200)[0], rel=1e-12)
        t = rng.uniform(0, 2 * math.pi)
        assert k.cumulative(t) == pytest.approx(quad(k, 0, t, limit=200)[0], rel=1e-11, abs=1e-12)
        p = random_piecewise(rng)
        pts = list(p.breakpoints[1:-1])
        assert p.integral() == pytest.approx(quad(p, 0, 2 * math.pi, points=pts, limit=200)[0], rel=1e-10)
        assert p.cumulative(t) == pytest.approx(
            quad(p, 0, t, points=[x for x in pts if x < t] or None, limit=200)[0], rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.2, 5.0), min_size=1, max_size=9), st.floats(-20, 20))
def test_cumulative_is_quasi_periodic(values, theta):
    k = AngularProfile.piecewise(values)
    assert k.cumulative(theta + 2 * math.pi) == pytest.approx(k.cumulative(theta) + k.integral(),
                                                              rel=1e-12, abs=1e-10)


def test_profile_dict_roundtrip(rng):
    for k in (random_fourier(rng), random_piecewise(rng)):
        k2 = AngularProfile.from_dict(json.loads(json.dumps(k.to_dict())))
        t = np.linspace(0, 2 * math.pi, 50)
        np.testing.assert_array_equal(k(t), k2(t))


# -- eval_matrix ----------------------------------------------------------------

def test_identity_everywhere():
    f = IdentityField()
    m = eval_matrix(f, (0.3, -0.2))
    np.testing.assert_array_equal(m.as_array(), np.eye(2))


def test_angular_k2_axes():
    f = AngularField(AngularProfile.constant(2.0))
    np.testing.assert_allclose(eval_matrix(f, (1.0, 0.0)).as_array(), [[2, 0], [0, 0.5]], atol=1e-15)
    np.testing.assert_allclose(eval_matrix(f, (0.0, 1.0)).as_array(), [[0.5, 0], [0, 2]], atol=1e-15)


def test_angular_matches_literal_formula(rng):
    k = random_fourier(rng)
    f = AngularField(k)
    for _ in range(200):
        r, t = math.sqrt(rng.uniform()), rng.uniform(-math.pi, math.pi)
        m = eval_matrix(f, (r * math.cos(t), r * math.sin(t))).as_array()
        np.testing.assert_allclose(m, literal_angular(float(k(t)), t), atol=1e-13)


def test_angular_center_and_outside_errors():
    f = AngularField(AngularProfile.constant(2.0), center=(0.1, 0.0))
    with pytest.raises(AngularCenterSingularity):
        eval_matrix(f, (0.1, 0.0))
    with pytest.raises(PointOutsideDomain):
        eval_matrix(f, (1.5, 0.0))


def test_angular_constant_along_rays(rng):
    k = random_piecewise(rng)
    f = AngularField(k, center=(0.2, -0.1))
    t = rng.uniform(0, 2 * math.pi, size=20)
    e = np.stack([np.cos(t), np.sin(t)], axis=-1)
    base = f.entries(np.array(f.center) + 0.01 * e)
    for rho in (0.05, 0.2, 0.5):
        np.testing.assert_allclose(f.entries(np.array(f.center) + rho * e), base, rtol=0, atol=1e-14)


def test_angular_determinant_and_symmetry(rng):
    f = AngularField(random_fourier(rng, mean_range=(1, 10)))
    pts = rng.uniform(-0.7, 0.7, size=(1000, 2))
    e = f.entries(pts)
    assert np.max(np.abs(e[:, 0] * e[:, 2] - e[:, 1] ** 2 - 1)) <= 1e-12
    assert np.all(e[:, 0] > 0)


# -- validate -------------------------------------------------------------------

def test_validate_identity():
    b = validate(IdentityField())
    assert (b.lower, b.upper) == (1.0, 1.0)


def test_validate_angular_range_2_3():
    # k sweeps [2, 3] exactly
    k = AngularProfile.fourier(2.5, [0.5])
    b = validate(AngularField(k))
    # oracle: eigenvalues of J K J^T over a dense angle sweep
    t = np.linspace(0, 2 * math.pi, 20001)
    eig = np.array([np.linalg.eigvalsh(literal_angular(float(k(x)), x)) for x in t[::50]])
    assert b.upper == pytest.approx(3.0, rel=1e-9)
    assert b.lower == pytest.approx(1 / 3, rel=1e-9)
    assert eig.max() <= b.upper * (1 + 1e-12) and eig.min() >= b.lower * (1 - 1e-12)
    assert b.lower * b.upper == pytest.approx(1.0, abs=1e-10)


def test_validate_rejects_bad_grid_cell():
    vals = np.zeros((4, 4, 3))
    vals[..., 0] = vals[..., 2] = 1.0
    vals[1, 2] = [2.0, 0.0, 1.0]
    with pytest.raises(DeterminantViolation):
        validate(GridField(vals))
    vals[1, 2] = [-1.0, 0.0, -1.0]
    with pytest.raises(NonPositiveDefinite):
        validate(GridField(vals))
    with pytest.raises(ValueError):
        validate(IdentityField(), sample_n=8)


def test_grid_nearest_cell_and_random(rng):
    g = GridField.random(rng, 6, 1.0)
    b = validate(g)
    assert b.lower * b.upper == pytest.approx(1.0, abs=1e-10)
    # nearest-cell: the value at a cell center equals that stored cell
    x = g.x0 + 2.5 * g.dx
    y = g.y0 + 3.5 * g.dy
    np.testing.assert_array_equal(g.entries(np.array([x, y])), g.values[3, 2])


# -- polar conjugation ------------------------------------------------------------

def test_polar_conjugate_identity():
    p = polar_conjugate(IdentityField(), (0, 0), 0.4, 1.1)
    np.testing.assert_allclose(p.as_array(), np.eye(2), atol=1e-15)


def test_polar_conjugate_angular_is_diagonal(rng):
    k = random_piecewise(rng)
    f = AngularField(k)
    for t in rng.uniform(0, 2 * math.pi, 30):
        p = polar_conjugate(f, (0, 0), 0.3, t).as_array()
        # oracle: explicit product J^T (J K J^T) J
        J = rotation(t)
        K = J.T @ literal_angular(float(k(t)), t) @ J
        np.testing.assert_allclose(p, K, atol=1e-12)
        np.testing.assert_allclose(p, np.diag([k(t), 1 / k(t)]), atol=1e-12)


def test_polar_conjugate_outside():
    with pytest.raises(PointOutsideDomain):
        polar_conjugate(IdentityField(), (0.5, 0), 0.6, 0.0)


def test_p_identity_and_det_on_random_fields(rng):
    fields = [GridField.random(rng, 8, 1.2), AngularField(random_fourier(rng), center=(0.1, 0.2)),
              AngularField(random_piecewise(rng))]
    for f in fields:
        for _ in range(100):
            c = rng.uniform(-0.3, 0.3, size=2)
            r, t = rng.uniform(0.05, 0.5), rng.uniform(0, 2 * math.pi)
            p = polar_conjugate(f, c, r, t)
            A = eval_matrix(f, c + r * np.array([math.cos(t), math.sin(t)]))
            xi = np.array([math.cos(t), math.sin(t)])
            assert p.a11 == pytest.approx(A.quadratic(xi), abs=1e-12)
            assert abs(p.det - 1) <= 1e-12 * max(1.0, p.trace ** 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 10), st.floats(-math.pi, math.pi), st.floats(-10, 10))
def test_conjugation_preserves_det_trace(k, phi, theta):
    e = np.array([k, 0.0, 1 / k])
    a = conjugate_entries(conjugate_entries(e, phi), theta)
    assert a[0] * a[2] - a[1] ** 2 == pytest.approx(1.0, rel=1e-12)
    assert a[0] + a[2] == pytest.approx(k + 1 / k, rel=1e-12)


# -- JSON spec -----------------------------------------------------------------

def test_spec_roundtrip(rng):
    for f in (IdentityField(DiskDomain((0.1, 0.0), 2.0)), AngularField(random_piecewise(rng), (0.1, 0.1)),
              GridField.random(rng, 4)):
        g = field_from_spec(json.loads(json.dumps(field_to_spec(f))))
        pts = rng.uniform(-0.5, 0.5, size=(20, 2))
        np.testing.assert_array_equal(f.entries(pts), g.entries(pts))
        assert g.domain == f.domain


@pytest.mark.parametrize("spec", [
    [], {"variant": "hexagonal"}, {"variant": "angular"},
    {"variant": "angular", "angular": {"profile": {"kind": "fourier", "cos": "x"}}},
    {"variant": "grid"}, {"variant": "identity", "domain": {"radius": "wide"}},
])
def test_spec_errors(spec):
    with pytest.raises(ConfigError):
        field_from_spec(spec)
