import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from rollkit.errors import DomainError
from rollkit.geometry import (SurfaceProfile, cp_distance_sq, dlambda, geometry, lam, meridian,
                              sample_profile, z_center)

from conftest import bulged_curvature


def test_torus_meridian_endpoints(torus):
    assert meridian(torus, 0.0) == pytest.approx((1.0, 0.0), abs=1e-15)
    assert meridian(torus, math.pi / 2) == pytest.approx((1.5, 0.5), abs=1e-15)


def test_torus_lambda_and_z(torus):
    assert lam(torus, math.pi / 4) == pytest.approx(math.cos(math.pi / 4), abs=1e-15)
    assert lam(torus, math.pi / 2) == pytest.approx(0.0, abs=1e-15)
    assert z_center(torus, math.pi / 2) == pytest.approx(1.5, abs=1e-15)
    assert z_center(torus, 0.0) == pytest.approx(torus.f_o, abs=1e-15)


def test_torus_dlambda(torus):
    # derivative of R cos(theta)
    assert dlambda(torus, math.pi / 3) == pytest.approx(-math.sin(math.pi / 3), abs=1e-14)
    assert dlambda(torus, 0.0) == pytest.approx(0.0, abs=1e-15)


def test_torus_cp_distance(torus):
    assert cp_distance_sq(torus, math.pi / 2) == pytest.approx(2.25, abs=1e-14)
    assert cp_distance_sq(torus, 0.0) == pytest.approx(1.0 + 0.25, abs=1e-14)


def test_general_constant_curvature_matches_torus(torus):
    gen = SurfaceProfile.general(lambda th: np.full_like(np.asarray(th, float), 0.5), 1.0, 0.5)
    th = np.linspace(0.0, math.pi, 301)
    g_t, g_g = geometry(torus), geometry(gen)
    for name in ("h", "f", "lam", "dlam", "z_c", "cp_sq"):
        np.testing.assert_allclose(getattr(g_g, name)(th), getattr(g_t, name)(th), atol=1e-10, err_msg=name)
    assert meridian(gen, math.pi / 3) == pytest.approx(meridian(torus, math.pi / 3), abs=1e-10)


def test_general_matches_direct_quadrature():
    prof = SurfaceProfile.general(bulged_curvature, 1.0, 0.5)
    g = geometry(prof)
    for th in (0.1, 0.77, 1.9, 3.0):
        h_ref = 1.0 + quad(lambda u: bulged_curvature(u) * math.cos(u), 0, th, epsabs=1e-13)[0]
        f_ref = quad(lambda u: bulged_curvature(u) * math.sin(u), 0, th, epsabs=1e-13)[0]
        h, f = g.h_f(th)
        assert h == pytest.approx(h_ref, abs=1e-10)
        assert f == pytest.approx(f_ref, abs=1e-10)


def test_sampled_profile_matches_callable():
    exact = geometry(SurfaceProfile.general(bulged_curvature, 1.0, 0.5))
    sampled = geometry(SurfaceProfile.general(sample_profile(bulged_curvature, 1025), 1.0, 0.5))
    th = np.linspace(0.01, 3.1, 200)
    np.testing.assert_allclose(sampled.z_c(th), exact.z_c(th), atol=1e-8)


@pytest.mark.parametrize("prof_fixture", ["torus"])
def test_h_and_f_limits(prof_fixture, request):
    g = geometry(request.getfixturevalue(prof_fixture))
    h0, f0 = g.h_f(0.0)
    assert h0 == g.h_o and f0 == 0.0


def _fd(fun, th, step=1e-5):
    return (fun(th + step) - fun(th - step)) / (2 * step)


@pytest.mark.parametrize("which", ["torus", "bulged", "lens"])
def test_meridian_relations_by_finite_differences(which, request):
    obj = request.getfixturevalue(which)
    g = geometry(obj) if which == "torus" else obj.geom
    th = np.linspace(0.05, math.pi - 0.05, 400)
    r = g.curvature(th)
    assert np.max(np.abs(_fd(g.h, th) - r * np.cos(th))) < 1e-6
    assert np.max(np.abs(_fd(g.f, th) - r * np.sin(th))) < 1e-6
    assert np.max(np.abs(_fd(g.z_c, th) - g.lam(th))) < 1e-6


@pytest.mark.parametrize("which", ["torus", "bulged", "lens"])
def test_closed_form_identities(which, request):
    obj = request.getfixturevalue(which)
    g = geometry(obj) if which == "torus" else obj.geom
    th = np.linspace(0.0, math.pi, 100)
    h, fs, r = g.h(th), g.f_star(th), g.curvature(th)
    lam_, dl, zc = g.lam(th), g.dlam(th), g.z_c(th)
    np.testing.assert_allclose(h * h + fs * fs, lam_ * lam_ + (r - dl) ** 2, atol=1e-10)
    np.testing.assert_allclose(h - lam_ * np.cos(th), zc * np.sin(th), atol=1e-10)
    np.testing.assert_allclose(g.cp_sq(th), h * h + fs * fs, atol=1e-12)


def test_domain_errors(torus):
    with pytest.raises(DomainError):
        meridian(torus, -0.1)
    with pytest.raises(DomainError):
        z_center(torus, math.pi + 0.01)
    with pytest.raises(DomainError):
        lam(torus, float("nan"))


def test_profile_invariants():
    with pytest.raises(ValueError):
        SurfaceProfile.torus(0.5, 1.0)
    with pytest.raises(ValueError):
        SurfaceProfile.torus(1.0, 0.5, f_o=0.2)
    # center of mass above the top of the body
    with pytest.raises(ValueError):
        SurfaceProfile.general(bulged_curvature, 1.0, 5.0)
    with pytest.raises(ValueError):
        SurfaceProfile.general([(0.0, 0.5), (1.0, -0.1), (math.pi, 0.5)], 1.0, 0.5)
    with pytest.raises(ValueError):
        SurfaceProfile.general([(0.0, 0.5), (1.0, 0.5)], 1.0, 0.5)


def test_override_moves_center_of_mass():
    prof = SurfaceProfile.torus(1.0, 0.5, f_o=0.3, override=True)
    assert z_center(prof, 0.0) == pytest.approx(0.3)


def test_distinct_callables_do_not_share_cache():
    a = geometry(SurfaceProfile.general(lambda t: 0.5 + 0 * t, 1.0, 0.5))
    b = geometry(SurfaceProfile.general(lambda t: 0.6 + 0 * t, 1.0, 0.5))
    assert a.h(1.0) != b.h(1.0)


@settings(max_examples=60, deadline=None)
@given(R=st.floats(0.2, 5.0), ratio=st.floats(0.05, 0.95), th=st.floats(0.0, math.pi))
def test_torus_closed_forms_property(R, ratio, th):
    r = R * ratio
    prof = SurfaceProfile.torus(R, r)
    assert lam(prof, th) == pytest.approx(R * math.cos(th), abs=1e-12 * R)
    assert z_center(prof, th) == pytest.approx(r + R * math.sin(th), abs=1e-12 * R)
    assert cp_distance_sq(prof, th) == pytest.approx(R * R + r * r + 2 * R * r * math.sin(th), rel=1e-12)
