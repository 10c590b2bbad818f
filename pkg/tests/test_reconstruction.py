import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rollkit.errors import SingularityError
from rollkit.reconstruction import (attitude, center_of_mass_track, contact_velocity, fit_circle,
                                    phi_rate, psi_rate, reconstruct, steady_circle)
from rollkit.reduced import ReducedState, integrate_reduced
from rollkit.trajectory import FULL_COLUMNS

angles = st.floats(-2 * math.pi, 2 * math.pi)


def test_psi_rate(solid, theta_star):
    assert psi_rate(solid, 1.0, 0.0) == 0.0
    # 0.1 / (N(theta*) sin^2 theta*) with solid inertias (mpmath): 1.972674272204760...
    assert psi_rate(solid, theta_star, 0.1) == pytest.approx(1.9726742722047604, rel=1e-13)
    th = np.linspace(0.1, 3.0, 50)
    back = solid.N(th) * np.sin(th) ** 2 * psi_rate(solid, th, 0.37)
    np.testing.assert_allclose(back, 0.37, rtol=1e-14)
    with pytest.raises(SingularityError):
        psi_rate(solid, 0.0, 0.1)


def test_phi_rate():
    assert phi_rate(math.pi / 2, 3.0) == pytest.approx(0.0, abs=1e-15)
    assert phi_rate(0.4, 1.0) < 0
    th, psid = 0.8, 1.7
    omega3 = phi_rate(th, psid) * math.cos(th) + psid
    assert omega3 == pytest.approx(math.sin(th) ** 2 * psid, rel=1e-14)


def test_contact_velocity(solid):
    g = solid.geom
    assert contact_velocity(g, 1.0, 0.0, 0.0, 0.3) == (0.0, 0.0)
    xd, yd = contact_velocity(g, 1.0, 0.4, 0.7, 0.0)
    assert xd == pytest.approx(-float(g.h(1.0)) * 0.7)
    assert yd == pytest.approx(-0.5 * 0.4)
    xd, yd = contact_velocity(g, 1.0, 0.0, 0.7, 2.1)
    assert math.hypot(xd, yd) == pytest.approx(float(g.h(1.0)) * 0.7, rel=1e-14)


def test_attitude_examples():
    np.testing.assert_array_equal(attitude(0.0, 0.0, 0.0), np.eye(3))
    phi, th, psi = 0.3, 1.1, -0.7
    R = attitude(phi, th, psi)
    np.testing.assert_allclose(R[2], [math.sin(th) * math.sin(psi), math.sin(th) * math.cos(psi), math.cos(th)],
                               atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(phi=angles, th=angles, psi=angles)
def test_attitude_orthogonal(phi, th, psi):
    R = attitude(phi, th, psi)
    assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-14
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-14)


def test_attitude_factorization():
    def rz(a):
        return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])

    def rx(a):
        return np.array([[1, 0, 0], [0, math.cos(a), -math.sin(a)], [0, math.sin(a), math.cos(a)]])

    phi, th, psi = 0.9, 0.4, 2.2
    np.testing.assert_allclose(attitude(phi, th, psi), rz(phi) @ rx(th) @ rz(psi), atol=1e-15)


def test_steady_circle(solid):
    g = solid.geom
    assert steady_circle(g, math.pi / 2) == math.inf
    assert steady_circle(g, 1e-4) == pytest.approx(1.0, abs=1e-3)
    assert steady_circle(g, 1e-4) > 1.0
    for th in (0.2, 0.7, 1.3):
        assert steady_circle(g, th) / float(g.h(th)) == pytest.approx(1 / math.cos(th))


def test_fit_circle_exact():
    a = np.linspace(0, 5, 40)
    xc, yc, rad, res = fit_circle(2 + 3 * np.cos(a), -1 + 3 * np.sin(a))
    assert (xc, yc, rad) == pytest.approx((2, -1, 3), abs=1e-12)
    assert res < 1e-12


def test_equilibrium_track_is_circle(solid, theta_star):
    red = integrate_reduced(solid, ReducedState(theta_star, 0.0, 0.1), 20.0, 1e-3)
    full = reconstruct(solid, red, (0.0, 0.4, 1.0, 2.0))
    xc, yc, rad, res = fit_circle(full["x"], full["y"])
    assert rad == pytest.approx(steady_circle(solid.geom, theta_star), abs=1e-6)
    assert res < 1e-6
    # fixed center: the circle found from the first and second halves coincide
    half = len(full) // 2
    c1 = fit_circle(full["x"][:half], full["y"][:half])
    c2 = fit_circle(full["x"][half:], full["y"][half:])
    assert c1[:2] == pytest.approx(c2[:2], abs=1e-8)
    # track curvature equals cos(theta*)/h(theta*)
    assert 1 / rad == pytest.approx(math.cos(theta_star) / float(solid.geom.h(theta_star)), rel=1e-8)


def test_rest_state_constant(solid):
    red = integrate_reduced(solid, ReducedState(math.pi / 2, 0.0, 0.0), 1.0, 1e-2)
    full = reconstruct(solid, red, (0.1, 0.2, 0.3, 0.4))
    for k, v in zip(("theta", "psi", "phi", "x", "y"), (math.pi / 2, 0.1, 0.2, 0.3, 0.4)):
        np.testing.assert_allclose(full[k], v, atol=1e-14)


def test_reconstruction_invariants(solid):
    red = integrate_reduced(solid, ReducedState(0.5, 0.3, 0.6), 10.0, 1e-3)
    full = reconstruct(solid, red, (0.0, 0.0, 0.0, 0.0))
    assert full.columns == FULL_COLUMNS and len(full) == len(red)
    assert np.max(full["res_notwist"]) < 1e-9
    assert np.max(full["res_noslip"]) < 1e-8
    ell = solid.N(full["theta"]) * np.sin(full["theta"]) ** 2 * full["psi_dot"]
    assert np.max(np.abs(ell - 0.6)) / 0.6 < 1e-9
    assert np.max(np.abs(full["ell"] - 0.6)) / 0.6 < 1e-9
    # attitude evaluated from angles stays orthogonal
    for i in range(0, len(full), 500):
        R = attitude(full["phi"][i], full["theta"][i], full["psi"][i])
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-10
    # the center of mass stays Lambda away from the contact point
    cx, cy = center_of_mass_track(solid.geom, full)
    np.testing.assert_allclose(np.hypot(cx - full["x"], cy - full["y"]), np.abs(solid.geom.lam(full["theta"])),
                               atol=1e-12)


def test_invalid_samples_marked(solid):
    from rollkit.trajectory import REDUCED_COLUMNS, Trajectory
    data = [(0.0, 1e-5, 0.0, 0.0, 0.0), (0.1, 1e-5, 0.0, 0.0, 0.0)]
    full = reconstruct(solid, Trajectory(REDUCED_COLUMNS, data), (0, 0, 0, 0))
    assert np.all(np.isnan(full["theta_dot"]))
    assert np.isnan(full["x"][1])


@pytest.mark.parametrize("which", ["hollow", "bulged"])
def test_general_bodies_residuals(which, request):
    c = request.getfixturevalue(which)
    red = integrate_reduced(c, ReducedState(0.9, 0.1, 0.3), 3.0, 1e-3)
    full = reconstruct(c, red)
    assert np.max(full["res_notwist"]) < 1e-9 and np.max(full["res_noslip"]) < 1e-8
    assert np.ptp(full["energy"]) / full["energy"][0] < 1e-9
