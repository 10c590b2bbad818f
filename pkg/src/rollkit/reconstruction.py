"""Lift a reduced (theta, p_theta; ell) trajectory to the full rolling motion.

    psi'  = ell / (N(theta) sin^2 theta)                    conserved level
    phi'  = -cos(theta) psi'                                no twist
    (x', y') = -h psi' e_N - r theta' e_N_perp              no slip

The angles and the contact point are integrated on the same grid with the
same rk4 stages as the reduced flow; the attitude matrix is evaluated from
the angles, never integrated.
"""

from __future__ import annotations

import math

import numpy as np

from .coefficients import ReducedCoefficients
from .errors import SingularityError
from .oracle import ConstrainedSystem
from .reduced import SIN_GUARD, _field, rk4_step
from .trajectory import FULL_COLUMNS, Trajectory


def psi_rate(coeffs: ReducedCoefficients, theta, ell):
    s = np.sin(theta)
    if ell == 0:
        return 0.0 * s
    if np.any(np.asarray(s) == 0.0):
        raise SingularityError("psi rate is singular at sin(theta) = 0")
    return ell / (coeffs.N(theta) * s * s)


def phi_rate(theta, psi_dot):
    return -np.cos(theta) * psi_dot


def contact_velocity(geom, theta, theta_dot, psi_dot, phi):
    """Velocity of the contact point in the plane, ``-h psi' e_N - r theta' e_N_perp``."""
    h = geom.h(theta)
    r = geom.curvature(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    xd = -h * psi_dot * cp + r * theta_dot * sp
    yd = -h * psi_dot * sp - r * theta_dot * cp
    return xd, yd


def attitude(phi, theta, psi):
    """Body-to-space rotation ``Rz(phi) Rx(theta) Rz(psi)``; columns are the body axes."""
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cs, ss = math.cos(psi), math.sin(psi)
    return np.array([
        [cf * cs - ct * ss * sf, -cf * ss - sf * ct * cs, sf * st],
        [sf * cs + cf * ct * ss, -sf * ss + cf * ct * cs, -cf * st],
        [st * ss, st * cs, ct],
    ])


def steady_circle(geom, theta_star):
    """Radius ``h / cos`` of the planar circle traced at a relative equilibrium.

    Returns ``math.inf`` when ``cos(theta*) = 0`` (straight-line rolling).
    """
    c = math.cos(theta_star)
    if abs(c) < 1e-15:
        return math.inf
    return float(geom.h(theta_star)) / abs(c)


def fit_circle(x, y):
    """Algebraic least-squares circle; returns ``(xc, yc, radius, rms_residual)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, y0 = x.mean(), y.mean()
    u, v = x - x0, y - y0
    A = np.column_stack([u, v, np.ones_like(u)])
    sol, *_ = np.linalg.lstsq(A, u * u + v * v, rcond=None)
    xc, yc = sol[0] / 2, sol[1] / 2
    radius = math.sqrt(max(sol[2] + xc * xc + yc * yc, 0.0))
    resid = np.hypot(u - xc, v - yc) - radius
    return xc + x0, yc + y0, radius, float(np.sqrt(np.mean(resid * resid)))


def _rates(coeffs, theta, p, phi, ell):
    """(theta', psi', phi', x', y') on the constraint distribution."""
    b = coeffs.body
    h, fs, r, lam, dlam, zc = coeffs.geom.local(theta)
    B = b.I1 + b.m * (h * h + fs * fs)
    s = math.sin(theta)
    c = math.cos(theta)
    thd = p / B
    if ell != 0.0:
        N = math.sqrt(b.I1 * c * c + b.I3 * s * s + b.m * zc * zc)
        psid = ell / (N * s * s)
    else:
        psid = 0.0
    phid = -c * psid
    cp, sp = math.cos(phi), math.sin(phi)
    return thd, psid, phid, -h * psid * cp + r * thd * sp, -h * psid * sp - r * thd * cp


def reconstruct(coeffs: ReducedCoefficients, reduced: Trajectory, initial=(0.0, 0.0, 0.0, 0.0)) -> Trajectory:
    """Full trajectory ``(theta, psi, phi, x, y)`` and rates from a reduced one.

    ``initial = (psi0, phi0, x0, y0)``.  Each interval re-runs the rk4 stages
    of the reduced flow from the stored sample so the quadrature of
    ``psi, phi, x, y`` uses exactly the reduced integrator's step.  Samples
    with ``sin(theta) < 1e-4`` are marked invalid (NaN rates).
    """
    t = reduced.t
    th = reduced["theta"]
    p = reduced["p_theta"]
    ell = float(reduced["ell"][0]) if len(reduced) else 0.0
    system = ConstrainedSystem(coeffs)
    n = len(reduced)
    out = np.empty((n, len(FULL_COLUMNS)))
    psi, phi, x, y = (float(v) for v in initial)

    def field(state):
        a, q, _, f, _, _ = state
        thd, pd = _field(coeffs, a, q, ell)
        _, psid, phid, xd, yd = _rates(coeffs, a, q, f, ell)
        return thd, pd, psid, phid, xd, yd

    for k in range(n):
        out[k] = _row(system, coeffs, t[k], th[k], p[k], psi, phi, x, y, ell)
        if k + 1 == n:
            break
        if math.sin(th[k]) < SIN_GUARD or math.isnan(psi):
            # no quadrature through the chart boundary; later planar data unknown
            psi = phi = x = y = float("nan")
            continue
        dt = t[k + 1] - t[k]
        (_, _, psi, phi, x, y), _ = rk4_step(field, (th[k], p[k], psi, phi, x, y), dt)
    return Trajectory(FULL_COLUMNS, out, {"kind": "reconstructed", "ell": ell})


def _row(system, coeffs, t, theta, p, psi, phi, x, y, ell):
    if math.sin(theta) < SIN_GUARD:
        nan = float("nan")
        return (t, theta, psi, phi, x, y, nan, nan, nan, nan, nan, nan, ell, nan, nan)
    thd, psid, phid, xd, yd = _rates(coeffs, theta, p, phi, ell)
    q = (theta, psi, phi, x, y)
    qd = (thd, psid, phid, xd, yd)
    res_twist, res_slip = system.constraint_residuals(q, qd)
    return (t, theta, psi, phi, x, y, thd, psid, phid, xd, yd,
            system.energy(q, qd), system.ell_full(q, qd), res_twist, res_slip)


def center_of_mass_track(geom, traj: Trajectory):
    """Planar projection of the center of mass, ``P + Lambda e_N_perp``."""
    lam = geom.lam(traj["theta"])
    phi = traj["phi"]
    return traj["x"] - lam * np.sin(phi), traj["y"] + lam * np.cos(phi)
