"""Unreduced constrained dynamics on q = (theta, psi, phi, x, y).

The Lagrangian is the "skidding" one (no constraints substituted)::

    T = m/2 (x_C'^2 + y_C'^2 + Lambda^2 theta'^2)
        + I1/2 (theta'^2 + phi'^2 sin^2) + I3/2 (psi' + phi' cos)^2
    (x_C', y_C') = (x', y') - Lambda e_N phi' + Lambda' e_N_perp theta'
    V = m g z_C

with ``e_N = (cos phi, sin phi)`` and ``e_N_perp = (-sin phi, cos phi)``.  The
three velocity constraints (no twist, two no slip) are enforced with Lagrange
multipliers through the index-1 saddle system::

    [ M  G^T ] [ q'' ]   [ f          ]
    [ G  0   ] [ -lam] = [ -G'(q) q'  ]

No constraint stabilization is applied: the residual ``|G q'|`` is a
diagnostic of the integration and exceeding 1e-6 is a hard failure.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg.lapack import dgesv as _dgesv

from .coefficients import ReducedCoefficients
from .geometry import TorusGeometry
from .errors import ConstraintDriftError, IntegrationError, SingularityError
from .reduced import SIN_GUARD, ReducedState
from .trajectory import FULL_COLUMNS, Trajectory

DRIFT_LIMIT = 1e-6


class ConstrainedSystem:
    """Mass matrix, forces and constraint Jacobian of the rolling body."""

    def __init__(self, coeffs: ReducedCoefficients):
        self.coeffs = coeffs
        self.geom = coeffs.geom
        self.body = coeffs.body
        if isinstance(self.geom, TorusGeometry):
            self._dcurv = lambda th: 0.0
        else:
            self._dcurv = lambda th: float(self.geom.dcurvature(th))

    def _local(self, theta):
        h, fs, r, lam, dlam, zc = self.geom.local(theta)
        return h, r, lam, dlam, zc

    # -- kinetic/potential energy

    def mass_matrix(self, q):
        th, _, phi, _, _ = q
        _, _, lam, dlam, _ = self._local(th)
        return self._mass(th, phi, lam, dlam)

    def _mass(self, th, phi, lam, dlam):
        b = self.body
        m = b.m
        s, c = math.sin(th), math.cos(th)
        sp, cp = math.sin(phi), math.cos(phi)
        M = np.zeros((5, 5))
        M[0, 0] = b.I1 + m * (lam * lam + dlam * dlam)
        M[1, 1] = b.I3
        M[2, 2] = b.I1 * s * s + b.I3 * c * c + m * lam * lam
        M[1, 2] = M[2, 1] = b.I3 * c
        M[0, 3] = M[3, 0] = -m * dlam * sp
        M[0, 4] = M[4, 0] = m * dlam * cp
        M[2, 3] = M[3, 2] = -m * lam * cp
        M[2, 4] = M[4, 2] = -m * lam * sp
        M[3, 3] = M[4, 4] = m
        return M

    def _mass_derivatives(self, th, phi, r, dr, lam, dlam):
        """(dM/dtheta, dM/dphi); uses Lambda'' = r' - Lambda."""
        b = self.body
        m = b.m
        s, c = math.sin(th), math.cos(th)
        sp, cp = math.sin(phi), math.cos(phi)
        ddlam = dr - lam
        Mt = np.zeros((5, 5))
        Mt[0, 0] = 2.0 * m * dlam * (lam + ddlam)
        Mt[2, 2] = 2.0 * (b.I1 - b.I3) * s * c + 2.0 * m * lam * dlam
        Mt[1, 2] = Mt[2, 1] = -b.I3 * s
        Mt[0, 3] = Mt[3, 0] = -m * ddlam * sp
        Mt[0, 4] = Mt[4, 0] = m * ddlam * cp
        Mt[2, 3] = Mt[3, 2] = -m * dlam * cp
        Mt[2, 4] = Mt[4, 2] = -m * dlam * sp
        Mp = np.zeros((5, 5))
        Mp[0, 3] = Mp[3, 0] = -m * dlam * cp
        Mp[0, 4] = Mp[4, 0] = -m * dlam * sp
        Mp[2, 3] = Mp[3, 2] = m * lam * sp
        Mp[2, 4] = Mp[4, 2] = -m * lam * cp
        return Mt, Mp

    def lagrangian(self, q, qd):
        """``(T, V)`` evaluated directly from the velocity of the center of mass."""
        th, psi, phi, x, y = q
        thd, psid, phid, xd, yd = qd
        b = self.body
        _, _, lam, dlam, zc = self._local(th)
        s, c = math.sin(th), math.cos(th)
        sp, cp = math.sin(phi), math.cos(phi)
        xcd = xd - lam * cp * phid - dlam * sp * thd
        ycd = yd - lam * sp * phid + dlam * cp * thd
        T_lin = 0.5 * b.m * (xcd * xcd + ycd * ycd + lam * lam * thd * thd)
        T_ang = 0.5 * b.I1 * (thd * thd + phid * phid * s * s) + 0.5 * b.I3 * (psid + phid * c) ** 2
        return T_lin + T_ang, b.m * b.g * zc

    def energy(self, q, qd):
        T, V = self.lagrangian(q, qd)
        return T + V

    def ell_full(self, q, qd):
        """``N(theta) (phi' cos theta + psi')``: the conserved level without using the constraints."""
        th = q[0]
        b = self.body
        zc = self._local(th)[4]
        s, c = math.sin(th), math.cos(th)
        nose = math.sqrt(b.I1 * c * c + b.I3 * s * s + b.m * zc * zc)
        return nose * (qd[2] * c + qd[1])

    # -- constraints

    def constraint_jacobian(self, q):
        th, _, phi, _, _ = q
        h, r, _, _, _ = self._local(th)
        return self._G(th, phi, h, r)

    def _G(self, th, phi, h, r):
        sp, cp = math.sin(phi), math.cos(phi)
        return np.array([
            [0.0, math.cos(th), 1.0, 0.0, 0.0],
            [-r * sp, h * cp, 0.0, 1.0, 0.0],
            [r * cp, h * sp, 0.0, 0.0, 1.0],
        ])

    def _Gdot_qd(self, th, phi, h, r, dr, qd):
        thd, psid, phid = qd[0], qd[1], qd[2]
        sp, cp = math.sin(phi), math.cos(phi)
        dh = r * math.cos(th)
        return np.array([
            -math.sin(th) * thd * psid,
            (-dr * thd * sp - r * cp * phid) * thd + (dh * thd * cp - h * sp * phid) * psid,
            (dr * thd * cp - r * sp * phid) * thd + (dh * thd * sp + h * cp * phid) * psid,
        ])

    def constraint_residuals(self, q, qd):
        """``(no-twist, |no-slip|)`` residuals of a state."""
        g = self.constraint_jacobian(q) @ np.asarray(qd, dtype=float)
        return abs(g[0]), math.hypot(g[1], g[2])

    # -- dynamics

    def acceleration(self, q, qd):
        """Solve the saddle system; returns ``(q'', multipliers)``."""
        th, _, phi, _, _ = q
        if not (0.0 <= th <= math.pi) or math.sin(th) < SIN_GUARD:
            raise SingularityError(f"unreduced flow: sin(theta) < {SIN_GUARD:g} at theta = {th!r}")
        b = self.body
        m, I1, I3 = b.m, b.I1, b.I3
        h, r, lam, dlam, _ = self._local(th)
        dr = self._dcurv(th)
        thd, psid, phid, xd, yd = (float(v) for v in qd)
        s, c = math.sin(th), math.cos(th)
        sp, cp = math.sin(phi), math.cos(phi)
        ddlam = dr - lam
        # (dM/dtheta) qd and (dM/dphi) qd, entries as in _mass_derivatives
        mt0 = 2.0 * m * dlam * (lam + ddlam) * thd - m * ddlam * sp * xd + m * ddlam * cp * yd
        mt1 = -I3 * s * phid
        mt2 = (-I3 * s * psid + (2.0 * (I1 - I3) * s * c + 2.0 * m * lam * dlam) * phid
               - m * dlam * cp * xd - m * dlam * sp * yd)
        mt3 = -m * ddlam * sp * thd - m * dlam * cp * phid
        mt4 = m * ddlam * cp * thd - m * dlam * sp * phid
        mp0 = -m * dlam * cp * xd - m * dlam * sp * yd
        mp2 = m * lam * sp * xd - m * lam * cp * yd
        mp3 = -m * dlam * cp * thd + m * lam * sp * phid
        mp4 = -m * dlam * sp * thd - m * lam * cp * phid
        qMtq = thd * mt0 + psid * mt1 + phid * mt2 + xd * mt3 + yd * mt4
        qMpq = thd * mp0 + phid * mp2 + xd * mp3 + yd * mp4
        f0 = -(thd * mt0 + phid * mp0) + 0.5 * qMtq - m * b.g * lam
        f1 = -thd * mt1
        f2 = -(thd * mt2 + phid * mp2) + 0.5 * qMpq
        f3 = -(thd * mt3 + phid * mp3)
        f4 = -(thd * mt4 + phid * mp4)
        dh = r * c
        g0 = -s * thd * psid
        g1 = (-dr * thd * sp - r * cp * phid) * thd + (dh * thd * cp - h * sp * phid) * psid
        g2 = (dr * thd * cp - r * sp * phid) * thd + (dh * thd * sp + h * cp * phid) * psid
        Mtt = I1 + m * (lam * lam + dlam * dlam)
        Mpp = I1 * s * s + I3 * c * c + m * lam * lam
        K = np.array([
            [Mtt, 0.0, 0.0, -m * dlam * sp, m * dlam * cp, 0.0, -r * sp, r * cp],
            [0.0, I3, I3 * c, 0.0, 0.0, c, h * cp, h * sp],
            [0.0, I3 * c, Mpp, -m * lam * cp, -m * lam * sp, 1.0, 0.0, 0.0],
            [-m * dlam * sp, 0.0, -m * lam * cp, m, 0.0, 0.0, 1.0, 0.0],
            [m * dlam * cp, 0.0, -m * lam * sp, 0.0, m, 0.0, 0.0, 1.0],
            [0.0, c, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [-r * sp, h * cp, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [r * cp, h * sp, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
        ])
        rhs = np.array([f0, f1, f2, f3, f4, -g0, -g1, -g2])
        _, _, sol, info = _dgesv(K, rhs)
        if info != 0:
            raise IntegrationError(f"singular saddle matrix at theta = {th!r}")
        return sol[:5], -sol[5:]

    def step(self, q, qd, dt):
        return step_constrained(self, q, qd, dt)


def lagrangian(system: ConstrainedSystem, q, qd):
    return system.lagrangian(q, qd)


def constraint_jacobian(system: ConstrainedSystem, q):
    return system.constraint_jacobian(q)


def step_constrained(system: ConstrainedSystem, q, qd, dt):
    """One rk4 step of the multiplier formulation; hard-fails on constraint drift."""
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)

    def field(y, yd):
        return yd, system.acceleration(y, yd)[0]

    k1q, k1v = field(q, qd)
    k2q, k2v = field(q + 0.5 * dt * k1q, qd + 0.5 * dt * k1v)
    k3q, k3v = field(q + 0.5 * dt * k2q, qd + 0.5 * dt * k2v)
    k4q, k4v = field(q + dt * k3q, qd + dt * k3v)
    q_new = q + dt / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    qd_new = qd + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    drift = max(system.constraint_residuals(q_new, qd_new))
    if drift > DRIFT_LIMIT:
        raise ConstraintDriftError(f"constraint residual {drift:.3e} exceeds {DRIFT_LIMIT:g}",
                                   state=(q_new, qd_new))
    return q_new, qd_new


def velocity_projection(system: ConstrainedSystem, q, qd_raw):
    """M-orthogonal projection of a velocity onto the constraint distribution."""
    qd_raw = np.asarray(qd_raw, dtype=float)
    M = system.mass_matrix(q)
    G = system.constraint_jacobian(q)
    try:
        Minv_Gt = np.linalg.solve(M, G.T)
        lam = np.linalg.solve(G @ Minv_Gt, G @ qd_raw)
    except np.linalg.LinAlgError as exc:
        raise IntegrationError("singular matrix in velocity projection") from exc
    return qd_raw - Minv_Gt @ lam


def _full_row(system, t, q, qd):
    th, _, phi = q[0], q[1], q[2]
    h, r, _, _, _ = system._local(th)
    sp, cp = math.sin(phi), math.cos(phi)
    res_twist = abs(qd[2] + math.cos(th) * qd[1])
    res_slip = math.hypot(qd[3] + h * qd[1] * cp - r * qd[0] * sp,
                          qd[4] + h * qd[1] * sp + r * qd[0] * cp)
    return (t, *q, *qd, system.energy(q, qd), system.ell_full(q, qd), res_twist, res_slip)


def integrate_full(system: ConstrainedSystem, q0, qd0, t_end, dt, record_every=1) -> Trajectory:
    """Repeated :func:`step_constrained`; one output row every ``record_every`` steps.

    Channels: energy ``T + V``, ``ell_full``, no-twist and no-slip residuals.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    q = np.asarray(q0, dtype=float)
    qd = np.asarray(qd0, dtype=float)
    g0 = np.max(np.abs(system.constraint_jacobian(q) @ qd))
    if g0 > 1e-10:
        raise ValueError(f"initial velocity violates the constraints (|G qdot| = {g0:.3e}); "
                         "use velocity_projection")
    rows = [_full_row(system, 0.0, q, qd)]
    meta = {"kind": "full", "method": "rk4-multiplier", "dt": dt, "record_every": record_every}
    for k in range(n):
        try:
            q, qd = step_constrained(system, q, qd, dt)
        except (SingularityError, IntegrationError) as exc:
            partial = Trajectory(FULL_COLUMNS, np.array(rows), meta)
            exc.partial = partial
            raise
        if (k + 1) % record_every == 0 or k + 1 == n:
            rows.append(_full_row(system, (k + 1) * dt, q, qd))
    return Trajectory(FULL_COLUMNS, np.array(rows), meta)


def matched_initial(coeffs: ReducedCoefficients, state: ReducedState, psi0=0.0, phi0=0.0, x0=0.0, y0=0.0):
    """Full-state initial data on the constraint distribution matching a reduced state."""
    th = state.theta
    s = math.sin(th)
    geom = coeffs.geom
    h = float(geom.h(th))
    r = float(geom.curvature(th))
    thd = state.p_theta / float(coeffs.B(th))
    psid = state.ell / (float(coeffs.N(th)) * s * s)
    phid = -math.cos(th) * psid
    xd = -h * psid * math.cos(phi0) + r * thd * math.sin(phi0)
    yd = -h * psid * math.sin(phi0) - r * thd * math.cos(phi0)
    q = np.array([th, psi0, phi0, x0, y0], dtype=float)
    qd = np.array([thd, psid, phid, xd, yd])
    return q, qd
