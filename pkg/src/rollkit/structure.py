"""Numerical certificates for the geometry of the reduction.

Every check reduces to a scalar identity in the coordinates
``q = (theta, psi, phi, x, y)``:

* the horizontal lifts span ``ker G`` of the constrained system;
* their Lie bracket is ``sin(theta) d/dphi`` (the e_N part is
  ``r cos - h'``, which vanishes);
* the J.K coefficient on ``(d_theta, d_psi)`` is ``-p_psi n(theta)``;
* ``N^-1 Omega_NH`` is closed iff ``n = N'/N``;
* the gyroscopic tensor derives from ``Phi = -log N``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .coefficients import ReducedCoefficients
from .errors import SingularityError
from .oracle import ConstrainedSystem

FD_STEP = 1e-5

DEFAULT_TOLERANCES = {
    "lift_kernel": 1e-12,
    "bracket_coefficient": 1e-6,
    "bracket_residual": 1e-6,
    "jk_double_route": 1e-10,
    "conformal": 1e-8,
    "phi_simple": 1e-8,
    "f_theta": 1e-12,
    "nose_identity": 1e-8,
    "geometry_closed_form": 1e-10,
    "geometry_fd": 1e-6,
    "b_i3_independence": 0.0,
}


class ConnectionFrame:
    """Horizontal lifts of ``d_theta`` and ``d_psi`` to the total space."""

    def __init__(self, geom):
        self.geom = geom

    def h_theta(self, q):
        th, _, phi, _, _ = q
        r = float(self.geom.curvature(th))
        return np.array([1.0, 0.0, 0.0, r * math.sin(phi), -r * math.cos(phi)])

    def h_psi(self, q):
        th, _, phi, _, _ = q
        h = float(self.geom.h(th))
        return np.array([0.0, 1.0, -math.cos(th), -h * math.cos(phi), -h * math.sin(phi)])


def _jacobian(fun, q, step):
    q = np.asarray(q, dtype=float)
    cols = []
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = step
        cols.append((fun(q + e) - fun(q - e)) / (2 * step))
    return np.column_stack(cols)


def lie_bracket(frame: ConnectionFrame, q, step=FD_STEP):
    """``[h_theta, h_psi] = D h_psi . h_theta - D h_theta . h_psi`` by central differences."""
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    X = frame.h_theta(q)
    Y = frame.h_psi(q)
    return _jacobian(frame.h_psi, q, step) @ X - _jacobian(frame.h_theta, q, step) @ Y


def bracket_curvature(frame: ConnectionFrame, q, step=FD_STEP):
    """``(d/dphi coefficient, norm of every other component)`` of the lift bracket."""
    br = lie_bracket(frame, q, step)
    rest = np.delete(br, 2)
    return float(br[2]), float(np.linalg.norm(rest))


def _lifted_momentum(system: ConstrainedSystem, theta, lift):
    """``(P_phi, lift^T M lift)`` for a unit-rate horizontal velocity at ``phi = 0``."""
    q = (theta, 0.0, 0.0, 0.0, 0.0)
    v = lift(q)
    Mv = system.mass_matrix(q) @ v
    return float(Mv[2]), float(v @ Mv)


def jk_coefficient(coeffs: ReducedCoefficients, theta, p_psi):
    """J.K on ``(d_theta, d_psi)`` two ways: ``-C sin / A p_psi`` and via ``P_phi`` of the lift.

    The second route never touches the closed-form coefficients: the lifted
    velocity ``psi_dot h_psi`` with ``psi_dot = p_psi / (h_psi^T M h_psi)`` is
    fed to the unconstrained mass matrix and ``-P_phi sin(theta)`` is read off.
    """
    s = math.sin(theta)
    if s == 0.0:
        raise SingularityError("J.K coefficient needs sin(theta) != 0")
    route_a = -float(coeffs.C(theta)) * s / float(coeffs.A(theta)) * p_psi
    system = ConstrainedSystem(coeffs)
    frame = ConnectionFrame(coeffs.geom)
    p_phi_unit, a_lift = _lifted_momentum(system, theta, frame.h_psi)
    route_b = -p_phi_unit * (p_psi / a_lift) * s
    return route_a, route_b


def _dlog_nose(coeffs, theta, step):
    lo = np.log(coeffs.N(theta - step))
    hi = np.log(coeffs.N(theta + step))
    return (hi - lo) / (2 * step)


def _fd_grid(theta, step):
    # keep central differences inside [0, pi]
    return np.clip(np.asarray(theta, dtype=float), step, math.pi - step)


def conformal_check(coeffs: ReducedCoefficients, theta, step=FD_STEP):
    """``|n - N'/N|`` by central differences; closedness of ``N^-1 Omega_NH``."""
    th = _fd_grid(theta, step)
    return np.abs(coeffs.n(th) - _dlog_nose(coeffs, th, step))


def phi_simple_check(coeffs: ReducedCoefficients, theta, step=FD_STEP):
    """``(Phi, residual)`` with ``Phi = -log N`` and residual ``|Phi' + n|``.

    The tensor coefficient ``f_psi^{theta psi} = -n`` is the ``Phi'``
    statement; ``f_theta^{theta psi} = 0`` is certified separately by
    :func:`f_theta_coefficient`.
    """
    th = _fd_grid(theta, step)
    phi = -np.log(coeffs.N(th))
    dphi = -_dlog_nose(coeffs, th, step)
    return phi, np.abs(dphi + coeffs.n(th))


def f_theta_coefficient(coeffs: ReducedCoefficients, theta):
    """``P_phi`` carried by the ``theta`` lift: zero means no ``p_theta`` term in J.K."""
    system = ConstrainedSystem(coeffs)
    frame = ConnectionFrame(coeffs.geom)
    p_phi, _ = _lifted_momentum(system, theta, frame.h_theta)
    return p_phi


def geometry_identities(geom, theta, step=FD_STEP):
    """Max residuals of the meridian identities, ``(closed_form, finite_difference)``."""
    th = np.asarray(theta, dtype=float)
    h, f = geom.h_f(th)
    fs = geom.f_star(th)
    r = geom.curvature(th)
    lam = geom.lam(th)
    zc = geom.z_c(th)
    dlam = geom.dlam(th)
    closed = [
        np.abs(h * h + fs * fs - (lam * lam + (r - dlam) ** 2)),
        np.abs(h - lam * np.cos(th) - zc * np.sin(th)),
        np.abs(lam - (h * np.cos(th) - fs * np.sin(th))),
    ]
    tf = _fd_grid(th, step)
    r_f = geom.curvature(tf)

    def d(fun):
        return (fun(tf + step) - fun(tf - step)) / (2 * step)

    fd = [
        np.abs(d(geom.z_c) - geom.lam(tf)),
        np.abs(d(geom.h) - r_f * np.cos(tf)),
        np.abs(d(geom.f) - r_f * np.sin(tf)),
        np.abs(d(geom.lam) - geom.dlam(tf)),
    ]
    return max(float(np.max(c)) for c in closed), max(float(np.max(c)) for c in fd)


@dataclass
class Check:
    name: str
    max_residual: float
    tolerance: float
    grid: int

    def __post_init__(self):
        self.max_residual = float(self.max_residual)

    @property
    def passed(self):
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    def as_dict(self):
        return {"name": self.name, "max_residual": self.max_residual, "tolerance": self.tolerance,
                "grid": self.grid, "pass": self.passed}


@dataclass
class CertificationReport:
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"version": __version__, **self.meta, "pass": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def certify(coeffs: ReducedCoefficients, n_points=1000, n_random=50, seed=0,
            tolerances=None, step=FD_STEP) -> CertificationReport:
    """Run every structural and coefficient identity on a grid and random configurations."""
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    lo, hi = coeffs.theta_domain
    grid = np.linspace(lo, hi, n_points)
    rng = np.random.default_rng(seed)
    rand_th = rng.uniform(lo, hi, n_random)
    rand_q = np.column_stack([rand_th, rng.uniform(-math.pi, math.pi, (n_random, 2)),
                              rng.normal(size=(n_random, 2))])

    system = ConstrainedSystem(coeffs)
    frame = ConnectionFrame(coeffs.geom)
    checks = []

    kern = 0.0
    br_coef = br_rest = 0.0
    for q in rand_q:
        G = system.constraint_jacobian(q)
        kern = max(kern, float(np.max(np.abs(G @ frame.h_theta(q)))),
                   float(np.max(np.abs(G @ frame.h_psi(q)))))
        coef, rest = bracket_curvature(frame, q, step)
        br_coef = max(br_coef, abs(coef - math.sin(q[0])))
        br_rest = max(br_rest, rest)
    checks += [Check("lift_kernel", kern, tol["lift_kernel"], n_random),
               Check("bracket_coefficient", br_coef, tol["bracket_coefficient"], n_random),
               Check("bracket_residual", br_rest, tol["bracket_residual"], n_random)]

    jk = 0.0
    f_th = 0.0
    for th, p in zip(rand_th, rng.normal(size=n_random)):
        a, b = jk_coefficient(coeffs, th, p)
        jk = max(jk, abs(a - b), abs(a + p * float(coeffs.n(th))))
        f_th = max(f_th, abs(f_theta_coefficient(coeffs, th)))
    checks += [Check("jk_double_route", jk, tol["jk_double_route"], n_random),
               Check("f_theta", f_th, tol["f_theta"], n_random)]

    conf = float(np.max(conformal_check(coeffs, grid, step)))
    _, phi_res = phi_simple_check(coeffs, grid, step)
    checks += [Check("nose_identity", conf, tol["nose_identity"], n_points),
               Check("conformal", conf, tol["conformal"], n_points),
               Check("phi_simple", float(np.max(phi_res)), tol["phi_simple"], n_points)]

    closed, fd = geometry_identities(coeffs.geom, grid, step)
    checks += [Check("geometry_closed_form", closed, tol["geometry_closed_form"], n_points),
               Check("geometry_fd", fd, tol["geometry_fd"], n_points)]

    # B must not read I3: bitwise comparison under a 20 % change
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        other = ReducedCoefficients(coeffs.geom, replace(coeffs.body, I3=1.2 * coeffs.body.I3))
    b_diff = float(np.max(np.abs(coeffs.B(grid) - other.B(grid))))
    checks.append(Check("b_i3_independence", b_diff, tol["b_i3_independence"], n_points))

    meta = {"surface": coeffs.profile.kind, "seed": seed, "fd_step": step,
            "theta_domain": [lo, hi]}
    return CertificationReport(checks, meta)
