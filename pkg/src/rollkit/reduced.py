"""One-degree-of-freedom reduced dynamics in (theta, p_theta) at fixed ell.

    H(theta, p; ell) = p^2 / (2 B(theta)) + ell^2 / (2 sin^2 theta) + m g z_C(theta)

The flow is canonical in the original time.  With the time change
``dt = sqrt(B) dtau`` and ``p_tilde = p / sqrt(B)`` it becomes a unit-mass
particle in the effective potential, ``theta'' = -dV/dtheta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.integrate import RK45
from scipy.interpolate import CubicHermiteSpline

from ._parallel import parallel_map
from .coefficients import ReducedCoefficients
from .errors import DomainError, IntegrationError, SingularityError
from .trajectory import REDUCED_COLUMNS, TAU_COLUMNS, Trajectory

SIN_GUARD = 1e-4


@dataclass(frozen=True)
class ReducedState:
    theta: float
    p_theta: float
    ell: float
    t: float = 0.0


@dataclass(frozen=True)
class Equilibrium:
    theta: float
    ell: float
    stability: str  # "stable" | "unstable" | "degenerate"
    second_derivative: float
    residual: float


def hamiltonian(coeffs: ReducedCoefficients, state: ReducedState):
    th = state.theta
    return 0.5 * state.p_theta**2 / coeffs.B(th) + coeffs.potential(th, state.ell)


def _field(coeffs, theta, p, ell):
    """Scalar hot path: (theta_dot, p_dot) from closed-form geometry."""
    if not (0.0 <= theta <= math.pi):
        raise SingularityError(f"theta left [0, pi]: {theta}")
    s = math.sin(theta)
    c = math.cos(theta)
    b = coeffs.body
    h, fs, r, lam, dlam, zc = coeffs.geom.local(theta)
    B = b.I1 + b.m * (h * h + fs * fs)
    dB = 2.0 * b.m * r * lam
    pdot = 0.5 * p * p * dB / (B * B) - b.m * b.g * lam
    if ell != 0.0:
        if s == 0.0:
            raise SingularityError("sin(theta) = 0 with ell != 0")
        pdot += ell * ell * c / (s * s * s)
    return p / B, pdot


def rhs(coeffs: ReducedCoefficients, state: ReducedState):
    """``(dtheta/dt, dp_theta/dt)`` of the reduced Hamiltonian flow."""
    return _field(coeffs, state.theta, state.p_theta, state.ell)


def _energy(coeffs, theta, p, ell):
    b = coeffs.body
    h, fs, r, lam, dlam, zc = coeffs.geom.local(theta)
    B = b.I1 + b.m * (h * h + fs * fs)
    e = 0.5 * p * p / B + b.m * b.g * zc
    if ell != 0.0:
        s = math.sin(theta)
        e += 0.5 * ell * ell / (s * s)
    return e


def _guard(theta, what):
    if not (0.0 <= theta <= math.pi) or math.sin(theta) < SIN_GUARD:
        raise SingularityError(f"{what}: sin(theta) < {SIN_GUARD:g} at theta = {theta!r}")


def _n_steps(t_end, dt):
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_end < 0:
        raise ValueError(f"t_end must be >= 0, got {t_end}")
    n = int(round(t_end / dt))
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ValueError(f"t_end={t_end} is not a multiple of dt={dt}")
    return n


def rk4_step(field, y, dt):
    """One classical Runge-Kutta step for a tuple-valued field; returns (y_new, stages)."""
    k1 = field(y)
    k2 = field(tuple(a + 0.5 * dt * k for a, k in zip(y, k1)))
    k3 = field(tuple(a + 0.5 * dt * k for a, k in zip(y, k2)))
    k4 = field(tuple(a + dt * k for a, k in zip(y, k3)))
    y_new = tuple(a + dt / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
                  for a, q1, q2, q3, q4 in zip(y, k1, k2, k3, k4))
    return y_new, (k1, k2, k3, k4)


def integrate_reduced(coeffs: ReducedCoefficients, initial: ReducedState, t_end, dt,
                      method="rk4") -> Trajectory:
    """Integrate the reduced flow; samples at ``t0 + k dt``, k = 0..t_end/dt.

    ``method`` is ``"rk4"`` (fixed step, reproducible) or ``"adaptive_rk45"``
    (Dormand-Prince, tolerances 1e-10 abs/rel, dense output at the same grid).
    Raises :class:`SingularityError` carrying the partial trajectory if
    ``sin(theta)`` drops below the chart guard.
    """
    n = _n_steps(t_end, dt)
    ell = float(initial.ell)
    meta = {"kind": "reduced", "method": method, "dt": dt, "ell": ell}
    _guard(initial.theta, "initial state")
    if method == "rk4":
        return _integrate_rk4(coeffs, initial, n, dt, meta)
    if method == "adaptive_rk45":
        return _integrate_rk45(coeffs, initial, n, dt, meta)
    raise ValueError(f"unknown method {method!r}")


def _integrate_rk4(coeffs, initial, n, dt, meta):
    ell = float(initial.ell)
    t0 = float(initial.t)
    out = np.empty((n + 1, 5))
    y = (float(initial.theta), float(initial.p_theta))
    out[0] = (t0, y[0], y[1], _energy(coeffs, y[0], y[1], ell), ell)

    def field(state):
        return _field(coeffs, state[0], state[1], ell)

    for k in range(n):
        try:
            y, _ = rk4_step(field, y, dt)
            _guard(y[0], "reduced flow")
        except (SingularityError, DomainError) as exc:
            partial = Trajectory(REDUCED_COLUMNS, out[:k + 1].copy(), meta)
            last = ReducedState(out[k, 1], out[k, 2], ell, out[k, 0])
            raise SingularityError(str(exc), state=last, partial=partial) from exc
        out[k + 1] = (t0 + (k + 1) * dt, y[0], y[1], _energy(coeffs, y[0], y[1], ell), ell)
    return Trajectory(REDUCED_COLUMNS, out, meta)


def _integrate_rk45(coeffs, initial, n, dt, meta):
    ell = float(initial.ell)
    t0 = float(initial.t)
    grid = t0 + dt * np.arange(n + 1)
    out = np.empty((n + 1, 5))
    out[0] = (grid[0], initial.theta, initial.p_theta,
              _energy(coeffs, initial.theta, initial.p_theta, ell), ell)
    filled = 1

    def fun(t, y):
        return _field(coeffs, y[0], y[1], ell)

    def partial():
        return Trajectory(REDUCED_COLUMNS, out[:filled].copy(), meta)

    def last_state():
        return ReducedState(out[filled - 1, 1], out[filled - 1, 2], ell, out[filled - 1, 0])

    if n == 0:
        return partial()
    # stepped by hand so a failed trial stage still leaves the samples computed so far
    solver = RK45(fun, grid[0], [initial.theta, initial.p_theta], grid[-1], rtol=1e-10, atol=1e-10)
    while filled <= n:
        try:
            msg = solver.step()
        except (SingularityError, DomainError) as exc:
            raise SingularityError(f"reduced flow: {exc}", state=last_state(), partial=partial()) from exc
        if solver.status == "failed":
            raise IntegrationError(f"adaptive step failure: {msg}", state=last_state(), partial=partial())
        dense = solver.dense_output()
        while filled <= n and grid[filled] <= solver.t:
            th, p = dense(grid[filled])
            if not (0.0 <= th <= math.pi) or math.sin(th) < SIN_GUARD:
                raise SingularityError(f"reduced flow: sin(theta) < {SIN_GUARD:g}",
                                       state=last_state(), partial=partial())
            out[filled] = (grid[filled], th, p, _energy(coeffs, th, p, ell), ell)
            filled += 1
        if solver.status == "finished":
            break
    return Trajectory(REDUCED_COLUMNS, out[:filled], meta)


def integrate_tau(coeffs: ReducedCoefficients, initial: ReducedState, tau_end, dtau) -> Trajectory:
    """Integrate ``theta'' = -dV/dtheta`` in the time ``tau`` with ``dt = sqrt(B) dtau`` (rk4).

    The output carries the physical time ``t(tau)`` and both momenta
    (``p_tilde = theta'`` and ``p_theta = sqrt(B) p_tilde``).
    """
    n = _n_steps(tau_end, dtau)
    ell = float(initial.ell)
    b = coeffs.body
    _guard(initial.theta, "initial state")

    def field(state):
        th, pt, _ = state
        if not (0.0 <= th <= math.pi):
            raise SingularityError(f"theta left [0, pi]: {th}")
        h, fs, r, lam, dlam, zc = coeffs.geom.local(th)
        B = b.I1 + b.m * (h * h + fs * fs)
        force = -b.m * b.g * lam
        if ell != 0.0:
            s = math.sin(th)
            force += ell * ell * math.cos(th) / (s * s * s)
        return pt, force, math.sqrt(B)

    def row(tau, state):
        th, pt, t = state
        sqB = math.sqrt(float(coeffs.B(th)))
        e = 0.5 * pt * pt + float(coeffs.potential(th, ell))
        return (tau, th, pt, t, pt * sqB, e, ell)

    sqB0 = math.sqrt(float(coeffs.B(initial.theta)))
    y = (float(initial.theta), float(initial.p_theta) / sqB0, float(initial.t))
    out = np.empty((n + 1, len(TAU_COLUMNS)))
    out[0] = row(0.0, y)
    meta = {"kind": "tau", "method": "rk4", "dtau": dtau, "ell": ell}
    for k in range(n):
        try:
            y, _ = rk4_step(field, y, dtau)
            _guard(y[0], "tau flow")
        except (SingularityError, DomainError) as exc:
            partial = Trajectory(TAU_COLUMNS, out[:k + 1].copy(), meta)
            last = ReducedState(out[k, 1], out[k, 4], ell, out[k, 3])
            raise SingularityError(str(exc), state=last, partial=partial) from exc
        out[k + 1] = row((k + 1) * dtau, y)
    return Trajectory(TAU_COLUMNS, out, meta)


def tau_to_time(coeffs: ReducedCoefficients, traj: Trajectory, times):
    """Resample a tau-indexed trajectory at physical times.

    Cubic Hermite interpolation of ``theta(t)`` with slopes ``p / B``.
    Returns ``(theta, p_theta)`` at ``times`` (must lie inside the covered span).
    """
    t = traj["t"]
    th = traj["theta"]
    p = traj["p_theta"]
    B = coeffs.B(th)
    ell = traj["ell"][0]
    pdot = np.array([_field(coeffs, a, q, ell)[1] for a, q in zip(th, p)])
    theta_t = CubicHermiteSpline(t, th, p / B)
    p_t = CubicHermiteSpline(t, p, pdot)
    return theta_t(times), p_t(times)


# ---------------------------------------------------------------- equilibria

def _bisect(fun, a, b, fa, fb):
    """Bisection down to adjacent floating-point numbers."""
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    while True:
        m = 0.5 * (a + b)
        if m <= a or m >= b or (b - a) <= 1e-15:
            return a if abs(fa) <= abs(fb) else b
        fm = fun(m)
        if fm == 0.0:
            return m
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b, fb = m, fm


def _stiffness_scale(coeffs, theta, ell):
    s = math.sin(theta)
    c = math.cos(theta)
    b = coeffs.body
    return max(1.0, abs(b.m * b.g * float(coeffs.geom.dlam(theta)))
               + ell * ell * (3 * c * c / s**4 + 1 / s**2))


def _classify(coeffs, theta, ell, fd_step=1e-6):
    lo, hi = coeffs.theta_domain
    a = max(theta - fd_step, lo * 0.5)
    b = min(theta + fd_step, 0.5 * (hi + math.pi))
    d2 = (float(coeffs.dpotential(b, ell)) - float(coeffs.dpotential(a, ell))) / (b - a)
    if abs(d2) <= 1e-7 * _stiffness_scale(coeffs, theta, ell):
        return "degenerate", d2
    return ("stable" if d2 > 0 else "unstable"), d2


def equilibrium_residual(coeffs, theta, ell):
    """``|dz_C/dtheta - (ell^2 / m g) cos / sin^3|``."""
    b = coeffs.body
    return abs(float(coeffs.dpotential(theta, ell))) / (b.m * b.g)


def find_equilibria(coeffs: ReducedCoefficients, ell, n_grid=2000) -> List[Equilibrium]:
    """All relative equilibria in the dynamics domain at level ``ell``.

    Sign scan of ``dV/dtheta`` on ``n_grid`` points, bisection of every
    bracket, classification by a central difference of ``dV/dtheta``.
    Roots closer than 1e-8 are merged and flagged degenerate.
    """
    ell = float(ell)
    lo, hi = coeffs.theta_domain
    grid = np.linspace(lo, hi, n_grid)
    F = np.asarray(coeffs.dpotential(grid, ell), dtype=float)

    def fun(x):
        return float(coeffs.dpotential(x, ell))

    roots = []
    for i in range(n_grid - 1):
        if F[i] == 0.0:
            roots.append(grid[i])
        elif F[i] * F[i + 1] < 0:
            roots.append(_bisect(fun, grid[i], grid[i + 1], F[i], F[i + 1]))
    if F[-1] == 0.0:
        roots.append(grid[-1])

    merged = []
    for x in sorted(roots):
        if merged and x - merged[-1][-1] < 1e-8:
            merged[-1].append(x)
        else:
            merged.append([x])

    out = []
    for group in merged:
        theta = group[len(group) // 2]
        stability, d2 = _classify(coeffs, theta, ell)
        if len(group) > 1:
            stability = "degenerate"
        out.append(Equilibrium(float(theta), ell, stability, d2, equilibrium_residual(coeffs, theta, ell)))
    return out


# -------------------------------------------------------------- bifurcations

@dataclass(frozen=True)
class BifurcationPoint:
    ell: float
    theta: float
    kind: str  # "pitchfork" | "fold" | "stability-change" | "boundary"


@dataclass
class BifurcationScan:
    rows: list  # (ell, theta, stability, energy)
    points: List[BifurcationPoint]

    def __len__(self):
        return len(self.rows)


def _track(coeffs, theta, ell, iters=60):
    """Follow an equilibrium to level ``ell`` by Newton; ``None`` if it leaves the domain."""
    lo, hi = coeffs.theta_domain
    x = theta
    for _ in range(iters):
        F = float(coeffs.dpotential(x, ell))
        d = float(coeffs.d2potential(x, ell))
        if d == 0.0:
            break
        step = F / d
        x_new = x - step
        if not (lo <= x_new <= hi):
            return None
        if abs(x_new - x) <= 1e-15:
            x = x_new
            break
        x = x_new
    if equilibrium_residual(coeffs, x, ell) > 1e-8:
        return None
    return x


def _signature(eqs):
    return tuple(e.stability for e in eqs)


def _locate_stability_change(coeffs, theta_a, ell_a, ell_b, tol=1e-13):
    """Bisect on ell for the zero of V'' along the branch tracked from (theta_a, ell_a)."""
    def g(ell):
        th = _track(coeffs, theta_a, ell)
        if th is None:
            return None, None
        return float(coeffs.d2potential(th, ell)), th

    ga, tha = g(ell_a)
    gb, thb = g(ell_b)
    if ga is None or gb is None or ga * gb > 0:
        return None
    a, b = ell_a, ell_b
    th = tha
    while b - a > tol * max(1.0, abs(a)):
        m = 0.5 * (a + b)
        gm, thm = g(m)
        if gm is None:
            return None
        if gm == 0.0:
            return m, thm
        if (gm < 0) == (ga < 0):
            a, ga, th = m, gm, thm
        else:
            b, th = m, thm
    return 0.5 * (a + b), th


def _locate_count_change(coeffs, ell_a, ell_b, n_a, iters=60):
    a, b = ell_a, ell_b
    eqs = []
    for _ in range(iters):
        m = 0.5 * (a + b)
        eqs = find_equilibria(coeffs, m)
        if len(eqs) == n_a:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def bifurcation_scan(coeffs: ReducedCoefficients, ell_range, samples=400) -> BifurcationScan:
    """Equilibria over ``samples`` evenly spaced levels in ``ell_range = (lo, hi)``.

    Between consecutive samples every equilibrium is continued by Newton; a
    sign change of ``V''`` along a branch is located by bisection in ``ell``
    and reported as a pitchfork when the equilibrium count changes by two,
    otherwise as a stability change.  Count changes without a stability flip
    are reported as folds.
    """
    if ell_range is None or samples <= 0:
        return BifurcationScan([], [])
    lo, hi = float(ell_range[0]), float(ell_range[1])
    if hi < lo:
        return BifurcationScan([], [])
    ells = np.linspace(lo, hi, samples) if samples > 1 else np.array([lo])
    per_ell = parallel_map(lambda e: find_equilibria(coeffs, float(e)), list(ells))

    rows = []
    for ell, eqs in zip(ells, per_ell):
        for e in eqs:
            rows.append((float(ell), e.theta, e.stability, float(coeffs.potential(e.theta, float(ell)))))

    points = []
    for k in range(len(ells) - 1):
        ea, eb = per_ell[k], per_ell[k + 1]
        if _signature(ea) == _signature(eb):
            continue
        found = False
        for e in ea:
            if e.stability == "degenerate":
                continue
            loc = _locate_stability_change(coeffs, e.theta, float(ells[k]), float(ells[k + 1]))
            if loc is None:
                continue
            ell_c, th_c = loc
            kind = "pitchfork" if abs(len(ea) - len(eb)) == 2 else "stability-change"
            points.append(BifurcationPoint(float(ell_c), float(th_c), kind))
            found = True
        if not found and len(ea) != len(eb):
            if any(e.stability == "degenerate" for e in ea):
                ell_c = float(ells[k])
            else:
                ell_c = _locate_count_change(coeffs, float(ells[k]), float(ells[k + 1]), len(ea))
            richer = ea if len(ea) > len(eb) else eb
            lo, hi = coeffs.theta_domain
            edge = 2.0 * (hi - lo) / 1999
            at_edge = [e for e in richer if e.theta - lo < edge or hi - e.theta < edge]
            if at_edge:
                # a branch entering/leaving the guarded domain, not a bifurcation
                points.append(BifurcationPoint(ell_c, at_edge[0].theta, "boundary"))
                continue
            eqs = find_equilibria(coeffs, ell_c)
            th_c = eqs[0].theta if eqs else float("nan")
            points.append(BifurcationPoint(ell_c, th_c, "fold"))
    return BifurcationScan(rows, points)


# ------------------------------------------------------------ phase portrait

def phase_portrait(coeffs: ReducedCoefficients, ell, energy_levels, grid=(200, 200), p_max=None):
    """Level curves of ``H(., .; ell)`` in the (theta, p_theta) plane.

    Returns ``{level: [polyline, ...]}`` where each polyline is an ``(k, 2)``
    array.  Levels equal to a well minimum yield the single point ``(theta*, 0)``.
    """
    import contourpy

    n_th, n_p = grid
    if n_th < 2 or n_p < 2:
        raise ValueError("phase portrait grid must be at least 2 x 2")
    ell = float(ell)
    lo, hi = coeffs.theta_domain
    if ell != 0.0:
        # keep the centrifugal wall finite on the plotting grid
        lo, hi = max(lo, 0.02), min(hi, math.pi - 0.02)
    th = np.linspace(lo, hi, n_th)
    V = np.asarray(coeffs.potential(th, ell), dtype=float)
    B = np.asarray(coeffs.B(th), dtype=float)
    levels = [float(v) for v in energy_levels]
    if p_max is None:
        top = max(levels) if levels else float(V.min())
        p_max = 1.1 * math.sqrt(max(2.0 * B.max() * (top - V.min()), 1e-12))
    p = np.linspace(-p_max, p_max, n_p)
    TH, P = np.meshgrid(th, p)
    H = 0.5 * P**2 / B[None, :] + V[None, :]
    gen = contourpy.contour_generator(TH, P, H, line_type=contourpy.LineType.Separate)
    minima = [e for e in find_equilibria(coeffs, ell) if e.stability == "stable"]
    out = {}
    for level in levels:
        lines = [np.asarray(seg) for seg in gen.lines(level)]
        for e in minima:
            vmin = float(coeffs.potential(e.theta, ell))
            if abs(level - vmin) <= 1e-12 * max(1.0, abs(vmin)):
                lines.append(np.array([[e.theta, 0.0]]))
        out[level] = lines
    return out
