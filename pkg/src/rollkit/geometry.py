"""Meridian geometry of a convex body of revolution.

A profile is described by its radius of curvature ``r(theta)`` as a function of
the tangent angle ``theta`` (equivalently the tilt of the symmetry axis), the
radius ``h_o`` of the parallel touching the plane at ``theta = 0`` and the
height ``f_o`` of the center of mass in the standard (axis-up) position.

From these data every quantity used by the dynamics follows::

    h(theta)  = h_o + int_0^theta r cos     radius of the contact parallel
    f(theta)  =       int_0^theta r sin     height of that parallel
    f*(theta) = f_o - f(theta)
    Lambda    = h cos - f* sin              (= d z_C / d theta)
    z_C       = h sin + f* cos              height of the center of mass
    |CP|^2    = h^2 + f*^2                  center of mass to contact point

The torus has closed forms; general profiles are integrated once and then
served from a cubic Hermite interpolant whose nodal slopes are the exact
integrands ``r cos`` and ``r sin``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from .errors import DomainError

DEFAULT_THETA_DOMAIN = (1e-3, math.pi - 1e-3)

# meridian is defined on the closed interval [0, pi]; tiny round-off slack
_MERIDIAN_SLACK = 1e-12

# quadrature/interpolation resolution for general profiles
_N_PANELS = 4096
_QUAD_TOL = 1e-10


@dataclass(frozen=True)
class SurfaceProfile:
    """Meridian data of a surface of revolution.

    Use :meth:`torus` or :meth:`general` rather than the raw constructor.
    ``theta_domain`` is the interval on which dynamics (integration, root
    scans) is allowed; geometric evaluators accept the whole meridian
    ``[0, pi]``.
    """

    kind: str
    h_o: float
    f_o: float
    R: Optional[float] = None
    r: Optional[float] = None
    curvature: Optional[Callable] = None
    curvature_derivative: Optional[Callable] = None
    samples: Optional[tuple] = None
    theta_domain: tuple = DEFAULT_THETA_DOMAIN

    @classmethod
    def torus(cls, R, r, *, h_o=None, f_o=None, override=False,
              theta_domain=DEFAULT_THETA_DOMAIN):
        """Outer half of a torus with tube radius ``r`` and center-circle radius ``R``.

        In the standard position ``h_o = R`` and ``f_o = r``; other values need
        ``override=True`` (e.g. an off-center mass distribution).
        """
        R = float(R)
        r = float(r)
        if not (R > r > 0):
            raise ValueError(f"torus needs R > r > 0, got R={R}, r={r}")
        if (h_o is not None or f_o is not None) and not override:
            raise ValueError("torus h_o/f_o are fixed to (R, r); pass override=True to change them")
        h_o = R if h_o is None else float(h_o)
        f_o = r if f_o is None else float(f_o)
        prof = cls(kind="torus", h_o=h_o, f_o=f_o, R=R, r=r,
                   theta_domain=_check_domain(theta_domain))
        prof._check_invariants()
        return prof

    @classmethod
    def general(cls, curvature, h_o, f_o, *, derivative=None,
                theta_domain=DEFAULT_THETA_DOMAIN):
        """General convex profile.

        ``curvature`` is either a vectorized callable ``theta -> r(theta)`` or a
        sequence of ``(theta, r)`` pairs covering ``[0, pi]``.  ``derivative``
        optionally gives ``dr/dtheta`` for a callable (otherwise it is
        differentiated numerically where needed, i.e. only by the unreduced
        oracle).
        """
        h_o = float(h_o)
        f_o = float(f_o)
        if h_o < 0:
            raise ValueError(f"h_o must be >= 0, got {h_o}")
        if callable(curvature):
            prof = cls(kind="general", h_o=h_o, f_o=f_o, curvature=curvature,
                       curvature_derivative=derivative,
                       theta_domain=_check_domain(theta_domain))
        else:
            pts = np.asarray(curvature, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
                raise ValueError("sampled curvature must be a list of (theta, r) pairs")
            order = np.argsort(pts[:, 0])
            pts = pts[order]
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ValueError("sampled curvature has repeated theta values")
            if pts[0, 0] > 0 + _MERIDIAN_SLACK or pts[-1, 0] < math.pi - 1e-9:
                raise ValueError("sampled curvature must cover [0, pi]")
            if np.any(pts[:, 1] < 0):
                raise ValueError("curvature radius must be >= 0 (convex meridian)")
            samples = tuple((float(a), float(b)) for a, b in pts)
            prof = cls(kind="general", h_o=h_o, f_o=f_o, samples=samples,
                       theta_domain=_check_domain(theta_domain))
        prof._check_invariants()
        return prof

    def _check_invariants(self):
        if self.kind == "torus":
            total = 2.0 * self.r
        else:
            total = geometry(self).f(math.pi)
        if not (0 < self.f_o < total):
            raise ValueError(f"center of mass height must satisfy 0 < f_o < f(pi) = {total:g}, "
                             f"got f_o={self.f_o:g}")

    def build(self) -> "Geometry":
        return geometry(self)


def _check_domain(dom):
    lo, hi = (float(dom[0]), float(dom[1]))
    if not (0.0 < lo < hi < math.pi):
        raise ValueError(f"theta_domain must be a closed interval inside (0, pi), got {dom}")
    return (lo, hi)


def _check_theta(theta):
    th = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(th)) or np.any(th < -_MERIDIAN_SLACK) or np.any(th > math.pi + _MERIDIAN_SLACK):
        raise DomainError(f"theta outside the meridian interval [0, pi]: {theta}")
    return th


class Geometry:
    """Evaluators of the meridian functions (the geometry cache).

    All methods accept a scalar or an array of angles and return the same
    shape.  Instances are immutable once built.
    """

    def __init__(self, profile: SurfaceProfile):
        self.profile = profile

    @property
    def theta_domain(self):
        return self.profile.theta_domain

    @property
    def h_o(self):
        return self.profile.h_o

    @property
    def f_o(self):
        return self.profile.f_o

    # subclasses provide curvature, dcurvature, h_f
    def curvature(self, theta):
        raise NotImplementedError

    def dcurvature(self, theta):
        raise NotImplementedError

    def h_f(self, theta):
        raise NotImplementedError

    def h(self, theta):
        return self.h_f(theta)[0]

    def f(self, theta):
        return self.h_f(theta)[1]

    def f_star(self, theta):
        return self.f_o - self.f(theta)

    def lam(self, theta):
        th = _check_theta(theta)
        h, f = self.h_f(th)
        return h * np.cos(th) - (self.f_o - f) * np.sin(th)

    def dlam(self, theta):
        th = _check_theta(theta)
        h, f = self.h_f(th)
        return self.curvature(th) - (self.f_o - f) * np.cos(th) - h * np.sin(th)

    def z_c(self, theta):
        th = _check_theta(theta)
        h, f = self.h_f(th)
        return h * np.sin(th) + (self.f_o - f) * np.cos(th)

    def cp_sq(self, theta):
        h, f = self.h_f(theta)
        fs = self.f_o - f
        return h * h + fs * fs

    def local(self, theta):
        """Everything the dynamics needs at one angle, in one pass.

        Returns ``(h, f_star, r, lam, dlam, z_c)`` as floats.
        """
        s = math.sin(theta)
        c = math.cos(theta)
        h, f = self.h_f(theta)
        h = float(h)
        fs = self.f_o - float(f)
        r = float(self.curvature(theta))
        return h, fs, r, h * c - fs * s, r - fs * c - h * s, h * s + fs * c


class TorusGeometry(Geometry):
    def __init__(self, profile):
        super().__init__(profile)
        self.R = profile.R
        self.r = profile.r

    def curvature(self, theta):
        th = _check_theta(theta)
        return np.full_like(th, self.r) if th.ndim else self.r

    def dcurvature(self, theta):
        th = _check_theta(theta)
        return np.zeros_like(th) if th.ndim else 0.0

    def h_f(self, theta):
        th = _check_theta(theta)
        h = self.profile.h_o + self.r * np.sin(th)
        f = self.r * (1.0 - np.cos(th))
        if th.ndim == 0:
            return float(h), float(f)
        return h, f

    def local(self, theta):
        s = math.sin(theta)
        c = math.cos(theta)
        if not (-_MERIDIAN_SLACK <= theta <= math.pi + _MERIDIAN_SLACK):
            raise DomainError(f"theta outside the meridian interval [0, pi]: {theta}")
        r = self.r
        h = self.profile.h_o + r * s
        fs = self.profile.f_o - r * (1.0 - c)
        return h, fs, r, h * c - fs * s, r - fs * c - h * s, h * s + fs * c


class QuadratureGeometry(Geometry):
    """General profile: cumulative integrals on a uniform node grid.

    Each panel integral is computed with adaptive Gauss-Legendre (bisection
    until 10- and 20-point rules agree); values between nodes come from a
    cubic Hermite interpolant using the exact slopes ``r cos``, ``r sin``.
    """

    def __init__(self, profile):
        super().__init__(profile)
        if profile.samples is not None:
            pts = np.asarray(profile.samples)
            self._pchip = PchipInterpolator(pts[:, 0], pts[:, 1], extrapolate=True)
            self._dpchip = self._pchip.derivative()
            self._rfun = self._pchip
        else:
            self._pchip = None
            self._rfun = profile.curvature
        nodes = np.linspace(0.0, math.pi, _N_PANELS + 1)
        r_nodes = self._raw_curvature(nodes)
        if np.any(r_nodes < 0):
            warnings.warn("interpolated curvature radius undershoots below 0; clamping", RuntimeWarning)
        increments = _panel_integrals(self._integrand, nodes, _QUAD_TOL / _N_PANELS)
        cum = np.vstack([np.zeros((1, 2)), np.cumsum(increments, axis=0)])
        values = cum.copy()
        values[:, 0] += profile.h_o
        slopes = np.column_stack([r_nodes * np.cos(nodes), r_nodes * np.sin(nodes)])
        self.nodes = nodes
        self._spline = CubicHermiteSpline(nodes, values, slopes, extrapolate=True)

    def _raw_curvature(self, theta):
        th = np.asarray(theta, dtype=float)
        r = np.broadcast_to(np.asarray(self._rfun(th), dtype=float), th.shape)
        return np.maximum(r, 0.0)

    def _integrand(self, theta):
        r = self._raw_curvature(theta)
        return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1)

    def curvature(self, theta):
        th = _check_theta(theta)
        r = self._raw_curvature(th)
        return float(r) if th.ndim == 0 else r

    def dcurvature(self, theta):
        th = _check_theta(theta)
        if self._pchip is not None:
            d = np.asarray(self._dpchip(th), dtype=float)
        elif self.profile.curvature_derivative is not None:
            d = np.broadcast_to(np.asarray(self.profile.curvature_derivative(th), dtype=float), th.shape)
        else:
            step = 1e-6
            d = (self._raw_curvature(th + step) - self._raw_curvature(th - step)) / (2 * step)
        return float(d) if th.ndim == 0 else np.array(d)

    def h_f(self, theta):
        th = _check_theta(theta)
        v = self._spline(th)
        if th.ndim == 0:
            return float(v[0]), float(v[1])
        return v[..., 0], v[..., 1]


_GL10 = np.polynomial.legendre.leggauss(10)
_GL20 = np.polynomial.legendre.leggauss(20)


def _gauss(fun, a, b, rule):
    """Gauss-Legendre rule on many panels at once; returns shape (n_panels, 2)."""
    x, w = rule
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    vals = fun(mid[:, None] + half[:, None] * x[None, :])
    return half[:, None] * np.einsum("j,pjk->pk", w, vals)


def _panel_integrals(fun, nodes, tol, max_depth=30):
    """Integral of ``fun`` over each panel ``[nodes[i], nodes[i+1]]``, bisecting where needed."""
    a = nodes[:-1]
    b = nodes[1:]
    fine = _gauss(fun, a, b, _GL20)
    coarse = _gauss(fun, a, b, _GL10)
    bad = np.flatnonzero(np.max(np.abs(fine - coarse), axis=1) > tol)
    if len(bad) and max_depth > 0:
        split = np.column_stack([a[bad], 0.5 * (a[bad] + b[bad]), b[bad]])
        for k, pts in zip(bad, split):
            fine[k] = _panel_integrals(fun, pts, 0.5 * tol, max_depth - 1).sum(axis=0)
    return fine


@functools.lru_cache(maxsize=64)
def geometry(profile: SurfaceProfile) -> Geometry:
    """Build (once) the evaluator object for ``profile``."""
    if profile.kind == "torus":
        return TorusGeometry(profile)
    if profile.kind == "general":
        return QuadratureGeometry(profile)
    raise ValueError(f"unknown profile kind {profile.kind!r}")


def _geom(obj) -> Geometry:
    return obj if isinstance(obj, Geometry) else geometry(obj)


def meridian(profile, theta):
    """``(h(theta), f(theta))``: radius and height of the contact parallel."""
    return _geom(profile).h_f(theta)


def lam(profile, theta):
    """Horizontal offset of the center of mass from the contact point, signed."""
    return _geom(profile).lam(theta)


def dlam(profile, theta):
    """``dLambda/dtheta = r - f* cos - h sin`` from cached values (no differencing)."""
    return _geom(profile).dlam(theta)


dlambda = dlam


def z_center(profile, theta):
    """Height of the center of mass above the plane."""
    return _geom(profile).z_c(theta)


def cp_distance_sq(profile, theta):
    return _geom(profile).cp_sq(theta)


def sample_profile(fun: Callable, n: int = 257) -> Sequence[tuple]:
    """Tabulate a curvature callable as ``(theta, r)`` pairs on ``[0, pi]``."""
    th = np.linspace(0.0, math.pi, n)
    r = np.broadcast_to(np.asarray(fun(th), dtype=float), th.shape)
    return [(float(a), float(b)) for a, b in zip(th, r)]
