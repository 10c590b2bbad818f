"""Compressed kinetic-energy coefficients and the effective potential.

After inserting the no-twist and no-slip constraints the kinetic energy on the
base reads ``T = (A psi_dot^2 + B theta_dot^2) / 2`` with::

    A(theta) = N(theta)^2 sin^2(theta)                    [M L^2]
    N(theta) = sqrt(I1 cos^2 + I3 sin^2 + m z_C^2)        [sqrt(M) L]
    B(theta) = I1 + m |CP|^2                              [M L^2]

The yaw momentum along the constraint is ``P_phi = C(theta) psi_dot`` and the
gyroscopic factor ``n = C sin / A`` equals ``d log N / d theta``.  At fixed
``ell = p_psi / N`` (units ``sqrt(M) L / T``; ``ell^2`` is an energy) the
effective potential is ``ell^2 / (2 sin^2) + m g z_C``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import SingularityError
from .geometry import Geometry, SurfaceProfile, geometry


@dataclass(frozen=True)
class BodyParams:
    """Mass ``m`` [M], inertias ``I1 = I2`` and ``I3`` [M L^2] about the center of mass, gravity ``g`` [L/T^2]."""

    m: float
    I1: float
    I3: float
    g: float = 1.0

    def __post_init__(self):
        if not (self.m > 0 and self.g > 0 and self.I1 > 0 and self.I3 > 0):
            raise ValueError(f"m, g, I1, I3 must be positive: {self}")
        if not (self.I1 <= self.I3 < 2 * self.I1):
            warnings.warn(f"inertias outside I1 <= I3 < 2 I1 (I1={self.I1}, I3={self.I3})",
                          RuntimeWarning, stacklevel=3)

    @classmethod
    def torus_preset(cls, R, r, m=1.0, g=1.0, kind="solid"):
        """Principal inertias of a homogeneous solid or thin-shell (hollow) torus."""
        if kind == "solid":
            return cls(m=m, I1=m * (4 * R**2 + 5 * r**2) / 8, I3=m * (4 * R**2 + 3 * r**2) / 4, g=g)
        if kind == "hollow":
            return cls(m=m, I1=m * (2 * R**2 + 5 * r**2) / 4, I3=m * (2 * R**2 + 3 * r**2) / 2, g=g)
        raise ValueError(f"unknown inertia preset {kind!r}")


class ReducedCoefficients:
    """Coefficient evaluators for one body on one profile.

    Methods take scalars or arrays.  Nothing that enters the reduced
    Hamiltonian (``B``, ``z_C``, the potential) reads ``I3``.
    """

    def __init__(self, geom, body: BodyParams):
        self.geom: Geometry = geom if isinstance(geom, Geometry) else geometry(geom)
        self.body = body

    @property
    def profile(self) -> SurfaceProfile:
        return self.geom.profile

    @property
    def theta_domain(self):
        return self.geom.theta_domain

    def z_c(self, theta):
        return self.geom.z_c(theta)

    def dz_c(self, theta):
        return self.geom.lam(theta)

    def nose_sq(self, theta):
        b = self.body
        c = np.cos(theta)
        s = np.sin(theta)
        z = self.geom.z_c(theta)
        return b.I1 * c * c + b.I3 * s * s + b.m * z * z

    def N(self, theta):
        """Nose function [sqrt(M) L], closed form."""
        return np.sqrt(self.nose_sq(theta))

    def A(self, theta):
        s = np.sin(theta)
        return self.nose_sq(theta) * s * s

    def B(self, theta):
        return self.body.I1 + self.body.m * self.geom.cp_sq(theta)

    def dB(self, theta):
        """``dB/dtheta = 2 m r Lambda`` (from h' = r cos, f*' = -r sin)."""
        return 2.0 * self.body.m * self.geom.curvature(theta) * self.geom.lam(theta)

    def C(self, theta):
        b = self.body
        s = np.sin(theta)
        c = np.cos(theta)
        inner = (b.I3 - b.I1) * s * c + b.m * self.geom.lam(theta) * self.geom.z_c(theta)
        return inner * s

    def n(self, theta):
        """``C sin / A`` with the ``sin^2`` cancelled analytically; regular on [0, pi]."""
        b = self.body
        s = np.sin(theta)
        c = np.cos(theta)
        num = (b.I3 - b.I1) * s * c + b.m * self.geom.lam(theta) * self.geom.z_c(theta)
        return num / self.nose_sq(theta)

    def potential(self, theta, ell):
        """Effective potential ``ell^2/(2 sin^2) + m g z_C`` [energy]."""
        s = np.sin(theta)
        grav = self.body.m * self.body.g * self.geom.z_c(theta)
        if ell == 0:
            return grav
        _check_sin(s)
        return 0.5 * ell * ell / (s * s) + grav

    def dpotential(self, theta, ell):
        s = np.sin(theta)
        grav = self.body.m * self.body.g * self.geom.lam(theta)
        if ell == 0:
            return grav
        _check_sin(s)
        return -ell * ell * np.cos(theta) / s**3 + grav

    def d2potential(self, theta, ell):
        s = np.sin(theta)
        c = np.cos(theta)
        grav = self.body.m * self.body.g * self.geom.dlam(theta)
        if ell == 0:
            return grav
        _check_sin(s)
        return ell * ell * (3 * c * c / s**4 + 1 / (s * s)) + grav


def _check_sin(s):
    if np.any(np.asarray(s) == 0.0):
        raise SingularityError("centrifugal term ell^2/sin^2(theta) is singular at sin(theta) = 0")


def _coeffs(body, geom):
    return ReducedCoefficients(geom, body)


def coeff_A(body, geom, theta):
    return _coeffs(body, geom).A(theta)


def coeff_B(body, geom, theta):
    return _coeffs(body, geom).B(theta)


def coeff_C(body, geom, theta):
    return _coeffs(body, geom).C(theta)


def n_func(body, geom, theta):
    return _coeffs(body, geom).n(theta)


def nose_N(body, geom, theta):
    return _coeffs(body, geom).N(theta)


def potential(body, geom, theta, ell):
    return _coeffs(body, geom).potential(theta, ell)


def torus_defaults(kind="solid", R=1.0, r=0.5, m=1.0, g=1.0) -> ReducedCoefficients:
    """The nondimensional torus (m = g = R = 1, r = 1/2) used throughout the examples."""
    return ReducedCoefficients(SurfaceProfile.torus(R, r), BodyParams.torus_preset(R, r, m, g, kind))
