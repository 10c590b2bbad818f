"""Deterministic SVG figures (matplotlib, Agg backend, fixed hash salt, no date)."""

from __future__ import annotations

import io
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import __version__  # noqa: E402
from .reconstruction import fit_circle  # noqa: E402
from .reduced import find_equilibria, phase_portrait  # noqa: E402

_STYLE = {"svg.hashsalt": "rollkit", "svg.fonttype": "none", "figure.figsize": (6.0, 4.0),
          "font.size": 9.0, "path.simplify": False}
_STABILITY_COLORS = {"stable": "tab:blue", "unstable": "tab:red", "degenerate": "tab:purple"}


def _render(fig, config_hash):
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    svg = buf.getvalue()
    stamp = f"<!-- rollkit {__version__} config-sha256 {config_hash} -->\n"
    head, sep, rest = svg.partition("?>\n")
    return head + sep + stamp + rest if sep else stamp + svg


def potential_svg(coeffs, ell, config_hash="", n=800):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        lo, hi = coeffs.theta_domain
        if ell != 0:
            lo, hi = max(lo, 0.05), min(hi, math.pi - 0.05)
        th = np.linspace(lo, hi, n)
        V = coeffs.potential(th, ell)
        ax.plot(th, V, color="k", lw=1.2)
        for e in find_equilibria(coeffs, ell):
            ax.plot([e.theta], [coeffs.potential(e.theta, ell)], "o",
                    color=_STABILITY_COLORS[e.stability], ms=4)
        vmin = float(np.min(V))
        span = float(np.percentile(V, 80)) - vmin
        ax.set_ylim(vmin - 0.1 * span, vmin + 1.2 * span)
        ax.set_xlabel("theta [rad]")
        ax.set_ylabel("effective potential")
        ax.set_title(f"ell = {ell:g}")
        return _render(fig, config_hash)


def phase_svg(coeffs, ell, levels=None, config_hash=""):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        if levels is None:
            eqs = find_equilibria(coeffs, ell)
            vals = [float(coeffs.potential(e.theta, ell)) for e in eqs]
            base = min(vals) if vals else 0.0
            top = max(vals) if len(vals) > 1 else base + 1.0
            levels = list(np.linspace(base, top + (top - base), 9)[1:])
        curves = phase_portrait(coeffs, ell, levels)
        for level in sorted(curves):
            for seg in curves[level]:
                ax.plot(seg[:, 0], seg[:, 1], lw=0.8, color="k")
        ax.set_xlabel("theta [rad]")
        ax.set_ylabel("p_theta")
        ax.set_title(f"energy levels, ell = {ell:g}")
        return _render(fig, config_hash)


def bifurcation_svg(scan, config_hash=""):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for kind, color in _STABILITY_COLORS.items():
            pts = np.array([(r[0], r[1]) for r in scan.rows if r[2] == kind]).reshape(-1, 2)
            if len(pts):
                ax.plot(pts[:, 0], pts[:, 1], ".", ms=1.5, color=color, label=kind)
        for p in scan.points:
            if p.kind != "boundary":
                ax.plot([p.ell], [p.theta], "x", color="k", ms=6)
        ax.set_xlabel("ell")
        ax.set_ylabel("theta* [rad]")
        if scan.rows:
            ax.legend(loc="best", frameon=False)
        return _render(fig, config_hash)


def track_svg(full, config_hash=""):
    """Planar contact-point track with its least-squares circle."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        x, y = full["x"], full["y"]
        ax.plot(x, y, color="k", lw=1.0)
        if len(x) >= 3 and np.ptp(x) + np.ptp(y) > 0:
            xc, yc, rad, _ = fit_circle(x, y)
            if math.isfinite(rad):
                a = np.linspace(0, 2 * math.pi, 361)
                ax.plot(xc + rad * np.cos(a), yc + rad * np.sin(a), ":", color="tab:blue", lw=0.8)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        return _render(fig, config_hash)
