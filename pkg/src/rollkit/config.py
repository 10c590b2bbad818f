"""JSON scene configuration: strict validation, canonical hashing, object construction.

Layout (angles in radians, SI units)::

    {
      "surface":    {"kind": "torus", "R": 1.0, "r": 0.5}
                  | {"kind": "general", "h0": .., "f0": .., "curvature": [[theta, r], ...]},
      "body":       {"m": 1.0, "g": 1.0, "inertia": "solid" | "hollow" | {"I1": .., "I3": ..}},
      "initial":    {"theta0": .., "p_theta0": .., "ell": ..,
                     "psi0": 0, "phi0": 0, "x0": 0, "y0": 0},
      "integrator": {"method": "rk4" | "adaptive_rk45", "dt": .., "t_end": ..},
      "analysis":   {"ell_range": [lo, hi] (hi < lo scans nothing), "samples": 400, "energy_levels": [..]},
      "output":     {"formats": ["csv", "json", "svg"], "plots": ["potential", ...]}
    }

Only ``surface``, ``body`` and ``initial`` are required.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources

from .coefficients import BodyParams, ReducedCoefficients
from .errors import ConfigError
from .geometry import SurfaceProfile

_SCHEMA = {
    "surface": {"kind", "R", "r", "h0", "f0", "curvature"},
    "body": {"m", "g", "inertia"},
    "initial": {"theta0", "p_theta0", "ell", "psi0", "phi0", "x0", "y0"},
    "integrator": {"method", "dt", "t_end"},
    "analysis": {"ell_range", "samples", "energy_levels", "n_points", "n_random"},
    "output": {"formats", "plots"},
}
_REQUIRED = ("surface", "body", "initial")
_FORMATS = {"csv", "json", "svg"}
PLOT_KINDS = ("potential", "phase", "bifurcation", "track")
DEFAULTS = {
    "integrator": {"method": "rk4", "dt": 1e-3, "t_end": 10.0},
    "analysis": {"ell_range": [0.01, 2.0], "samples": 400, "energy_levels": None,
                 "n_points": 1000, "n_random": 50},
    "output": {"formats": ["csv", "json", "svg"], "plots": list(PLOT_KINDS)},
}


@dataclass
class SceneConfig:
    raw: dict
    coeffs: ReducedCoefficients
    theta0: float
    p_theta0: float
    ell: float
    psi0: float
    phi0: float
    x0: float
    y0: float
    method: str
    dt: float
    t_end: float
    ell_range: tuple
    samples: int
    energy_levels: list | None
    n_points: int
    n_random: int
    formats: tuple
    plots: tuple

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(raw: dict) -> str:
    return hashlib.sha256(canonical_json(raw).encode()).hexdigest()


def _number(section, key, value, positive=False, allow_zero=True):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{section}.{key} must be a finite number, got {value!r}")
    if positive and not (value > 0 or (allow_zero and value == 0)):
        raise ConfigError(f"{section}.{key} must be {'>= 0' if allow_zero else '> 0'}, got {value}")
    return float(value)


def _section(raw, name):
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"section {name!r} must be an object")
    unknown = set(sec) - _SCHEMA[name]
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return sec


def _surface(sec):
    kind = sec.get("kind")
    try:
        if kind == "torus":
            extra = set(sec) - {"kind", "R", "r"}
            if extra:
                raise ConfigError(f"torus surface does not take {sorted(extra)}")
            R = _number("surface", "R", sec.get("R"), positive=True, allow_zero=False)
            r = _number("surface", "r", sec.get("r"), positive=True, allow_zero=False)
            return SurfaceProfile.torus(R, r)
        if kind == "general":
            extra = set(sec) - {"kind", "h0", "f0", "curvature"}
            if extra:
                raise ConfigError(f"general surface does not take {sorted(extra)}")
            samples = sec.get("curvature")
            if not isinstance(samples, list) or len(samples) < 4:
                raise ConfigError("surface.curvature must be a list of at least 4 [theta, r] pairs")
            pairs = []
            for item in samples:
                if not isinstance(item, list) or len(item) != 2:
                    raise ConfigError(f"surface.curvature entries must be [theta, r], got {item!r}")
                pairs.append((_number("surface", "curvature", item[0]),
                               _number("surface", "curvature", item[1], positive=True, allow_zero=False)))
            return SurfaceProfile.general(pairs, _number("surface", "h0", sec.get("h0"), positive=True),
                                          _number("surface", "f0", sec.get("f0"), positive=True))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid surface: {exc}") from exc
    raise ConfigError(f"surface.kind must be 'torus' or 'general', got {kind!r}")


def _body(sec, profile):
    m = _number("body", "m", sec.get("m", 1.0), positive=True, allow_zero=False)
    g = _number("body", "g", sec.get("g", 1.0), positive=True, allow_zero=False)
    inertia = sec.get("inertia", "solid")
    if isinstance(inertia, str):
        if inertia not in ("solid", "hollow"):
            raise ConfigError(f"body.inertia preset must be 'solid' or 'hollow', got {inertia!r}")
        if profile.kind != "torus":
            raise ConfigError("inertia presets exist only for the torus; give {I1, I3}")
        return BodyParams.torus_preset(profile.R, profile.r, m, g, inertia)
    if not isinstance(inertia, dict) or set(inertia) != {"I1", "I3"}:
        raise ConfigError("body.inertia must be a preset name or exactly {I1, I3}")
    I1 = _number("body.inertia", "I1", inertia["I1"], positive=True, allow_zero=False)
    I3 = _number("body.inertia", "I3", inertia["I3"], positive=True, allow_zero=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return BodyParams(m=m, I1=I1, I3=I3, g=g)


def parse_config(raw: dict, ell_override=None) -> SceneConfig:
    """Validate ``raw`` completely and build a :class:`SceneConfig`.

    ``ell_override`` replaces ``initial.ell`` before hashing, so the hash
    identifies the scene that was actually run.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = copy.deepcopy(raw)
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for name in _REQUIRED:
        if name not in raw:
            raise ConfigError(f"missing required section {name!r}")
    profile = _surface(_section(raw, "surface"))
    body = _body(_section(raw, "body"), profile)

    ini = _section(raw, "initial")
    if ell_override is not None:
        ini["ell"] = float(ell_override)
    for key in ("theta0", "p_theta0", "ell"):
        if key not in ini:
            raise ConfigError(f"initial.{key} is required")
    theta0 = _number("initial", "theta0", ini["theta0"])
    if not 0.0 < theta0 < math.pi:
        raise ConfigError(f"initial.theta0 must lie in (0, pi), got {theta0}")
    extra = {k: _number("initial", k, ini.get(k, 0.0)) for k in ("psi0", "phi0", "x0", "y0")}

    integ = {**DEFAULTS["integrator"], **_section(raw, "integrator")}
    if integ["method"] not in ("rk4", "adaptive_rk45"):
        raise ConfigError(f"integrator.method must be 'rk4' or 'adaptive_rk45', got {integ['method']!r}")
    dt = _number("integrator", "dt", integ["dt"], positive=True, allow_zero=False)
    t_end = _number("integrator", "t_end", integ["t_end"], positive=True)
    n = round(t_end / dt)
    if abs(n * dt - t_end) > 1e-9 * max(1.0, t_end):
        raise ConfigError(f"integrator.t_end={t_end} must be a multiple of dt={dt}")

    ana = {**DEFAULTS["analysis"], **_section(raw, "analysis")}
    rng = ana["ell_range"]
    if not isinstance(rng, list) or len(rng) != 2:
        raise ConfigError("analysis.ell_range must be [lo, hi]")
    lo = _number("analysis", "ell_range", rng[0], positive=True)
    hi = _number("analysis", "ell_range", rng[1], positive=True)
    samples = ana["samples"]
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 2:
        raise ConfigError("analysis.samples must be an integer >= 2")
    levels = ana["energy_levels"]
    if levels is not None:
        if not isinstance(levels, list):
            raise ConfigError("analysis.energy_levels must be a list of numbers")
        levels = [_number("analysis", "energy_levels", v) for v in levels]
    for key in ("n_points", "n_random"):
        v = ana[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ConfigError(f"analysis.{key} must be a positive integer")

    out = {**DEFAULTS["output"], **_section(raw, "output")}
    formats = out["formats"]
    if not isinstance(formats, list) or not set(formats) <= _FORMATS:
        raise ConfigError(f"output.formats must be a subset of {sorted(_FORMATS)}")
    plots = out["plots"]
    if not isinstance(plots, list) or not set(plots) <= set(PLOT_KINDS):
        raise ConfigError(f"output.plots must be a subset of {list(PLOT_KINDS)}")

    return SceneConfig(
        raw=raw, coeffs=ReducedCoefficients(profile, body), theta0=theta0,
        p_theta0=_number("initial", "p_theta0", ini["p_theta0"]),
        ell=_number("initial", "ell", ini["ell"]), method=integ["method"], dt=dt, t_end=t_end,
        ell_range=(lo, hi), samples=samples, energy_levels=levels, n_points=ana["n_points"],
        n_random=ana["n_random"], formats=tuple(formats), plots=tuple(plots), **extra)


def load_config(path, ell_override=None) -> SceneConfig:
    """Read and validate a JSON file; ``bundled:NAME`` picks a shipped example."""
    try:
        if str(path).startswith("bundled:"):
            name = str(path).split(":", 1)[1]
            text = resources.files("rollkit.configs").joinpath(f"{name}.json").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError(f"config not found: {path}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(raw, ell_override)


def bundled_names():
    return sorted(p.name[:-5] for p in resources.files("rollkit.configs").iterdir()
                  if p.name.endswith(".json"))
