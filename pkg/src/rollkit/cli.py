"""``rollkit`` command line: simulate, oracle-compare, equilibria, plot, verify.

Exit codes: 0 ok, 2 configuration error, 3 singularity abort, 4 I/O error,
5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from .coefficients import ReducedCoefficients
from .config import PLOT_KINDS, SceneConfig, load_config
from .errors import ConfigError, IntegrationError, SingularityError
from .oracle import ConstrainedSystem, integrate_full, matched_initial
from .reconstruction import fit_circle, reconstruct, steady_circle
from .reduced import ReducedState, bifurcation_scan, find_equilibria, integrate_reduced
from .structure import certify
from .trajectory import Trajectory, format_number

EXIT_OK, EXIT_CONFIG, EXIT_SINGULAR, EXIT_IO, EXIT_VERIFY = 0, 2, 3, 4, 5


class _Abort(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- output

class Writer:
    """Serialized output into one directory; every file carries the config hash."""

    def __init__(self, out_dir, cfg: SceneConfig, command):
        self.dir = out_dir
        self.cfg = cfg
        self.command = command
        self.written = []
        os.makedirs(out_dir, exist_ok=True)

    def _path(self, name):
        path = os.path.join(self.dir, name)
        self.written.append(path)
        return path

    def header(self):
        return f"rollkit {__version__}\nconfig-sha256 {self.cfg.hash}\ncommand {self.command}"

    def csv(self, name, traj: Trajectory, trailer=None):
        if "csv" not in self.cfg.formats:
            return
        with open(self._path(name), "w", newline="\n") as fh:
            traj.to_csv(fh, comment=self.header())
            if trailer:
                fh.write(f"# {trailer}\n")

    def table(self, name, columns, rows):
        if "csv" not in self.cfg.formats:
            return
        with open(self._path(name), "w", newline="\n") as fh:
            for line in self.header().splitlines():
                fh.write(f"# {line}\n")
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(v if isinstance(v, str) else format_number(v) for v in row) + "\n")

    def json(self, name, payload, force=False):
        if not force and "json" not in self.cfg.formats:
            return
        doc = {"rollkit_version": __version__, "config_sha256": self.cfg.hash,
               "command": self.command, **payload}
        with open(self._path(name), "w", newline="\n") as fh:
            json.dump(_clean(doc), fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")

    def svg(self, name, text):
        if "svg" not in self.cfg.formats:
            return
        with open(self._path(name), "w", newline="\n") as fh:
            fh.write(text)


def _clean(obj):
    """JSON-safe copy: numpy scalars to float, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


# ---------------------------------------------------------------- runs

def _reduced_run(cfg: SceneConfig, coeffs=None):
    coeffs = coeffs or cfg.coeffs
    state = ReducedState(cfg.theta0, cfg.p_theta0, cfg.ell)
    return integrate_reduced(coeffs, state, cfg.t_end, cfg.dt, method=cfg.method)


def _initial(cfg):
    return (cfg.psi0, cfg.phi0, cfg.x0, cfg.y0)


def _rel_drift(values):
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return float("nan")
    scale = max(abs(v[0]), 1e-300)
    return float(np.max(np.abs(v - v[0])) / scale) if v[0] != 0 else float(np.max(np.abs(v)))


def _summary(reduced: Trajectory, full: Trajectory):
    out = {"samples": len(reduced),
           "t_final": float(reduced.t[-1]) if len(reduced) else 0.0,
           "energy_drift_rel": _rel_drift(reduced["energy"])}
    if full is not None and len(full):
        out.update({
            "ell_full_drift_rel": _rel_drift(full["ell"]),
            "full_energy_drift_rel": _rel_drift(full["energy"]),
            "max_res_notwist": float(np.nanmax(full["res_notwist"])) if np.any(np.isfinite(full["res_notwist"])) else float("nan"),
            "max_res_noslip": float(np.nanmax(full["res_noslip"])) if np.any(np.isfinite(full["res_noslip"])) else float("nan"),
            "invalid_samples": int(np.sum(~np.isfinite(full["theta_dot"]))),
        })
    return out


def _abort_record(exc: SingularityError):
    st = exc.state
    rec = {"reason": str(exc)}
    if st is not None:
        rec.update({"t": st.t, "theta": st.theta, "p_theta": st.p_theta})
    return rec


def cmd_simulate(cfg: SceneConfig, w: Writer):
    try:
        reduced = _reduced_run(cfg)
    except SingularityError as exc:
        partial = exc.partial
        record = _abort_record(exc)
        full = reconstruct(cfg.coeffs, partial, _initial(cfg)) if partial is not None and len(partial) else None
        if partial is not None:
            w.csv("reduced.csv", partial, trailer=f"abort {record['reason']}")
        if full is not None:
            w.csv("full.csv", full, trailer=f"abort {record['reason']}")
        summary = _summary(partial, full) if partial is not None else {}
        w.json("summary.json", {"status": "aborted", "abort": record, **summary}, force=True)
        raise _Abort(EXIT_SINGULAR, f"singularity abort: {record['reason']}") from exc
    full = reconstruct(cfg.coeffs, reduced, _initial(cfg))
    w.csv("reduced.csv", reduced)
    w.csv("full.csv", full)
    w.json("summary.json", {"status": "ok", **_summary(reduced, full)}, force=True)
    return EXIT_OK


def _perturbed_i3(coeffs: ReducedCoefficients, factor=1.1):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return ReducedCoefficients(coeffs.geom, replace(coeffs.body, I3=factor * coeffs.body.I3))


def cmd_oracle_compare(cfg: SceneConfig, w: Writer):
    try:
        reduced = _reduced_run(cfg)
        lifted = reconstruct(cfg.coeffs, reduced, _initial(cfg))
        system = ConstrainedSystem(cfg.coeffs)
        q0, qd0 = matched_initial(cfg.coeffs, ReducedState(cfg.theta0, cfg.p_theta0, cfg.ell), *_initial(cfg))
        oracle = integrate_full(system, q0, qd0, cfg.t_end, cfg.dt)
        other = _reduced_run(cfg, _perturbed_i3(cfg.coeffs))
    except SingularityError as exc:
        record = _abort_record(exc)
        w.json("compare.json", {"status": "aborted", "abort": record}, force=True)
        raise _Abort(EXIT_SINGULAR, f"singularity abort: {record['reason']}") from exc

    dev = {k: float(np.max(np.abs(lifted[k] - oracle[k]))) for k in ("theta", "psi", "phi", "x", "y")}
    dev["xy"] = float(np.max(np.hypot(lifted["x"] - oracle["x"], lifted["y"] - oracle["y"])))
    same = bool(np.array_equal(reduced["theta"], other["theta"])
                and np.array_equal(reduced["p_theta"], other["p_theta"]))
    w.csv("oracle.csv", oracle)
    w.json("compare.json", {
        "status": "ok",
        "max_deviation": dev,
        "reduced": _summary(reduced, lifted),
        "oracle": {"ell_full_drift_rel": _rel_drift(oracle["ell"]),
                   "energy_drift_rel": _rel_drift(oracle["energy"]),
                   "max_res_notwist": float(np.max(oracle["res_notwist"])),
                   "max_res_noslip": float(np.max(oracle["res_noslip"]))},
        "i3_perturbed_identical": same,
    }, force=True)
    return EXIT_OK


def cmd_equilibria(cfg: SceneConfig, w: Writer, args):
    ell = cfg.ell
    eqs = find_equilibria(cfg.coeffs, ell)
    rows = [(ell, e.theta, e.stability, e.second_derivative, e.residual,
             steady_circle(cfg.coeffs.geom, e.theta)) for e in eqs]
    w.table("equilibria.csv", ("ell", "theta", "stability", "second_derivative", "residual",
                               "circle_radius"), rows)
    scan = bifurcation_scan(cfg.coeffs, cfg.ell_range, cfg.samples)
    w.table("bifurcation.csv", ("ell", "theta", "stability", "potential"), scan.rows)
    if "svg" in cfg.formats:
        from .plotting import bifurcation_svg
        w.svg("bifurcation.svg", bifurcation_svg(scan, cfg.hash))
    w.json("equilibria.json", {
        "ell": ell,
        "equilibria": [{"theta": e.theta, "stability": e.stability,
                        "second_derivative": e.second_derivative, "residual": e.residual,
                        "circle_radius": steady_circle(cfg.coeffs.geom, e.theta)} for e in eqs],
        "scan": {"ell_range": list(cfg.ell_range), "samples": cfg.samples,
                 "points": [{"ell": p.ell, "theta": p.theta, "kind": p.kind} for p in scan.points]},
    }, force=True)
    return EXIT_OK


def cmd_plot(cfg: SceneConfig, w: Writer, args):
    from . import plotting

    kinds = args.kind or list(cfg.plots)
    ell = cfg.ell
    for kind in kinds:
        if kind == "potential":
            text = plotting.potential_svg(cfg.coeffs, ell, cfg.hash)
        elif kind == "phase":
            text = plotting.phase_svg(cfg.coeffs, ell, cfg.energy_levels, cfg.hash)
        elif kind == "bifurcation":
            text = plotting.bifurcation_svg(bifurcation_scan(cfg.coeffs, cfg.ell_range, cfg.samples), cfg.hash)
        else:
            try:
                full = reconstruct(cfg.coeffs, _reduced_run(cfg), _initial(cfg))
            except SingularityError as exc:
                raise _Abort(EXIT_SINGULAR, f"singularity abort: {exc}") from exc
            text = plotting.track_svg(full, cfg.hash)
            xc, yc, rad, res = fit_circle(full["x"], full["y"])
            w.json("track_fit.json", {"center": [xc, yc], "radius": rad, "rms_residual": res})
        with open(w._path(f"{kind}.svg"), "w", newline="\n") as fh:
            fh.write(text)
    return EXIT_OK


def cmd_verify(cfg: SceneConfig, w: Writer, args):
    report = certify(cfg.coeffs, n_points=cfg.n_points, n_random=cfg.n_random, seed=args.seed)
    w.json("verify.json", report.as_dict(), force=True)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.max_residual:.3e} (tol {c.tolerance:g})")
    if not report.passed:
        raise _Abort(EXIT_VERIFY, "certification failed")
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser():
    parser = argparse.ArgumentParser(prog="rollkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"rollkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "oracle-compare", "equilibria", "plot", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", default="bundled:torus_well",
                       help="JSON scene file, or bundled:NAME (default bundled:torus_well)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--ell", type=float, default=None, help="override initial.ell")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized verification grids")
        if name == "plot":
            p.add_argument("--kind", action="append", choices=PLOT_KINDS,
                           help="plot kind (repeatable); default from config output.plots")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, ell_override=args.ell)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        w = Writer(args.out, cfg, args.command)
        if args.command == "simulate":
            return cmd_simulate(cfg, w)
        if args.command == "oracle-compare":
            return cmd_oracle_compare(cfg, w)
        if args.command == "equilibria":
            return cmd_equilibria(cfg, w, args)
        if args.command == "plot":
            return cmd_plot(cfg, w, args)
        return cmd_verify(cfg, w, args)
    except _Abort as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularityError as exc:
        print(f"singularity abort: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
