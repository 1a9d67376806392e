"""Command-line front end: parameter scans, evolution, phase-space maps.

Subcommands:

  spectrum   quasienergy bands along a one-parameter sweep
  current    directed current along a one-parameter sweep
  evolve     running average of the momentum over many periods
  husimi     phase-space map of a Floquet state or of the launch state
  classical  stroboscopic portrait and chaotic-layer current
  figure     canned parameter sets reproducing the standard plots

Every command accepts --config pointing at a JSON file, either a flat
system descriptor or {"system": {...}, "propagator": {...}, "scan": {...}},
plus individual overrides.  Scans write incrementally and can resume: an
interrupted output directory is completed in place and the finished CSV is
byte-identical to an uninterrupted run.

Exit codes: 0 success, 2 configuration or usage error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .model import (RatchetSystem, system_from_descriptor,
                    system_to_descriptor)
from .propagator import (PropagatorConfig, Scheme, build_floquet_matrix,
                         default_n_cut)
from .floquet import decompose, cumulative_momentum
from .observables import (HusimiGrid, asymptotic_current_floquet,
                          averaged_current, evolve_running_average, husimi,
                          husimi_mass, plane_wave_zero)
from . import classical as classical_mod

SWEEPABLE = ("theta", "omega", "e2", "t0", "hbar")
_MIN_STEPS = 1024
_MAX_ODE_TOL = 1e-6


class ConfigError(ValueError):
    """Bad configuration; maps to exit code 2."""


# ---------------------------------------------------------------------------
# configuration plumbing

_DEFAULT_SYSTEM = {
    "variant": "tilting", "e1": 2.0, "e2": 2.0, "omega": 2.0,
    "theta": -0.5 * math.pi, "t0": 0.0, "hbar": 0.2, "n_cut": 48,
}


def load_config(path=None) -> dict:
    """Read a config file into {"system": ..., "propagator": ..., "scan": ...}."""
    cfg = {"system": dict(_DEFAULT_SYSTEM), "propagator": {}, "scan": {}}
    if path is None:
        return cfg
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    if "system" in raw:
        cfg["system"].update(raw.get("system") or {})
        cfg["propagator"].update(raw.get("propagator") or {})
        cfg["scan"].update(raw.get("scan") or {})
        extra = set(raw) - {"system", "propagator", "scan"}
        if extra:
            raise ConfigError(f"unknown config sections: {sorted(extra)}")
    else:
        cfg["system"].update(raw)
    return cfg


def propagator_config(cfg_prop: dict) -> PropagatorConfig:
    try:
        scheme = Scheme(cfg_prop.get("scheme", "kick_split"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    try:
        return PropagatorConfig(
            scheme=scheme,
            n_steps=int(cfg_prop.get("n_steps", 2048)),
            ode_tolerance=float(cfg_prop.get("ode_tolerance", 1e-10)),
            include_global_phase=bool(cfg_prop.get("include_global_phase", False)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(config: dict) -> str:
    """Hash of the physics configuration, invariant under key reordering."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _build_system(descriptor: dict) -> RatchetSystem:
    try:
        return system_from_descriptor(descriptor)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad system descriptor: {exc}") from exc


# ---------------------------------------------------------------------------
# scans

@dataclass
class ScanSpec:
    """One-parameter sweep request."""

    system: dict                       # flat system descriptor
    param: str                         # one of SWEEPABLE
    start: float
    stop: float
    points: int
    outputs: tuple = ("current",)
    out_dir: str = "."
    workers: int = 1
    n_t0: int = 0                      # > 0: average the current over launch phases
    n_steps: int = 2048
    scheme: str = "kick_split"
    ode_tolerance: float = 1e-10
    n_snapshots: int = 32
    allow_coarse: bool = False

    def __post_init__(self):
        if self.param not in SWEEPABLE:
            raise ConfigError(
                f"sweep parameter must be one of {SWEEPABLE}, got {self.param!r}")
        if self.points < 2:
            raise ConfigError("a scan needs at least 2 points")
        bad = set(self.outputs) - {"current", "spectrum"}
        if bad:
            raise ConfigError(f"unknown scan outputs: {sorted(bad)}")
        if not self.outputs:
            raise ConfigError("scan requests no outputs")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.n_t0 < 0:
            raise ConfigError("n_t0 must be non-negative")

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    def point_descriptor(self, value: float) -> dict:
        d = dict(self.system)
        d[self.param] = float(value)
        return d

    def prop_config(self) -> PropagatorConfig:
        return propagator_config({"scheme": self.scheme, "n_steps": self.n_steps,
                                  "ode_tolerance": self.ode_tolerance})

    def physics_config(self) -> dict:
        return {
            "system": dict(self.system),
            "propagator": {"scheme": self.scheme, "n_steps": self.n_steps,
                           "ode_tolerance": self.ode_tolerance},
            "scan": {"param": self.param, "start": self.start,
                     "stop": self.stop, "points": self.points,
                     "outputs": list(self.outputs), "n_t0": self.n_t0},
        }


@dataclass
class ScanResult:
    params: np.ndarray
    records: list
    manifest: dict
    out_dir: str
    files: dict = field(default_factory=dict)


def check_convergence(spec: ScanSpec) -> None:
    """Refuse scans below the convergence defaults unless overridden."""
    if spec.allow_coarse:
        return
    required = 0
    for value in spec.grid():
        sys_v = _build_system(spec.point_descriptor(value))
        required = max(required, default_n_cut(sys_v))
    n_cut = int(spec.system.get("n_cut", 0))
    if n_cut < required:
        raise ConfigError(
            f"n_cut = {n_cut} is below the convergence default {required} "
            "for this parameter range; raise it or pass --allow-coarse")
    if spec.scheme == "kick_split" and spec.n_steps < _MIN_STEPS:
        raise ConfigError(
            f"n_steps = {spec.n_steps} is below the convergence default "
            f"{_MIN_STEPS}; raise it or pass --allow-coarse")
    if spec.scheme == "interaction_picture" and spec.ode_tolerance > _MAX_ODE_TOL:
        raise ConfigError(
            f"ode_tolerance = {spec.ode_tolerance} is looser than the "
            f"convergence default {_MAX_ODE_TOL}; tighten it or pass "
            "--allow-coarse")


def _scan_point(spec: ScanSpec, value: float) -> dict:
    """Compute one scan point; exceptions are captured by the caller."""
    sys_v = _build_system(spec.point_descriptor(value))
    cfg = spec.prop_config()
    record = {"value": float(value), "theta": sys_v.driving.theta,
              "t0": sys_v.driving.t0, "error": None, "j": None,
              "bands": None, "states": None}
    if spec.n_t0 > 0 and "current" in spec.outputs:
        jbar, _ = averaged_current(sys_v, cfg, n_t0=spec.n_t0,
                                   n_snapshots=spec.n_snapshots)
        record["j"] = jbar
        if "spectrum" in spec.outputs:
            dec = decompose(build_floquet_matrix(sys_v, cfg), spec.n_snapshots)
            record["bands"] = (dec.quasienergies, dec.mean_p, dec.mean_p2)
            record["states"] = dec.states
    else:
        dec = decompose(build_floquet_matrix(sys_v, cfg), spec.n_snapshots)
        if "current" in spec.outputs:
            record["j"] = asymptotic_current_floquet(dec, plane_wave_zero(sys_v))
        if "spectrum" in spec.outputs:
            record["bands"] = (dec.quasienergies, dec.mean_p, dec.mean_p2)
            record["states"] = dec.states
    return record


def _scan_point_safe(payload):
    spec, value = payload
    try:
        return _scan_point(spec, value)
    except Exception as exc:  # per-point failures must not kill the scan
        return {"value": float(value), "theta": None, "t0": None,
                "error": f"{type(exc).__name__}: {exc}", "j": None,
                "bands": None, "states": None}


def _current_columns(param: str):
    cols = ["theta", "t0", "J"]
    if param not in ("theta", "t0"):
        cols = ["scan_param"] + cols
    return cols


def _fmt(v) -> str:
    if v is None:
        return "nan"
    return repr(float(v))


def _current_row(spec: ScanSpec, rec: dict) -> str:
    theta = rec["theta"] if rec["theta"] is not None else spec.system.get("theta")
    t0 = rec["t0"] if rec["t0"] is not None else spec.system.get("t0")
    if spec.param == "theta":
        theta = rec["value"]
    if spec.param == "t0":
        t0 = rec["value"]
    vals = [theta, t0, rec["j"]]
    if spec.param not in ("theta", "t0"):
        vals = [rec["value"]] + vals
    return ",".join(_fmt(v) for v in vals) + "\n"


def _spectrum_block(spec: ScanSpec, rec: dict, prev_states):
    """CSV rows for one scan point; returns (text, states in tracked order)."""
    dim = int(spec.system.get("n_cut", 0)) * 2 + 1
    lines = []
    if rec["bands"] is None:
        for b in range(dim):
            lines.append(f"{_fmt(rec['value'])},{b},nan,nan,nan,nan\n")
        return "".join(lines), None
    energies, mean_p, mean_p2 = rec["bands"]
    states = rec["states"]
    if prev_states is None:
        order = np.arange(energies.size)
        overlaps = np.ones(energies.size)
    else:
        o = np.abs(prev_states.conj().T @ states) ** 2
        order = np.full(energies.size, -1)
        overlaps = np.zeros(energies.size)
        flat = np.argsort(o, axis=None)[::-1]
        row_done = np.zeros(energies.size, dtype=bool)
        col_done = np.zeros(energies.size, dtype=bool)
        left = energies.size
        for pos in flat:
            i, j = divmod(int(pos), energies.size)
            if row_done[i] or col_done[j]:
                continue
            order[i] = j
            overlaps[i] = o[i, j]
            row_done[i] = True
            col_done[j] = True
            left -= 1
            if left == 0:
                break
    for b in range(energies.size):
        j = order[b]
        lines.append(f"{_fmt(rec['value'])},{b},{_fmt(energies[j])},"
                     f"{_fmt(mean_p[j])},{_fmt(mean_p2[j])},"
                     f"{_fmt(overlaps[b])}\n")
    return "".join(lines), (states[:, order] if states is not None else None)


def _count_complete_points(path, header: str, rows_per_point: int) -> int:
    """Completed points in an existing CSV; truncates any partial block."""
    if not os.path.exists(path):
        return -1
    with open(path, "rb") as fh:
        data = fh.read()
    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    if not lines or lines[0].decode() != header.rstrip("\n"):
        return -1
    n_rows = len(lines) - 1
    done = n_rows // rows_per_point
    keep = 1 + done * rows_per_point
    if keep < len(lines):
        with open(path, "wb") as fh:
            fh.write(b"\n".join(lines[:keep]) + b"\n")
    return done


def run_scan(spec: ScanSpec) -> ScanResult:
    """Execute a sweep, writing CSV rows incrementally.

    Results land in spec.out_dir: current.csv and/or spectrum.csv plus
    manifest.json.  A run interrupted between points resumes from the
    existing files; per-point failures are recorded in the manifest and
    leave nan rows so the grid stays aligned.
    """
    check_convergence(spec)
    t_begin = time.perf_counter()
    os.makedirs(spec.out_dir, exist_ok=True)
    grid = spec.grid()
    dim = int(spec.system.get("n_cut", 0)) * 2 + 1

    cur_path = os.path.join(spec.out_dir, "current.csv")
    spec_path = os.path.join(spec.out_dir, "spectrum.csv")
    cur_header = ",".join(_current_columns(spec.param)) + "\n"
    spec_header = "scan_param,band_id,quasienergy,mean_p,mean_p2,overlap_with_prev\n"

    done = spec.points
    if "current" in spec.outputs:
        k = _count_complete_points(cur_path, cur_header, 1)
        done = min(done, max(k, 0)) if k >= 0 else 0
    if "spectrum" in spec.outputs:
        k = _count_complete_points(spec_path, spec_header, dim)
        done = min(done, max(k, 0)) if k >= 0 else 0

    files = {}
    handles = {}
    try:
        if "current" in spec.outputs:
            mode = "a" if done > 0 else "w"
            handles["current"] = open(cur_path, mode)
            if mode == "w":
                handles["current"].write(cur_header)
                handles["current"].flush()
            files["current"] = cur_path
        if "spectrum" in spec.outputs:
            mode = "a" if done > 0 else "w"
            handles["spectrum"] = open(spec_path, mode)
            if mode == "w":
                handles["spectrum"].write(spec_header)
                handles["spectrum"].flush()
            files["spectrum"] = spec_path

        prev_states = None
        if done > 0 and "spectrum" in spec.outputs and done < spec.points:
            # Band identities chain point to point, so a resumed run must
            # recover the tracked order at the last finished point by
            # replaying the chain from the start (cheap next to the sweep
            # itself, and it reproduces a clean run byte for byte).
            for kk in range(done):
                rec = _scan_point_safe((spec, float(grid[kk])))
                _, prev_states = _spectrum_block(spec, rec, prev_states)

        records = []
        errors = []

        def consume(idx, rec):
            nonlocal prev_states
            if rec["error"] is not None:
                errors.append({"index": int(idx), "param": rec["value"],
                               "error": rec["error"]})
            if "current" in spec.outputs:
                handles["current"].write(_current_row(spec, rec))
                handles["current"].flush()
            if "spectrum" in spec.outputs:
                block, prev_states = _spectrum_block(spec, rec, prev_states)
                handles["spectrum"].write(block)
                handles["spectrum"].flush()
            rec = dict(rec)
            rec.pop("states", None)
            records.append(rec)

        todo = list(enumerate(grid))[done:]
        if spec.workers == 1 or not todo:
            for idx, value in todo:
                consume(idx, _scan_point_safe((spec, float(value))))
        else:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                for (idx, _), rec in zip(
                        todo, pool.map(_scan_point_safe,
                                       [(spec, float(v)) for _, v in todo])):
                    consume(idx, rec)
    finally:
        for fh in handles.values():
            fh.close()

    physics = spec.physics_config()
    manifest = {
        "config": physics,
        "code_version": __version__,
        "config_hash": config_hash(physics),
        "n_cut": int(spec.system.get("n_cut", 0)),
        "steps_per_period": spec.n_steps,
        "wall_time_s": time.perf_counter() - t_begin,
        "per_point_errors": errors,
    }
    man_path = os.path.join(spec.out_dir, "manifest.json")
    with open(man_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    files["manifest"] = man_path
    return ScanResult(params=grid, records=records, manifest=manifest,
                      out_dir=spec.out_dir, files=files)


# ---------------------------------------------------------------------------
# one-off outputs

def write_running_csv(path, running: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("period_index,P\n")
        for m, p in enumerate(running, start=1):
            fh.write(f"{m},{_fmt(p)}\n")


def write_husimi_csv(path, x, p, rho) -> None:
    with open(path, "w") as fh:
        fh.write("x,p,rho\n")
        for i in range(x.size):
            for j in range(p.size):
                fh.write(f"{_fmt(x[i])},{_fmt(p[j])},{_fmt(rho[i, j])}\n")


def write_portrait_csv(path, xs, ps) -> None:
    with open(path, "w") as fh:
        fh.write("x,p\n")
        x_wrapped = np.mod(xs.reshape(-1), 2.0 * math.pi)
        p_flat = ps.reshape(-1)
        for xv, pv in zip(x_wrapped, p_flat):
            fh.write(f"{_fmt(xv)},{_fmt(pv)}\n")


def write_cumulative_csv(path, dec) -> None:
    order, cum = cumulative_momentum(dec)
    with open(path, "w") as fh:
        fh.write("rank,band_id,mean_p2,mean_p,cumulative\n")
        for rank, (b, c) in enumerate(zip(order, cum)):
            fh.write(f"{rank},{int(b)},{_fmt(dec.mean_p2[b])},"
                     f"{_fmt(dec.mean_p[b])},{_fmt(c)}\n")


# ---------------------------------------------------------------------------
# canned figures

_FIG1_BASE = {"variant": "tilting", "e1": 2.0, "e2": 2.0, "omega": 2.0,
              "theta": -0.5 * math.pi, "t0": 0.0, "hbar": 0.2, "n_cut": 48}

FIGURE_TAGS = ("fig2", "fig4", "fig5", "fig8", "fig9", "fig10")


def reproduce_figure(tag: str, out_dir: str, points=None, n_cut=None,
                     n_steps=None, workers: int = 1,
                     allow_coarse: bool = False) -> dict:
    """Run the canned parameter set behind one of the standard plots.

    Writes the relevant CSVs plus manifest.json into out_dir and returns
    the manifest.  points / n_cut / n_steps trade fidelity for speed.
    """
    if tag not in FIGURE_TAGS:
        raise ConfigError(f"unknown figure tag {tag!r}; known: {FIGURE_TAGS}")
    t_begin = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    n_steps_v = int(n_steps) if n_steps else 1024
    sub_manifests = {}
    errors = []

    def scan(sub, system, param, start, stop, npts, outputs, n_t0=0):
        spec = ScanSpec(system=system, param=param, start=start, stop=stop,
                        points=npts, outputs=outputs,
                        out_dir=os.path.join(out_dir, sub) if sub else out_dir,
                        workers=workers, n_t0=n_t0, n_steps=n_steps_v,
                        allow_coarse=allow_coarse)
        res = run_scan(spec)
        sub_manifests[sub or "scan"] = res.manifest
        errors.extend(res.manifest["per_point_errors"])

    def base(n_cut_default, **kw):
        d = dict(_FIG1_BASE)
        d.update(kw)
        d["n_cut"] = int(n_cut) if n_cut else n_cut_default
        return d

    if tag == "fig2":
        system = base(48)
        scan("", system, "theta", -math.pi, math.pi, points or 33,
             ("spectrum", "current"))
    elif tag == "fig4":
        system = base(48)
        cfg = PropagatorConfig(n_steps=n_steps_v)
        dec = decompose(build_floquet_matrix(_build_system(system), cfg))
        write_cumulative_csv(os.path.join(out_dir, "cumulative.csv"), dec)
        sub_manifests["decomposition"] = {"system": system,
                                          "n_steps": n_steps_v}
    elif tag == "fig5":
        system = base(48)
        cfg = PropagatorConfig(n_steps=n_steps_v)
        sys_v = _build_system(system)
        dec = decompose(build_floquet_matrix(sys_v, cfg))
        picks = {"positive": int(np.argmax(dec.mean_p)),
                 "negative": int(np.argmin(dec.mean_p))}
        for name, band in picks.items():
            x, p, rho = husimi(dec.states[:, band], sys_v)
            write_husimi_csv(os.path.join(out_dir, f"husimi_{name}.csv"),
                             x, p, rho)
        sub_manifests["husimi"] = {"system": system, "bands": picks,
                                   "n_steps": n_steps_v}
    elif tag == "fig8":
        system = base(68, e1=3.0, e2=1.5, omega=1.0)
        scan("", system, "omega", 0.5, 3.5, points or 61, ("current",))
    elif tag == "fig9":
        top = base(68, e1=3.26, e2=1.0, omega=3.0)
        bottom = base(68, e1=3.0, e2=1.5, omega=1.0)
        scan("top", top, "omega", 0.5, 3.5, points or 41, ("current",), n_t0=8)
        scan("bottom", bottom, "omega", 0.5, 3.5, points or 41, ("current",),
             n_t0=8)
    elif tag == "fig10":
        system = {"variant": "flashing", "e1": 2.0, "e2": 1.5, "omega": 1.0,
                  "theta": -0.5 * math.pi, "t0": 0.0, "hbar": 1.0,
                  "n_cut": int(n_cut) if n_cut else 20,
                  "k": 1.5, "s": 0.25, "theta_p": 0.5 * math.pi}
        period = 2.0 * math.pi / system["omega"]
        scan("theta", system, "theta", -math.pi, math.pi, points or 33,
             ("current",))
        scan("t0", system, "t0", 0.0, period, points or 17, ("current",))

    config = {"tag": tag, "runs": {k: v.get("config", v)
                                   for k, v in sub_manifests.items()}}
    manifest = {
        "config": config,
        "code_version": __version__,
        "config_hash": config_hash(config),
        "n_cut": int(n_cut) if n_cut else config_n_cut_of(sub_manifests),
        "steps_per_period": n_steps_v,
        "wall_time_s": time.perf_counter() - t_begin,
        "per_point_errors": errors,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def config_n_cut_of(sub_manifests: dict) -> int:
    for man in sub_manifests.values():
        if "n_cut" in man:
            return man["n_cut"]
        cfg = man.get("system") or {}
        if "n_cut" in cfg:
            return int(cfg["n_cut"])
    return 0


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(sub, scan_opts: bool):
    sub.add_argument("--config", help="JSON configuration file")
    sub.add_argument("--theta", type=float, help="override the drive phase")
    sub.add_argument("--omega", type=float, help="override the drive frequency")
    sub.add_argument("--e2", type=float, help="override the second harmonic")
    sub.add_argument("--t0", type=float, help="override the drive anchor")
    sub.add_argument("--hbar", type=float, help="override the effective hbar")
    sub.add_argument("--n-cut", type=int, help="override the basis cutoff")
    sub.add_argument("--n-steps", type=int, help="override steps per period")
    sub.add_argument("--scheme", choices=[s.value for s in Scheme],
                     help="override the integration scheme")
    sub.add_argument("--out", required=True, help="output directory")
    sub.add_argument("--allow-coarse", action="store_true",
                     help="accept resolutions below the convergence defaults")
    if scan_opts:
        sub.add_argument("--sweep", choices=SWEEPABLE,
                         help="parameter to sweep (default theta)")
        sub.add_argument("--start", type=float, help="sweep start")
        sub.add_argument("--stop", type=float, help="sweep stop")
        sub.add_argument("--points", type=int, help="number of sweep points")
        sub.add_argument("--workers", type=int, default=1,
                         help="parallel scan workers")


def _apply_overrides(cfg: dict, args) -> None:
    for key in ("theta", "omega", "e2", "t0", "hbar"):
        v = getattr(args, key, None)
        if v is not None:
            cfg["system"][key] = v
    if getattr(args, "n_cut", None) is not None:
        cfg["system"]["n_cut"] = args.n_cut
    if getattr(args, "n_steps", None) is not None:
        cfg["propagator"]["n_steps"] = args.n_steps
    if getattr(args, "scheme", None) is not None:
        cfg["propagator"]["scheme"] = args.scheme


def _spec_from_args(args, outputs) -> ScanSpec:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    scan = cfg["scan"]
    param = args.sweep or scan.get("param", "theta")
    if param not in SWEEPABLE:
        raise ConfigError(f"sweep parameter must be one of {SWEEPABLE}")
    start = args.start if args.start is not None else scan.get("start")
    stop = args.stop if args.stop is not None else scan.get("stop")
    if start is None or stop is None:
        if param == "theta":
            start, stop = (-math.pi, math.pi)
        else:
            raise ConfigError("sweep needs --start and --stop")
    points = args.points or scan.get("points") or 33
    return ScanSpec(
        system=cfg["system"], param=param, start=float(start),
        stop=float(stop), points=int(points), outputs=outputs,
        out_dir=args.out, workers=args.workers,
        n_t0=int(getattr(args, "n_t0", 0) or scan.get("n_t0", 0) or 0),
        n_steps=int(cfg["propagator"].get("n_steps", 2048)),
        scheme=cfg["propagator"].get("scheme", "kick_split"),
        ode_tolerance=float(cfg["propagator"].get("ode_tolerance", 1e-10)),
        allow_coarse=args.allow_coarse)


def _cmd_scan(args, outputs) -> int:
    res = run_scan(_spec_from_args(args, outputs))
    n_err = len(res.manifest["per_point_errors"])
    print(f"scan complete: {res.params.size} points, {n_err} failed, "
          f"outputs in {res.out_dir}")
    return 2 if n_err else 0


def _system_and_config(args):
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    system = _build_system(cfg["system"])
    pcfg = propagator_config(cfg["propagator"])
    if not args.allow_coarse:
        need = default_n_cut(system)
        if system.n_cut < need:
            raise ConfigError(
                f"n_cut = {system.n_cut} is below the convergence default "
                f"{need}; raise it or pass --allow-coarse")
        if pcfg.scheme is Scheme.KICK_SPLIT and pcfg.n_steps < _MIN_STEPS:
            raise ConfigError(
                f"n_steps = {pcfg.n_steps} is below the convergence default "
                f"{_MIN_STEPS}; raise it or pass --allow-coarse")
    return system, pcfg, cfg


def _cmd_evolve(args) -> int:
    system, pcfg, _ = _system_and_config(args)
    os.makedirs(args.out, exist_ok=True)
    running = evolve_running_average(system, pcfg, n_periods=args.periods)
    write_running_csv(os.path.join(args.out, "running.csv"), running)
    physics = {"system": system_to_descriptor(system),
               "periods": args.periods,
               "propagator": {"scheme": pcfg.scheme.value,
                              "n_steps": pcfg.n_steps,
                              "ode_tolerance": pcfg.ode_tolerance}}
    _write_simple_manifest(args.out, physics, system.n_cut, pcfg.n_steps)
    print(f"running average over {args.periods} periods -> "
          f"{os.path.join(args.out, 'running.csv')}")
    return 0


def _cmd_husimi(args) -> int:
    system, pcfg, _ = _system_and_config(args)
    os.makedirs(args.out, exist_ok=True)
    grid = HusimiGrid(nx=args.grid, n_p=args.grid,
                      p_min=args.p_min, p_max=args.p_max)
    if args.band is None:
        state = plane_wave_zero(system).coeffs
        label = "launch"
    else:
        dec = decompose(build_floquet_matrix(system, pcfg))
        if not 0 <= args.band < dec.dim:
            raise ConfigError(f"band index out of range 0..{dec.dim - 1}")
        state = dec.states[:, args.band]
        label = f"band{args.band}"
    x, p, rho = husimi(state, system, grid)
    csv_path = os.path.join(args.out, "husimi.csv")
    write_husimi_csv(csv_path, x, p, rho)
    meta = {"system": system_to_descriptor(system), "state": label,
            "grid": {"nx": grid.nx, "n_p": grid.n_p,
                     "p_min": grid.p_min, "p_max": grid.p_max},
            "mass": husimi_mass(grid, rho),
            "code_version": __version__}
    with open(os.path.join(args.out, "husimi.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"husimi map of {label} -> {csv_path} (mass {meta['mass']:.4f})")
    return 0


def _cmd_classical(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(cfg, args)
    system = _build_system(cfg["system"])
    os.makedirs(args.out, exist_ok=True)
    wrote = []
    if not args.no_portrait:
        p_vals = np.linspace(-2.5, 2.5, args.trajectories)
        x_vals = np.full(args.trajectories, math.pi)
        xs, ps = classical_mod.strobe_map(system, x_vals, p_vals,
                                          args.portrait_periods,
                                          args.steps)
        path = os.path.join(args.out, "portrait.csv")
        write_portrait_csv(path, xs, ps)
        wrote.append(path)
    if not args.no_current:
        cur = classical_mod.chaotic_current(
            system, n_particles=args.particles, n_periods=args.periods,
            steps_per_period=args.steps, seed=args.seed)
        path = os.path.join(args.out, "classical_current.json")
        with open(path, "w") as fh:
            json.dump(cur.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        wrote.append(path)
    print("classical outputs: " + ", ".join(wrote))
    return 0


def _cmd_figure(args) -> int:
    manifest = reproduce_figure(args.tag, args.out, points=args.points,
                                n_cut=args.n_cut, n_steps=args.n_steps,
                                workers=args.workers,
                                allow_coarse=args.allow_coarse)
    print(f"figure {args.tag} written to {args.out} "
          f"({manifest['wall_time_s']:.1f} s)")
    return 2 if manifest["per_point_errors"] else 0


def _write_simple_manifest(out_dir, physics, n_cut, n_steps):
    manifest = {
        "config": physics,
        "code_version": __version__,
        "config_hash": config_hash(physics),
        "n_cut": n_cut,
        "steps_per_period": n_steps,
        "wall_time_s": 0.0,
        "per_point_errors": [],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qratchet",
        description="Floquet transport in ac-driven periodic potentials")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("spectrum", help="quasienergy bands along a sweep")
    _add_common(sp, scan_opts=True)

    cu = subs.add_parser("current", help="directed current along a sweep")
    _add_common(cu, scan_opts=True)
    cu.add_argument("--n-t0", type=int, default=0,
                    help="average the current over this many launch phases")

    ev = subs.add_parser("evolve", help="running momentum average")
    _add_common(ev, scan_opts=False)
    ev.add_argument("--periods", type=int, default=1000,
                    help="number of drive periods")

    hu = subs.add_parser("husimi", help="phase-space map of a state")
    _add_common(hu, scan_opts=False)
    hu.add_argument("--band", type=int, help="Floquet band index (default: launch state)")
    hu.add_argument("--grid", type=int, default=128, help="grid points per axis")
    hu.add_argument("--p-min", type=float, default=-4.0)
    hu.add_argument("--p-max", type=float, default=4.0)

    cl = subs.add_parser("classical", help="classical portrait and current")
    _add_common(cl, scan_opts=False)
    cl.add_argument("--particles", type=int, default=512)
    cl.add_argument("--periods", type=int, default=1000)
    cl.add_argument("--steps", type=int, default=512,
                    help="integration steps per period")
    cl.add_argument("--seed", type=int, default=0)
    cl.add_argument("--trajectories", type=int, default=24,
                    help="portrait trajectories")
    cl.add_argument("--portrait-periods", type=int, default=200)
    cl.add_argument("--no-portrait", action="store_true")
    cl.add_argument("--no-current", action="store_true")

    fig = subs.add_parser("figure", help="reproduce a canned figure")
    fig.add_argument("--tag", required=True, choices=FIGURE_TAGS)
    fig.add_argument("--out", required=True)
    fig.add_argument("--points", type=int)
    fig.add_argument("--n-cut", type=int)
    fig.add_argument("--n-steps", type=int)
    fig.add_argument("--workers", type=int, default=1)
    fig.add_argument("--allow-coarse", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "spectrum":
            return _cmd_scan(args, ("spectrum",))
        if args.command == "current":
            return _cmd_scan(args, ("current",))
        if args.command == "evolve":
            return _cmd_evolve(args)
        if args.command == "husimi":
            return _cmd_husimi(args)
        if args.command == "classical":
            return _cmd_classical(args)
        if args.command == "figure":
            return _cmd_figure(args)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
