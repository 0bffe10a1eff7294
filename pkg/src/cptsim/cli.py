"""Command-line entry point: config ingestion and reproduction pipelines.

Subcommands
-----------
simulate    propagate one phase-averaged trajectory and write it as CSV
reproduce   run a bundled pipeline (fig2, fig3, fig4, fig4-inset) and write
            its datasets, cuts, and a summary of the headline scalars
fit         fit dephasing times to an observed P2 time series

Exit codes: 0 ok, 2 config or input error, 3 physics (positivity) error,
4 fit did not converge.

Configuration is strict JSON; unknown keys are fatal, which catches unit
mistakes early (every key name carries its unit, e.g. ``f01_ghz``,
``t1_10_ns``).  ``--set section.key=value`` applies dotted-path overrides
on top of the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__, presets
from .analysis import (SimContext, fit_dephasing, linewidth_fit,
                       parabolic_contrast, sensitivity_curve)
from .evolution import (IntegratorConfig, PositivityError,
                        phase_averaged_populations)
from .model import (DecoherenceParams, DensityMatrix4, DeviceParams,
                    DriveParams, MeasurementModel)
from .sweep import (SCHEMA_VERSION, Series, SweepAxis, SweepSpec, cut,
                    run_sweep, to_csv, to_json)


class ConfigError(ValueError):
    """Bad configuration file, override, or input schema."""


# ---------------------------------------------------------------------------
# configuration

_SECTION_KEYS = {
    "device": {"f01_ghz", "f12_ghz", "f23_ghz"},
    "drive": {"fp_ghz", "fc_ghz", "omega_p01_mhz", "omega_c12_mhz",
              "rel_phase_rad", "t0_ns", "envelope", "ramp_ns"},
    "decoherence": {"t1_10_ns", "t1_21_ns", "t1_32_ns", "tphi_01_ns",
                    "tphi_02_ns", "tphi_12_ns", "tphi_3x_ns"},
    "integrator": {"dt_ns", "record_stride", "positivity_check"},
    "sweep": {"axis1", "axis2", "shot_noise", "rng_seed", "n_phases"},
    "measurement": {"fidelity", "background", "trials"},
}
_AXIS_KEYS = {"param", "start", "stop", "n_points"}


@dataclass
class RunConfig:
    """Validated configuration; every field optional with defaults."""

    device: dict = field(default_factory=dict)
    drive: dict = field(default_factory=dict)
    decoherence: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    measurement: dict | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        unknown = set(raw) - set(_SECTION_KEYS)
        if unknown:
            raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
        out = cls()
        for section, keys in _SECTION_KEYS.items():
            if section not in raw:
                continue
            body = raw[section]
            if body is None:
                continue
            if not isinstance(body, dict):
                raise ConfigError(f"section {section!r} must be an object")
            bad = set(body) - keys
            if bad:
                raise ConfigError(f"unknown key(s) in {section!r}: "
                                  f"{sorted(bad)} (allowed: {sorted(keys)})")
            for ax in ("axis1", "axis2"):
                if section == "sweep" and ax in body and body[ax] is not None:
                    bad = set(body[ax]) - _AXIS_KEYS
                    if bad:
                        raise ConfigError(f"unknown key(s) in sweep.{ax}: "
                                          f"{sorted(bad)}")
            setattr(out, section, body)
        return out

    # -- builders -----------------------------------------------------------
    def device_params(self) -> DeviceParams:
        d = self.device
        return DeviceParams(f01=d.get("f01_ghz", 6.205),
                            f12=d.get("f12_ghz", 5.865),
                            f23=d.get("f23_ghz"))

    def drive_params(self) -> DriveParams:
        d = self.drive
        dev = self.device_params()
        from .model import rabi_mhz
        return DriveParams(
            fp=d.get("fp_ghz", dev.f02() / 2.0),
            fc=d.get("fc_ghz", dev.f12),
            omega_p01=rabi_mhz(d.get("omega_p01_mhz", 48.0)),
            omega_c12=rabi_mhz(d.get("omega_c12_mhz", 32.0)),
            rel_phase=d.get("rel_phase_rad", 0.0),
            t0=d.get("t0_ns", 30.0),
            envelope=d.get("envelope", "rectangular"),
            ramp_ns=d.get("ramp_ns", 0.0))

    def decoherence_params(self) -> DecoherenceParams:
        d = self.decoherence

        def v(key, default):
            x = d.get(key, default)
            return float("inf") if x in ("inf", None) else x

        return DecoherenceParams(
            t1_10=v("t1_10_ns", 108.0), t1_21=v("t1_21_ns", 77.0),
            t1_32=d.get("t1_32_ns"),
            tphi_01=v("tphi_01_ns", 30.0), tphi_02=v("tphi_02_ns", 6.0),
            tphi_12=v("tphi_12_ns", 30.0), tphi_3x=v("tphi_3x_ns", "inf"))

    def integrator_config(self) -> IntegratorConfig:
        d = self.integrator
        return IntegratorConfig(
            dt=d.get("dt_ns", 0.01),
            record_stride=d.get("record_stride", 10),
            positivity_check=d.get("positivity_check", True))

    def measurement_model(self) -> MeasurementModel | None:
        if self.measurement is None:
            return None
        m = self.measurement
        return MeasurementModel(fidelity=m.get("fidelity", 0.80),
                                background=m.get("background", 0.03),
                                trials=m.get("trials", 4000))

    def n_phases(self) -> int:
        return self.sweep.get("n_phases", 16)


def _parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    path, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare string, e.g. envelope=rectangular
    return path.split("."), value


def _apply_overrides(raw: dict, overrides) -> dict:
    for text in overrides or ():
        path, value = _parse_override(text)
        node = raw
        for key in path[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {text!r} descends through a "
                                  "non-object value")
        node[path[-1]] = value
    return raw


def load_config(path, overrides=(), seed=None, dt=None,
                phases=None) -> RunConfig:
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"{p}: invalid JSON at line {exc.lineno}, column {exc.colno}:"
                f" {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{p}: top level must be a JSON object")
    raw = _apply_overrides(raw, overrides)
    if seed is not None:
        raw.setdefault("sweep", {})["rng_seed"] = seed
    if dt is not None:
        raw.setdefault("integrator", {})["dt_ns"] = dt
    if phases is not None:
        raw.setdefault("sweep", {})["n_phases"] = phases
    try:
        return RunConfig.from_dict(raw)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# output helpers

def _write_trajectory_csv(path, traj, meta: dict) -> None:
    with open(path, "w", newline="") as fh:
        for line in json.dumps(meta, sort_keys=True).split("\n"):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_ns", "p0", "p1", "p2", "p3"])
        pops = traj.populations
        for k in range(len(traj.times)):
            w.writerow([f"{traj.times[k]:.9g}"] +
                       [f"{pops[k, i]:.17g}" for i in range(4)])


def read_trajectory_csv(path) -> Series:
    """Times and P2 from a trajectory CSV (schema: t_ns, p0, p1, p2, p3)."""
    rows = []
    with open(path) as fh:
        rdr = csv.reader(line for line in fh if not line.startswith("#"))
        header = next(rdr, None)
        if header is None or [h.strip() for h in header[:5]] != \
                ["t_ns", "p0", "p1", "p2", "p3"]:
            raise ConfigError(f"{path}: expected columns t_ns,p0,p1,p2,p3")
        for row in rdr:
            if not row:
                continue
            rows.append((float(row[0]), float(row[3])))
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    t = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    return Series(x=t, y=y, param="t0")


def _sidecar(meta: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _context_meta(cfg: RunConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "code_version": __version__,
        "device": asdict(cfg.device_params()),
        "drive": asdict(cfg.drive_params()),
        "decoherence": _finite_dict(asdict(cfg.decoherence_params())),
        "integrator": asdict(cfg.integrator_config()),
        "n_phases": cfg.n_phases(),
    }


def _finite_dict(d: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and np.isinf(v) else v)
            for k, v in d.items()}


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.set, args.seed, args.dt, args.phases)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj = phase_averaged_populations(
        DensityMatrix4.ground(), cfg.device_params(), cfg.drive_params(),
        cfg.decoherence_params(), cfg.integrator_config(), cfg.n_phases())
    meta = _context_meta(cfg)
    _write_trajectory_csv(out_dir / "trajectory.csv", traj, meta)
    _sidecar({**meta, "herm_fixes": traj.herm_fixes},
             out_dir / "trajectory.json")
    print(f"wrote {out_dir / 'trajectory.csv'}")
    return 0


def _reproduce_fig2(out_dir: Path, jobs, seed, n1, n2) -> dict:
    spec = presets.fig2_sweep_spec(n_fp=n1, n_fc=n2, rng_seed=seed)
    result = run_sweep(spec, jobs=jobs)
    to_csv(result, out_dir / "map.csv")
    to_json(result, out_dir / "map.json")
    on = cut(result, "fc", spec.device.f12)
    off = cut(result, "fc", presets.FIG2_OFF_RESONANT_FC)
    for name, s in (("cut_on_resonance", on), ("cut_off_resonance", off)):
        _write_series_csv(out_dir / f"{name}.csv", s)
    contrast, contrast_err = parabolic_contrast(on, off)
    lw = linewidth_fit(off)
    # per-column minima against the bare two-photon Raman line
    fps = result.axis1.values
    fcs = result.axis2.values
    step = fcs[1] - fcs[0]
    offsets = []
    for i, fp in enumerate(fps):
        fc_line = 2.0 * fp - spec.device.f01
        if fcs[0] <= fc_line <= fcs[-1]:
            offsets.append((fc_line - fcs[int(np.argmin(result.p2[i]))])
                           / step)
    offsets = np.array(offsets)
    return {
        "contrast": contrast,
        "contrast_err": contrast_err,
        "off_resonant_fwhm_mhz": lw.fwhm_mhz,
        "off_resonant_center_ghz": lw.center_ghz,
        "max_p3": float(result.p3.max()),
        "trench_columns": int(offsets.size),
        "trench_within_one_step_fraction":
            float(np.mean(np.abs(offsets) <= 1.0)) if offsets.size else None,
        "trench_offset_steps_mean": float(offsets.mean()) if offsets.size
            else None,
        "wall_time_s": result.metadata["wall_time_s"],
    }


def _reproduce_fig3(out_dir: Path, jobs, seed, n1, n2) -> dict:
    spec = presets.fig3_sweep_spec(n_fc=n1, n_t0=n2, rng_seed=seed)
    result = run_sweep(spec, jobs=jobs)
    to_csv(result, out_dir / "map.csv")
    to_json(result, out_dir / "map.json")
    f12 = spec.device.f12
    on = cut(result, "fc", f12)
    off = cut(result, "fc", f12 - presets.TIME_CUT_OFF_DETUNING)
    _write_series_csv(out_dir / "p2_vs_t0_on_resonance.csv", on)
    _write_series_csv(out_dir / "p2_vs_t0_off_resonance.csv", off)
    with np.errstate(divide="ignore", invalid="ignore"):
        sup = 1.0 - np.where(off.y > 0, on.y / np.where(off.y > 0, off.y, 1),
                             0.0)
    valid = off.y > 1e-4
    k = int(np.argmax(np.where(valid, sup, -np.inf)))
    # notch width vs duration (fc-cuts at fixed t0)
    widths = {}
    for t0 in (5.0, 10.0, 15.0, 20.0):
        c = cut(result, "t0", t0)
        try:
            widths[t0] = linewidth_fit(c).fwhm_mhz
        except (RuntimeError, ValueError):
            widths[t0] = None
    return {
        "max_suppression": float(sup[k]),
        "t0_at_max_suppression_ns": float(on.x[k]),
        "suppression_at_20ns": float(sup[int(np.argmin(np.abs(on.x - 20.0)))]),
        "notch_fwhm_mhz_by_t0": widths,
        "max_p3": float(result.p3.max()),
        "wall_time_s": result.metadata["wall_time_s"],
    }


def _reproduce_fig4(out_dir: Path, jobs, seed) -> dict:
    device = presets.fig3_device()
    base_drive = presets.fig3_drive()
    dec = presets.fig3_decoherence()
    summary = {"tphi_01_values_ns": list(presets.TIME_CUT_TPHI_01_VALUES)}
    for tag, fc in (("on", device.f12),
                    ("off", device.f12 - presets.TIME_CUT_OFF_DETUNING)):
        drive = base_drive.with_(fc=fc)
        for tphi in presets.TIME_CUT_TPHI_01_VALUES:
            traj = phase_averaged_populations(
                DensityMatrix4.ground(), device, drive,
                dec.with_(tphi_01=tphi))
            name = f"p2_vs_t0_{tag}_tphi01_{tphi:g}ns"
            _write_series_csv(out_dir / f"{name}.csv",
                              Series(traj.times, traj.population(2),
                                     param="t0", fixed_param="fc",
                                     fixed_value=fc))
            summary[f"final_p2_{tag}_tphi01_{tphi:g}"] = \
                float(traj.population(2)[-1])
    return summary


def _reproduce_fig4_inset(out_dir: Path, jobs, seed) -> dict:
    ctx = SimContext(device=presets.fig3_device(), drive=presets.fig3_drive(),
                     dec=presets.fig3_decoherence())
    curve = sensitivity_curve(ctx, t0=40.0,
                              tphi_01_grid=presets.SENSITIVITY_TPHI_01_GRID)
    _write_series_csv(out_dir / "p2_vs_tphi01.csv", curve)
    off_ctx_drive = ctx.drive.with_(
        fc=ctx.device.f12 - presets.TIME_CUT_OFF_DETUNING, t0=40.0)
    off_traj = phase_averaged_populations(
        DensityMatrix4.ground(), ctx.device, off_ctx_drive, ctx.dec)
    diffs = np.diff(curve.y)
    return {
        "asymptotic_p2": float(curve.y[-1]),
        "monotone_nonincreasing": bool(np.all(diffs <= 1e-6)),
        "off_resonant_p2_at_40ns": float(off_traj.population(2)[-1]),
    }


def _write_series_csv(path, s: Series) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {json.dumps({'fixed_param': s.fixed_param, 'fixed_value': s.fixed_value, 'schema_version': SCHEMA_VERSION, 'code_version': __version__}, sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([s.param or "x", "p2"])
        for xi, yi in zip(s.x, s.y):
            w.writerow([f"{xi:.9g}", f"{yi:.17g}"])


def cmd_reproduce(args) -> int:
    out_dir = Path(args.out) / args.figure
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    cfg = load_config(None, args.set)  # grid-size overrides only
    ax1 = cfg.sweep.get("axis1") or {}
    ax2 = cfg.sweep.get("axis2") or {}
    t_start = time.perf_counter()
    if args.figure == "fig2":
        summary = _reproduce_fig2(out_dir, args.jobs, seed,
                                  ax1.get("n_points", 61),
                                  ax2.get("n_points", 61))
    elif args.figure == "fig3":
        summary = _reproduce_fig3(out_dir, args.jobs, seed,
                                  ax1.get("n_points", 61),
                                  ax2.get("n_points", 81))
    elif args.figure == "fig4":
        summary = _reproduce_fig4(out_dir, args.jobs, seed)
    else:
        summary = _reproduce_fig4_inset(out_dir, args.jobs, seed)
    summary["figure"] = args.figure
    summary["seed"] = seed
    summary["schema_version"] = SCHEMA_VERSION
    summary["code_version"] = __version__
    summary.pop("wall_time_s", None)  # volatile; report on stderr instead
    _sidecar(summary, out_dir / "summary.json")
    print(f"{args.figure}: wrote {out_dir}", file=sys.stderr)
    print(f"elapsed {time.perf_counter() - t_start:.1f} s", file=sys.stderr)
    return 0


def cmd_fit(args) -> int:
    observed = read_trajectory_csv(args.observed)
    if args.free:
        free = tuple(f for part in args.free for f in part.split(","))
    else:
        raise ConfigError("no free parameters: pass --free tphi_01[,...]")
    cfg = load_config(args.config, args.set, args.seed, args.dt, args.phases)
    if args.config is None and not args.set:
        ctx = SimContext(device=presets.fig3_device(),
                         drive=presets.fig3_drive(),
                         dec=presets.fig3_decoherence(),
                         n_phases=cfg.n_phases())
    else:
        ctx = SimContext(device=cfg.device_params(),
                         drive=cfg.drive_params(),
                         dec=cfg.decoherence_params(),
                         cfg=cfg.integrator_config(),
                         n_phases=cfg.n_phases())
    report = fit_dephasing(observed, ctx, free=free)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.to_json(out_dir / "fit_report.json")
    print(report.to_json())
    return 0 if report.converged else 4


# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="dotted-path config override (repeatable)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=None,
                   help="sweep worker threads (default: all cores)")
    p.add_argument("--seed", type=int, default=None, help="shot-noise seed")
    p.add_argument("--dt", type=float, default=None, help="RK4 step (ns)")
    p.add_argument("--phases", type=int, default=None,
                   help="number of averaged drive phases")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cptsim",
        description="Two-tone driven four-level artificial atom: "
                    "population-trapping simulator and analysis toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="phase-averaged trajectory -> CSV")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reproduce",
                       help="run a bundled dataset pipeline")
    p.add_argument("figure", choices=list(presets.FIGURES))
    _add_common(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("fit", help="fit dephasing times to observed P2(t)")
    p.add_argument("observed", help="trajectory CSV (t_ns,p0,p1,p2,p3)")
    p.add_argument("--free", action="append", metavar="NAME[,NAME...]",
                   help="free dephasing times (tphi_01, tphi_02, tphi_12)")
    _add_common(p)
    p.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PositivityError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
