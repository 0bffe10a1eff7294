"""Parameter sweeps of the phase-averaged final populations.

Grid points are pure functions of (parameters, seed, flat index), so they
can be evaluated on any number of worker threads and reassembled into a
bit-identical result.  Shot noise, when enabled, draws from a generator
seeded by (rng_seed, flat index), never from shared state.

When one axis is the pulse duration and the envelope is rectangular, a
whole duration column is read out of a single propagation (the state at an
intermediate time of a long rectangular pulse is exactly the final state
of the shorter pulse, step for step), which cuts the sweep cost by the
length of that axis.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import __version__ as _code_version
from .evolution import (IntegratorConfig, Trajectory, _as_matrix,
                        _check_positivity, _run_phases, record_times,
                        step_plan)
from .model import (TWO_PI, DecoherenceParams, DensityMatrix4, DeviceParams,
                    DriveParams, MeasurementModel)

SCHEMA_VERSION = 1

_AXIS_PARAMS = ("fp", "fc", "t0")


@dataclass(frozen=True)
class SweepAxis:
    param: str
    start: float
    stop: float
    n_points: int

    def __post_init__(self):
        if self.param not in _AXIS_PARAMS:
            raise ValueError(f"axis parameter must be one of {_AXIS_PARAMS}")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if not self.start < self.stop:
            raise ValueError("require start < stop")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)


@dataclass(frozen=True)
class SweepSpec:
    device: DeviceParams
    drive: DriveParams
    dec: DecoherenceParams
    axis1: SweepAxis
    axis2: SweepAxis | None = None
    cfg: IntegratorConfig = field(default_factory=IntegratorConfig)
    n_phases: int = 16
    measurement: MeasurementModel | None = None
    shot_noise: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        if self.axis2 is not None and self.axis2.param == self.axis1.param:
            raise ValueError("axis parameters must be distinct")
        if self.shot_noise and self.measurement is None:
            raise ValueError("shot_noise requires a measurement model")


@dataclass(frozen=True)
class Series:
    """A 1-D cut: coordinates, values, and which axis was held fixed."""

    x: np.ndarray
    y: np.ndarray
    param: str = ""            # the coordinate parameter
    fixed_param: str = ""
    fixed_value: float = float("nan")

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError("x and y must be 1-D and the same length")


@dataclass(frozen=True)
class SweepResult:
    axis1: SweepAxis
    axis2: SweepAxis | None
    p2: np.ndarray                 # (n1,) or (n1, n2)
    p1: np.ndarray | None
    p3: np.ndarray | None
    metadata: dict

    def cut(self, axis: str, value: float) -> Series:
        return cut(self, axis, value)


def _jsonable(value):
    if isinstance(value, float) and np.isinf(value):
        return "inf"
    return value


def _pack_params(spec: SweepSpec) -> dict:
    d = {
        "device": asdict(spec.device),
        "drive": asdict(spec.drive),
        "decoherence": {k: _jsonable(v)
                        for k, v in asdict(spec.dec).items()},
        "integrator": asdict(spec.cfg),
        "n_phases": spec.n_phases,
        "shot_noise": spec.shot_noise,
        "rng_seed": spec.rng_seed,
        "measurement": asdict(spec.measurement) if spec.measurement else None,
    }
    d["device"].pop("n_levels", None)
    return d


def _point_drive(spec: SweepSpec, values: dict) -> DriveParams:
    return spec.drive.with_(**values)


def _observe(p2: float, spec: SweepSpec, flat_index: int) -> float:
    """Apply the measurement map + binomial shot noise, inverted back."""
    if not (spec.shot_noise and spec.measurement is not None):
        return p2
    m = spec.measurement
    p_click = m.fidelity * p2 + m.background
    rng = np.random.default_rng((spec.rng_seed, flat_index))
    frac = rng.binomial(m.trials, p_click) / m.trials
    return float(np.clip((frac - m.background) / m.fidelity, 0.0, 1.0))


def _final_populations(spec: SweepSpec, drive: DriveParams) -> np.ndarray:
    rho0 = DensityMatrix4.ground().matrix
    _, _, n_steps = step_plan(drive.t0, spec.cfg.dt)
    rec_idx = np.array([n_steps], dtype=np.int64)
    states, _ = _run_phases(rho0, spec.device, drive, spec.dec, spec.cfg,
                            TWO_PI * np.arange(spec.n_phases) / spec.n_phases,
                            rec_idx)
    if spec.cfg.positivity_check:
        times = record_times(drive.t0, spec.cfg.dt, rec_idx)
        for p in range(states.shape[0]):
            _check_positivity(states[p], times)
    mean = states[0]  # reduce across phases in a fixed order
    for p in range(1, states.shape[0]):
        mean = mean + states[p]
    mean = mean / states.shape[0]
    return np.real(np.diag(mean[0]))


def _duration_column(spec: SweepSpec, drive: DriveParams,
                     t0_values: np.ndarray) -> np.ndarray:
    """Populations at each duration from one propagation to max(t0)."""
    rho0 = DensityMatrix4.ground().matrix
    dt = spec.cfg.dt
    rec_idx = np.array([step_plan(t, dt)[2] for t in t0_values], np.int64)
    order = np.argsort(rec_idx, kind="stable")
    run_drive = drive.with_(t0=float(t0_values[order[-1]]))
    states, _ = _run_phases(rho0, spec.device, run_drive, spec.dec, spec.cfg,
                            TWO_PI * np.arange(spec.n_phases) / spec.n_phases,
                            rec_idx[order])
    if spec.cfg.positivity_check:
        times = record_times(run_drive.t0, dt, rec_idx[order])
        for p in range(states.shape[0]):
            _check_positivity(states[p], times)
    mean = states[0]
    for p in range(1, states.shape[0]):
        mean = mean + states[p]
    mean = mean / states.shape[0]
    pops = np.real(np.diagonal(mean, axis1=1, axis2=2))
    out = np.empty_like(pops)
    out[order] = pops
    return out


def _t0_fast_path(spec: SweepSpec) -> bool:
    if spec.drive.envelope != "rectangular":
        return False
    for ax in (spec.axis1, spec.axis2):
        if ax is not None and ax.param == "t0":
            steps = ax.values / spec.cfg.dt
            if not np.allclose(steps, np.round(steps), atol=1e-9):
                return False
            return True
    return False


def run_sweep(spec: SweepSpec, jobs: int | None = None) -> SweepResult:
    """Evaluate phase-averaged final populations over the grid.

    Identical specs (including the seed) produce bit-identical results for
    any ``jobs``; propagation errors are re-raised annotated with the grid
    coordinates of the offending point.
    """
    t_start = time.perf_counter()
    if jobs is None:
        jobs = os.cpu_count() or 1
    v1 = spec.axis1.values
    v2 = spec.axis2.values if spec.axis2 is not None else None
    shape = (len(v1),) if v2 is None else (len(v1), len(v2))
    pops = np.empty(shape + (4,))

    def point_task(i, j):
        values = {spec.axis1.param: float(v1[i])}
        if v2 is not None:
            values[spec.axis2.param] = float(v2[j])
        drive = _point_drive(spec, values)
        try:
            return _final_populations(spec, drive)
        except Exception as exc:
            raise type(exc)(f"{exc} [at {values}]") from exc

    use_t0_column = _t0_fast_path(spec) and v2 is not None

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        if use_t0_column:
            t0_axis_is_2 = spec.axis2.param == "t0"
            outer_vals = v1 if t0_axis_is_2 else v2
            t0_vals = v2 if t0_axis_is_2 else v1
            outer_param = (spec.axis1 if t0_axis_is_2 else spec.axis2).param

            def column_task(k):
                drive = _point_drive(spec, {outer_param: float(outer_vals[k])})
                try:
                    return _duration_column(spec, drive, t0_vals)
                except Exception as exc:
                    raise type(exc)(
                        f"{exc} [at {{{outer_param!r}: {outer_vals[k]}}}]"
                    ) from exc

            cols = list(pool.map(column_task, range(len(outer_vals))))
            for k, col in enumerate(cols):
                if t0_axis_is_2:
                    pops[k, :, :] = col
                else:
                    pops[:, k, :] = col
        elif v2 is None:
            for i, res in enumerate(pool.map(lambda i: point_task(i, 0),
                                             range(len(v1)))):
                pops[i] = res
        else:
            idx = [(i, j) for i in range(len(v1)) for j in range(len(v2))]
            for (i, j), res in zip(idx, pool.map(
                    lambda ij: point_task(*ij), idx)):
                pops[i, j] = res

    p2 = pops[..., 2].copy()
    if spec.shot_noise and spec.measurement is not None:
        flat = p2.reshape(-1)
        for k in range(flat.size):
            flat[k] = _observe(flat[k], spec, k)
        p2 = flat.reshape(p2.shape)

    meta = {
        "schema_version": SCHEMA_VERSION,
        "code_version": _code_version,
        "parameters": _pack_params(spec),
        "axis1": asdict(spec.axis1),
        "axis2": asdict(spec.axis2) if spec.axis2 else None,
        "wall_time_s": round(time.perf_counter() - t_start, 3),
    }
    return SweepResult(axis1=spec.axis1, axis2=spec.axis2, p2=p2,
                       p1=pops[..., 1].copy(), p3=pops[..., 3].copy(),
                       metadata=meta)


def cut(result: SweepResult, axis: str, value: float) -> Series:
    """Extract the 1-D series along the other axis at the nearest grid line.

    No interpolation: every returned value is a simulated grid value, and
    the realized axis value is echoed on the series.
    """
    if result.axis2 is None:
        raise ValueError("cut requires a 2-D sweep result")
    axes = {result.axis1.param: 0, result.axis2.param: 1}
    if axis not in axes:
        raise ValueError(f"no axis {axis!r} in this result")
    ax = result.axis1 if axes[axis] == 0 else result.axis2
    vals = ax.values
    if not (vals[0] - 1e-12 <= value <= vals[-1] + 1e-12):
        raise ValueError(f"{axis}={value} outside swept range "
                         f"[{vals[0]}, {vals[-1]}]")
    k = int(np.argmin(np.abs(vals - value)))
    other = result.axis2 if axes[axis] == 0 else result.axis1
    y = result.p2[k, :] if axes[axis] == 0 else result.p2[:, k]
    return Series(x=other.values, y=y, param=other.param,
                  fixed_param=axis, fixed_value=float(vals[k]))


# ---------------------------------------------------------------------------
# serialization

def _meta_lines(result: SweepResult, volatile: bool) -> list[str]:
    meta = dict(result.metadata)
    if not volatile:
        meta.pop("wall_time_s", None)
    return [f"# {line}" for line in
            json.dumps(meta, indent=None, sort_keys=True).split("\n")]


def to_csv(result: SweepResult, path, include_volatile: bool = False) -> None:
    """Comma-separated values with '#'-prefixed JSON metadata header lines.

    Wall time is volatile (it differs between reruns of the same seed) and
    is left out unless explicitly requested, so equal sweeps serialize to
    equal bytes.
    """
    buf = io.StringIO()
    for line in _meta_lines(result, include_volatile):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    has2 = result.axis2 is not None
    header = [result.axis1.param] + ([result.axis2.param] if has2 else [])
    header += ["p2", "p1", "p3"]
    w.writerow(header)
    v1 = result.axis1.values
    if has2:
        v2 = result.axis2.values
        for i in range(len(v1)):
            for j in range(len(v2)):
                w.writerow([f"{v1[i]:.9g}", f"{v2[j]:.9g}",
                            f"{result.p2[i, j]:.17g}",
                            f"{result.p1[i, j]:.17g}",
                            f"{result.p3[i, j]:.17g}"])
    else:
        for i in range(len(v1)):
            w.writerow([f"{v1[i]:.9g}", f"{result.p2[i]:.17g}",
                        f"{result.p1[i]:.17g}", f"{result.p3[i]:.17g}"])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def to_json(result: SweepResult, path=None,
            include_volatile: bool = False) -> str:
    meta = dict(result.metadata)
    if not include_volatile:
        meta.pop("wall_time_s", None)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "metadata": meta,
        "axis1": {"param": result.axis1.param,
                  "values": result.axis1.values.tolist()},
        "axis2": (None if result.axis2 is None else
                  {"param": result.axis2.param,
                   "values": result.axis2.values.tolist()}),
        "p2": result.p2.tolist(),
        "p1": None if result.p1 is None else result.p1.tolist(),
        "p3": None if result.p3 is None else result.p3.tolist(),
    }
    text = json.dumps(doc, indent=1, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
