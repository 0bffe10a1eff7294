"""Derived quantities: contrast, linewidths, dephasing-time fits, measurement model.

The dephasing fit minimizes the summed squared residual between an observed
P2 time series and the phase-averaged simulation.  The objective is a
simulation output with no cheap gradient, so the search is derivative-free:
a coarse log-spaced grid seeds a Nelder-Mead simplex over log10 of the free
times.  The grid seeding keeps the simplex out of the flat large-time
region, where the excited population stops responding to the 0-1 dephasing
time and the fit is not meaningful; that flatness is reported rather than
hidden.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit, minimize

from .evolution import IntegratorConfig, phase_averaged_populations
from .model import (DecoherenceParams, DensityMatrix4, DeviceParams,
                    DriveParams, MeasurementModel)
from .sweep import SCHEMA_VERSION, Series

_FREE_PARAMS = ("tphi_01", "tphi_02", "tphi_12")


# ---------------------------------------------------------------------------
# contrast and linewidth extraction

def _parabola_vertex(x: np.ndarray, y: np.ndarray):
    """LSQ parabola through (x, y); returns (vertex_y, var_vertex_y, vertex_x)."""
    coeffs, cov = np.polyfit(x, y, 2, cov=True)
    a, b, c = coeffs
    xv = -b / (2.0 * a)
    yv = c - b * b / (4.0 * a)
    # gradient of yv w.r.t. (a, b, c)
    g = np.array([b * b / (4.0 * a * a), -b / (2.0 * a), 1.0])
    var = float(g @ cov @ g)
    return float(yv), max(var, 0.0), float(xv)


def _local_minima(y: np.ndarray) -> list[int]:
    return [i for i in range(1, len(y) - 1)
            if y[i] <= y[i - 1] and y[i] <= y[i + 1]
            and (y[i] < y[i - 1] or y[i] < y[i + 1])]


def _window(center: int, half: int, n: int, what: str) -> slice:
    if center - half < 0 or center + half >= n:
        raise ValueError(f"{what} extremum at index {center} is within "
                         f"{half} points of the series edge; widen the scan")
    return slice(center - half, center + half + 1)


def parabolic_contrast(on_cut: Series, off_cut: Series,
                       window: int = 5) -> tuple[float, float]:
    """Suppression contrast 1 - dip_vertex / peak_vertex with uncertainty.

    The peak vertex comes from a parabola through ``window`` points centered
    on the off-resonant cut's maximum.  The dip vertex uses the on-resonant
    cut's local minimum nearest (in coordinate) to the peak; if the cut has
    no interior local minimum the point nearest the peak position is used,
    which makes identical cuts return exactly zero contrast.
    """
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be an odd number >= 3")
    if len(on_cut.y) < window or len(off_cut.y) < window:
        raise ValueError(f"need at least {window} points per cut")
    half = window // 2

    i_off = int(np.argmax(off_cut.y))
    w = _window(i_off, half, len(off_cut.y), "off-cut")
    v_off, var_off, x_off = _parabola_vertex(off_cut.x[w], off_cut.y[w])

    minima = _local_minima(on_cut.y)
    if minima:
        i_on = min(minima, key=lambda i: abs(on_cut.x[i] - x_off))
    else:
        i_on = int(np.argmin(np.abs(on_cut.x - x_off)))
    w = _window(i_on, half, len(on_cut.y), "on-cut")
    v_on, var_on, _ = _parabola_vertex(on_cut.x[w], on_cut.y[w])

    if v_off == 0.0:
        raise ValueError("off-resonant peak vertex is zero")
    ratio = v_on / v_off
    var = ratio ** 2 * (var_on / v_on ** 2 + var_off / v_off ** 2) \
        if v_on != 0.0 else var_on / v_off ** 2
    return 1.0 - ratio, float(np.sqrt(max(var, 0.0)))


@dataclass(frozen=True)
class LorentzianFit:
    fwhm_mhz: float
    center_ghz: float
    amplitude: float
    offset: float
    fwhm_err_mhz: float


def _lorentzian(x, offset, amp, center, fwhm):
    hw2 = (0.5 * fwhm) ** 2
    return offset + amp * hw2 / ((x - center) ** 2 + hw2)


def linewidth_fit(cut: Series, max_iterations: int = 20000) -> LorentzianFit:
    """Least-squares Lorentzian through a single peak (or dip) cut.

    Coordinates are GHz; the returned width is in MHz.  Dips are handled by
    a negative fitted amplitude.
    """
    x, y = cut.x, cut.y
    if len(x) < 5:
        raise ValueError("need at least 5 points for a lineshape fit")
    edge = np.median(np.concatenate([y[:3], y[-3:]]))
    i0 = int(np.argmax(np.abs(y - edge)))
    a0 = y[i0] - edge
    if a0 == 0.0:
        raise ValueError("cut has no peak above its edges")
    # crude half-max width estimate
    above = np.abs(y - edge) > 0.5 * abs(a0)
    w0 = max((x[1] - x[0]) * max(above.sum(), 2), 1e-4)
    try:
        popt, pcov = curve_fit(_lorentzian, x, y,
                               p0=[edge, a0, x[i0], w0],
                               maxfev=max_iterations)
    except RuntimeError as exc:
        raise RuntimeError(
            f"Lorentzian fit did not converge within {max_iterations} "
            f"evaluations (start: offset={edge:.4g}, amp={a0:.4g}, "
            f"center={x[i0]:.6g}, fwhm={w0:.4g})") from exc
    offset, amp, center, fwhm = popt
    err = float(np.sqrt(max(pcov[3, 3], 0.0)))
    return LorentzianFit(fwhm_mhz=abs(fwhm) * 1e3, center_ghz=float(center),
                         amplitude=float(amp), offset=float(offset),
                         fwhm_err_mhz=err * 1e3)


def at_only_contrast(gamma_01: float, gamma_02: float,
                     omega_c: float) -> float:
    """Suppression explainable by line splitting alone, without interference.

    1 - 2 g02 (g02 + g01) / ((g02 + g01)^2 + omega_c^2), all three rates in
    one common frequency convention.  Values at or below zero mean the
    splitting alone suppresses nothing.
    """
    if gamma_01 < 0.0 or gamma_02 < 0.0 or omega_c < 0.0:
        raise ValueError("rates must be nonnegative")
    s = gamma_01 + gamma_02
    denom = s * s + omega_c * omega_c
    if denom == 0.0:
        raise ValueError("all rates zero: contrast undefined")
    return 1.0 - 2.0 * gamma_02 * s / denom


# ---------------------------------------------------------------------------
# measurement model

def apply_measurement(p2_true: float, m: MeasurementModel,
                      rng: np.random.Generator | None = None) -> float:
    """Forward model: click probability fidelity*p2 + background.

    With ``rng`` given, draws Binomial(trials, p_click)/trials; without,
    returns the noise-free expectation.
    """
    if not 0.0 <= p2_true <= 1.0:
        raise ValueError(f"p2_true must be in [0, 1], got {p2_true}")
    p_click = m.fidelity * p2_true + m.background
    if not 0.0 <= p_click <= 1.0:
        raise ValueError(f"click probability {p_click} outside [0, 1]")
    if rng is None:
        return p_click
    return float(rng.binomial(m.trials, p_click) / m.trials)


def invert_measurement(observed: float, m: MeasurementModel) -> float:
    """Invert the forward map, clamped to [0, 1]."""
    return float(np.clip((observed - m.background) / m.fidelity, 0.0, 1.0))


# ---------------------------------------------------------------------------
# dephasing-time fitting

@dataclass(frozen=True)
class SimContext:
    """Everything the simulation needs apart from the quantity being varied."""

    device: DeviceParams
    drive: DriveParams
    dec: DecoherenceParams
    cfg: IntegratorConfig = field(default_factory=IntegratorConfig)
    n_phases: int = 16


@dataclass
class FitReport:
    param_names: tuple[str, ...]
    values_ns: tuple[float, ...]
    uncertainties_ns: tuple[float, ...]
    rss: float
    iterations: int
    converged: bool
    n_observations: int
    rejected_candidates: int = 0

    @property
    def poorly_constrained(self) -> bool:
        """True when the residual is too flat to pin down some parameter."""
        return any(not np.isfinite(u) or u > 0.5 * abs(v)
                   for u, v in zip(self.uncertainties_ns, self.values_ns))

    def to_json(self, path=None) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "kind": "fit_report",
            "parameters": {n: {"value_ns": v, "uncertainty_ns":
                               (u if np.isfinite(u) else None)}
                           for n, v, u in zip(self.param_names,
                                              self.values_ns,
                                              self.uncertainties_ns)},
            "rss": self.rss,
            "iterations": self.iterations,
            "converged": self.converged,
            "poorly_constrained": self.poorly_constrained,
            "n_observations": self.n_observations,
            "rejected_candidates": self.rejected_candidates,
        }
        text = json.dumps(doc, indent=1, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _simulated_p2(context: SimContext, t_obs: np.ndarray,
                  overrides: dict) -> np.ndarray:
    dec = context.dec.with_(**overrides)
    drive = context.drive.with_(t0=float(t_obs[-1]))
    cfg = IntegratorConfig(dt=context.cfg.dt, record_stride=1,
                           positivity_check=context.cfg.positivity_check)
    traj = phase_averaged_populations(DensityMatrix4.ground(), context.device,
                                      drive, dec, cfg, context.n_phases)
    return np.interp(t_obs, traj.times, traj.population(2))


def fit_dephasing(observed: Series, context: SimContext,
                  free: tuple[str, ...] = ("tphi_01",),
                  grid_points: int = 7,
                  grid_range_ns: tuple[float, float] = (1.0, 200.0),
                  xatol_log10: float = 0.004,
                  max_simplex_iter: int = 120) -> FitReport:
    """Fit a subset of the pair dephasing times to an observed P2 series.

    ``observed`` holds times (ns) in x and P2 in y, at least 10 points.
    Candidate evaluations that crash the simulator (non-positive evolution)
    are discarded with a count; if every grid candidate is rejected the fit
    raises.
    """
    free = tuple(free)
    if not free:
        raise ValueError("free parameter set must be nonempty")
    for name in free:
        if name not in _FREE_PARAMS:
            raise ValueError(f"unknown free parameter {name!r}; "
                             f"choose from {_FREE_PARAMS}")
    if len(observed.x) < 10:
        raise ValueError("need at least 10 observed time points")
    t_obs = np.asarray(observed.x, dtype=float)
    y_obs = np.asarray(observed.y, dtype=float)
    if np.any(np.diff(t_obs) <= 0.0):
        raise ValueError("observed times must be strictly increasing")

    rejected = 0
    evals = 0

    def rss_of(log10_values) -> float:
        nonlocal rejected, evals
        overrides = {n: 10.0 ** lv for n, lv in zip(free, log10_values)}
        try:
            model = _simulated_p2(context, t_obs, overrides)
        except Exception:
            rejected += 1
            return np.inf
        evals += 1
        r = model - y_obs
        return float(r @ r)

    # coarse log-spaced grid seed
    grid = np.log10(np.geomspace(grid_range_ns[0], grid_range_ns[1],
                                 grid_points))
    best = None
    mesh = np.meshgrid(*([grid] * len(free)), indexing="ij")
    for flat in zip(*(m.reshape(-1) for m in mesh)):
        v = rss_of(flat)
        if best is None or v < best[1]:
            best = (np.array(flat), v)
    if best is None or not np.isfinite(best[1]):
        raise RuntimeError(f"all {grid_points ** len(free)} grid candidates "
                           "were rejected by the simulator")

    res = minimize(rss_of, best[0], method="Nelder-Mead",
                   options={"xatol": xatol_log10, "fatol": 1e-12,
                            "maxiter": max_simplex_iter, "adaptive": True})
    x_fit = res.x if res.fun <= best[1] else best[0]
    rss = float(min(res.fun, best[1]))
    values = tuple(10.0 ** v for v in x_fit)

    # per-parameter uncertainty from the local curvature of the residual
    dof = max(len(t_obs) - len(free), 1)
    sigma2 = rss / dof
    uncertainties = []
    h = 0.05
    for k in range(len(free)):
        xp = x_fit.copy(); xp[k] += h
        xm = x_fit.copy(); xm[k] -= h
        curv = (rss_of(xp) - 2.0 * rss + rss_of(xm)) / h ** 2
        if curv > 0.0 and np.isfinite(curv):
            sig_log = np.sqrt(2.0 * sigma2 / curv)
            uncertainties.append(values[k] * np.log(10.0) * sig_log)
        else:
            uncertainties.append(float("inf"))

    return FitReport(param_names=free, values_ns=values,
                     uncertainties_ns=tuple(uncertainties), rss=rss,
                     iterations=int(res.nit) + evals,
                     converged=bool(res.success) or res.fun <= best[1],
                     n_observations=len(t_obs),
                     rejected_candidates=rejected)


def sensitivity_curve(context: SimContext, t0: float,
                      tphi_01_grid) -> Series:
    """Final P2 at duration t0 for each 0-1 dephasing time in the grid.

    A pure function of its inputs: duplicate grid entries give duplicate
    outputs.  On the trapping resonance the curve decreases with the
    dephasing time and flattens once the time exceeds the measurable range.
    """
    grid = np.asarray(list(tphi_01_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("tphi_01 grid must be nonempty")
    drive = context.drive.with_(t0=t0)
    out = np.empty(grid.size)
    for k, tphi in enumerate(grid):
        dec = context.dec.with_(tphi_01=float(tphi))
        traj = phase_averaged_populations(DensityMatrix4.ground(),
                                          context.device, drive, dec,
                                          context.cfg, context.n_phases)
        out[k] = traj.population(2)[-1]
    return Series(x=grid, y=out, param="tphi_01",
                  fixed_param="t0", fixed_value=t0)
