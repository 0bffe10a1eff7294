"""Built-in parameter sets for the bundled reproduction pipelines.

Two device operating points are covered:

* ``fig2`` -- the frequency-frequency trapping map: both tone frequencies
  swept around the two-photon and 1<->2 resonances at a fixed 30 ns pulse.
* ``fig3`` / ``fig4`` / ``fig4-inset`` -- the time-dynamics data set:
  probe frequency held fixed, coupling frequency and pulse duration swept,
  plus fixed-frequency time cuts and the dephasing-sensitivity curve.

For the time-dynamics set the probe was parked at 6.0158 GHz and the
trapping dip is expected exactly at fc = f12.  Drive-induced level shifts
at these powers move the two-photon Raman condition by about -11 MHz
relative to the bare condition 2 fp - fc = f01, so f01 here is the
effective value calibrated (once, against this model) to center the dip at
fc = f12 for that probe frequency; the spectroscopic value would be 6.19.
"""

from __future__ import annotations

from .evolution import IntegratorConfig
from .model import DecoherenceParams, DeviceParams, DriveParams, rabi_mhz
from .sweep import SweepAxis, SweepSpec

FIGURES = ("fig2", "fig3", "fig4", "fig4-inset")

#: effective f01 for the time-dynamics preset (see module docstring)
TIME_DYNAMICS_F01 = 6.1710

#: dephasing times (ns) used by the fixed-duration time cuts
TIME_CUT_TPHI_01_VALUES = (6.0, 12.0, 25.0)

#: coupling-tone grid for the sensitivity curve (ns); inf probes the floor
SENSITIVITY_TPHI_01_GRID = (2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 18.0, 27.0,
                            40.0, 60.0, 100.0, 200.0, float("inf"))

#: off-resonant reference for the time cuts: f12 - fc = 80 MHz
TIME_CUT_OFF_DETUNING = 0.08


def fig2_device() -> DeviceParams:
    return DeviceParams(f01=6.205, f12=5.865)


def fig2_drive() -> DriveParams:
    dev = fig2_device()
    return DriveParams(fp=dev.f02() / 2.0, fc=dev.f12,
                       omega_p01=rabi_mhz(48.0), omega_c12=rabi_mhz(32.0),
                       t0=30.0)


def fig2_decoherence() -> DecoherenceParams:
    return DecoherenceParams(t1_10=108.0, t1_21=77.0,
                             tphi_01=30.0, tphi_02=6.0, tphi_12=30.0)


def fig2_sweep_spec(n_fp: int = 61, n_fc: int = 61,
                    cfg: IntegratorConfig = IntegratorConfig(),
                    rng_seed: int = 0) -> SweepSpec:
    return SweepSpec(device=fig2_device(), drive=fig2_drive(),
                     dec=fig2_decoherence(),
                     axis1=SweepAxis("fp", 5.99, 6.08, n_fp),
                     axis2=SweepAxis("fc", 5.72, 6.00, n_fc),
                     cfg=cfg, rng_seed=rng_seed)

#: coupling frequency of the off-resonant reference cut in the fig2 map
FIG2_OFF_RESONANT_FC = 5.73


def fig3_device() -> DeviceParams:
    return DeviceParams(f01=TIME_DYNAMICS_F01, f12=5.85)


def fig3_drive() -> DriveParams:
    return DriveParams(fp=6.0158, fc=5.85,
                       omega_p01=rabi_mhz(48.0), omega_c12=rabi_mhz(35.0),
                       t0=80.0)


def fig3_decoherence() -> DecoherenceParams:
    return DecoherenceParams(t1_10=108.0, t1_21=77.0,
                             tphi_01=12.0, tphi_02=20.0, tphi_12=20.0)


def fig3_sweep_spec(n_fc: int = 61, n_t0: int = 81,
                    cfg: IntegratorConfig = IntegratorConfig(),
                    rng_seed: int = 0) -> SweepSpec:
    return SweepSpec(device=fig3_device(), drive=fig3_drive(),
                     dec=fig3_decoherence(),
                     axis1=SweepAxis("fc", 5.75, 5.95, n_fc),
                     axis2=SweepAxis("t0", 0.0, 80.0, n_t0),
                     cfg=cfg, rng_seed=rng_seed)
