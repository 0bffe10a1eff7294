"""Rotating-frame Hamiltonian of the two-tone-driven four-level ladder.

Frame choice: level n rotates at (0, w_p, w_p + w_c, 2 w_p + w_c).  This
makes the two couplings that establish the trapping resonance static --
probe on 0<->1 and coupling tone on 1<->2 -- and leaves all retained time
dependence at the single tone-difference (beat) frequency |w_p - w_c|.
Terms oscillating near the sum frequencies (~12 GHz) are dropped by the
rotating-wave cutoff; the beat (~0.2 GHz) is kept.

Diagonal entries are frame-minus-level detunings
(0, w_p - w01, w_p + w_c - w01 - w12, 2 w_p + w_c - w01 - w12 - w23).
Off-diagonal couplings carry the 1:sqrt(2):sqrt(3) dipole ratios.  The
coupling tone's terms carry the tone's phase relative to the probe; probe
terms are the phase reference and carry none.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import TWO_PI, DeviceParams, DriveParams, ghz_to_rad_per_ns

DIPOLE_RATIOS = (1.0, np.sqrt(2.0), np.sqrt(3.0))

#: drop terms oscillating faster than this (rad/ns); 2 GHz by default
DEFAULT_RWA_CUTOFF = TWO_PI * 2.0


@dataclass(frozen=True)
class BeatTerm:
    """One retained oscillating coupling: amp * e^{i(beta t + phi0 + s*phase)} |row><col| + h.c.

    ``phase_sign`` s is +/-1 for terms originating from the coupling tone
    (sign distinguishing co- from counter-rotating) and 0 for probe terms,
    which serve as the phase reference.
    """

    row: int
    col: int
    amplitude: complex
    beat: float
    phi0: float = 0.0
    phase_sign: float = 0.0


def _envelope_value(kind: str, ramp_ns: float, t0: float, t: float) -> float:
    if kind == "rectangular":
        return 1.0
    # linear ramp up, flat top, linear ramp down (trapezoid)
    e = min(t / ramp_ns, (t0 - t) / ramp_ns, 1.0)
    return max(e, 0.0)


@dataclass(frozen=True)
class RotatingFrameHamiltonian:
    """Static part plus beat terms, with the drive envelope baked in."""

    static_part: np.ndarray          # 4x4 complex Hermitian, rad/ns
    beat_terms: tuple[BeatTerm, ...]
    envelope: str = "rectangular"
    ramp_ns: float = 0.0
    t0: float = 0.0
    rel_phase: float = 0.0           # default phase used when none is passed
    _diag: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_diag", np.diag(self.static_part).real.copy())

    def envelope_at(self, t: float) -> float:
        return _envelope_value(self.envelope, self.ramp_ns, self.t0, t)


def build_hamiltonian(device: DeviceParams, drive: DriveParams,
                      rwa_cutoff: float = DEFAULT_RWA_CUTOFF,
                      dipole_ratios: tuple[float, float, float] = DIPOLE_RATIOS,
                      ) -> RotatingFrameHamiltonian:
    """Assemble the rotating-frame Hamiltonian for the given device and drive.

    Every (tone, transition) pairing is generated with its frame beat
    frequency; pairings faster than ``rwa_cutoff`` are discarded.  Static
    phase-free terms are folded into ``static_part``; everything else
    (including the coupling tone's static 1<->2 term, which carries the
    relative phase) becomes a :class:`BeatTerm`.

    ``dipole_ratios`` can be overridden to isolate subsystems in tests,
    e.g. ``(1, 0, 0)`` restricts the drive to the 0<->1 transition.
    """
    wp = ghz_to_rad_per_ns(drive.fp)
    wc = ghz_to_rad_per_ns(drive.fc)
    w01 = ghz_to_rad_per_ns(device.f01)
    w12 = ghz_to_rad_per_ns(device.f12)
    w23 = ghz_to_rad_per_ns(device.f23)

    static = np.zeros((4, 4), dtype=np.complex128)
    static[1, 1] = wp - w01
    static[2, 2] = wp + wc - w01 - w12
    static[3, 3] = 2.0 * wp + wc - w01 - w12 - w23

    # field amplitude seen by the 0<->1 transition, per tone
    eps = {"p": drive.omega_p01,
           "c": drive.omega_c12 / DIPOLE_RATIOS[1]}
    tone_freq = {"p": wp, "c": wc}
    frame_gap = (wp, wc, wp)  # frame rotation rate of each n -> n+1 gap

    terms: list[BeatTerm] = []
    for n in range(3):
        for tone in ("p", "c"):
            amp = 0.5 * dipole_ratios[n] * eps[tone]
            if amp == 0.0:
                continue
            for sign in (+1.0, -1.0):
                # sign +1: co-rotating with the tone; -1: counter-rotating
                beta = sign * tone_freq[tone] - frame_gap[n]
                if abs(beta) > rwa_cutoff:
                    continue
                s = sign if tone == "c" else 0.0
                if beta == 0.0 and s == 0.0:
                    static[n + 1, n] += amp
                    static[n, n + 1] += amp
                else:
                    terms.append(BeatTerm(row=n + 1, col=n, amplitude=amp,
                                          beat=beta, phase_sign=s))

    return RotatingFrameHamiltonian(
        static_part=static, beat_terms=tuple(terms),
        envelope=drive.envelope, ramp_ns=drive.ramp_ns, t0=drive.t0,
        rel_phase=drive.rel_phase)


def evaluate_at(h: RotatingFrameHamiltonian, t: float,
                rel_phase: float | None = None) -> np.ndarray:
    """Hamiltonian matrix at time t (rad/ns), Hermitian by construction.

    The envelope scales every coupling but not the frame detunings.
    """
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    phase = h.rel_phase if rel_phase is None else rel_phase
    out = h.static_part.copy()
    for bt in h.beat_terms:
        z = bt.amplitude * np.exp(
            1j * (bt.beat * t + bt.phi0 + bt.phase_sign * phase))
        out[bt.row, bt.col] += z
        out[bt.col, bt.row] += np.conj(z)
    env = h.envelope_at(t)
    if env != 1.0:
        d = np.diag(np.diag(out))
        out = d + env * (out - d)
    return out
