"""Physical parameters and state types for the driven four-level artificial atom.

Unit conventions
----------------
Transition and drive frequencies are plain (cyclic) frequencies in GHz.
Everything that enters the dynamics -- Rabi rates, detunings, decay rates --
is angular, in rad/ns (1 GHz = 2*pi rad/ns).  All conversions happen here,
at the model boundary.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

#: sentinel for "no decay / no dephasing on this channel"
INFINITE = float("inf")

# density-matrix validity tolerances
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-9


def ghz_to_rad_per_ns(f_ghz: float) -> float:
    """Cyclic GHz -> angular rad/ns."""
    return TWO_PI * f_ghz


def rad_per_ns_to_ghz(w: float) -> float:
    """Angular rad/ns -> cyclic GHz."""
    return w / TWO_PI


def rabi_mhz(f_mhz: float) -> float:
    """Cyclic MHz -> angular rad/ns, for Rabi rates quoted as '(2 pi) x MHz'."""
    return TWO_PI * f_mhz * 1e-3


def rate_to_cyclic_mhz(rate_per_ns: float) -> float:
    """Express an angular rate (1/ns) as a cyclic linewidth in MHz."""
    return rate_per_ns / TWO_PI * 1e3


@dataclass(frozen=True)
class DeviceParams:
    """Transition frequencies of the lowest four well levels.

    The level spacing decreases with level index (anharmonic well):
    f01 > f12 > f23.  f23 defaults to the linear extrapolation
    2*f12 - f01 and can be overridden; the top level holds < 0.5 % of the
    population in every regime of interest, so its exact spacing barely
    matters.
    """

    f01: float = 6.205
    f12: float = 5.865
    f23: float | None = None
    n_levels: int = field(default=4, init=False)

    def __post_init__(self):
        if not (self.f01 > self.f12 > 0.0):
            raise ValueError(
                f"require f01 > f12 > 0, got f01={self.f01}, f12={self.f12}")
        if self.f23 is None:
            object.__setattr__(self, "f23", 2.0 * self.f12 - self.f01)
        if self.f23 <= 0.0:
            raise ValueError(f"f23 must be positive, got {self.f23}")

    def delta(self) -> float:
        """Anharmonicity (f01 - f12)/2 in GHz."""
        return 0.5 * (self.f01 - self.f12)

    def f02(self) -> float:
        """Two-photon transition frequency f01 + f12 in GHz."""
        return self.f01 + self.f12

    def frequency(self, n: int) -> float:
        """Level energy (GHz) of level n above the ground state."""
        return (0.0, self.f01, self.f01 + self.f12,
                self.f01 + self.f12 + self.f23)[n]


def delta(device: DeviceParams) -> float:
    """Anharmonicity (f01 - f12)/2 in GHz."""
    return device.delta()


@dataclass(frozen=True)
class DriveParams:
    """Two-tone microwave drive.

    fp, fc are the probe and coupling tone frequencies (GHz).  omega_p01 is
    the resonant Rabi rate the probe would produce on 0<->1, omega_c12 the
    rate the coupling tone produces on 1<->2 (both rad/ns; the 1:sqrt(2):
    sqrt(3) dipole ratios are applied when the Hamiltonian is built).
    rel_phase is the coupling tone's phase relative to the probe.
    """

    fp: float
    fc: float
    omega_p01: float
    omega_c12: float
    rel_phase: float = 0.0
    t0: float = 30.0
    envelope: str = "rectangular"
    ramp_ns: float = 0.0

    def __post_init__(self):
        if self.fp <= 0.0 or self.fc <= 0.0:
            raise ValueError("drive frequencies must be positive")
        if self.omega_p01 < 0.0 or self.omega_c12 < 0.0:
            raise ValueError("Rabi rates must be nonnegative")
        if self.t0 < 0.0:
            raise ValueError("pulse duration must be nonnegative")
        if self.envelope not in ("rectangular", "linear_ramp"):
            raise ValueError(f"unknown envelope {self.envelope!r}")
        if self.envelope == "linear_ramp" and self.ramp_ns <= 0.0:
            raise ValueError("linear_ramp requires ramp_ns > 0")
        object.__setattr__(self, "rel_phase", self.rel_phase % TWO_PI)

    def with_(self, **kw) -> "DriveParams":
        """Copy with selected fields replaced."""
        cur = dict(fp=self.fp, fc=self.fc, omega_p01=self.omega_p01,
                   omega_c12=self.omega_c12, rel_phase=self.rel_phase,
                   t0=self.t0, envelope=self.envelope, ramp_ns=self.ramp_ns)
        cur.update(kw)
        return DriveParams(**cur)


@dataclass(frozen=True)
class DecoherenceParams:
    """Energy relaxation times per transition and pairwise pure-dephasing times.

    All times in ns; ``INFINITE`` (math.inf) turns the corresponding rate off.
    t1_32 defaults to (2/3)*t1_21, following the n-scaling of decay rates in a
    near-harmonic well.  tphi_3x is the dephasing time shared by every
    coherence that involves level 3; the default is no extra dephasing
    (only relaxation broadens those coherences), which keeps the top-level
    population below 0.5 % at the drive strengths of interest.
    """

    t1_10: float = 108.0
    t1_21: float = 77.0
    t1_32: float | None = None
    tphi_01: float = INFINITE
    tphi_02: float = INFINITE
    tphi_12: float = INFINITE
    tphi_3x: float = INFINITE

    def __post_init__(self):
        if self.t1_32 is None:
            object.__setattr__(self, "t1_32", (2.0 / 3.0) * self.t1_21)
        for name in ("t1_10", "t1_21", "t1_32",
                     "tphi_01", "tphi_02", "tphi_12", "tphi_3x"):
            v = getattr(self, name)
            if not v > 0.0:
                raise ValueError(f"{name} must be strictly positive, got {v}")

    def gamma_01(self) -> float:
        """0-1 coherence decay rate, 1/(2 t1_10) + 1/tphi_01, in 1/ns."""
        return 0.5 / self.t1_10 + 1.0 / self.tphi_01

    def gamma_02(self) -> float:
        """0-2 coherence decay rate, 1/(2 t1_21) + 1/tphi_02, in 1/ns."""
        return 0.5 / self.t1_21 + 1.0 / self.tphi_02

    def decay_rates(self) -> np.ndarray:
        """Total population decay rate out of each level, [0, 1/t1_10, ...]."""
        return np.array([0.0, 1.0 / self.t1_10, 1.0 / self.t1_21,
                         1.0 / self.t1_32])

    def dephasing_matrix(self) -> np.ndarray:
        """Symmetric matrix of pure-dephasing rates for each coherence pair."""
        dep = np.zeros((4, 4))
        dep[0, 1] = dep[1, 0] = 1.0 / self.tphi_01
        dep[0, 2] = dep[2, 0] = 1.0 / self.tphi_02
        dep[1, 2] = dep[2, 1] = 1.0 / self.tphi_12
        for i in range(3):
            dep[i, 3] = dep[3, i] = 1.0 / self.tphi_3x
        return dep

    def with_(self, **kw) -> "DecoherenceParams":
        cur = dict(t1_10=self.t1_10, t1_21=self.t1_21, t1_32=self.t1_32,
                   tphi_01=self.tphi_01, tphi_02=self.tphi_02,
                   tphi_12=self.tphi_12, tphi_3x=self.tphi_3x)
        cur.update(kw)
        return DecoherenceParams(**cur)


@dataclass(frozen=True)
class MeasurementModel:
    """Linear map from true P2 to the observed switching fraction."""

    fidelity: float = 0.80
    background: float = 0.03
    trials: int = 4000

    def __post_init__(self):
        if not (0.0 <= self.background and 0.0 <= self.fidelity
                and self.fidelity + self.background <= 1.0):
            raise ValueError("need 0 <= background, fidelity and "
                             "fidelity + background <= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


class DensityMatrix4:
    """4x4 complex density matrix with validity checks."""

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray):
        m = np.asarray(matrix, dtype=np.complex128)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got shape {m.shape}")
        self.matrix = m

    @classmethod
    def ground(cls) -> "DensityMatrix4":
        m = np.zeros((4, 4), dtype=np.complex128)
        m[0, 0] = 1.0
        return cls(m)

    @classmethod
    def pure(cls, amplitudes) -> "DensityMatrix4":
        v = np.asarray(amplitudes, dtype=np.complex128)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.matrix))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def trace_defect(self) -> float:
        return float(abs(np.trace(self.matrix).real - 1.0)
                     + abs(np.trace(self.matrix).imag))

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def validate(self) -> None:
        """Raise if Hermiticity, trace, or positivity tolerances are violated."""
        if self.hermiticity_defect() > HERMITICITY_TOL:
            raise ValueError(
                f"not Hermitian: defect {self.hermiticity_defect():.3e}")
        if self.trace_defect() > TRACE_TOL:
            raise ValueError(f"trace defect {self.trace_defect():.3e}")
        ev = self.min_eigenvalue()
        if ev < EIGENVALUE_FLOOR:
            raise ValueError(f"negative eigenvalue {ev:.3e}")

    def __repr__(self):
        return f"DensityMatrix4(populations={self.populations.round(6)})"


def two_photon_amplitude(omega_p01: float, delta_ghz: float) -> float:
    """Effective two-photon 0<->2 coupling, omega_p01**2 / (2 * (2 pi delta)).

    omega_p01 in rad/ns, delta in GHz; result in rad/ns.  Warns when
    omega_p01 is not small against the intermediate-level detuning, where
    the quadratic form stops being trustworthy.
    """
    if delta_ghz <= 0.0:
        raise ValueError(f"delta must be positive, got {delta_ghz}")
    dw = ghz_to_rad_per_ns(delta_ghz)
    if omega_p01 / dw >= 0.5:
        warnings.warn("omega_p01 / (2 pi delta) >= 0.5: two-photon amplitude "
                      "formula is outside its perturbative range",
                      stacklevel=2)
    return omega_p01 ** 2 / (2.0 * dw)


def intermediate_leakage(omega_p01: float, delta_ghz: float) -> float:
    """Residual population stranded in the intermediate level, Omega^2/(2 (2 pi delta)^2)."""
    if delta_ghz <= 0.0:
        raise ValueError(f"delta must be positive, got {delta_ghz}")
    dw = ghz_to_rad_per_ns(delta_ghz)
    return omega_p01 ** 2 / (2.0 * dw ** 2)


def dark_state(a_p: float, a_c: float) -> tuple[float, float]:
    """Normalized (c0, c1) of the superposition that decouples from both tones.

    Returns (a_c, -a_p) / sqrt(a_p^2 + a_c^2); unit norm by construction.
    """
    norm = np.hypot(a_p, a_c)
    if norm == 0.0:
        raise ValueError("a_p and a_c cannot both be zero")
    return a_c / norm, -a_p / norm
