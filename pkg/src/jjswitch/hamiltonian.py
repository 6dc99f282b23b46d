"""Hamiltonian builders for the bare junction and the junction-TLS system.

All matrices are stored as H/hbar in rad/s, so decay rates (1/s) can be
added to the diagonal of the non-Hermitian effective forms without unit
conversion.  Lab-frame builders carry the full cos(omega t) drive; the
rotating-frame (RWA) builders rotate at the drive frequency, counting one
excitation per junction or TLS quantum, and permit far larger timesteps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

__all__ = [
    "TlsParams",
    "check_rwa_validity",
    "hamiltonian_2",
    "hamiltonian_4",
    "decay_diagonal",
    "effective_hamiltonian_2",
    "effective_hamiltonian_4",
    "resonant_transition_rate",
    "landau_zener_probability",
    "crossing_survival_numeric",
    "sweep_rate",
]

from .constants import HBAR
from .errors import PhysicsDomainError
from .physics import (
    BiasDrive,
    JunctionParams,
    RateSet,
    level_splitting,
    rabi_frequency,
    resonance_current,
)

FrameKind = Literal["lab", "rwa"]

# Coupling strengths reported for junction-TLS avoided crossings in
# spectroscopy; values outside this window are suspicious but not fatal.
PLAUSIBLE_COUPLING_RANGE = (2.0 * math.pi * 20e6, 2.0 * math.pi * 200e6)

RWA_VALIDITY_RATIO = 0.1


@dataclass(frozen=True)
class TlsParams:
    """Two-level defect: splitting and junction coupling, both rad/s."""

    omega_tls: float
    coupling: float

    def __post_init__(self):
        if self.omega_tls <= 0:
            raise PhysicsDomainError("omega_tls must be > 0")
        if self.coupling < 0:
            raise PhysicsDomainError("coupling must be >= 0")
        lo, hi = PLAUSIBLE_COUPLING_RANGE
        if self.coupling > 0 and not lo * (1 - 1e-9) <= self.coupling <= hi * (1 + 1e-9):
            warnings.warn(
                f"TLS coupling {self.coupling / (2 * math.pi) / 1e6:.3g} MHz is outside "
                f"the usual spectroscopic range [20, 200] MHz",
                stacklevel=2,
            )


def check_rwa_validity(
    p: JunctionParams, d: BiasDrive, I_dc: float, tls: TlsParams | None = None
) -> float:
    """Return the worst RWA ratio and warn when it exceeds the 0.1 threshold.

    The rotating-wave approximation needs the Rabi frequency, the drive
    detuning, the TLS coupling and the TLS detuning all small compared with
    the drive frequency.
    """
    w = d.microwave_frequency
    w10 = level_splitting(p, I_dc, "g")
    omega_m = rabi_frequency(p, d.microwave_amplitude, I_dc)
    ratios = [omega_m / w, abs(w10 - w) / w]
    if tls is not None:
        ratios += [tls.coupling / w, abs(tls.omega_tls - w) / w]
    worst = max(ratios)
    if worst >= RWA_VALIDITY_RATIO:
        warnings.warn(
            f"RWA marginal: largest frequency ratio {worst:.3g} >= {RWA_VALIDITY_RATIO}",
            stacklevel=2,
        )
    return worst


def hamiltonian_2(
    p: JunctionParams,
    d: BiasDrive,
    I_dc: float,
    t: float,
    frame: FrameKind = "rwa",
) -> np.ndarray:
    """Two-level junction Hamiltonian H/hbar (rad/s) in basis {|0>, |1>}.

    lab :  [[0, Om cos(wt)], [Om cos(wt), w10]]
    rwa :  [[0, Om/2], [Om/2, w10 - w]]
    """
    w10 = level_splitting(p, I_dc, "g")
    omega_m = rabi_frequency(p, d.microwave_amplitude, I_dc)
    if frame == "lab":
        drive = omega_m * math.cos(d.microwave_frequency * t)
        return np.array([[0.0, drive], [drive, w10]], dtype=complex)
    if frame == "rwa":
        half = omega_m / 2.0
        return np.array(
            [[0.0, half], [half, w10 - d.microwave_frequency]], dtype=complex
        )
    raise PhysicsDomainError(f"unknown frame {frame!r}")


def hamiltonian_4(
    p: JunctionParams,
    tls: TlsParams,
    d: BiasDrive,
    I_dc: float,
    t: float,
    frame: FrameKind = "rwa",
) -> np.ndarray:
    """Junction-TLS Hamiltonian H/hbar (rad/s) in basis {|0g>,|1g>,|0e>,|1e>}.

    The microwave drives only the junction transitions (|0g>-|1g> and
    |0e>-|1e>); the TLS enters through its splitting and the transverse
    coupling between the degenerate-excitation pair |1g>, |0e>.
    """
    w10 = level_splitting(p, I_dc, "g")
    omega_m = rabi_frequency(p, d.microwave_amplitude, I_dc)
    wt, oc = tls.omega_tls, tls.coupling
    if frame == "lab":
        drive = omega_m * math.cos(d.microwave_frequency * t)
        return np.array(
            [
                [0.0, drive, 0.0, 0.0],
                [drive, w10, oc, 0.0],
                [0.0, oc, wt, drive],
                [0.0, 0.0, drive, w10 + wt],
            ],
            dtype=complex,
        )
    if frame == "rwa":
        half = omega_m / 2.0
        delta = w10 - d.microwave_frequency
        dt_tls = wt - d.microwave_frequency
        return np.array(
            [
                [0.0, half, 0.0, 0.0],
                [half, delta, oc, 0.0],
                [0.0, oc, dt_tls, half],
                [0.0, 0.0, half, delta + dt_tls],
            ],
            dtype=complex,
        )
    raise PhysicsDomainError(f"unknown frame {frame!r}")


def decay_diagonal(r: RateSet, dimension: int) -> np.ndarray:
    """Anti-Hermitian diagonal of the no-jump generator (rad/s, real array).

    Entry k holds half the total outflow rate from basis state k: escape for
    every state plus relaxation for the excited junction levels.
    """
    if dimension == 2:
        return 0.5 * np.array([r.tunnel_0g, r.gamma10 + r.tunnel_1g])
    if dimension == 4:
        return 0.5 * np.array(
            [
                r.tunnel_0g,
                r.gamma10 + r.tunnel_1g,
                r.tunnel_0e,
                r.gamma10 + r.tunnel_1e,
            ]
        )
    raise PhysicsDomainError("dimension must be 2 or 4")


def effective_hamiltonian_2(H: np.ndarray, r: RateSet) -> np.ndarray:
    """Non-Hermitian no-jump generator for the bare junction.

    H_eff = H - (i/2)(gamma10 + Gamma_1)|1><1| - (i/2) Gamma_0 |0><0|
    """
    if H.shape != (2, 2):
        raise PhysicsDomainError("effective_hamiltonian_2 expects a 2x2 matrix")
    return H - 1j * np.diag(decay_diagonal(r, 2))


def effective_hamiltonian_4(H: np.ndarray, r: RateSet) -> np.ndarray:
    """Non-Hermitian no-jump generator for the junction-TLS system."""
    if H.shape != (4, 4):
        raise PhysicsDomainError("effective_hamiltonian_4 expects a 4x4 matrix")
    return H - 1j * np.diag(decay_diagonal(r, 4))


def resonant_transition_rate(
    omega_m: float, gamma10: float, tunnel_0: float, tunnel_1: float, detuning: float
) -> float:
    """Steady drive-induced |0> to |1> transition rate (1/s).

    Gamma = Om^2 gamma / (2 (Delta^2 + gamma^2)) with the total linewidth
    gamma = (gamma10 + Gamma_0 + Gamma_1)/2; a Lorentzian in the detuning.
    """
    if min(gamma10, tunnel_0, tunnel_1) < 0:
        raise PhysicsDomainError("rates must be >= 0")
    if omega_m == 0.0:
        return 0.0
    gamma = 0.5 * (gamma10 + tunnel_0 + tunnel_1)
    return omega_m**2 * gamma / (2.0 * (detuning**2 + gamma**2))


def landau_zener_probability(coupling: float, sweep: float) -> float:
    """Asymptotic diabatic survival probability through an avoided crossing.

    P_LZ = exp(-2 pi hbar coupling^2 / sweep) with the coupling in rad/s and
    the sweep rate of the diabatic energy spacing in J/s.
    """
    if sweep <= 0:
        raise PhysicsDomainError("sweep rate must be > 0")
    if coupling < 0:
        raise PhysicsDomainError("coupling must be >= 0")
    return math.exp(-2.0 * math.pi * HBAR * coupling**2 / sweep)


def crossing_survival_numeric(
    coupling: float, sweep: float, span_factor: float = 80.0, rtol: float = 1e-10
) -> float:
    """Diabatic survival through a linear avoided crossing by direct
    integration of the two-level Schrodinger equation.

    The crossing Hamiltonian [[eps(t)/2, hbar*coupling], [hbar*coupling,
    -eps(t)/2]] with eps = sweep * t is integrated in the interaction
    picture of its diagonal (amplitude equations with the chirped phase
    phi = sweep t^2 / 2 hbar), which removes the stiff far-detuned
    oscillations.  Returns the probability of remaining in the initial
    diabatic state; the asymptotic closed form is landau_zener_probability.
    """
    if sweep <= 0:
        raise PhysicsDomainError("sweep rate must be > 0")
    if coupling == 0.0:
        return 1.0
    from scipy.integrate import solve_ivp

    t_scale = max(HBAR * coupling / sweep, math.sqrt(HBAR / sweep))
    T = span_factor * t_scale
    half_chirp = 0.5 * sweep / HBAR

    def rhs(t, y):
        phase = half_chirp * t * t
        rot = math.cos(phase) + 1j * math.sin(phase)
        a, b = y[0], y[1]
        return [-1j * coupling * rot * b, -1j * coupling * np.conj(rot) * a]

    sol = solve_ivp(
        rhs,
        (-T, T),
        [1.0 + 0.0j, 0.0j],
        method="DOP853",
        rtol=rtol,
        atol=1e-12,
    )
    if not sol.success:
        raise PhysicsDomainError(f"crossing integration failed: {sol.message}")
    a = sol.y[0, -1]
    return float(abs(a) ** 2)


def sweep_rate(p: JunctionParams, tls: TlsParams, d: BiasDrive) -> float:
    """Energy-spacing sweep rate at the junction-TLS crossing (J/s).

    v = hbar |d omega_10 / d I| * (dI/dt), the slope taken by central finite
    difference (relative step 1e-6) at the current where omega_10 crosses the
    TLS splitting.
    """
    i_cross = resonance_current(p, tls.omega_tls, "g")
    h = 1e-6 * i_cross
    slope = (
        level_splitting(p, i_cross + h, "g") - level_splitting(p, i_cross - h, "g")
    ) / (2.0 * h)
    return HBAR * abs(slope) * d.ramp_rate
