"""Quantum-jump Monte Carlo engine for ramped switching-current trajectories.

A single trajectory alternates deterministic non-Hermitian evolution with
stochastic jumps: at every step the bias current advances, the no-jump
generator and the incoherent rates are rebuilt, one uniform random number
decides between "no jump", a relaxation collapse, or a tunneling escape
that terminates the ramp and registers the switching current.

Implementation notes that matter for reproducibility and speed:

* The step schedule (a "ramp grid") is a pure function of the configuration,
  never of the stochastic state, so every trajectory of a run shares it and
  results cannot depend on batching or worker count.
* One step of the classic explicit 4th-order integrator applied to the
  linear system i dpsi/dt = H_eff psi with H_eff frozen over the step equals
  multiplication by the degree-4 Taylor polynomial of exp(-i H_eff dt).
  The batch runner therefore precomputes that matrix per step (dropping a
  physically irrelevant global phase by centring the Hermitian diagonal)
  and advances every live trajectory with one small matrix product.
* Random numbers come from counter-based streams: draw n of trajectory k is
  a pure function of (master_seed, k, n).  See rng.py.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng
from .constants import HBAR
from .errors import ConfigError, PhysicsDomainError, StepSizeError
from .hamiltonian import TlsParams, decay_diagonal
from .physics import (
    BiasDrive,
    JunctionParams,
    RateSet,
    effective_critical_current,
    level_splitting,
    relaxation_rate,
    saturation_rate,
    tunneling_rate,
    two_level_bias_limit,
)

# Channel tables.  Order is fixed: tunneling escapes by basis state, then
# relaxation collapses; the inverse-CDF jump selection walks this order.
TUNNEL_CHANNELS_4 = ("0g", "1g", "0e", "1e")
RELAX_CHANNELS_4 = ("1g->0g", "1e->0e")
RELAX_SOURCES_4 = (1, 3)
RELAX_TARGETS_4 = (0, 2)
RELAX_FLAGS_4 = (0, 1)

TUNNEL_CHANNELS_2 = ("0g", "1g")
RELAX_CHANNELS_2 = ("1g->0g",)
RELAX_SOURCES_2 = (1,)
RELAX_TARGETS_2 = (0,)
RELAX_FLAGS_2 = (0,)

# flag carried by a tunneling escape, indexed by source basis state
TUNNEL_FLAGS_4 = (0, 0, 1, 1)
TUNNEL_FLAGS_2 = (0, 0)

NORM_GROWTH_TOL = 1e-12

RatesFn = Callable[[np.ndarray], np.ndarray]
"""Maps an array of bias currents to a (n, 5) array of rates ordered as
(gamma10, tunnel_0g, tunnel_1g, tunnel_0e, tunnel_1e); testing seam."""


@dataclass
class QuantumState:
    """Trajectory state: complex amplitudes plus simulation bookkeeping."""

    amplitudes: np.ndarray
    t: float = 0.0
    I_dc: float = 0.0
    flag: int = 0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape not in ((2,), (4,)):
            raise PhysicsDomainError("state dimension must be 2 or 4")
        if self.flag not in (0, 1):
            raise PhysicsDomainError("flag must be 0 or 1")
        if self.amplitudes.shape == (2,) and self.flag != 0:
            raise PhysicsDomainError("two-level states always carry flag 0")

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class JumpEvent:
    """A stochastic collapse: terminal tunneling escape or internal relaxation."""

    kind: str  # "tunnel" | "relax"
    channel: str
    t: float
    I_dc: float


@dataclass
class SwitchRecord:
    """Outcome of one ramp: the switching current and its jump history.

    n_relax_events is carried explicitly so records can cross process
    boundaries without their full event logs.
    """

    ramp_index: int
    switching_current: float
    flag_at_switch: int
    events: list[JumpEvent] = field(default_factory=list)
    n_relax_events: int = 0


@dataclass(frozen=True)
class EngineConfig:
    """Integration and sampling controls for trajectory runs.

    dt is chosen each step as the tightest of: dt_max, the jump-probability
    cap dt_rate_cap / (sum of raw rates), the per-step phase bound
    theta_max / ||H||, and in the lab frame one twentieth of the drive
    period.  master_seed roots all random streams.
    """

    dimension: int = 4
    frame: str = "rwa"
    master_seed: int = 20260808
    ramps: int = 2000
    dt_max: float = 5e-9
    dt_rate_cap: float = 0.05
    theta_max: float = 0.15
    init_flag: int = 0
    step_ceiling: int = 10**9
    kill_hazard: float = 50.0

    def __post_init__(self):
        if self.dimension not in (2, 4):
            raise ConfigError("dimension must be 2 or 4")
        if self.frame not in ("lab", "rwa"):
            raise ConfigError("frame must be 'lab' or 'rwa'")
        if self.ramps < 1:
            raise ConfigError("ramps must be >= 1")
        if self.dt_max <= 0 or self.dt_rate_cap <= 0 or self.theta_max <= 0:
            raise ConfigError("dt caps must be > 0")
        if self.dt_rate_cap > 1.0:
            raise ConfigError("dt_rate_cap must be <= 1")
        if self.init_flag not in (0, 1):
            raise ConfigError("init_flag must be 0 or 1")
        if self.dimension == 2 and self.init_flag != 0:
            raise ConfigError("two-level runs must start with flag 0")
        if self.step_ceiling < 1:
            raise ConfigError("step_ceiling must be >= 1")


def channel_rates(r: RateSet, dimension: int) -> np.ndarray:
    """Raw channel rates in canonical order (tunnels, then relaxations)."""
    if dimension == 2:
        return np.array([r.tunnel_0g, r.tunnel_1g, r.gamma10])
    return np.array(
        [r.tunnel_0g, r.tunnel_1g, r.tunnel_0e, r.tunnel_1e, r.gamma10, r.gamma10]
    )


def _channel_sources(dimension: int) -> tuple[int, ...]:
    if dimension == 2:
        return (0, 1) + RELAX_SOURCES_2
    return (0, 1, 2, 3) + RELAX_SOURCES_4


def evolve_step(state: QuantumState, H_eff: np.ndarray, dt: float) -> QuantumState:
    """Advance the amplitudes by one explicit 4th-order step of
    i dpsi/dt = H_eff psi (H_eff in rad/s, frozen over the step).

    No renormalization: between jumps the shrinking norm carries the
    no-jump probability.  Raises StepSizeError if the norm grows beyond
    1e-12 relative, which signals an oversized dt or a malformed H_eff.
    """
    psi = state.amplitudes
    if H_eff.shape != (state.dimension, state.dimension):
        raise PhysicsDomainError("H_eff dimension does not match the state")

    def deriv(v):
        return -1j * (H_eff @ v)

    k1 = deriv(psi)
    k2 = deriv(psi + 0.5 * dt * k1)
    k3 = deriv(psi + 0.5 * dt * k2)
    k4 = deriv(psi + dt * k3)
    new = psi + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    n_old = float(np.vdot(psi, psi).real)
    n_new = float(np.vdot(new, new).real)
    if n_new > n_old * (1.0 + NORM_GROWTH_TOL):
        raise StepSizeError(
            f"norm grew by {n_new / n_old - 1.0:.3e} in one step; reduce dt "
            "or check H_eff"
        )
    return QuantumState(new, state.t + dt, state.I_dc, state.flag)


def jump_decision(
    state: QuantumState, r: RateSet, dt: float, u: float
) -> Optional[JumpEvent]:
    """Decide whether a jump fires during this step and, if so, which channel.

    The total jump probability is dt * sum_k rate_k |<src_k|psi>|^2 /
    ||psi||^2; the channel is selected with the same uniform draw by
    inverse CDF over the canonical channel order.
    """
    dim = state.dimension
    rates = channel_rates(r, dim)
    sources = _channel_sources(dim)
    pops = np.abs(state.amplitudes) ** 2
    norm2 = pops.sum()
    if norm2 <= 0.0:
        return None
    probs = dt * rates * pops[list(sources)] / norm2
    cum = np.cumsum(probs)
    if u >= cum[-1]:
        return None
    idx = int(np.searchsorted(cum, u, side="right"))
    n_tunnel = dim
    if idx < n_tunnel:
        channels = TUNNEL_CHANNELS_2 if dim == 2 else TUNNEL_CHANNELS_4
        return JumpEvent("tunnel", channels[idx], state.t, state.I_dc)
    relax_names = RELAX_CHANNELS_2 if dim == 2 else RELAX_CHANNELS_4
    return JumpEvent("relax", relax_names[idx - n_tunnel], state.t, state.I_dc)


def apply_relax(state: QuantumState, channel: str) -> QuantumState:
    """Collapse onto the relaxation target basis state with unit norm.

    The TLS flag follows the target branch; time and bias are untouched.
    """
    dim = state.dimension
    names = RELAX_CHANNELS_2 if dim == 2 else RELAX_CHANNELS_4
    targets = RELAX_TARGETS_2 if dim == 2 else RELAX_TARGETS_4
    flags = RELAX_FLAGS_2 if dim == 2 else RELAX_FLAGS_4
    if channel not in names:
        raise PhysicsDomainError(f"{channel!r} is not a relaxation channel")
    k = names.index(channel)
    psi = np.zeros(dim, dtype=complex)
    psi[targets[k]] = 1.0
    return QuantumState(psi, state.t, state.I_dc, flags[k])


# ---------------------------------------------------------------------------
# Ramp grid: the deterministic step schedule shared by all trajectories
# ---------------------------------------------------------------------------

_MESH_POINTS = 4097  # coarse-mesh edges for step-size planning
_CHUNK = 65536       # propagator steps materialized at a time
_U_BLOCK = 2048      # uniforms precomputed per trajectory at a time

# Step-size refinement zones.  The tight phase cap theta_max applies where
# population transfer actually happens: within DRIVE_ZONE Rabi widths of the
# drive resonance and CROSS_ZONE couplings of the junction-TLS crossing.
# Elsewhere the dynamics is adiabatic riding with perturbative admixtures
# (which re-equilibrate every few steps), and the cap is relaxed by
# THETA_RELAX; the phase advance per step still resolves every level gap,
# since the cap scales with the spectral spread itself.
_DRIVE_ZONE = 8.0
_CROSS_ZONE = 3.0
_THETA_RELAX = 3.0

# The one-step propagator is assembled from 2^k integrator substeps so that
# the phase advance per substep stays below this target; the truncation of
# the degree-4 polynomial then damps the norm by < 1e-9 per substep, which
# keeps amplitude ratios faithful over multi-million-step ramps.
_THETA_SUBSTEP = 0.05


class RampGrid:
    """Precomputed per-step physics for one ramp configuration.

    Steps are planned on a coarse bias mesh: within each cell the step size
    is the tightest of the configured ceilings evaluated at the cell edges,
    and the cell is divided evenly so the fine grid lands exactly on cell
    boundaries.  The grid ends once the cumulative escape hazard of the
    hardiest state (ground level, g branch) exceeds kill_hazard, after
    which survival probability is e^(-kill_hazard).
    """

    def __init__(
        self,
        p: JunctionParams,
        tls: Optional[TlsParams],
        d: BiasDrive,
        cfg: EngineConfig,
        rates_fn: Optional[RatesFn] = None,
    ):
        if cfg.dimension == 4 and tls is None:
            raise ConfigError("four-level runs need TLS parameters")
        self.p, self.tls, self.d, self.cfg = p, tls, d, cfg
        self.dimension = cfg.dimension
        self.frame = cfg.frame
        self._rates_fn = rates_fn
        # With no drive and (for 4 levels) no TLS coupling the Hamiltonian is
        # diagonal for the entire ramp: amplitudes never interfere, so their
        # Hermitian phases are gauge and only the decay part is integrated.
        self.diagonal_only = d.microwave_amplitude == 0.0 and (
            cfg.dimension == 2 or (tls is not None and tls.coupling == 0.0)
        )
        self._build()

    # -- rate evaluation -----------------------------------------------------

    def _rates_at(self, I: np.ndarray) -> np.ndarray:
        """(n, 5) array: gamma10 and the four escape rates at each bias."""
        if self._rates_fn is not None:
            out = np.asarray(self._rates_fn(I), dtype=float)
            if out.shape != (I.size, 5):
                raise ConfigError("rates_fn must return shape (n, 5)")
            return out
        p = self.p
        i0e = effective_critical_current(p, "e")
        # beyond the e-branch critical current the e states have no well at
        # all; clamping onto the saturated rate keeps the arrays finite (any
        # e amplitude is long gone by then)
        I_e = np.minimum(I, i0e * (1.0 - 1e-12))
        out = np.empty((I.size, 5))
        out[:, 0] = relaxation_rate(p, I)
        out[:, 1] = tunneling_rate(p, I, 0, "g")
        out[:, 2] = tunneling_rate(p, I, 1, "g")
        out[:, 3] = tunneling_rate(p, I_e, 0, "e")
        out[:, 4] = tunneling_rate(p, I_e, 1, "e")
        return out

    def _hamiltonian_scale(
        self, I: np.ndarray, rates: np.ndarray, include_decay: bool = True
    ) -> np.ndarray:
        """Upper bound on ||H_eff - center*Id|| per point (rad/s).

        The outer step size is planned against the Hermitian part only
        (include_decay=False): huge escape rates on extinct levels need no
        outer resolution.  The integrator substep count uses the full bound.
        """
        w10 = level_splitting(self.p, I, "g")
        omega_m = self.d.microwave_amplitude * np.sqrt(
            1.0 / (2.0 * HBAR * w10 * self.p.capacitance)
        )
        if self.frame == "rwa":
            delta = np.abs(w10 - self.d.microwave_frequency)
        else:
            delta = w10
        if self.dimension == 4:
            if self.frame == "rwa":
                d_tls = abs(self.tls.omega_tls - self.d.microwave_frequency)
            else:
                d_tls = self.tls.omega_tls
            half_spread = 0.5 * (delta + d_tls)
            row = omega_m / (2.0 if self.frame == "rwa" else 1.0) + self.tls.coupling
        else:
            half_spread = 0.5 * delta
            row = omega_m / (2.0 if self.frame == "rwa" else 1.0)
        out = half_spread + row
        if include_decay:
            out = out + 0.5 * (rates[:, 0] + rates[:, 1:].max(axis=1))
        return out

    def _offdiagonal_scale(self, I: np.ndarray) -> np.ndarray:
        w10 = level_splitting(self.p, I, "g")
        omega_m = self.d.microwave_amplitude * np.sqrt(
            1.0 / (2.0 * HBAR * w10 * self.p.capacitance)
        )
        if self.dimension == 4:
            return np.maximum(omega_m, self.tls.coupling)
        return omega_m

    # -- construction ----------------------------------------------------------

    def _build(self):
        p, d, cfg = self.p, self.d, self.cfg
        v = d.ramp_rate
        i_hi = two_level_bias_limit(p, "g") - 1e-12 * p.critical_current
        if not d.dc_start < i_hi:
            raise PhysicsDomainError(
                "dc_start is beyond the two-level domain of the junction"
            )

        mesh = np.linspace(d.dc_start, i_hi, _MESH_POINTS)
        rates = self._rates_at(mesh)

        # cumulative escape hazard of the hardiest state along the ramp
        hazard = np.concatenate(
            ([0.0], np.cumsum(0.5 * (rates[1:, 1] + rates[:-1, 1]) * np.diff(mesh) / v))
        )
        killed = np.nonzero(hazard >= cfg.kill_hazard)[0]
        last = int(killed[0]) if killed.size else _MESH_POINTS - 1
        last = max(last, 1)
        mesh, rates = mesh[: last + 1], rates[: last + 1]

        # Jump-probability ceiling, per basis state.  A state gets the
        # strict per-step cap while its own cumulative outflow hazard is
        # below kill_hazard -- i.e. while trajectories can statistically
        # still dwell in it.  Past extinction only unit jump probability
        # per step is enforced: refilled amplitude there is both tiny and
        # doomed within a step, so its sampling granularity is immaterial.
        if self.dimension == 4:
            state_out = np.stack(
                [
                    rates[:, 1],
                    rates[:, 0] + rates[:, 2],
                    rates[:, 3],
                    rates[:, 0] + rates[:, 4],
                ],
                axis=1,
            )
            reachable = (0, 2) if self.diagonal_only else (0, 1, 2, 3)
        else:
            state_out = np.stack([rates[:, 1], rates[:, 0] + rates[:, 2]], axis=1)
            reachable = (0,) if self.diagonal_only else (0, 1)
        scale = self._hamiltonian_scale(mesh, rates, include_decay=False)
        offdiag = self._offdiagonal_scale(mesh)

        with np.errstate(divide="ignore"):
            dt_rate = np.full(mesh.shape, np.inf)
            for s in reachable:
                out_s = state_out[:, s]
                haz_s = np.concatenate(
                    (
                        [0.0],
                        np.cumsum(0.5 * (out_s[1:] + out_s[:-1]) * np.diff(mesh) / v),
                    )
                )
                # past extinction a state imposes no constraint: amplitude
                # refilled there is both negligible and doomed within one
                # step, so only its (irrelevant) death timing quantizes
                cap_s = np.where(haz_s < cfg.kill_hazard, cfg.dt_rate_cap / out_s, np.inf)
                dt_rate = np.minimum(dt_rate, cap_s)
            if self.diagonal_only:
                dt_theta = np.full(mesh.shape, np.inf)
            else:
                w10 = level_splitting(self.p, mesh, "g")
                omega_m = self.d.microwave_amplitude * np.sqrt(
                    1.0 / (2.0 * HBAR * w10 * self.p.capacitance)
                )
                near = np.abs(w10 - self.d.microwave_frequency) < _DRIVE_ZONE * omega_m
                if self.dimension == 4 and self.tls.coupling > 0.0:
                    near |= (
                        np.abs(w10 - self.tls.omega_tls)
                        < _CROSS_ZONE * self.tls.coupling
                    )
                theta = np.where(near, cfg.theta_max, _THETA_RELAX * cfg.theta_max)
                # past the last transfer zone only escape-rate accumulation
                # matters for the survivors; relax the phase cap once more
                if np.any(near):
                    past = np.arange(mesh.size) > np.nonzero(near)[0][-1]
                    theta[past] *= _THETA_RELAX
                dt_theta = np.where(offdiag > 0.0, theta / scale, np.inf)
        dt_edge = np.minimum(np.minimum(dt_rate, dt_theta), cfg.dt_max)
        if self.frame == "lab":
            dt_edge = np.minimum(
                dt_edge, 2.0 * math.pi / (20.0 * d.microwave_frequency)
            )

        # per-cell step size from the tighter edge; even subdivision keeps
        # the fine grid exactly on mesh boundaries
        dt_cell = np.minimum(dt_edge[:-1], dt_edge[1:])
        width = np.diff(mesh)
        cell_time = width / v
        m_cell = np.maximum(1, np.ceil(cell_time / dt_cell).astype(np.int64))
        total = int(m_cell.sum())
        if total > cfg.step_ceiling:
            raise ConfigError(
                f"ramp grid needs {total} steps, above the ceiling "
                f"{cfg.step_ceiling}; check rates and dt caps"
            )

        cell_of = np.repeat(np.arange(m_cell.size), m_cell)
        first = np.concatenate(([0], np.cumsum(m_cell)))[:-1]
        k_in = np.arange(total) - np.repeat(first, m_cell) + 1
        frac = k_in / np.repeat(m_cell, m_cell)
        self.I_end = np.repeat(mesh[:-1], m_cell) + frac * np.repeat(width, m_cell)
        self.dt = np.repeat(cell_time / m_cell, m_cell)
        self.t_end = np.cumsum(self.dt)
        self.I_mid = self.I_end - 0.5 * v * self.dt
        self.t_mid = self.t_end - 0.5 * self.dt
        self.n_steps = total

        # per-step physics at the step midpoint
        self.rates = self._rates_at(self.I_mid)
        self.w10 = level_splitting(p, self.I_mid, "g")
        self.omega_m = d.microwave_amplitude * np.sqrt(
            1.0 / (2.0 * HBAR * self.w10 * p.capacitance)
        )
        if self.diagonal_only:
            # only the decay diagonal is integrated (see hamiltonian_chunk)
            self._scale = 0.5 * (
                self.rates[:, 0] + self.rates[:, 1:].max(axis=1)
            )
        else:
            self._scale = self._hamiltonian_scale(self.I_mid, self.rates)

        dim = self.dimension
        outflow = np.empty((total, dim))
        outflow[:, 0] = self.rates[:, 1]
        outflow[:, 1] = self.rates[:, 0] + self.rates[:, 2]
        if dim == 4:
            outflow[:, 2] = self.rates[:, 3]
            outflow[:, 3] = self.rates[:, 0] + self.rates[:, 4]
        self.outflow = outflow
        self.outflow_dt = outflow * self.dt[:, None]

    def channel_dt_row(self, n: int) -> np.ndarray:
        """Per-channel rate * dt at step n (built on demand: jumps are rare)."""
        r, dt = self.rates[n], self.dt[n]
        if self.dimension == 2:
            return np.array([r[1], r[2], r[0]]) * dt
        return np.array([r[1], r[2], r[3], r[4], r[0], r[0]]) * dt

    # -- propagators -----------------------------------------------------------

    def hamiltonian_chunk(self, lo: int, hi: int) -> np.ndarray:
        """Effective Hamiltonians (hi-lo, d, d) with the Hermitian diagonal
        centred on zero (a pure global-phase shift)."""
        dim = self.dimension
        m = hi - lo
        w10 = self.w10[lo:hi]
        om = self.omega_m[lo:hi]
        H = np.zeros((m, dim, dim), dtype=complex)

        if self.diagonal_only:
            # pure gauge: only the decay part survives (see __init__)
            decay = 0.5 * self.outflow[lo:hi]
            for k in range(dim):
                H[:, k, k] = -1j * decay[:, k]
            return H

        if self.frame == "rwa":
            drive = 0.5 * om
            delta = w10 - self.d.microwave_frequency
        else:
            drive = om * np.cos(self.d.microwave_frequency * self.t_mid[lo:hi])
            delta = w10

        if dim == 2:
            H[:, 0, 1] = drive
            H[:, 1, 0] = drive
            shift = 0.5 * delta
            H[:, 0, 0] = -shift
            H[:, 1, 1] = delta - shift
        else:
            if self.frame == "rwa":
                d_tls = self.tls.omega_tls - self.d.microwave_frequency
            else:
                d_tls = self.tls.omega_tls
            H[:, 0, 1] = drive
            H[:, 1, 0] = drive
            H[:, 2, 3] = drive
            H[:, 3, 2] = drive
            H[:, 1, 2] = self.tls.coupling
            H[:, 2, 1] = self.tls.coupling
            shift = 0.5 * (delta + d_tls)
            H[:, 0, 0] = -shift
            H[:, 1, 1] = delta - shift
            H[:, 2, 2] = d_tls - shift
            H[:, 3, 3] = delta + d_tls - shift

        decay = 0.5 * self.outflow[lo:hi]
        for k in range(dim):
            H[:, k, k] -= 1j * decay[:, k]
        return H

    def propagator_chunk(self, lo: int, hi: int) -> np.ndarray:
        """Transposed one-step propagators P^T for steps [lo, hi).

        Each step's map is 2^k classic RK4 substeps on the frozen linear
        system i dpsi/dt = H_eff psi, composed by repeated squaring of the
        degree-4 Taylor polynomial of exp(-i H_eff dt / 2^k).  k is chosen
        per step so the phase advance per substep stays below the accuracy
        target.  Trajectories advance as psi @ P^T.
        """
        H = self.hamiltonian_chunk(lo, hi)
        theta = self._scale[lo:hi] * self.dt[lo:hi]
        n_half = np.ceil(
            np.log2(np.maximum(theta / _THETA_SUBSTEP, 1.0))
        ).astype(np.int64)
        sub = (self.dt[lo:hi] / 2.0**n_half)[:, None, None]
        A = -1j * sub * H
        A2 = A @ A
        eye = np.eye(self.dimension, dtype=complex)
        P = eye + A + 0.5 * A2 + (1.0 / 6.0) * (A2 @ A) + (1.0 / 24.0) * (A2 @ A2)
        k_max = int(n_half.max()) if n_half.size else 0
        for k in range(k_max):
            doubled = n_half > k
            P[doubled] = P[doubled] @ P[doubled]
        return np.ascontiguousarray(np.transpose(P, (0, 2, 1)))


# ---------------------------------------------------------------------------
# Batched trajectory runner
# ---------------------------------------------------------------------------


def run_trajectories(
    p: JunctionParams,
    tls: Optional[TlsParams],
    d: BiasDrive,
    cfg: EngineConfig,
    init_flags: Sequence[int],
    stream_ids: Sequence[int],
    rates_fn: Optional[RatesFn] = None,
    grid: Optional[RampGrid] = None,
    collect_events: bool = True,
) -> list[SwitchRecord]:
    """Run one ramp per (init_flag, stream_id) pair, all sharing one grid.

    Every trajectory consumes exactly one uniform per step from its own
    counter-based stream, so results are independent of batch composition;
    records come back ordered like the inputs with ramp_index = stream_id.
    """
    if grid is None:
        grid = RampGrid(p, tls, d, cfg, rates_fn)
    dim = cfg.dimension
    init_flags = np.asarray(init_flags, dtype=int)
    stream_ids = np.asarray(stream_ids, dtype=int)
    if init_flags.shape != stream_ids.shape or init_flags.ndim != 1:
        raise ConfigError("init_flags and stream_ids must be 1-d and equal length")
    if dim == 2 and np.any(init_flags != 0):
        raise ConfigError("two-level runs must start with flag 0")
    n = init_flags.size

    keys = rng.stream_keys(cfg.master_seed, stream_ids)
    psi = np.zeros((n, dim), dtype=complex)
    start_state = np.where(init_flags == 0, 0, 2)
    psi[np.arange(n), start_state] = 1.0

    prev_norm2 = np.ones(n)
    alive = np.ones(n, dtype=bool)
    n_alive = n
    flags = init_flags.copy()

    records: list[Optional[SwitchRecord]] = [None] * n
    events: list[list[JumpEvent]] = [[] for _ in range(n)]
    n_relax = [0] * n

    relax_targets = RELAX_TARGETS_2 if dim == 2 else RELAX_TARGETS_4
    relax_flags = RELAX_FLAGS_2 if dim == 2 else RELAX_FLAGS_4
    relax_names = RELAX_CHANNELS_2 if dim == 2 else RELAX_CHANNELS_4
    tunnel_names = TUNNEL_CHANNELS_2 if dim == 2 else TUNNEL_CHANNELS_4
    tunnel_flags = TUNNEL_FLAGS_2 if dim == 2 else TUNNEL_FLAGS_4
    sources = np.array(_channel_sources(dim))

    golden = 0x9E3779B97F4A7C15
    tol = 1.0 + NORM_GROWTH_TOL

    step = 0
    total = grid.n_steps
    u_block = np.empty((0, n))
    u_block_start = 0
    while step < total and n_alive > 0:
        hi = min(step + _CHUNK, total)
        pt = grid.propagator_chunk(step, hi)
        # rescaling the amplitudes is decision-invariant (every comparison
        # is homogeneous in ||psi||^2); it keeps norms away from underflow
        live = prev_norm2 > 0.0
        scale = np.where(live, np.sqrt(prev_norm2), 1.0)
        psi /= scale[:, None]
        prev_norm2 = live.astype(float)
        for k in range(hi - step):
            nstep = step + k
            psi = psi @ pt[k]
            pops = psi.real**2 + psi.imag**2
            norm2 = pops.sum(axis=1)
            if np.any(norm2 > prev_norm2 * tol):
                raise StepSizeError(
                    f"norm increased at step {nstep}; dt caps too loose"
                )
            dp = pops @ grid.outflow_dt[nstep]

            if nstep >= u_block_start + u_block.shape[0]:
                u_block_start = nstep
                m = min(_U_BLOCK, total - nstep)
                with np.errstate(over="ignore"):
                    counters = np.arange(
                        nstep + 1, nstep + m + 1, dtype=np.uint64
                    ) * np.uint64(golden)
                    z = rng._mix(keys[None, :] + counters[:, None])
                u_block = (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
            u = u_block[nstep - u_block_start]

            fired = (u * norm2) < dp
            if fired.any():
                rows = np.nonzero(fired)[0]
                lhs = u[rows] * norm2[rows]
                contrib = pops[rows][:, sources] * grid.channel_dt_row(nstep)
                cum = np.cumsum(contrib, axis=1)
                ch = (lhs[:, None] >= cum).sum(axis=1)
                t_now = grid.t_end[nstep]
                i_now = grid.I_end[nstep]
                for row, c in zip(rows, ch):
                    c = int(c)
                    if c < dim:  # tunneling escape terminates the ramp
                        ev = JumpEvent("tunnel", tunnel_names[c], t_now, i_now)
                        events[row].append(ev)
                        records[row] = SwitchRecord(
                            ramp_index=int(stream_ids[row]),
                            switching_current=i_now,
                            flag_at_switch=tunnel_flags[c],
                            events=events[row] if collect_events else [ev],
                            n_relax_events=n_relax[row],
                        )
                        psi[row] = 0.0
                        norm2[row] = 0.0
                        alive[row] = False
                        n_alive -= 1
                    else:  # relaxation collapse
                        j = c - dim
                        ev = JumpEvent("relax", relax_names[j], t_now, i_now)
                        if collect_events:
                            events[row].append(ev)
                        n_relax[row] += 1
                        psi[row] = 0.0
                        psi[row, relax_targets[j]] = 1.0
                        norm2[row] = 1.0
                        flags[row] = relax_flags[j]
            prev_norm2 = norm2
            if n_alive == 0:
                break
        step = hi

    if n_alive > 0:
        raise ConfigError(
            f"{n_alive} trajectorie(s) never switched within the integration "
            "window (step ceiling reached); rates may be zero or the dt caps "
            "inconsistent"
        )
    return records  # type: ignore[return-value]


def run_ramp(
    p: JunctionParams,
    tls: Optional[TlsParams],
    d: BiasDrive,
    cfg: EngineConfig,
    init_flag: int = 0,
    stream_index: int = 0,
    rates_fn: Optional[RatesFn] = None,
) -> SwitchRecord:
    """Simulate a single bias ramp to its switching event."""
    return run_trajectories(
        p, tls, d, cfg, [init_flag], [stream_index], rates_fn=rates_fn
    )[0]


def sequence_variants(
    p: JunctionParams,
    tls: Optional[TlsParams],
    d: BiasDrive,
    cfg: EngineConfig,
    indices: Sequence[int],
    rates_fn: Optional[RatesFn] = None,
) -> tuple[list[SwitchRecord], list[SwitchRecord]]:
    """Both flag variants of the given ramp indices (stream = ramp index).

    A ramp's outcome depends only on its initial flag and its random
    stream, so consecutive-ramp chaining can be done after the fact; this
    is what makes telegraph sequences batchable and parallelizable without
    breaking the flag dependency.
    """
    idx = list(indices)
    rec0 = run_trajectories(
        p, tls, d, cfg, [0] * len(idx), idx, rates_fn=rates_fn
    )
    if cfg.dimension == 2:
        return rec0, []
    rec1 = run_trajectories(
        p, tls, d, cfg, [1] * len(idx), idx, rates_fn=rates_fn
    )
    return rec0, rec1


def fold_sequence(
    rec0: Sequence[SwitchRecord],
    rec1: Sequence[SwitchRecord],
    init_flag: int = 0,
) -> list[SwitchRecord]:
    """Chain ramp variants: ramp i+1 starts from ramp i's flag at switch."""
    out = []
    flag = init_flag
    for i in range(len(rec0)):
        rec = rec0[i] if flag == 0 else rec1[i]
        out.append(rec)
        flag = rec.flag_at_switch
    return out


def run_sequence(
    p: JunctionParams,
    tls: Optional[TlsParams],
    d: BiasDrive,
    cfg: EngineConfig,
    rates_fn: Optional[RatesFn] = None,
) -> list[SwitchRecord]:
    """Simulate cfg.ramps consecutive ramps with the TLS flag carried over.

    Ramp 0 starts from cfg.init_flag; ramp i+1 is initialized from the
    branch registered at ramp i's switching event.  The per-ramp random
    stream is (master_seed, ramp_index) regardless of the flag, so the
    result is bit-identical to strictly sequential execution.
    """
    indices = range(cfg.ramps)
    if cfg.dimension == 2:
        rec0, _ = sequence_variants(p, tls, d, cfg, indices, rates_fn)
        return rec0
    rec0, rec1 = sequence_variants(p, tls, d, cfg, indices, rates_fn)
    return fold_sequence(rec0, rec1, cfg.init_flag)


def run_ensemble(
    p: JunctionParams,
    tls: Optional[TlsParams],
    d: BiasDrive,
    cfg: EngineConfig,
    n_trajectories: int,
    first_index: int = 0,
    rates_fn: Optional[RatesFn] = None,
) -> list[SwitchRecord]:
    """n independent single ramps, all starting from flag 0.

    Trajectory k uses stream (master_seed, first_index + k); slicing the
    index range across workers reproduces the exact same records.
    """
    if n_trajectories < 1:
        raise ConfigError("n_trajectories must be >= 1")
    idx = list(range(first_index, first_index + n_trajectories))
    return run_trajectories(p, tls, d, cfg, [0] * len(idx), idx, rates_fn=rates_fn)


# ---------------------------------------------------------------------------
# Static-bias ensemble (fixed Hamiltonian): the unraveling-equivalence probe
# ---------------------------------------------------------------------------


def run_static_ensemble(
    H: np.ndarray,
    r: RateSet,
    cfg: EngineConfig,
    n_trajectories: int,
    t_final: float,
    n_checkpoints: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """Trajectory-averaged density matrices at fixed bias.

    Runs n quantum-jump trajectories under the static Hermitian H (rad/s)
    with the given rates and returns (times, rho) where rho[k] is the
    average of normalized projectors over trajectories still in the well
    (escaped trajectories contribute zero, so tr rho tracks survival).
    """
    dim = H.shape[0]
    if dim not in (2, 4):
        raise ConfigError("H must be 2x2 or 4x4")
    rates = channel_rates(r, dim)
    raw_sum = rates.sum()
    scale = np.linalg.norm(H) + rates.max()
    dt = min(cfg.dt_max, cfg.theta_max / scale if scale > 0 else np.inf)
    if raw_sum > 0:
        dt = min(dt, cfg.dt_rate_cap / raw_sum)
    n_steps = max(1, int(math.ceil(t_final / dt)))
    dt = t_final / n_steps

    outflow = 2.0 * decay_diagonal(r, dim)
    H_eff = H - 0.5j * np.diag(outflow)
    n_half = max(0, math.ceil(math.log2(max(scale * dt / _THETA_SUBSTEP, 1.0))))
    A = (-1j * dt / 2.0**n_half) * H_eff
    A2 = A @ A
    P = (
        np.eye(dim, dtype=complex)
        + A
        + 0.5 * A2
        + (1.0 / 6.0) * (A2 @ A)
        + (1.0 / 24.0) * (A2 @ A2)
    )
    for _ in range(n_half):
        P = P @ P
    PT = np.ascontiguousarray(P.T)

    sources = np.array(_channel_sources(dim))
    relax_targets = RELAX_TARGETS_2 if dim == 2 else RELAX_TARGETS_4
    channel_dt = rates * dt

    keys = rng.stream_keys(cfg.master_seed, np.arange(n_trajectories))
    psi = np.zeros((n_trajectories, dim), dtype=complex)
    psi[:, 0] = 1.0
    prev_norm2 = np.ones(n_trajectories)

    checkpoints = np.unique(
        np.round(np.linspace(1, n_steps, n_checkpoints)).astype(int)
    )
    times = checkpoints * dt
    rho_out = np.zeros((checkpoints.size, dim, dim), dtype=complex)

    golden = 0x9E3779B97F4A7C15
    mask64 = 0xFFFFFFFFFFFFFFFF
    next_cp = 0

    for nstep in range(n_steps):
        psi = psi @ PT
        pops = psi.real**2 + psi.imag**2
        norm2 = pops.sum(axis=1)
        if np.any(norm2 > prev_norm2 * (1.0 + NORM_GROWTH_TOL)):
            raise StepSizeError("norm increased during static evolution")
        dp = pops[:, sources] * channel_dt
        dp_tot = dp.sum(axis=1)

        counter = np.uint64(((nstep + 1) * golden) & mask64)
        with np.errstate(over="ignore"):
            u = (rng._mix(keys + counter) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        fired = (u * norm2) < dp_tot
        if fired.any():
            rows = np.nonzero(fired)[0]
            cum = np.cumsum(dp[rows], axis=1)
            ch = ((u[rows] * norm2[rows])[:, None] >= cum).sum(axis=1)
            for row, c in zip(rows, ch):
                c = int(c)
                if c < dim:
                    psi[row] = 0.0
                    norm2[row] = 0.0
                else:
                    psi[row] = 0.0
                    psi[row, relax_targets[c - dim]] = 1.0
                    norm2[row] = 1.0
        prev_norm2 = norm2

        if next_cp < checkpoints.size and nstep + 1 == checkpoints[next_cp]:
            safe = np.where(norm2 > 0.0, norm2, 1.0)
            unit = psi / np.sqrt(safe)[:, None]
            rho_out[next_cp] = np.einsum("ni,nj->ij", unit, unit.conj())
            rho_out[next_cp] /= n_trajectories
            next_cp += 1

    return times, rho_out
