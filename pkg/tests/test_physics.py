"""Closed-form junction physics against independently recomputed values."""

import math

import numpy as np
import pytest

from jjswitch.constants import HBAR, K_BOLTZMANN, PHI0, R_QUANTUM
from jjswitch.errors import NoBracketError, PhysicsDomainError
from jjswitch.physics import (
    BiasDrive,
    JunctionParams,
    RateSet,
    barrier_height,
    barrier_ratio,
    effective_critical_current,
    level_splitting,
    microwave_amplitude_for_rabi,
    plasma_frequency,
    rabi_frequency,
    rate_set,
    relaxation_rate,
    resonance_current,
    saturation_rate,
    tunneling_rate,
    two_level_bias_limit,
)

from conftest import C, ETA_DEFAULT, I0, R, T_BASE, TWO_PI

# independent constants for oracle recomputation (CODATA literals, not the
# package's derived values)
PHI0_LIT = 2.067833848e-15
HBAR_LIT = 1.054571817e-34


def bisect_splitting(p, target, lo, hi, iters=200):
    """Independent bisection oracle on the level splitting."""
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if level_splitting(p, mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestPlasmaFrequency:
    def test_paper_point(self, junction):
        # direct evaluation with literal constants as the oracle
        expected = (
            2.0**0.25
            * math.sqrt(TWO_PI * I0 / (PHI0_LIT * C))
            * 0.01**0.25
        )
        got = plasma_frequency(junction, 0.99 * I0)
        assert got == pytest.approx(expected, rel=1e-9)
        assert got / TWO_PI == pytest.approx(9.9e9, rel=0.01)

    def test_vanishing_at_critical_current(self, junction):
        eps = 1e-12
        assert plasma_frequency(junction, I0 * (1 - eps)) < 1e-3 * plasma_frequency(
            junction, 0.0
        )
        with pytest.raises(PhysicsDomainError):
            plasma_frequency(junction, I0)

    def test_capacitance_scaling(self, junction):
        quadrupled = JunctionParams(I0, 4 * C, R, T_BASE)
        i_dc = 0.95 * I0
        assert plasma_frequency(quadrupled, i_dc) == pytest.approx(
            plasma_frequency(junction, i_dc) / 2.0, rel=1e-12
        )

    def test_branch_uses_suppressed_critical_current(self, junction_tls):
        i_dc = 0.95 * I0
        wg = plasma_frequency(junction_tls, i_dc, "g")
        we = plasma_frequency(junction_tls, i_dc, "e")
        assert we < wg


class TestBarrierHeight:
    def test_paper_point(self, junction):
        expected = (2.0 * math.sqrt(2.0) * I0 * PHI0_LIT / (3.0 * math.pi)) * 0.01**1.5
        got = barrier_height(junction, 0.99 * I0)
        assert got == pytest.approx(expected, rel=1e-9)
        assert got == pytest.approx(2.23e-23, rel=0.005)

    def test_zero_bias_closed_form(self, junction):
        assert barrier_height(junction, 0.0) == pytest.approx(
            2.0 * math.sqrt(2.0) * I0 * PHI0 / (3.0 * math.pi), rel=1e-14
        )

    def test_vanishing_limit(self, junction):
        assert barrier_height(junction, I0 * (1 - 1e-12)) < 1e-15 * barrier_height(
            junction, 0.0
        )


class TestLevelSplitting:
    def test_resonance_neighbourhood(self, junction):
        # 35.6 uA sits close to the 9.02 GHz drive of the reference setup
        w10 = level_splitting(junction, 35.6e-6)
        assert w10 / TWO_PI == pytest.approx(9.0e9, abs=0.05e9)

    def test_below_plasma_frequency(self, junction):
        for frac in (0.0, 0.5, 0.9, 0.99, 0.992):
            i_dc = frac * I0
            assert level_splitting(junction, i_dc) < plasma_frequency(junction, i_dc)

    def test_strictly_decreasing(self, junction):
        grid = np.linspace(0.0, two_level_bias_limit(junction) * 0.99999, 1000)
        w = np.asarray(level_splitting(junction, grid))
        assert np.all(np.diff(w) < 0)

    def test_domain_error_when_well_too_shallow(self, junction):
        beyond = two_level_bias_limit(junction) * (1 + 1e-7)
        with pytest.raises(PhysicsDomainError):
            level_splitting(junction, beyond)


class TestResonanceCurrent:
    def test_drive_resonance_location(self, junction):
        i_res = resonance_current(junction, TWO_PI * 9.02e9)
        assert i_res == pytest.approx(35.6e-6, abs=0.05e-6)
        oracle = bisect_splitting(junction, TWO_PI * 9.02e9, 0.0, 35.8e-6)
        assert i_res == pytest.approx(oracle, rel=1e-9)

    def test_round_trip(self, junction):
        for f in (8.7e9, 9.02e9, 9.5e9):
            i_res = resonance_current(junction, TWO_PI * f)
            assert level_splitting(junction, i_res) == pytest.approx(
                TWO_PI * f, rel=1e-9
            )

    def test_fixed_point(self, junction):
        i_dc = 35.5e-6
        target = level_splitting(junction, i_dc)
        assert resonance_current(junction, target) == pytest.approx(i_dc, rel=1e-10)

    def test_lower_frequency_at_larger_current(self, junction):
        assert resonance_current(junction, TWO_PI * 8.7e9) > resonance_current(
            junction, TWO_PI * 9.02e9
        )

    def test_no_bracket(self, junction):
        with pytest.raises(NoBracketError):
            resonance_current(junction, 1.01 * level_splitting(junction, 0.0))
        with pytest.raises(NoBracketError):
            resonance_current(junction, -1.0)


class TestRelaxationRate:
    def test_zero_temperature_closure(self):
        p = JunctionParams(I0, C, R, temperature=0.0)
        got = relaxation_rate(p, 35.6e-6)
        assert abs(got * R * C - 1.0) < 1e-12

    def test_base_temperature_nearly_identical(self, junction):
        # hbar*w10/kB ~ 0.43 K >> 18 mK: thermal factor within 1e-6
        cold = JunctionParams(I0, C, R, temperature=0.0)
        assert relaxation_rate(junction, 35.6e-6) == pytest.approx(
            relaxation_rate(cold, 35.6e-6), rel=1e-6
        )

    def test_resistance_inversion_for_paper_rate(self, junction):
        # gamma10 = 0.6 /us requires R = 1/(gamma10 C) ~ 417 kOhm
        r_needed = 1.0 / (0.6e6 * C)
        assert r_needed == pytest.approx(416.67e3, rel=1e-3)
        p = JunctionParams(I0, C, r_needed, T_BASE)
        assert relaxation_rate(p, 35.6e-6) == pytest.approx(0.6e6, rel=1e-6)

    def test_inverse_resistance_scaling(self, junction):
        doubled = JunctionParams(I0, C, 2 * R, T_BASE)
        assert relaxation_rate(doubled, 35.5e-6) == pytest.approx(
            relaxation_rate(junction, 35.5e-6) / 2.0, rel=1e-12
        )

    def test_thermal_factor_grows_when_hot(self, junction):
        hot = JunctionParams(I0, C, R, temperature=1.0)
        assert relaxation_rate(hot, 35.5e-6) > relaxation_rate(junction, 35.5e-6)


class TestTunnelingRate:
    def test_reference_magnitude(self, junction):
        i_dc = 35.6e-6
        assert barrier_ratio(junction, i_dc) == pytest.approx(2.72, abs=0.05)
        rate = tunneling_rate(junction, i_dc, 0)
        assert 1e3 < rate < 1e4

    def test_modes_agree_within_factor_two(self, junction):
        from scipy.optimize import brentq

        for u_target in (2.0, 3.0, 5.0, 8.0, 10.0):
            i_at = brentq(
                lambda i: barrier_ratio(junction, i) - u_target, 0.0, 0.9999 * I0
            )
            analytic = tunneling_rate(junction, i_at, 0, "g", "analytic")
            quadrature = tunneling_rate(junction, i_at, 0, "g", "quadrature")
            assert 0.5 < analytic / quadrature < 2.0

    def test_level_ratio(self, junction):
        i_dc = 35.6e-6
        g0 = tunneling_rate(junction, i_dc, 0)
        g1 = tunneling_rate(junction, i_dc, 1)
        assert 3e2 < g1 / g0 < 4e3

    def test_deep_barrier_suppression(self, junction):
        assert tunneling_rate(junction, 0.5 * I0, 0) < 1e-200

    def test_saturation_cap(self, junction):
        # level-1 barrier gone: finite attempt-frequency cap
        i_high = I0 * (1 - 1e-4)
        cap = saturation_rate(junction)
        assert tunneling_rate(junction, i_high, 1) == pytest.approx(cap, rel=1e-9)

    def test_strictly_increasing_in_bias(self, junction):
        # below u ~ 100 barrier quanta the rate underflows float64 to an
        # exact 0, so strictness is asserted on the representable range
        k_edge = (2.0 * math.sqrt(2.0) * I0 * PHI0 / (3 * math.pi)) / (
            HBAR * 2.0**0.25 * math.sqrt(TWO_PI * I0 / (PHI0 * C))
        )
        eps_at = lambda u: (u / k_edge) ** 0.8
        grid = np.linspace(I0 * (1 - eps_at(80.0)), I0 * (1 - 1e-7), 1000)
        g0 = np.asarray(tunneling_rate(junction, grid, 0))
        assert np.all(np.diff(g0) > 0)
        # level 1: additionally stop where its barrier is gone (rate capped)
        grid1 = np.linspace(
            I0 * (1 - eps_at(80.0)), I0 * (1 - 1.01 * eps_at(1.0)), 1000
        )
        g1 = np.asarray(tunneling_rate(junction, grid1, 1))
        assert np.all(np.diff(g1) > 0)

    def test_quadrature_scalar_only(self, junction):
        with pytest.raises(PhysicsDomainError):
            tunneling_rate(junction, np.array([35.5e-6]), 0, "g", "quadrature")

    def test_monotone_spectra(self, junction):
        grid = np.linspace(0.0, two_level_bias_limit(junction) * 0.99999, 1000)
        wp = np.asarray(plasma_frequency(junction, grid))
        du = np.asarray(barrier_height(junction, grid))
        assert np.all(np.diff(wp) < 0)
        assert np.all(np.diff(du) < 0)


class TestRateSet:
    def test_composition_matches_components(self, junction_tls):
        i_dc = 35.55e-6
        r = rate_set(junction_tls, i_dc)
        assert r.gamma10 == relaxation_rate(junction_tls, i_dc)
        assert r.tunnel_0g == tunneling_rate(junction_tls, i_dc, 0, "g")
        assert r.tunnel_1g == tunneling_rate(junction_tls, i_dc, 1, "g")
        assert r.tunnel_0e == tunneling_rate(junction_tls, i_dc, 0, "e")
        assert r.tunnel_1e == tunneling_rate(junction_tls, i_dc, 1, "e")

    def test_branch_symmetry_without_suppression(self, junction):
        r = rate_set(junction, 35.55e-6)
        assert r.tunnel_0e == r.tunnel_0g
        assert r.tunnel_1e == r.tunnel_1g

    def test_excited_branch_escapes_faster(self, junction_tls):
        r = rate_set(junction_tls, 35.55e-6)
        assert r.tunnel_0e > r.tunnel_0g
        assert r.tunnel_1e > r.tunnel_1g
        assert r.tunnel_1g > r.tunnel_0g
        assert r.tunnel_1e > r.tunnel_0e

    def test_negative_rate_rejected(self):
        with pytest.raises(PhysicsDomainError):
            RateSet(-1.0, 0, 0, 0, 0)


class TestRabiFrequency:
    def test_zero_amplitude(self, junction):
        assert rabi_frequency(junction, 0.0, 35.5e-6) == 0.0

    def test_paper_inversion(self, junction):
        i_res = resonance_current(junction, TWO_PI * 9.02e9)
        i_uw = microwave_amplitude_for_rabi(junction, TWO_PI * 10e6, i_res)
        assert i_uw == pytest.approx(0.43e-9, rel=0.02)
        # forward evaluation closes the loop
        assert rabi_frequency(junction, i_uw, i_res) == pytest.approx(
            TWO_PI * 10e6, rel=1e-12
        )

    def test_exact_linearity(self, junction):
        i_dc = 35.5e-6
        base = rabi_frequency(junction, 1e-10, i_dc)
        for k in (2.0, 5.0, 11.0):
            assert rabi_frequency(junction, k * 1e-10, i_dc) == pytest.approx(
                k * base, rel=1e-14
            )


class TestParameterValidation:
    def test_invariants(self):
        with pytest.raises(PhysicsDomainError):
            JunctionParams(-1e-6, C, R)
        with pytest.raises(PhysicsDomainError):
            JunctionParams(I0, C, R, tls_critical_suppression=0.2)
        with pytest.raises(PhysicsDomainError):
            BiasDrive(35e-6, -1.0, 0.0, 1e9)
        assert effective_critical_current(
            JunctionParams(I0, C, R, tls_critical_suppression=0.01), "e"
        ) == pytest.approx(I0 * 0.99, rel=1e-14)
