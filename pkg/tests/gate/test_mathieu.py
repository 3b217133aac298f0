"""Test Mathieu solvers"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pyiongate.exceptions import (
    DegenerateParametersException,
    DomainException,
    GridResolutionException,
    InstabilityException,
)
from pyiongate.gate_api.mathieu import (
    FloquetPropagator,
    ModeFunction,
    _drive_coefficients,
    closed_form_c012,
    driven_solution,
    integrate_mathieu,
)

# xi = t for this r.f. frequency
RF = 2.0


class TestFloquet:
    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(0.05, 0.3), q=st.floats(0.0, 0.3))
    def test_wronskian_conservation(self, a, q):
        propagator = FloquetPropagator(a, q, RF)
        t = np.linspace(0.0, 100 * math.pi, 2001)
        v, vdot = propagator.mode(t)
        mode = ModeFunction(t=t, v=v, vdot=vdot, omega=propagator.omega, length=1.0, label="cm")
        np.testing.assert_allclose(mode.wronskian(), propagator.omega, rtol=1e-6)

    def test_matches_direct_integration(self):
        a, q = 0.1, 0.2
        propagator = FloquetPropagator(a, q, RF)
        xi = np.linspace(0.0, 10 * math.pi, 641)
        direct = integrate_mathieu(a, q, (1.0 + 0.0j, 1j * propagator.nu), xi)
        v, _ = propagator.mode(xi)
        np.testing.assert_allclose(v, direct[0], rtol=0, atol=1e-8)

    def test_harmonic_mode(self):
        propagator = FloquetPropagator(0.09, 0.0, RF)
        t = np.linspace(0.0, 20.0, 101)
        v, vdot = propagator.mode(t)
        np.testing.assert_allclose(v, np.exp(0.3j * t), atol=1e-9)
        np.testing.assert_allclose(vdot, 0.3j * np.exp(0.3j * t), atol=1e-9)

    def test_negative_times(self):
        propagator = FloquetPropagator(0.09, 0.0, RF)
        v, _ = propagator.mode(np.array([-7.5, -1.0]))
        np.testing.assert_allclose(v, np.exp(0.3j * np.array([-7.5, -1.0])), atol=1e-9)

    def test_unstable_parameters(self):
        with pytest.raises(InstabilityException):
            FloquetPropagator(-0.5, 0.1, RF)

    def test_restrict_resamples(self):
        propagator = FloquetPropagator(0.1, 0.2, RF)
        t = np.linspace(0.0, 5.0, 11)
        v, vdot = propagator.mode(t)
        mode = ModeFunction(t=t, v=v, vdot=vdot, omega=propagator.omega, length=1.0, label="r", propagator=propagator)
        finer = mode.restrict(np.linspace(0.0, 5.0, 21))
        np.testing.assert_allclose(finer.v[::2], v)


class TestPublishedMode:
    @pytest.fixture(scope="class")
    def samples(self, fig_model):
        """Center-of-mass mode over two secular periods, 64 samples per r.f. period"""
        duration = 2 * fig_model.secular_period
        count = 64 * math.ceil(duration / fig_model.trap.rf_period)
        t = np.linspace(0.0, duration, count + 1)
        forward, _ = fig_model.propagators[0].mode(t)
        backward, _ = fig_model.propagators[0].mode(-t)
        return forward, backward

    def test_peak_modulus(self, samples):
        forward, _ = samples
        assert 1.0 < np.max(np.abs(forward)) < 1.5

    def test_parity(self, samples):
        forward, backward = samples
        np.testing.assert_allclose(backward.real, forward.real, atol=1e-7)
        np.testing.assert_allclose(backward.imag, -forward.imag, atol=1e-7)


class TestIntegration:
    def test_coarse_grid(self):
        with pytest.raises(GridResolutionException):
            integrate_mathieu(0.1, 0.1, (1.0, 0.0), np.linspace(0.0, 10.0, 20))

    def test_decreasing_grid(self):
        with pytest.raises(DomainException):
            integrate_mathieu(0.1, 0.1, (1.0, 0.0), np.array([1.0, 0.5]))


class TestDrivenSolution:
    def test_published_coefficient_ratios(self):
        drive = driven_solution(-0.0388, 0.283, 1.0)
        c0, c1, c2 = drive.coefficients[:3]
        assert c1 / c0 == pytest.approx(-0.14, abs=0.005)
        assert c2 / c0 == pytest.approx(0.0025, abs=0.0003)

    def test_residual(self):
        f0 = 3.5e-9
        drive = driven_solution(-0.0388, 0.283, f0)
        xi = np.linspace(0.0, math.pi, 257)
        assert np.max(np.abs(drive.residual(xi))) < 1e-8 * f0

    def test_undriven_limit(self):
        drive = driven_solution(0.1, 0.0, 1.0)
        assert drive.coefficients[0] == pytest.approx(10.0, rel=1e-10)
        np.testing.assert_allclose(drive.coefficients[1:], 0.0, atol=1e-10)

    def test_closed_form_matches_truncation(self):
        for a, q in ((-0.0388, 0.283), (0.1, 0.05), (0.3, 0.4)):
            np.testing.assert_allclose(closed_form_c012(a, q), _drive_coefficients(a, q, 2), rtol=1e-12)

    def test_closed_form_against_deep_truncation(self):
        c0, _, _ = closed_form_c012(0.1, 0.05)
        assert c0 == pytest.approx(driven_solution(0.1, 0.05, 1.0).coefficients[0], rel=1e-4)

    def test_closed_form_degenerate(self):
        with pytest.raises(DegenerateParametersException):
            closed_form_c012(0.0, 0.0)

    @pytest.mark.parametrize("truncation", [1, 2])
    def test_shallow_truncation(self, truncation):
        with pytest.raises(DomainException, match="at least 3"):
            driven_solution(0.1, 0.1, 1.0, truncation=truncation)

    @pytest.mark.parametrize("truncation", [4, 5, 8])
    def test_truncation_converges(self, truncation):
        shallow = driven_solution(-0.0388, 0.283, 1.0, truncation=truncation).coefficients
        deep = driven_solution(-0.0388, 0.283, 1.0, truncation=truncation + 4).coefficients
        kept = truncation - 1
        np.testing.assert_allclose(shallow[:kept], deep[:kept], rtol=1e-10)

    def test_periodic_solution_of_the_ode(self):
        a, q, f0 = 0.1, 0.2, 1.0
        drive = driven_solution(a, q, f0)
        xi = np.linspace(0.0, 4 * math.pi, 257)
        direct = integrate_mathieu(a, q, (drive.displacement_xi(0.0), 0.0), xi, f0=f0)
        np.testing.assert_allclose(direct[0], drive.displacement_xi(xi), rtol=1e-7)

    def test_time_domain_needs_frequency(self):
        with pytest.raises(DomainException):
            driven_solution(0.1, 0.1, 1.0).displacement(np.array([0.0]))
