"""Test displacement and phase integrals"""

import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from pyiongate.exceptions import DomainException, GridResolutionException
from pyiongate.gate_api.common import time_grid
from pyiongate.gate_api.dynamics import (
    MicromotionPhase,
    PulseSchedule,
    accumulated_phase,
    chi,
    displacement,
    gate_integrals,
    segment_moments,
)
from pyiongate.gate_api.mathieu import ModeFunction

STATIC = MicromotionPhase.static()


def _harmonic(duration, omegas=(1.0, 3.0), segments=1, samples=256):
    t = time_grid(duration, omegas, segments=segments, samples_per_secular_period=samples)
    return tuple(ModeFunction.harmonic(t, omega, 1.0, label) for omega, label in zip(omegas, ("cm", "r")))


def _closed_form(detuning, omega, duration):
    """integral_0^tau sin(mu t) exp(i omega t) dt"""

    def term(frequency):
        return (np.exp(1j * frequency * duration) - 1) / (1j * frequency)

    return (term(omega + detuning) - term(omega - detuning)) / 2j


class TestPulseSchedule:
    def test_amplitude_lookup(self):
        schedule = PulseSchedule(duration=3.0, detuning=1.0, amplitudes=[1.0, 2.0, 3.0])
        np.testing.assert_array_equal(schedule.amplitude([0.0, 0.99, 1.0, 2.5, 3.0]), [1, 1, 2, 3, 3])

    def test_boundaries_and_peak(self):
        schedule = PulseSchedule(duration=3.0, detuning=1.0, amplitudes=(1.0, -4.0, 3.0))
        np.testing.assert_allclose(schedule.boundaries(), [0, 1, 2, 3])
        assert schedule.max_rabi == 4.0

    def test_scalar_amplitude(self):
        assert PulseSchedule(duration=1.0, detuning=1.0, amplitudes=2.5).amplitudes == (2.5,)

    def test_scaled(self):
        schedule = PulseSchedule(duration=1.0, detuning=1.0, amplitudes=(1.0, 2.0)).scaled(3.0)
        assert schedule.amplitudes == (3.0, 6.0)

    def test_frozen(self):
        schedule = PulseSchedule(duration=1.0, detuning=1.0, amplitudes=(1.0,))
        with pytest.raises(ValueError):
            schedule.duration = 2.0

    def test_positive_duration(self):
        with pytest.raises(ValueError):
            PulseSchedule(duration=0.0, detuning=1.0, amplitudes=(1.0,))


class TestForce:
    def test_outside_gate_window(self):
        schedule = PulseSchedule(duration=1.0, detuning=1.0, amplitudes=(1.0,))
        with pytest.raises(DomainException, match="outside the gate window"):
            chi(np.array([0.5, 1.5]), 1, schedule, STATIC)

    @pytest.mark.parametrize("ion", [0, 3])
    def test_invalid_ion(self, ion):
        schedule = PulseSchedule(duration=1.0, detuning=1.0, amplitudes=(1.0,), phases=(0.0, 0.5))
        with pytest.raises(DomainException, match="1 or 2"):
            chi(0.5, ion, schedule, STATIC)

    def test_micromotion_opposite_on_the_ions(self, compact_model):
        schedule = PulseSchedule(duration=1e-6, detuning=0.0, amplitudes=(1.0,))
        micromotion = compact_model.micromotion_phase()
        t = np.linspace(0.0, 1e-6, 11)
        np.testing.assert_allclose(chi(t, 1, schedule, micromotion), np.sin(micromotion(t)), atol=1e-12)
        np.testing.assert_allclose(chi(t, 2, schedule, micromotion), -np.sin(micromotion(t)), atol=1e-12)

    def test_micromotion_period_average(self, compact_model):
        micromotion = compact_model.micromotion_phase()
        period = compact_model.trap.rf_period
        t = np.arange(512) / 512 * period
        assert np.mean(micromotion(t)) == pytest.approx(micromotion.mean, rel=1e-10)


class TestStaticIntegrals:
    def test_displacement_closed_form(self):
        duration, detuning = 7.3, 0.9
        schedule = PulseSchedule(duration=duration, detuning=detuning, amplitudes=(0.4,))
        modes = _harmonic(duration, samples=1024)
        for mode, eta in zip(modes, (0.1, 0.07)):
            alphas = displacement(schedule, mode, eta, STATIC)
            expected = 1j * eta * 0.4 * _closed_form(detuning, mode.omega, duration)
            assert alphas[0] == pytest.approx(expected, rel=1e-9)
            assert alphas[1] == pytest.approx(expected, rel=1e-9)

    def test_phase_against_double_quadrature(self):
        duration, detuning, eta = 2 * math.pi, 0.9, 0.2
        schedule = PulseSchedule(duration=duration, detuning=detuning, amplitudes=(1.0,), phases=(0.0, 0.3))
        mode = _harmonic(duration)[0]
        gamma = accumulated_phase(schedule, mode, eta, STATIC)

        def x(t, ion):
            return math.sin(detuning * t + schedule.phases[ion])

        def integrand(t2, t1):
            symmetric = x(t1, 0) * x(t2, 1) + x(t1, 1) * x(t2, 0)
            return symmetric * math.sin(mode.omega * (t2 - t1))

        expected, _ = dblquad(integrand, 0.0, duration, 0.0, lambda t1: t1, epsabs=1e-12, epsrel=1e-12)
        assert gamma == pytest.approx(eta**2 * expected, rel=1e-6)

    def test_no_micromotion_matches_zero_wave_vector(self, compact_model):
        schedule = PulseSchedule(
            duration=compact_model.secular_period, detuning=compact_model.detuning, amplitudes=(1e5, 2e5)
        )
        modes = compact_model.modes(compact_model.grid(schedule.duration, 2), static=True)
        quiet = MicromotionPhase(drive=compact_model.equilibrium.drive, wave_vector=0.0)
        first = gate_integrals(schedule, modes, compact_model.etas, STATIC)
        second = gate_integrals(schedule, modes, compact_model.etas, quiet)
        np.testing.assert_allclose(first.alphas, second.alphas, rtol=1e-12)
        assert first.gammas == pytest.approx(second.gammas, rel=1e-12)

    def test_equal_phases_cancel_relative_branch(self):
        duration = 5.0
        schedule = PulseSchedule(duration=duration, detuning=0.8, amplitudes=(1.0, 0.5))
        integrals = gate_integrals(schedule, _harmonic(duration, segments=2), (0.1, 0.1), STATIC)
        assert integrals.branch_displacement(1, 1, 1) == pytest.approx(0.0, abs=1e-15)
        assert integrals.branch_displacement(0, 1, 1) == pytest.approx(2 * integrals.alphas[0, 0])


class TestScaling:
    def test_linear_and_quadratic(self, compact_model):
        duration = 2 * compact_model.secular_period
        base = PulseSchedule(duration=duration, detuning=compact_model.detuning, amplitudes=(1e5, -3e5, 2e5))
        modes = compact_model.modes(compact_model.grid(duration, 3))
        micromotion = compact_model.micromotion_phase()
        first = gate_integrals(base, modes, compact_model.etas, micromotion)
        second = gate_integrals(base.scaled(2.5), modes, compact_model.etas, micromotion)
        np.testing.assert_allclose(second.alphas, 2.5 * first.alphas, rtol=1e-12)
        np.testing.assert_allclose(second.gammas, 6.25 * np.asarray(first.gammas), rtol=1e-12)

    def test_segment_moments_sum_to_displacement(self, compact_model):
        duration = 2 * compact_model.secular_period
        schedule = PulseSchedule(duration=duration, detuning=compact_model.detuning, amplitudes=(1e5, 3e5))
        mode = compact_model.modes(compact_model.grid(duration, 2))[0]
        micromotion = compact_model.micromotion_phase()
        moments = segment_moments(schedule, mode, micromotion)
        alphas = displacement(schedule, mode, compact_model.etas[0], micromotion)
        expected = 1j * compact_model.etas[0] * moments.moments @ np.asarray(schedule.amplitudes)
        np.testing.assert_allclose(alphas, expected, rtol=1e-12)


class TestSymmetry:
    def test_swapping_ions(self, compact_model):
        duration = 2 * compact_model.secular_period
        schedule = PulseSchedule(
            duration=duration, detuning=compact_model.detuning, amplitudes=(1e5, 2e5), phases=(0.2, 0.7)
        )
        swapped = schedule.model_copy(update={"phases": (0.7, 0.2)})
        micromotion = compact_model.micromotion_phase()
        mirrored = MicromotionPhase(drive=micromotion.drive, wave_vector=-micromotion.wave_vector)
        modes = compact_model.modes(compact_model.grid(duration, 2))
        first = gate_integrals(schedule, modes, compact_model.etas, micromotion)
        second = gate_integrals(swapped, modes, compact_model.etas, mirrored)
        scale = first.max_displacement
        np.testing.assert_allclose(second.alphas, first.alphas[:, ::-1], rtol=1e-12, atol=1e-14 * scale)
        assert second.gammas == pytest.approx(first.gammas, rel=1e-12)

    @pytest.mark.parametrize("static", [True, False])
    def test_half_turn_of_both_laser_phases(self, compact_model, static):
        duration = 2 * compact_model.secular_period
        schedule = PulseSchedule(
            duration=duration, detuning=compact_model.detuning, amplitudes=(2e5, -1e5, 3e5), phases=(0.3, 0.3)
        )
        shifted = schedule.model_copy(update={"phases": (0.3 + math.pi, 0.3 + math.pi)})
        first = compact_model.integrals(schedule, static=static)
        second = compact_model.integrals(shifted, static=static)
        np.testing.assert_allclose(second.alphas, -first.alphas, rtol=1e-9, atol=1e-12 * first.max_displacement)
        assert second.gammas == pytest.approx(first.gammas, rel=1e-9)
        fidelity = compact_model.fidelity(schedule, static=static).fidelity
        assert compact_model.fidelity(shifted, static=static).fidelity == pytest.approx(fidelity, abs=1e-10)


class TestGridChecks:
    def test_grid_must_end_at_gate_time(self):
        schedule = PulseSchedule(duration=5.0, detuning=0.8, amplitudes=(1.0,))
        with pytest.raises(GridResolutionException, match="gate lasts"):
            displacement(schedule, _harmonic(4.0)[0], 0.1, STATIC)

    def test_coarse_grid(self):
        schedule = PulseSchedule(duration=5.0, detuning=0.8, amplitudes=(1.0,))
        t = np.linspace(0.0, 5.0, 33)
        with pytest.raises(GridResolutionException, match="secular period"):
            displacement(schedule, ModeFunction.harmonic(t, 3.0, 1.0, "r"), 0.1, STATIC)

    def test_modes_on_different_grids(self):
        schedule = PulseSchedule(duration=5.0, detuning=0.8, amplitudes=(1.0,))
        cm = _harmonic(5.0)[0]
        rel = ModeFunction.harmonic(np.linspace(0.0, 5.0, cm.t.size + 4), 3.0, 1.0, "r")
        with pytest.raises(GridResolutionException, match="same grid"):
            gate_integrals(schedule, (cm, rel), (0.1, 0.1), STATIC)
