"""Test trap parameters and equilibrium"""

import math

import pytest

from pyiongate.constants import CODATA2018
from pyiongate.exceptions import ConfigurationException, InstabilityException
from pyiongate.gate_api.mathieu import characteristic_exponent
from pyiongate.gate_api.trap import (
    MathieuParameters,
    TrapConfiguration,
    equilibrium_separation,
    lamb_dicke_parameters,
    mathieu_params,
    pseudopotential_frequency,
    secular_frequency,
    static_separation,
)

MHZ = 2 * math.pi * 1e6


def _trap(**update) -> TrapConfiguration:
    values = dict(
        dc_voltage=21.0,
        ac_voltage=300.0,
        electrode_size=200e-6,
        rf_frequency=240 * MHZ,
        ion_mass=9 * CODATA2018.u,
        wave_vector=8e6,
        equilibrium="pseudopotential",
    )
    values.update(update)
    return TrapConfiguration(**values)


class TestMathieuParameters:
    def test_published_q(self):
        assert mathieu_params(_trap(), "axial-cm").q == pytest.approx(0.283, abs=0.002)

    def test_published_a_cm(self):
        assert mathieu_params(_trap(), "axial-cm").a == pytest.approx(-0.0396, abs=2e-4)

    def test_zero_dc_voltage(self):
        assert mathieu_params(_trap(dc_voltage=0.0), "axial-cm", exponent=False).a == 0.0

    def test_transverse_signs(self):
        params = mathieu_params(_trap(), "transverse", exponent=False)
        axial = mathieu_params(_trap(), "axial-cm", exponent=False)
        assert params.a == pytest.approx(-axial.a / 2)
        assert params.q == pytest.approx(-axial.q / 2)

    def test_relative_axis_needs_separation(self):
        with pytest.raises(ConfigurationException, match="positive ion separation"):
            mathieu_params(_trap(), "axial-rel")

    def test_drive_only_on_relative_axis(self):
        with pytest.raises(ValueError, match="relative axial mode"):
            MathieuParameters(a=0.1, q=0.1, f0=1.0, axis="axial-cm", rf_frequency=1.0, ion_mass=1.0)


class TestSecularFrequencies:
    def test_published_frequencies(self, fig_model):
        assert fig_model.omega_cm / MHZ == pytest.approx(0.965, rel=0.02)
        assert fig_model.omega_r / MHZ == pytest.approx(3.62, rel=0.02)
        assert fig_model.omega_x / MHZ == pytest.approx(20.8, rel=0.02)

    def test_characteristic_exponent(self, fig_model):
        assert fig_model.cm.omega / (fig_model.trap.rf_frequency / 2) == pytest.approx(0.00804, rel=0.02)

    def test_harmonic_limit(self):
        params = MathieuParameters(a=0.04, q=0.0, axis="axial-cm", rf_frequency=2.0, ion_mass=1.0)
        assert secular_frequency(params) == pytest.approx(0.2, rel=1e-10)

    def test_half_exponent(self):
        assert characteristic_exponent(0.25, 0.0).nu == pytest.approx(0.5, rel=1e-10)

    def test_resonance_boundary_is_stable(self):
        result = characteristic_exponent(1.0, 0.0)
        assert abs(result.trace) == pytest.approx(2.0, abs=1e-9)
        assert result.stable

    def test_unstable_axis(self):
        params = MathieuParameters(a=-0.4, q=2.8, axis="axial-cm", rf_frequency=1.0, ion_mass=1.0)
        with pytest.raises(InstabilityException, match="unstable") as err:
            secular_frequency(params)
        assert abs(err.value.trace) > 2

    def test_pseudopotential_estimate(self):
        params = MathieuParameters(a=0.01, q=0.2, axis="axial-cm", rf_frequency=2.0, ion_mass=1.0)
        assert pseudopotential_frequency(params) == pytest.approx(math.sqrt(0.03))


class TestEquilibrium:
    def test_published_relative_parameter(self, fig_model):
        assert fig_model.rel.a == pytest.approx(-0.0388, abs=0.0010)
        assert fig_model.rel.q == pytest.approx(0.283, abs=0.002)

    def test_published_drive_coefficients(self, fig_model):
        c0, c1, c2 = fig_model.equilibrium.drive.coefficients[:3]
        assert c1 / c0 == pytest.approx(-0.14, abs=0.005)
        assert c2 / c0 == pytest.approx(0.0025, abs=0.0003)
        assert c0 == pytest.approx(1132.8, rel=0.05)

    def test_self_consistent_converges_quickly(self):
        result = equilibrium_separation(_trap(), method="self-consistent")
        assert result.iterations <= 10
        assert result.residual < 1e-10
        assert result.separation == pytest.approx(result.drive.mean, rel=1e-10)

    def test_pseudopotential_reports_mismatch(self):
        result = equilibrium_separation(_trap(), method="pseudopotential")
        assert result.method == "pseudopotential"
        assert result.iterations == 0
        assert result.residual == pytest.approx(abs(result.separation - result.drive.mean) / result.separation)
        assert result.residual > 1e-3

    def test_static_limit(self):
        trap = _trap(dc_voltage=-0.1, ac_voltage=1e-9, rf_frequency=10 * MHZ)
        a = mathieu_params(trap, "axial-cm", exponent=False).a
        omega = math.sqrt(a) * trap.rf_frequency / 2
        result = equilibrium_separation(trap, method="self-consistent")
        assert result.separation == pytest.approx(static_separation(omega, trap.ion_mass), rel=1e-8)

    def test_unstable_voltage(self):
        with pytest.raises(InstabilityException, match="unstable"):
            equilibrium_separation(_trap(ac_voltage=3000.0))


class TestLambDicke:
    def test_published_values(self, fig_model):
        eta_cm, eta_r = fig_model.etas
        assert eta_cm == pytest.approx(0.12, rel=0.25)
        assert eta_r == pytest.approx(0.09, rel=0.25)

    def test_no_wave_vector(self):
        assert lamb_dicke_parameters(_trap(wave_vector=0.0), 1e6, 3e6) == (0.0, 0.0)

    def test_mass_scaling(self):
        light = lamb_dicke_parameters(_trap(), 1e6, 3e6)
        heavy = lamb_dicke_parameters(_trap(ion_mass=18 * CODATA2018.u), 1e6, 3e6)
        assert heavy[0] == pytest.approx(light[0] / math.sqrt(2))
        assert heavy[1] == pytest.approx(light[1] / math.sqrt(2))
