"""Prepared trap model shared by the design and evaluation pipelines"""

import logging
import math
from operator import attrgetter
from typing import Annotated, Callable, Dict, List, Optional, Tuple, TypeVar

import numpy as np
from pydantic import Field

from pyiongate.constants import CODATA2018, PhysicalConstants
from pyiongate.exceptions import (
    ConfigurationException,
    GridResolutionException,
    InstabilityException,
    IonGateException,
)
from pyiongate.gate_api import FIDELITY_METHOD, GateBaseObject
from pyiongate.gate_api.common import time_grid
from pyiongate.gate_api.design import DesignResult, solve_segments
from pyiongate.gate_api.dynamics import GateIntegrals, MicromotionPhase, PulseSchedule, gate_integrals
from pyiongate.gate_api.fast_approx import FastDisplacement, decompose, fast_displacement
from pyiongate.gate_api.fidelity import (
    CPF_PHASE,
    FidelityReport,
    ThermalState,
    fidelity_analytic,
    fidelity_fock_oracle,
)
from pyiongate.gate_api.mathieu import FloquetPropagator, ModeFunction, mode_function, oscillator_length
from pyiongate.gate_api.trap import (
    TrapConfiguration,
    equilibrium_separation,
    lamb_dicke_parameters,
    mathieu_params,
    pseudopotential_frequency,
)
from pyiongate.settings import NumericsSettings

logger = logging.getLogger(__name__)

MODE_LABELS = ("cm", "r")

T = TypeVar("T")


class GateReport(GateBaseObject):
    """Evaluation of one pulse schedule

    Attributes:
        schedule (PulseSchedule): evaluated schedule
        static (bool): evaluated in the static harmonic trap
        displacements (dict): alpha_mu,j as [Re, Im], keyed ``cm_1``, ``cm_2``, ``r_1``, ``r_2``
        gamma_cm (float): accumulated phase of the center-of-mass mode [rad]
        gamma_r (float): accumulated phase of the relative mode [rad]
        theta (float): conditional phase [rad]
        fidelity (FidelityReport): thermal fidelity
        max_rabi (float): peak Rabi amplitude [rad/s]
        feasible (bool): design constraints met, None when the schedule was not designed here
        diagnostics (dict): quadrature and two-stage diagnostics
    """

    schedule: PulseSchedule
    static: bool
    displacements: Dict[str, Tuple[float, float]]
    gamma_cm: float
    gamma_r: float
    theta: float
    fidelity: FidelityReport
    max_rabi: Annotated[float, Field(description="Peak Rabi amplitude [rad/s]")]
    feasible: Optional[bool] = None
    diagnostics: Dict[str, float] = {}

    @property
    def residual(self) -> float:
        return max(math.hypot(*value) for value in self.displacements.values())


class GateModel:
    """Trap, equilibrium and mode data for gate design and evaluation

    Args:
        trap: trap configuration in SI units
        settings: numerical settings
        constants: physical constants
        phases: laser phases of the two ions [rad]
        conjugate_modes: use v* instead of v in every gate integral

    Example:
        ```pycon

        >>> model = GateModel(trap)
        >>> result = model.design(1.31 * model.secular_period, 1.4 * model.omega_cm)
        >>> bool(result)
        True
        ```
    """

    def __init__(
        self,
        trap: TrapConfiguration,
        settings: Optional[NumericsSettings] = None,
        constants: PhysicalConstants = CODATA2018,
        phases: Tuple[float, float] = (0.0, 0.0),
        conjugate_modes: bool = False,
    ):
        self.trap = trap
        self.settings = settings or NumericsSettings()
        self.constants = constants
        self.phases = phases
        self.conjugate_modes = conjugate_modes
        self.equilibrium = equilibrium_separation(trap, constants=constants, settings=self.settings)
        self.cm = mathieu_params(trap, "axial-cm", constants=constants, settings=self.settings)
        self.rel = self.equilibrium.params
        self.transverse = mathieu_params(trap, "transverse", constants=constants, settings=self.settings)
        if not self.transverse.stable:
            logger.error("Transverse axis unstable (trace %g)", self.transverse.trace)
            raise InstabilityException(
                f"Transverse axis is unstable (monodromy trace {self.transverse.trace:.6g})",
                trace=self.transverse.trace,
            )
        self.propagators = tuple(
            FloquetPropagator(params.a, params.q, trap.rf_frequency, self.settings) for params in (self.cm, self.rel)
        )
        self.omega_cm, self.omega_r = (propagator.omega for propagator in self.propagators)
        self.omega_x = self.transverse.omega
        self.etas = lamb_dicke_parameters(trap, self.omega_cm, self.omega_r, constants)
        self.thermal = ThermalState.from_temperature(trap.temperature_ratio, self.omega_cm, self.omega_r)
        logger.info(
            "Gate model: omega_cm=2pi*%.6g Hz omega_r=2pi*%.6g Hz eta=(%.4g, %.4g)",
            self.omega_cm / (2 * math.pi),
            self.omega_r / (2 * math.pi),
            *self.etas,
        )

    @property
    def secular_period(self) -> float:
        """Center-of-mass period T_z [s]"""
        return 2.0 * math.pi / self.omega_cm

    @property
    def detuning(self) -> float:
        if self.trap.detuning is None:
            raise ConfigurationException("Trap configuration has no detuning")
        return self.trap.detuning

    @property
    def lengths(self) -> Tuple[float, float]:
        """Oscillator lengths of the cm and r modes [m]"""
        mass = self.trap.ion_mass
        return (
            oscillator_length("cm", mass, self.omega_cm, self.constants),
            oscillator_length("r", mass, self.omega_r, self.constants),
        )

    def grid(self, duration: float, segments: int = 1, refinement: int = 0) -> np.ndarray:
        """Quadrature grid resolving the r.f. and both secular periods, doubled ``refinement`` times"""
        scale = 2**refinement
        return time_grid(
            duration,
            (self.omega_cm, self.omega_r),
            self.trap.rf_frequency,
            scale * self.settings.samples_per_rf_period,
            scale * self.settings.samples_per_secular_period,
            segments,
        )

    def resolved(
        self,
        duration: float,
        segments: int,
        evaluate: Callable[[np.ndarray], T],
        change: Callable[[T], float] = attrgetter("quadrature_change"),
    ) -> Tuple[np.ndarray, T]:
        """Evaluate on successively doubled grids until the Simpson halving check passes

        Args:
            duration: gate time [s]
            segments: number of pulse segments
            evaluate: quadrature on a given grid
            change: halving change of an evaluation

        Returns:
            (tuple): accepted grid and evaluation

        Raises:
            GridResolutionException: the check still fails after ``settings.grid_refinements`` doublings
        """
        rtol = self.settings.quadrature_rtol
        for refinement in range(self.settings.grid_refinements + 1):
            t = self.grid(duration, segments, refinement)
            result = evaluate(t)
            value = change(result)
            if value <= rtol:
                if refinement:
                    logger.debug("Halving check passed after %d grid doublings (%d samples)", refinement, t.size)
                return t, result
            logger.info("Simpson halving change %.3g above %.1g on %d samples", value, rtol, t.size)
        logger.error("Quadrature not resolved after %d grid doublings", self.settings.grid_refinements)
        raise GridResolutionException(
            f"Simpson halving change {value:.3g} stays above {rtol:.1g} after "
            f"{self.settings.grid_refinements} grid refinements"
        )

    def modes(self, t: np.ndarray, static: bool = False) -> Tuple[ModeFunction, ModeFunction]:
        """cm and r mode functions, Floquet or static harmonic"""
        if static:
            return tuple(
                ModeFunction.harmonic(t, omega, length, label)
                for omega, length, label in zip((self.omega_cm, self.omega_r), self.lengths, MODE_LABELS)
            )
        return tuple(
            mode_function(params, t, label, propagator, self.settings, self.constants)
            for params, label, propagator in zip((self.cm, self.rel), MODE_LABELS, self.propagators)
        )

    def micromotion_phase(self, static: bool = False) -> MicromotionPhase:
        if static:
            return MicromotionPhase.static()
        return MicromotionPhase(drive=self.equilibrium.drive, wave_vector=self.trap.wave_vector)

    def integrals(self, schedule: PulseSchedule, static: bool = False) -> GateIntegrals:
        """Gate integrals on the coarsest grid passing the halving check"""
        micromotion = self.micromotion_phase(static)

        def evaluate(t: np.ndarray) -> GateIntegrals:
            return gate_integrals(schedule, self.modes(t, static), self.etas, micromotion, self.conjugate_modes)

        _, result = self.resolved(schedule.duration, schedule.segments, evaluate)
        return result

    def fidelity(
        self,
        schedule: PulseSchedule,
        static: bool = False,
        method: FIDELITY_METHOD = "analytic",
        target_phase: float = CPF_PHASE,
        thermal: Optional[ThermalState] = None,
    ) -> FidelityReport:
        """Thermal fidelity of a schedule, analytic or from the Fock oracle"""
        thermal = self.thermal if thermal is None else thermal
        if method == "analytic":
            return fidelity_analytic(self.integrals(schedule, static), thermal, target_phase)
        t = self.grid(schedule.duration, schedule.segments)
        return fidelity_fock_oracle(
            schedule,
            self.modes(t, static),
            self.etas,
            self.micromotion_phase(static),
            thermal,
            target_phase=target_phase,
            conjugate=self.conjugate_modes,
            tail=self.settings.oracle_tail,
        )

    def design(
        self, duration: float, detuning: Optional[float] = None, segments: int = 9, static: bool = False, **kwargs
    ) -> DesignResult:
        """Segmented design at the configured detuning unless one is given"""
        detuning = self.detuning if detuning is None else detuning
        return solve_segments(self, duration, detuning, segments, static=static, **kwargs)

    def two_stage(self, schedule: PulseSchedule, static: bool = False) -> Dict[str, FastDisplacement]:
        """Two-stage averaged displacement integrals keyed ``cm_1`` ... ``r_2``"""
        t = self.grid(schedule.duration, schedule.segments)
        micromotion = self.micromotion_phase(static)
        results = {}
        for mode in self.modes(t, static):
            for ion in (1, 2):
                decomp = decompose(schedule, mode, micromotion, ion, self.conjugate_modes)
                results[f"{mode.label}_{ion}"] = fast_displacement(decomp, schedule.duration)
        return results

    def report(
        self,
        schedule: PulseSchedule,
        static: bool = False,
        method: FIDELITY_METHOD = "analytic",
        target_phase: float = CPF_PHASE,
        feasible: Optional[bool] = None,
    ) -> GateReport:
        """Displacements, phases, fidelity and diagnostics of a schedule"""
        integrals = self.integrals(schedule, static)
        if method == "analytic":
            fidelity = fidelity_analytic(integrals, self.thermal, target_phase)
        else:
            fidelity = self.fidelity(schedule, static, method, target_phase)
        displacements = {
            f"{label}_{ion + 1}": (float(integrals.alphas[mode, ion].real), float(integrals.alphas[mode, ion].imag))
            for mode, label in enumerate(MODE_LABELS)
            for ion in range(2)
        }
        micromotion = self.micromotion_phase(static)
        diagnostics = {
            "quadrature_change": integrals.quadrature_change,
            "micromotion_depth": micromotion.depth,
            "harmonic_ratio": micromotion.drive.harmonic_ratio if micromotion.active else 0.0,
        }
        try:
            for key, value in self.two_stage(schedule, static).items():
                diagnostics[f"reduction_{key}"] = value.reduction
        except IonGateException as err:
            logger.warning("Two-stage diagnostics unavailable: %s", err)
        return GateReport(
            schedule=schedule,
            static=static,
            displacements=displacements,
            gamma_cm=integrals.gammas[0],
            gamma_r=integrals.gammas[1],
            theta=integrals.theta,
            fidelity=fidelity,
            max_rabi=schedule.max_rabi,
            feasible=feasible,
            diagnostics=diagnostics,
        )

    def derived(self) -> Dict[str, float]:
        """Derived trap quantities echoed into run manifests"""
        drive = self.equilibrium.drive
        two_pi = 2.0 * math.pi
        values = {
            "a_cm": self.cm.a,
            "a_r": self.rel.a,
            "q": self.cm.q,
            "a_x": self.transverse.a,
            "q_x": self.transverse.q,
            "f0": self.rel.f0,
            "u0": self.equilibrium.separation,
            "c0": float(drive.coefficients[0]),
            "c1": float(drive.coefficients[1]),
            "c2": float(drive.coefficients[2]),
            "omega_cm": self.omega_cm,
            "omega_r": self.omega_r,
            "omega_x": self.omega_x,
            "f_cm_hz": self.omega_cm / two_pi,
            "f_r_hz": self.omega_r / two_pi,
            "f_x_hz": self.omega_x / two_pi,
            "pseudopotential_f_cm_hz": pseudopotential_frequency(self.cm) / two_pi,
            "pseudopotential_f_r_hz": pseudopotential_frequency(self.rel) / two_pi,
            "eta_cm": self.etas[0],
            "eta_r": self.etas[1],
            "n_cm": self.thermal.n_cm,
            "n_r": self.thermal.n_r,
            "micromotion_depth": self.micromotion_phase().depth,
            "equilibrium_iterations": float(self.equilibrium.iterations),
            "equilibrium_residual": self.equilibrium.residual,
        }
        return values

    def mode_table(self, t: np.ndarray) -> List[Tuple[float, ...]]:
        """Rows of (t / T_z, Re v_cm, Im v_cm, Re v_r, Im v_r, eta_mm)"""
        cm, rel = self.modes(t)
        eta_mm = self.micromotion_phase()(t)
        tau = np.asarray(t) / self.secular_period
        return [
            (float(x), float(a.real), float(a.imag), float(b.real), float(b.imag), float(e))
            for x, a, b, e in zip(tau, cm.v, rel.v, eta_mm)
        ]
