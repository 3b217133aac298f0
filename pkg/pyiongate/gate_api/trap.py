"""Trap parameters and ion equilibrium"""

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Optional, Tuple

from pydantic import Field, model_validator

from pyiongate.constants import CODATA2018, PhysicalConstants
from pyiongate.exceptions import (
    ConfigurationException,
    DomainException,
    InstabilityException,
    NoEquilibriumException,
)
from pyiongate.gate_api import AXIS_LABEL, EQUILIBRIUM_METHOD, GateBaseObject
from pyiongate.gate_api.mathieu import DriveSolution, characteristic_exponent, driven_solution
from pyiongate.settings import NumericsSettings

logger = logging.getLogger(__name__)


class TrapConfiguration(GateBaseObject):
    """Physical trap, ion and laser inputs in SI units

    Attributes:
        dc_voltage (float): d.c. voltage U0 [V]
        ac_voltage (float): a.c. voltage V0 [V]
        electrode_size (float): characteristic electrode size d0 [m]
        rf_frequency (float): r.f. angular frequency Omega_T [rad/s]
        ion_mass (float): ion mass [kg]
        wave_vector (float): effective laser wave vector along the trap axis [1/m]
        detuning (float): two-photon detuning [rad/s], None until resolved against the secular frequency
        temperature_ratio (float): k_B T_D / (hbar omega_cm)
        equilibrium (str): equilibrium separation model
    """

    dc_voltage: Annotated[float, Field(description="d.c. voltage U0 [V]")]
    ac_voltage: Annotated[float, Field(description="a.c. voltage V0 [V]", gt=0)]
    electrode_size: Annotated[float, Field(description="Characteristic electrode size d0 [m]", gt=0)]
    rf_frequency: Annotated[float, Field(description="r.f. angular frequency [rad/s]", gt=0)]
    ion_mass: Annotated[float, Field(description="Ion mass [kg]", gt=0)]
    wave_vector: Annotated[float, Field(description="Effective laser wave vector [1/m]", ge=0)] = 0.0
    detuning: Annotated[Optional[float], Field(description="Two-photon detuning [rad/s]")] = None
    temperature_ratio: Annotated[float, Field(description="k_B T_D / (hbar omega_cm)", gt=0)] = 10.0
    equilibrium: Annotated[EQUILIBRIUM_METHOD, Field(description="Equilibrium separation model")] = "self-consistent"

    @property
    def rf_period(self) -> float:
        return 2.0 * math.pi / self.rf_frequency


class MathieuParameters(GateBaseObject):
    """Dimensionless Mathieu parameters of one degree of freedom

    Attributes:
        a (float): Mathieu a parameter
        q (float): Mathieu q parameter
        f0 (float): constant drive of the relative mode [m], zero otherwise
        axis (str): axial-cm, axial-rel or transverse
        rf_frequency (float): r.f. frequency [rad/s]
        ion_mass (float): ion mass [kg]
        trace (float): monodromy trace, None when not evaluated
        omega (float): secular frequency [rad/s], None when unstable or not evaluated
    """

    a: float
    q: float
    f0: float = 0.0
    axis: AXIS_LABEL
    rf_frequency: float
    ion_mass: float
    trace: Optional[float] = None
    omega: Optional[float] = None

    @model_validator(mode="after")
    def check_drive(self):
        if self.f0 != 0.0 and self.axis != "axial-rel":
            raise ValueError("Only the relative axial mode carries a drive term")
        return self

    @property
    def stable(self) -> bool:
        return self.omega is not None


@dataclass(frozen=True)
class EquilibriumResult:
    """Ion separation and the relative-mode drive solution

    Attributes:
        separation (float): equilibrium separation u0 [m]
        iterations (int): fixed-point iterations used
        residual (float): relative mismatch |u0 - f0 c0| / u0 between the separation and the driven mean. The
            ``self-consistent`` iteration brings it below the equilibrium tolerance. The ``pseudopotential`` balance
            ignores micromotion, so the mismatch is only reported (about 0.38 for the published trap).
        drive (DriveSolution): driven solution of the relative axis at u0
        params (MathieuParameters): relative axis parameters at u0
        method (str): equilibrium model
    """

    separation: float
    iterations: int
    residual: float
    drive: DriveSolution
    params: MathieuParameters
    method: EQUILIBRIUM_METHOD


def mathieu_params(
    trap: TrapConfiguration,
    axis: AXIS_LABEL,
    u0: Optional[float] = None,
    constants: PhysicalConstants = CODATA2018,
    settings: Optional[NumericsSettings] = None,
    exponent: bool = True,
) -> MathieuParameters:
    """Dimensionless Mathieu parameters of one axis

    Args:
        trap: trap configuration
        axis: axial-cm, axial-rel or transverse
        u0: ion separation [m], required for axial-rel
        constants: physical constants
        settings: numerical settings
        exponent: evaluate the monodromy to fill trace and omega

    Returns:
        (MathieuParameters): parameters with xi = Omega_T t / 2

    Example:
        ```pycon

        >>> trap = TrapConfiguration(dc_voltage=21, ac_voltage=300, electrode_size=200e-6,
        ...                          rf_frequency=2 * math.pi * 240e6, ion_mass=9 * CODATA2018.u)
        >>> round(mathieu_params(trap, "axial-cm").q, 3)
        0.283
        ```
    """
    mass, rf = trap.ion_mass, trap.rf_frequency
    scale = constants.e / (mass * trap.electrode_size**2 * rf**2)
    f0 = 0.0
    if axis == "transverse":
        a = 8.0 * trap.dc_voltage * scale
        q = -4.0 * trap.ac_voltage * scale
    else:
        a = -16.0 * trap.dc_voltage * scale
        q = 8.0 * trap.ac_voltage * scale
        if axis == "axial-rel":
            if u0 is None or not u0 > 0:
                raise ConfigurationException(f"Relative axis needs a positive ion separation, got {u0}")
            a += 4.0 * constants.coulomb / (mass * u0**3 * rf**2)
            f0 = 6.0 * constants.coulomb / (mass * u0**2 * rf**2)
    trace = omega = None
    if exponent:
        monodromy = characteristic_exponent(a, q, settings)
        trace = monodromy.trace
        omega = monodromy.nu * rf / 2.0 if monodromy.stable else None
    return MathieuParameters(
        a=a, q=q, f0=f0, axis=axis, rf_frequency=rf, ion_mass=mass, trace=trace, omega=omega
    )


def secular_frequency(
    params: MathieuParameters, rf_frequency: Optional[float] = None, settings: Optional[NumericsSettings] = None
) -> float:
    """Secular frequency nu * Omega_T / 2 from the exact monodromy [rad/s]"""
    rf_frequency = rf_frequency or params.rf_frequency
    monodromy = characteristic_exponent(params.a, params.q, settings)
    if not monodromy.stable:
        logger.error("Unstable %s axis: a=%g q=%g trace=%g", params.axis, params.a, params.q, monodromy.trace)
        raise InstabilityException(
            f"{params.axis} axis is unstable (a={params.a:.6g}, q={params.q:.6g}, monodromy trace "
            f"{monodromy.trace:.6g})",
            trace=monodromy.trace,
        )
    return monodromy.nu * rf_frequency / 2.0


def pseudopotential_frequency(params: MathieuParameters) -> float:
    """Lowest order secular estimate sqrt(a + q^2 / 2) * Omega_T / 2 [rad/s]"""
    beta2 = params.a + params.q**2 / 2.0
    if beta2 <= 0:
        raise InstabilityException(f"No pseudopotential confinement on the {params.axis} axis (beta^2={beta2:.3g})")
    return math.sqrt(beta2) * params.rf_frequency / 2.0


def static_separation(omega: float, mass: float, constants: PhysicalConstants = CODATA2018) -> float:
    """Two-ion separation in a static harmonic well, (e^2 / (2 pi epsilon0 m omega^2))^(1/3) [m]"""
    return (constants.coulomb / (2.0 * mass * omega**2)) ** (1.0 / 3.0)


def equilibrium_separation(
    trap: TrapConfiguration,
    method: Optional[EQUILIBRIUM_METHOD] = None,
    constants: PhysicalConstants = CODATA2018,
    settings: Optional[NumericsSettings] = None,
) -> EquilibriumResult:
    """Equilibrium separation of the two ions

    ``self-consistent`` iterates u0 <- f0(u0) c0(u0) from the static guess at the exact center-of-mass frequency.
    ``pseudopotential`` balances the Coulomb force against the pseudopotential well without iteration.

    Args:
        trap: trap configuration
        method: equilibrium model, defaults to ``trap.equilibrium``
        constants: physical constants
        settings: numerical settings

    Returns:
        (EquilibriumResult): separation together with the relative axis drive solution
    """
    settings = settings or NumericsSettings()
    method = method or trap.equilibrium
    cm = mathieu_params(trap, "axial-cm", constants=constants, settings=settings)
    if not cm.stable:
        logger.error("Center-of-mass axis unstable (trace %g)", cm.trace)
        raise InstabilityException(f"Center-of-mass axis is unstable (monodromy trace {cm.trace:.6g})", trace=cm.trace)

    def solve_drive(u: float) -> Tuple[MathieuParameters, DriveSolution]:
        rel = mathieu_params(trap, "axial-rel", u, constants=constants, settings=settings, exponent=False)
        return rel, driven_solution(rel.a, rel.q, rel.f0, settings.drive_truncation, trap.rf_frequency)

    iterations = 0
    if method == "pseudopotential":
        separation = static_separation(pseudopotential_frequency(cm), trap.ion_mass, constants)
    else:
        separation = static_separation(cm.omega, trap.ion_mass, constants)
        for iterations in range(1, settings.equilibrium_max_iterations + 1):
            _, drive = solve_drive(separation)
            updated = drive.mean
            if not updated > 0:
                logger.error("Equilibrium iteration left the physical branch at u0=%g", separation)
                raise NoEquilibriumException(f"No positive equilibrium separation (f0 c0 = {updated:.3g} m)")
            change = abs(updated - separation) / separation
            logger.debug("Equilibrium iteration %d: u0=%.15g m change=%.3g", iterations, updated, change)
            separation = updated
            if change < settings.equilibrium_tolerance:
                break
        else:
            logger.error("Equilibrium iteration did not converge in %d steps", iterations)
            raise NoEquilibriumException(f"Equilibrium separation did not converge in {iterations} iterations")

    _, drive = solve_drive(separation)
    rel = mathieu_params(trap, "axial-rel", separation, constants=constants, settings=settings)
    if not rel.stable:
        logger.error("Relative axis unstable (trace %g)", rel.trace)
        raise InstabilityException(f"Relative axis is unstable (monodromy trace {rel.trace:.6g})", trace=rel.trace)
    residual = abs(separation - drive.mean) / separation
    logger.info(
        "Equilibrium (%s): u0=%.6g m after %d iterations, residual %.3g", method, separation, iterations, residual
    )
    return EquilibriumResult(
        separation=separation, iterations=iterations, residual=residual, drive=drive, params=rel, method=method
    )


def lamb_dicke_parameters(
    trap: TrapConfiguration, omega_cm: float, omega_r: float, constants: PhysicalConstants = CODATA2018
) -> Tuple[float, float]:
    """Lamb-Dicke parameters k sqrt(hbar / 4 m omega_cm) and k sqrt(hbar / m omega_r) / 2"""
    if not (omega_cm > 0 and omega_r > 0):
        raise DomainException(f"Secular frequencies must be positive, got {omega_cm}, {omega_r}")
    eta_cm = trap.wave_vector * math.sqrt(constants.hbar / (4.0 * trap.ion_mass * omega_cm))
    eta_r = trap.wave_vector * math.sqrt(constants.hbar / (trap.ion_mass * omega_r)) / 2.0
    return eta_cm, eta_r
