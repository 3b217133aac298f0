"""Spin-dependent force dynamics"""

import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import Field, field_validator
from scipy.integrate import cumulative_simpson, simpson

from pyiongate.exceptions import DomainException, GridResolutionException
from pyiongate.gate_api import GateBaseObject
from pyiongate.gate_api.common import grid_step, halving_change, segment_integrals, segment_slices
from pyiongate.gate_api.mathieu import DriveSolution, ModeFunction

logger = logging.getLogger(__name__)

MIN_SAMPLES_PER_RF_PERIOD = 128
MIN_SAMPLES_PER_SECULAR_PERIOD = 256

# j_mu of the cm and r modes: the relative mode couples the ions with opposite sign
BRANCH_SIGNS = (1, -1)

ArrayLike = Union[float, np.ndarray]


class PulseSchedule(GateBaseObject):
    """Piecewise constant Rabi amplitudes on equal-time segments

    Both ions see the same segment amplitudes.

    Attributes:
        duration (float): gate time tau [s]
        detuning (float): two-photon detuning mu [rad/s]
        amplitudes (tuple): Rabi amplitude of each segment [rad/s]
        phases (tuple): laser phases phi_1, phi_2 [rad]
    """

    duration: Annotated[float, Field(description="Gate time [s]", gt=0)]
    detuning: Annotated[float, Field(description="Two-photon detuning [rad/s]")]
    amplitudes: Annotated[Tuple[float, ...], Field(description="Segment Rabi amplitudes [rad/s]", min_length=1)]
    phases: Annotated[Tuple[float, float], Field(description="Laser phases of the ions [rad]")] = (0.0, 0.0)

    @field_validator("amplitudes", mode="before")
    def validate_amplitudes(cls, v):
        return tuple(float(x) for x in np.atleast_1d(v))

    @property
    def segments(self) -> int:
        return len(self.amplitudes)

    @property
    def max_rabi(self) -> float:
        """max_t |Omega(t)| [rad/s]"""
        return max(abs(x) for x in self.amplitudes)

    def boundaries(self) -> np.ndarray:
        """Segment start times and the gate end"""
        return np.linspace(0.0, self.duration, self.segments + 1)

    def amplitude(self, t: ArrayLike) -> np.ndarray:
        """Rabi amplitude active at t, the later segment owns a shared boundary"""
        index = np.floor(np.asarray(t, dtype=float) * self.segments / self.duration).astype(int)
        return np.asarray(self.amplitudes)[np.clip(index, 0, self.segments - 1)]

    def scaled(self, factor: float) -> "PulseSchedule":
        return self.model_copy(update={"amplitudes": tuple(factor * x for x in self.amplitudes)})


@dataclass(frozen=True)
class MicromotionPhase:
    """Classical micromotion phase eta_mm(t) = k u_r(t) / 2

    Attributes:
        drive (DriveSolution): driven relative-mode solution, None for a static trap
        wave_vector (float): effective laser wave vector [1/m]
    """

    drive: Optional[DriveSolution] = None
    wave_vector: float = 0.0

    @classmethod
    def static(cls) -> "MicromotionPhase":
        return cls()

    @property
    def active(self) -> bool:
        return self.drive is not None

    @property
    def rf_frequency(self) -> Optional[float]:
        return self.drive.rf_frequency if self.drive is not None else None

    @property
    def mean(self) -> float:
        """Period average k f0 c0 / 2 [rad]"""
        return 0.5 * self.wave_vector * self.drive.mean if self.drive is not None else 0.0

    @property
    def depth(self) -> float:
        """First harmonic amplitude |k f0 c1 / 2| [rad]"""
        if self.drive is None:
            return 0.0
        return abs(0.5 * self.wave_vector * self.drive.f0 * float(self.drive.coefficients[1]))

    def __call__(self, t: ArrayLike) -> np.ndarray:
        if self.drive is None:
            return np.zeros(np.shape(t))
        return 0.5 * self.wave_vector * self.drive.displacement(t)


def ion_sign(ion: int) -> int:
    """-(-1)^j, the sign of eta_mm in the force on ion j"""
    if ion not in (1, 2):
        raise DomainException(f"Ion index must be 1 or 2, got {ion}")
    return 1 if ion == 1 else -1


def unit_chi(t: ArrayLike, ion: int, schedule: PulseSchedule, micromotion: MicromotionPhase) -> np.ndarray:
    """sin(mu t + phi_j - (-1)^j eta_mm(t)), the force of ion j at unit Rabi amplitude"""
    sign = ion_sign(ion)
    t = np.asarray(t, dtype=float)
    argument = schedule.detuning * t + schedule.phases[ion - 1] + sign * micromotion(t)
    return np.sin(argument)


def chi(t: ArrayLike, ion: int, schedule: PulseSchedule, micromotion: MicromotionPhase) -> np.ndarray:
    """Spin-dependent force chi_j(t) / hbar [rad/s]

    Raises:
        DomainException: t outside [0, tau]
    """
    t_arr = np.asarray(t, dtype=float)
    slack = 1e-12 * schedule.duration
    if np.any(t_arr < -slack) or np.any(t_arr > schedule.duration + slack):
        raise DomainException(f"Time outside the gate window [0, {schedule.duration:.6g}] s")
    return schedule.amplitude(t_arr) * unit_chi(t_arr, ion, schedule, micromotion)


@dataclass
class GateIntegrals:
    """Displacements and accumulated phases at the gate time

    Attributes:
        alphas (np.ndarray): alpha[mode, ion] with modes (cm, r) and ions (1, 2)
        gammas (tuple): gamma_cm, gamma_r [rad]
        quadrature_change (float): largest relative change of the Simpson halving checks
    """

    alphas: np.ndarray
    gammas: Tuple[float, float]
    quadrature_change: float = 0.0
    branch_signs: Tuple[int, int] = field(default=BRANCH_SIGNS)

    @property
    def theta(self) -> float:
        """Conditional phase gamma_r - gamma_cm [rad]"""
        return self.gammas[1] - self.gammas[0]

    @property
    def max_displacement(self) -> float:
        return float(np.max(np.abs(self.alphas)))

    def branch_displacement(self, mode: int, s1: int, s2: int) -> complex:
        """alpha_mu(s) = s1 alpha_mu,1 + j_mu s2 alpha_mu,2"""
        return complex(s1 * self.alphas[mode, 0] + self.branch_signs[mode] * s2 * self.alphas[mode, 1])


@dataclass
class _Quadrature:
    step: float
    slices: List[slice]
    unit: np.ndarray  # unit_chi of both ions
    weight: np.ndarray  # mode function entering the integrals


def _prepare(
    schedule: PulseSchedule, mode: ModeFunction, micromotion: MicromotionPhase, conjugate: bool
) -> _Quadrature:
    t = mode.t
    step = grid_step(t)
    if abs(t[-1] - schedule.duration) > 1e-9 * schedule.duration:
        raise GridResolutionException(
            f"Mode samples end at {t[-1]:.9g} s but the gate lasts {schedule.duration:.9g} s"
        )
    rf = micromotion.rf_frequency or mode.rf_frequency
    if rf and step > 2.0 * math.pi / rf / MIN_SAMPLES_PER_RF_PERIOD * (1.0 + 1e-9):
        raise GridResolutionException(f"Grid step {step:.3g} s does not resolve the r.f. period")
    if step > 2.0 * math.pi / mode.omega / MIN_SAMPLES_PER_SECULAR_PERIOD * (1.0 + 1e-9):
        raise GridResolutionException(f"Grid step {step:.3g} s does not resolve the {mode.label} secular period")
    slices = segment_slices(t.size - 1, schedule.segments)
    unit = np.stack([unit_chi(t, ion, schedule, micromotion) for ion in (1, 2)])
    weight = np.conj(mode.v) if conjugate else mode.v
    return _Quadrature(step=step, slices=slices, unit=unit, weight=weight)


def _phase_loop(quad: _Quadrature, amplitudes: Sequence[float], carry: bool = True) -> Tuple[np.ndarray, float]:
    """Double integral of S[chi_1 chi_2] Im[w*(t1) w(t2)] over t2 < t1, per segment

    With ``carry`` the inner integral runs from t = 0, otherwise it restarts in every segment (the diagonal terms of
    the phase quadratic form).
    """
    re, im = quad.weight.real, quad.weight.imag
    offsets = np.zeros(4)
    totals = np.zeros(len(quad.slices))
    change = 0.0
    for beta, (amplitude, part) in enumerate(zip(amplitudes, quad.slices)):
        x1 = amplitude * quad.unit[0, part]
        x2 = amplitude * quad.unit[1, part]
        r, i = re[part], im[part]
        # running integrals of chi_1 Re w, chi_1 Im w, chi_2 Re w, chi_2 Im w
        products = np.stack([x1 * r, x1 * i, x2 * r, x2 * i])
        start = offsets if carry else np.zeros(4)
        running = start[:, None] + cumulative_simpson(products, dx=quad.step, axis=-1, initial=0)
        integrand = x1 * r * running[3] - x1 * i * running[2] + x2 * r * running[1] - x2 * i * running[0]
        totals[beta] = simpson(integrand, dx=quad.step)
        change = max(change, halving_change(integrand, quad.step, totals[beta]))
        offsets = offsets + simpson(products, dx=quad.step, axis=-1)
    return totals, change


@dataclass
class SegmentMoments:
    """Unit-amplitude integrals of one mode restricted to each segment

    Attributes:
        moments (np.ndarray): A[ion, segment] = integral of unit chi_j * w over the segment
        self_phase (np.ndarray): double integral of each segment with itself (without eta^2)
        quadrature_change (float): largest relative change of the halving checks
    """

    moments: np.ndarray
    self_phase: np.ndarray
    quadrature_change: float


def segment_moments(
    schedule: PulseSchedule, mode: ModeFunction, micromotion: MicromotionPhase, conjugate: bool = False
) -> SegmentMoments:
    """Per-segment building blocks of the displacement and phase integrals"""
    quad = _prepare(schedule, mode, micromotion, conjugate)
    moments, change = segment_integrals(quad.unit * quad.weight, quad.step, quad.slices)
    self_phase, phase_change = _phase_loop(quad, np.ones(schedule.segments), carry=False)
    return SegmentMoments(moments=moments, self_phase=self_phase, quadrature_change=max(change, phase_change))


def _displacement(schedule, mode, eta, micromotion, conjugate) -> Tuple[np.ndarray, float]:
    quad = _prepare(schedule, mode, micromotion, conjugate)
    moments, change = segment_integrals(quad.unit * quad.weight, quad.step, quad.slices)
    return 1j * eta * (moments @ np.asarray(schedule.amplitudes)), change


def displacement(
    schedule: PulseSchedule,
    mode: ModeFunction,
    eta: float,
    micromotion: MicromotionPhase,
    conjugate: bool = False,
) -> Tuple[complex, complex]:
    """Per-ion displacement alpha_mu,j = i eta_mu integral chi_j(t) v_mu(t) dt

    Args:
        schedule: pulse schedule
        mode: mode function sampled on the quadrature grid
        eta: Lamb-Dicke parameter of the mode
        micromotion: micromotion phase
        conjugate: use v* instead of v

    Returns:
        (tuple): alpha_mu,1 and alpha_mu,2
    """
    alphas, change = _displacement(schedule, mode, eta, micromotion, conjugate)
    logger.debug("Displacement of %s mode: %s (halving change %.2g)", mode.label, alphas, change)
    return complex(alphas[0]), complex(alphas[1])


def _phase(schedule, mode, eta, micromotion, conjugate) -> Tuple[float, float]:
    quad = _prepare(schedule, mode, micromotion, conjugate)
    totals, change = _phase_loop(quad, schedule.amplitudes, carry=True)
    return eta**2 * float(np.sum(totals)), change


def accumulated_phase(
    schedule: PulseSchedule,
    mode: ModeFunction,
    eta: float,
    micromotion: MicromotionPhase,
    conjugate: bool = False,
) -> float:
    """Accumulated phase gamma_mu = eta^2 int dt1 int_{t2<t1} dt2 S[chi_1 chi_2] Im[v*(t1) v(t2)]

    Evaluated in O(n) from running integrals of chi_j Re v and chi_j Im v.
    """
    gamma, change = _phase(schedule, mode, eta, micromotion, conjugate)
    logger.debug("Accumulated phase of %s mode: %.12g (halving change %.2g)", mode.label, gamma, change)
    return gamma


def gate_integrals(
    schedule: PulseSchedule,
    modes: Sequence[ModeFunction],
    etas: Sequence[float],
    micromotion: MicromotionPhase,
    conjugate: bool = False,
) -> GateIntegrals:
    """All displacements and phases of the gate

    Args:
        schedule: pulse schedule
        modes: cm and r mode functions on the same grid
        etas: Lamb-Dicke parameters of the cm and r modes
        micromotion: micromotion phase
        conjugate: use v* instead of v

    Returns:
        (GateIntegrals): alpha[mode, ion], gamma_cm, gamma_r and theta
    """
    if len(modes) != 2 or len(etas) != 2:
        raise DomainException("Gate integrals need the cm and r modes and their Lamb-Dicke parameters")
    if not np.array_equal(modes[0].t, modes[1].t):
        raise GridResolutionException("Both modes must be sampled on the same grid")
    alphas = np.zeros((2, 2), dtype=complex)
    gammas = []
    change = 0.0
    for index, (mode, eta) in enumerate(zip(modes, etas)):
        alphas[index], alpha_change = _displacement(schedule, mode, eta, micromotion, conjugate)
        gamma, gamma_change = _phase(schedule, mode, eta, micromotion, conjugate)
        gammas.append(gamma)
        change = max(change, alpha_change, gamma_change)
    result = GateIntegrals(alphas=alphas, gammas=(gammas[0], gammas[1]), quadrature_change=change)
    logger.debug("Gate integrals: max|alpha|=%.3g theta=%.12g", result.max_displacement, result.theta)
    return result
