"""Segmented pulse design"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh, svd
from scipy.optimize import minimize, minimize_scalar

from pyiongate.exceptions import DomainException, InfeasibleDesignException
from pyiongate.gate_api.dynamics import (
    GateIntegrals,
    MicromotionPhase,
    PulseSchedule,
    gate_integrals,
    segment_moments,
)
from pyiongate.gate_api.fidelity import CPF_PHASE, fidelity_analytic
from pyiongate.gate_api.mathieu import ModeFunction

if TYPE_CHECKING:
    from pyiongate.gate_api.model import GateModel

logger = logging.getLogger(__name__)

DISPLACEMENT_TOLERANCE = 1e-6
PHASE_TOLERANCE = 1e-6
MIN_SEGMENTS = 9
SCAN_POINTS = 33

# theta = gamma_r - gamma_cm
PHASE_SIGNS = (-1.0, 1.0)


@dataclass
class ConstraintSystem:
    """Linear displacement constraints and quadratic phase form of an m-segment pulse

    Attributes:
        matrix (np.ndarray): 8 x m real matrix; rows (cm, r) x (ion 1, ion 2) x (Re, Im) of alpha per unit amplitude
        phase_form (np.ndarray): symmetric m x m matrix G with theta = Omega^T G Omega
        quadrature_change (float): largest relative change of the Simpson halving checks
    """

    matrix: np.ndarray
    phase_form: np.ndarray
    quadrature_change: float = 0.0

    @property
    def segments(self) -> int:
        return self.matrix.shape[1]

    def displacements(self, amplitudes: Sequence[float]) -> np.ndarray:
        """alpha[mode, ion] of the given segment amplitudes"""
        flat = self.matrix @ np.asarray(amplitudes, dtype=float)
        return (flat[0::2] + 1j * flat[1::2]).reshape(2, 2)

    def phase(self, amplitudes: Sequence[float]) -> float:
        amplitudes = np.asarray(amplitudes, dtype=float)
        return float(amplitudes @ self.phase_form @ amplitudes)


@dataclass
class DesignResult:
    """Outcome of a pulse design

    Attributes:
        schedule (PulseSchedule): designed schedule
        feasible (bool): constraints met within tolerance
        integrals (GateIntegrals): independent evaluation of the schedule, None when nothing was designed
        target_phase (float): conditional phase aimed at [rad]
        phase_sign (int): sign of the achievable conditional phase, 0 when none is achievable
        nullity (int): dimension of the displacement nullspace
        fidelity (float): analytic thermal fidelity of the schedule
        static (bool): designed in the static harmonic trap
        message (str): reason of an infeasible result
    """

    schedule: PulseSchedule
    feasible: bool
    integrals: Optional[GateIntegrals] = None
    target_phase: float = CPF_PHASE
    phase_sign: int = 0
    nullity: int = 0
    fidelity: Optional[float] = None
    static: bool = False
    message: str = ""

    def __bool__(self) -> bool:
        return self.feasible

    @property
    def residual(self) -> float:
        """max |alpha_mu,j|"""
        return self.integrals.max_displacement if self.integrals is not None else math.nan

    @property
    def theta(self) -> float:
        return self.integrals.theta if self.integrals is not None else math.nan

    @property
    def max_rabi(self) -> float:
        """max_t |Omega(t)| [rad/s]"""
        return self.schedule.max_rabi


def constraint_system(
    duration: float,
    detuning: float,
    segments: int,
    modes: Sequence[ModeFunction],
    etas: Sequence[float],
    micromotion: MicromotionPhase,
    phases: Tuple[float, float] = (0.0, 0.0),
    conjugate: bool = False,
) -> ConstraintSystem:
    """Assemble the displacement matrix M and the phase form G

    Column beta of M holds the displacements of segment beta at unit Rabi amplitude. G collects the double integrals
    of every segment pair, the later segment carrying t1.

    Args:
        duration: gate time [s]
        detuning: two-photon detuning [rad/s]
        segments: number of equal-time segments
        modes: cm and r mode functions on a grid splitting into the segments
        etas: Lamb-Dicke parameters of the cm and r modes
        micromotion: micromotion phase
        phases: laser phases of the ions
        conjugate: use v* instead of v

    Returns:
        (ConstraintSystem): M and G
    """
    if segments < 1:
        raise DomainException(f"Segment count must be at least 1, got {segments}")
    unit = PulseSchedule(duration=duration, detuning=detuning, amplitudes=(1.0,) * segments, phases=phases)
    rows = []
    phase_form = np.zeros((segments, segments))
    change = 0.0
    for mode, eta, sign in zip(modes, etas, PHASE_SIGNS):
        moments = segment_moments(unit, mode, micromotion, conjugate)
        change = max(change, moments.quadrature_change)
        for ion in range(2):
            # i eta A split into real and imaginary rows
            rows.append(-eta * moments.moments[ion].imag)
            rows.append(eta * moments.moments[ion].real)
        r1, i1 = moments.moments[0].real, moments.moments[0].imag
        r2, i2 = moments.moments[1].real, moments.moments[1].imag
        cross = np.outer(r1, i2) - np.outer(i1, r2) + np.outer(r2, i1) - np.outer(i2, r1)
        lower = np.tril(cross, -1) + np.diag(moments.self_phase)
        phase_form += sign * eta**2 * 0.5 * (lower + lower.T)
    system = ConstraintSystem(matrix=np.array(rows), phase_form=phase_form, quadrature_change=change)
    logger.debug("Constraint system with %d segments, quadrature change %.2g", segments, change)
    return system


def _canonical(amplitudes: np.ndarray) -> np.ndarray:
    """Flip the sign so the first nonzero segment is positive"""
    nonzero = np.flatnonzero(np.abs(amplitudes) > 1e-12 * np.max(np.abs(amplitudes), initial=0.0))
    if nonzero.size and amplitudes[nonzero[0]] < 0:
        return -amplitudes
    return amplitudes


def _peak_direction(basis: np.ndarray, form: np.ndarray, sign: float) -> Tuple[np.ndarray, float]:
    """Nullspace direction of the given phase sign with the smallest peak amplitude per unit phase"""
    values, vectors = eigh(form)
    candidates = [vectors[:, k] for k in np.argsort(-sign * values) if sign * values[k] > 0]

    def peak_cost(z: np.ndarray) -> float:
        curvature = sign * float(z @ form @ z)
        if curvature <= 0:
            return math.inf
        return float(np.max(np.abs(basis @ z)) ** 2 / curvature)

    best = min(candidates, key=peak_cost)
    if basis.shape[1] > 1:
        for seed in candidates:
            start = peak_cost(seed)
            result = minimize(
                peak_cost,
                seed,
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-12 * start, "maxiter": 4000 * basis.shape[1]},
            )
            if result.fun < peak_cost(best):
                best = result.x
        logger.debug("Peak amplitude search over %d nullspace directions", basis.shape[1])
    return best, peak_cost(best)


def _infeasible(
    schedule: PulseSchedule,
    message: str,
    raise_on_infeasible: bool,
    phase_sign: int = 0,
    **kwargs,
) -> "DesignResult":
    logger.error("Infeasible design: %s", message)
    if raise_on_infeasible:
        raise InfeasibleDesignException(message, phase_sign=phase_sign)
    return DesignResult(schedule=schedule, feasible=False, phase_sign=phase_sign, message=message, **kwargs)


def solve_segments(
    model: "GateModel",
    duration: float,
    detuning: float,
    segments: int = MIN_SEGMENTS,
    static: bool = False,
    accept_locally_equivalent: bool = False,
    raise_on_infeasible: bool = False,
) -> DesignResult:
    """Segment amplitudes closing every displacement with conditional phase pi / 4

    The amplitudes lie in the nullspace of M. A single nullspace direction is scaled to the target phase, surplus
    directions are spent on minimizing the peak Rabi amplitude. The result is verified by an independent evaluation
    of the gate integrals.

    Args:
        model: prepared gate model
        duration: gate time [s]
        detuning: two-photon detuning [rad/s]
        segments: number of equal-time segments
        static: design in the static harmonic trap
        accept_locally_equivalent: aim at -pi / 4 when only negative phases are achievable
        raise_on_infeasible: raise instead of returning a falsy result

    Returns:
        (DesignResult): designed schedule

    Raises:
        InfeasibleDesignException: no schedule meets the constraints and ``raise_on_infeasible`` is set
        GridResolutionException: the segment integrals fail the halving check on every refined grid
    """
    micromotion = model.micromotion_phase(static)

    def assemble(t: np.ndarray) -> Tuple[Sequence[ModeFunction], ConstraintSystem]:
        modes = model.modes(t, static)
        system = constraint_system(
            duration, detuning, segments, modes, model.etas, micromotion, model.phases, model.conjugate_modes
        )
        return modes, system

    _, (modes, system) = model.resolved(duration, segments, assemble, lambda pair: pair[1].quadrature_change)
    zero = PulseSchedule(duration=duration, detuning=detuning, amplitudes=(0.0,) * segments, phases=model.phases)

    _, singular, vh = svd(system.matrix)
    rank = int(np.sum(singular > model.settings.nullspace_rtol * singular[0])) if singular.size else 0
    basis = vh[rank:].T
    nullity = basis.shape[1]
    logger.debug("Displacement matrix rank %d, nullity %d", rank, nullity)
    if nullity == 0:
        return _infeasible(
            zero,
            f"{segments} segments leave no displacement nullspace (rank {rank}); at least {MIN_SEGMENTS} are needed",
            raise_on_infeasible,
            static=static,
        )

    form = basis.T @ system.phase_form @ basis
    curvatures = np.linalg.eigvalsh(form)
    scale = max(np.max(np.abs(curvatures)), 1e-300)
    positive = bool(np.any(curvatures > 1e-12 * scale))
    negative = bool(np.any(curvatures < -1e-12 * scale))
    phase_sign = 1 if positive else -1 if negative else 0
    target = CPF_PHASE
    if not positive:
        if negative and accept_locally_equivalent:
            target = -CPF_PHASE
        else:
            return _infeasible(
                zero,
                f"Only conditional phases of sign {phase_sign:+d} are reachable",
                raise_on_infeasible,
                phase_sign=phase_sign,
                nullity=nullity,
                static=static,
            )

    direction, _ = _peak_direction(basis, form, math.copysign(1.0, target))
    curvature = float(direction @ form @ direction)
    amplitudes = _canonical(basis @ direction * math.sqrt(target / curvature))
    schedule = zero.model_copy(update={"amplitudes": tuple(float(x) for x in amplitudes)})

    integrals = gate_integrals(schedule, modes, model.etas, micromotion, model.conjugate_modes)
    fidelity = fidelity_analytic(integrals, model.thermal, target).fidelity
    details = dict(
        integrals=integrals,
        target_phase=target,
        nullity=nullity,
        fidelity=fidelity,
        static=static,
    )
    if integrals.max_displacement >= DISPLACEMENT_TOLERANCE or abs(integrals.theta - target) >= PHASE_TOLERANCE:
        return _infeasible(
            schedule,
            f"Verification failed: max|alpha|={integrals.max_displacement:.3g}, theta={integrals.theta:.9g}",
            raise_on_infeasible,
            phase_sign=phase_sign,
            **details,
        )
    logger.info(
        "Designed %d segment pulse (%s): peak Rabi %.6g rad/s, F=%.10f",
        segments,
        "static" if static else "micromotion",
        schedule.max_rabi,
        fidelity,
    )
    return DesignResult(schedule=schedule, feasible=True, phase_sign=phase_sign, **details)


def static_baseline(
    model: "GateModel",
    duration: float,
    detuning: float,
    segments: int = MIN_SEGMENTS,
    **kwargs,
) -> DesignResult:
    """Same design in a static harmonic trap with the same secular frequencies and no micromotion"""
    return solve_segments(model, duration, detuning, segments, static=True, **kwargs)


def _scaled(unit: GateIntegrals, amplitude: float) -> GateIntegrals:
    return GateIntegrals(
        alphas=amplitude * unit.alphas,
        gammas=(amplitude**2 * unit.gammas[0], amplitude**2 * unit.gammas[1]),
        quadrature_change=unit.quadrature_change,
    )


def _best_amplitude(objective, estimate: float, points: int, duration: float) -> float:
    grid = np.linspace(0.0, 2.0 * estimate, points)
    values = np.array([objective(x) for x in grid])
    best = int(np.argmin(values))
    minima = np.flatnonzero((values[1:-1] < values[:-2]) & (values[1:-1] < values[2:]))
    if minima.size > 1:
        logger.warning("Infidelity is not unimodal in the amplitude at tau=%.6g s, keeping the best minimum", duration)
    if best in (0, points - 1):
        logger.warning("Best amplitude at the bracket boundary at tau=%.6g s", duration)
        return float(grid[best])
    bracket = (grid[best - 1], grid[best], grid[best + 1])
    xtol = 1e-4 * (grid[-1] - grid[0]) / (2.0 * grid[best])
    try:
        result = minimize_scalar(objective, bracket=bracket, method="golden", options={"xtol": xtol})
    except ValueError as err:
        logger.warning("Golden section search failed at tau=%.6g s (%s), keeping the grid optimum", duration, err)
        return float(grid[best])
    return float(result.x) if result.fun <= values[best] else float(grid[best])


def single_segment_scan(
    model: "GateModel",
    detuning: float,
    durations: Sequence[float],
    static: bool = False,
    accept_locally_equivalent: bool = False,
    points: int = SCAN_POINTS,
) -> List[DesignResult]:
    """Constant amplitude gates with the amplitude maximizing the fidelity at each gate time

    Displacements scale linearly and phases quadratically with the amplitude, so each gate time needs one quadrature.
    The amplitude search starts on a grid up to twice the amplitude closing the phase alone and is refined by golden
    section search.

    Args:
        model: prepared gate model
        detuning: two-photon detuning [rad/s]
        durations: gate times [s]
        static: design in the static harmonic trap
        accept_locally_equivalent: aim at -pi / 4 when the phase is negative
        points: coarse grid points of the amplitude search

    Returns:
        (list): best result per gate time
    """
    results = []
    micromotion = model.micromotion_phase(static)
    for duration in durations:
        unit_schedule = PulseSchedule(duration=duration, detuning=detuning, amplitudes=(1.0,), phases=model.phases)
        def evaluate(t: np.ndarray, schedule: PulseSchedule = unit_schedule) -> GateIntegrals:
            return gate_integrals(schedule, model.modes(t, static), model.etas, micromotion, model.conjugate_modes)

        _, unit = model.resolved(duration, 1, evaluate)
        target = -CPF_PHASE if accept_locally_equivalent and unit.theta < 0 else CPF_PHASE
        if unit.theta == 0:
            logger.warning("No conditional phase at tau=%.6g s", duration)
            estimate = 0.0
        else:
            estimate = math.sqrt(CPF_PHASE / abs(unit.theta))

        def objective(amplitude: float) -> float:
            return fidelity_analytic(_scaled(unit, amplitude), model.thermal, target).infidelity

        amplitude = _best_amplitude(objective, estimate, points, duration) if estimate else 0.0
        integrals = _scaled(unit, amplitude)
        feasible = (
            integrals.max_displacement < DISPLACEMENT_TOLERANCE and abs(integrals.theta - target) < PHASE_TOLERANCE
        )
        fidelity = 1.0 - objective(amplitude)
        logger.debug("tau=%.9g s: Omega*=%.9g rad/s, F=%.10f", duration, amplitude, fidelity)
        results.append(
            DesignResult(
                schedule=unit_schedule.scaled(amplitude),
                integrals=integrals,
                feasible=feasible,
                target_phase=target,
                phase_sign=int(np.sign(unit.theta)),
                nullity=0,
                fidelity=fidelity,
                static=static,
            )
        )
    return results
