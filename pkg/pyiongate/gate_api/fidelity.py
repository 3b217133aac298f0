"""Gate fidelity under thermal motion"""

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Annotated, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import Field
from scipy.linalg import eigh_tridiagonal

from pyiongate.exceptions import DomainException, LeakageException, NumericalException
from pyiongate.gate_api import DESIGN_MODE, FIDELITY_METHOD, GateBaseObject
from pyiongate.gate_api.common import grid_step
from pyiongate.gate_api.dynamics import (
    BRANCH_SIGNS,
    GateIntegrals,
    MicromotionPhase,
    PulseSchedule,
    chi,
)
from pyiongate.gate_api.mathieu import ModeFunction

if TYPE_CHECKING:
    from pyiongate.gate_api.model import GateModel

logger = logging.getLogger(__name__)

CPF_PHASE = math.pi / 4
FIDELITY_SLACK = 1e-12


class ThermalState(GateBaseObject):
    """Thermal occupations of the two axial modes

    Attributes:
        n_cm (float): mean occupation of the center-of-mass mode
        n_r (float): mean occupation of the relative mode
        temperature_ratio (float): k_B T_D / (hbar omega_cm) the occupations were derived from, if any
    """

    n_cm: Annotated[float, Field(description="Mean occupation of the center-of-mass mode", ge=0)]
    n_r: Annotated[float, Field(description="Mean occupation of the relative mode", ge=0)]
    temperature_ratio: Annotated[Optional[float], Field(description="k_B T_D / (hbar omega_cm)")] = None

    @classmethod
    def from_temperature(cls, ratio: float, omega_cm: float, omega_r: float) -> "ThermalState":
        """Bose occupations 1 / (exp(hbar omega_mu / k_B T_D) - 1) with k_B T_D = ratio * hbar omega_cm

        Example:
            ```pycon

            >>> state = ThermalState.from_temperature(10.0, 1.0, 3.62 / 0.965)
            >>> round(state.n_cm, 3), round(state.n_r, 3)
            (9.508, 2.197)
            ```
        """
        if not (ratio > 0 and omega_cm > 0 and omega_r > 0):
            raise DomainException(f"Temperature ratio and frequencies must be positive, got {ratio}, {omega_cm}")
        return cls(
            n_cm=1.0 / math.expm1(1.0 / ratio),
            n_r=1.0 / math.expm1(omega_r / (ratio * omega_cm)),
            temperature_ratio=ratio,
        )

    @classmethod
    def ground(cls) -> "ThermalState":
        return cls(n_cm=0.0, n_r=0.0)

    @property
    def occupations(self) -> Tuple[float, float]:
        return self.n_cm, self.n_r


class SpinBranch(NamedTuple):
    """Eigenvalues of sigma_1^z and sigma_2^z"""

    s1: int
    s2: int

    @property
    def parity(self) -> int:
        return self.s1 * self.s2


BRANCHES = tuple(SpinBranch(s1, s2) for s1 in (1, -1) for s2 in (1, -1))


class FidelityReport(GateBaseObject):
    """Thermally averaged CPF fidelity

    Attributes:
        fidelity (float): F in [0, 1]
        method (str): analytic or fock-oracle
        breakdown (tuple): magnitude of each spin branch's contribution to the overlap
        target_phase (float): conditional phase of the target gate [rad]
    """

    fidelity: Annotated[float, Field(description="Gate fidelity", ge=0, le=1)]
    method: FIDELITY_METHOD
    breakdown: Tuple[float, float, float, float]
    target_phase: float = CPF_PHASE

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity


def _report(terms: np.ndarray, method: FIDELITY_METHOD, target_phase: float) -> FidelityReport:
    """Fidelity from the 4x4 branch pair terms, checking the imaginary residue and the [0, 1] range"""
    total = terms.sum() / 16.0
    if abs(total.imag) > 1e-10:
        logger.error("Fidelity sum has imaginary residue %g", total.imag)
        raise NumericalException(f"Fidelity sum is not real (imaginary part {total.imag:.3g})")
    value = float(total.real)
    if not -FIDELITY_SLACK <= value <= 1.0 + FIDELITY_SLACK:
        logger.error("Fidelity %r outside [0, 1]", value)
        raise NumericalException(f"Fidelity {value!r} outside [0, 1]")
    breakdown = tuple(float(x) for x in np.abs(terms.sum(axis=1)) / 4.0)
    return FidelityReport(
        fidelity=min(max(value, 0.0), 1.0), method=method, breakdown=breakdown, target_phase=target_phase
    )


def _target_factors(theta: float) -> np.ndarray:
    """exp(i theta (p_s' - p_s)) for all branch pairs"""
    parity = np.array([branch.parity for branch in BRANCHES], dtype=float)
    return np.exp(1j * theta * (parity[None, :] - parity[:, None]))


def fidelity_analytic(
    integrals: GateIntegrals, thermal: ThermalState, target_phase: float = CPF_PHASE
) -> FidelityReport:
    """Closed-form thermal fidelity of D_cm(alpha_cm) D_r(alpha_r) exp(i theta sigma_1^z sigma_2^z)

    Args:
        integrals: displacements and accumulated phases at the gate time
        thermal: thermal occupations
        target_phase: conditional phase of the target gate

    Returns:
        (FidelityReport): analytic fidelity

    Example:
        ```pycon

        >>> perfect = GateIntegrals(alphas=np.zeros((2, 2), dtype=complex), gammas=(0.0, math.pi / 4))
        >>> fidelity_analytic(perfect, ThermalState.ground()).fidelity
        1.0
        ```
    """
    alphas = np.asarray(integrals.alphas)
    if not (np.all(np.isfinite(alphas)) and math.isfinite(integrals.theta)):
        raise DomainException("Gate integrals are not finite")
    terms = _target_factors(integrals.theta - target_phase)
    for mode, occupation in enumerate(thermal.occupations):
        branch = np.array([integrals.branch_displacement(mode, s.s1, s.s2) for s in BRANCHES])
        first, second = branch[:, None], branch[None, :]
        terms = terms * np.exp(-1j * np.imag(first * np.conj(second)))
        terms = terms * np.exp(-np.abs(second - first) ** 2 * (occupation + 0.5))
    report = _report(terms, "analytic", target_phase)
    logger.debug("Analytic fidelity %.15g", report.fidelity)
    return report


def thermal_cutoff(occupation: float, tail: float) -> int:
    """Smallest N with thermal weight beyond N below ``tail``"""
    if occupation < 0 or not 0 < tail < 1:
        raise DomainException(f"Invalid occupation {occupation} or tail {tail}")
    if occupation == 0:
        return 0
    ratio = occupation / (occupation + 1.0)
    cutoff = max(0, math.ceil(math.log(tail) / math.log(ratio)) - 1)
    while ratio ** (cutoff + 1) >= tail:
        cutoff += 1
    return cutoff


def thermal_weights(occupation: float, cutoff: int) -> np.ndarray:
    """Normalized Bose-Einstein weights of the levels 0 ... cutoff"""
    if occupation == 0:
        weights = np.zeros(cutoff + 1)
        weights[0] = 1.0
        return weights
    n = np.arange(cutoff + 1)
    log_weights = n * math.log(occupation) - (n + 1) * math.log(occupation + 1.0)
    weights = np.exp(log_weights)
    return weights / weights.sum()


class FockOracle:
    """Truncated Fock space propagation of the spin-dependent force Hamiltonian

    ``H_s = -c_s(t) eta (w*(t) a + w(t) a^dagger)`` with ``c_s = s1 chi_1 + j_mu s2 chi_2`` is propagated for the four
    spin branches with exact exponentials at the midpoints of steps spanning two grid intervals. One propagation is
    reused for every thermal state it is large enough for.

    Args:
        schedule: pulse schedule
        modes: cm and r mode functions on a grid with an even number of intervals
        etas: Lamb-Dicke parameters of the cm and r modes
        micromotion: micromotion phase
        conjugate: use v* instead of v
        tail: accepted thermal tail weight and top level population
    """

    def __init__(
        self,
        schedule: PulseSchedule,
        modes: Sequence[ModeFunction],
        etas: Sequence[float],
        micromotion: MicromotionPhase,
        conjugate: bool = False,
        tail: float = 1e-6,
    ):
        if len(modes) != 2 or len(etas) != 2:
            raise DomainException("The oracle needs the cm and r modes and their Lamb-Dicke parameters")
        t = modes[0].t
        step = grid_step(t)
        intervals = t.size - 1
        if intervals % 2:
            raise DomainException("Oracle grid needs an even number of intervals")
        self.schedule = schedule
        self.tail = tail
        self.dt = 2.0 * step
        midpoints = t[1::2]
        force = np.stack([chi(midpoints, ion, schedule, micromotion) for ion in (1, 2)])
        self._couplings = []
        for mode, eta, sign in zip(modes, etas, BRANCH_SIGNS):
            if not np.array_equal(mode.t, t):
                raise DomainException("Both modes must be sampled on the same grid")
            w = np.conj(mode.v[1::2]) if conjugate else mode.v[1::2]
            c = np.stack([s.s1 * force[0] + sign * s.s2 * force[1] for s in BRANCHES])
            # coefficient of a in H
            self._couplings.append(-c * eta * np.conj(w))
        self._cache: Dict[Tuple[int, int], np.ndarray] = {}
        logger.debug("Fock oracle with %d steps of %.3g s", midpoints.size, self.dt)

    def excursion(self, mode: int) -> float:
        """Largest displacement amplitude reached by any branch during the gate"""
        running = np.cumsum(self._couplings[mode], axis=1) * self.dt
        return float(np.max(np.abs(running), initial=0.0))

    def basis_size(self, mode: int, cutoff: int) -> int:
        beta = self.excursion(mode)
        return max(cutoff + 10, math.ceil((math.sqrt(cutoff) + beta + 4.0) ** 2) + 1)

    def overlaps(self, mode: int, cutoff: int) -> np.ndarray:
        """<psi_s,n | psi_s',n> for branch pairs and initial levels n <= cutoff, shape (4, 4, cutoff + 1)

        Raises:
            LeakageException: population reached the top of the basis
            NumericalException: propagation lost unitarity
        """
        key = (mode, cutoff)
        if key in self._cache:
            return self._cache[key]
        size = self.basis_size(mode, cutoff)
        x, vectors = eigh_tridiagonal(np.zeros(size), np.sqrt(np.arange(1, size) / 2.0))
        levels = np.arange(size)
        state = np.zeros((len(BRANCHES), size, cutoff + 1), dtype=complex)
        state[:, levels[: cutoff + 1], levels[: cutoff + 1]] = 1.0
        top = 0.0
        for g in self._couplings[mode].T:
            rotation = np.exp(-1j * np.outer(np.angle(g), levels))[:, :, None]
            kick = np.exp(-1j * math.sqrt(2.0) * self.dt * np.outer(np.abs(g), x))[:, :, None]
            state = rotation * (vectors @ (kick * (vectors.T @ (np.conj(rotation) * state))))
            top = max(top, float(np.max(np.abs(state[:, -1, :]) ** 2)))
        norms = np.sum(np.abs(state) ** 2, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-8:
            logger.error("Oracle propagation lost unitarity (%g)", np.max(np.abs(norms - 1.0)))
            raise NumericalException("Fock oracle propagation is not unitary")
        if top > self.tail:
            logger.error("Oracle leakage %g to level %d", top, size - 1)
            raise LeakageException(f"Population {top:.3g} reached the top Fock level {size - 1}")
        result = np.einsum("and,bnd->abd", np.conj(state), state)
        logger.debug("Oracle mode %d: basis %d, cutoff %d, top population %.3g", mode, size, cutoff, top)
        self._cache[key] = result
        return result

    def evaluate(
        self, thermals: Sequence[ThermalState], target_phase: float = CPF_PHASE, cutoffs: Optional[Sequence[int]] = None
    ) -> List[FidelityReport]:
        """Fidelity for several thermal states from one propagation per mode"""
        if cutoffs is None:
            cutoffs = [
                max(thermal_cutoff(state.occupations[mode], self.tail) for state in thermals) for mode in range(2)
            ]
        overlaps = [self.overlaps(mode, cutoffs[mode]) for mode in range(2)]
        reports = []
        for state in thermals:
            terms = _target_factors(-target_phase)
            for mode, occupation in enumerate(state.occupations):
                weights = thermal_weights(occupation, cutoffs[mode])
                terms = terms * (overlaps[mode] @ weights)
            reports.append(_report(terms, "fock-oracle", target_phase))
        return reports

    def fidelity(self, thermal: ThermalState, target_phase: float = CPF_PHASE) -> FidelityReport:
        return self.evaluate([thermal], target_phase)[0]


def fidelity_fock_oracle(
    schedule: PulseSchedule,
    modes: Sequence[ModeFunction],
    etas: Sequence[float],
    micromotion: MicromotionPhase,
    thermal: ThermalState,
    n_max: Optional[int] = None,
    target_phase: float = CPF_PHASE,
    conjugate: bool = False,
    tail: float = 1e-6,
) -> FidelityReport:
    """Fidelity from truncated Fock space propagation

    Args:
        schedule: pulse schedule
        modes: cm and r mode functions on the quadrature grid
        etas: Lamb-Dicke parameters
        micromotion: micromotion phase
        thermal: thermal occupations
        n_max: highest initial Fock level averaged over, derived from ``tail`` when omitted
        target_phase: conditional phase of the target gate
        conjugate: use v* instead of v
        tail: accepted thermal tail weight and top level population

    Returns:
        (FidelityReport): oracle fidelity
    """
    cutoffs = None
    if n_max is not None:
        for occupation in thermal.occupations:
            weight = (occupation / (occupation + 1.0)) ** (n_max + 1)
            if weight >= tail:
                raise DomainException(f"n_max={n_max} leaves thermal tail weight {weight:.3g} (n={occupation:.3g})")
        cutoffs = (n_max, n_max)
    oracle = FockOracle(schedule, modes, etas, micromotion, conjugate=conjugate, tail=tail)
    report = oracle.evaluate([thermal], target_phase, cutoffs)[0]
    logger.info("Fock oracle fidelity %.12g", report.fidelity)
    return report


@dataclass
class ScanRow:
    """One gate time of an infidelity curve

    Attributes:
        duration (float): gate time [s]
        tau_over_tz (float): gate time in center-of-mass periods
        fidelity (float): analytic fidelity, nan when the point failed
        omega_star (float): optimal constant Rabi amplitude [rad/s]
        variant (str): design mode of the curve
        oracle_fidelity (float): Fock oracle fidelity, None when not requested
        target_phase (float): conditional phase aimed at [rad]
        error (str): failure message of the point
    """

    duration: float
    tau_over_tz: float
    fidelity: float
    omega_star: float
    variant: DESIGN_MODE
    theta: float = math.nan
    residual: float = math.nan
    oracle_fidelity: Optional[float] = None
    target_phase: float = CPF_PHASE
    error: Optional[str] = None

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    @property
    def failed(self) -> bool:
        return self.error is not None

    def __bool__(self) -> bool:
        return not self.failed


def infidelity_scan(
    model: "GateModel",
    detuning: float,
    durations: Sequence[float],
    design_mode: DESIGN_MODE = "micromotion",
    oracle: bool = False,
    accept_locally_equivalent: bool = False,
) -> List[ScanRow]:
    """Single segment infidelity curve over gate times

    ``micromotion`` designs and evaluates with micromotion, ``static`` in the static harmonic trap, and
    ``static-design-under-micromotion`` evaluates the static optimum with micromotion.

    Args:
        model: prepared gate model
        detuning: two-photon detuning [rad/s]
        durations: gate times [s]
        design_mode: pipeline variant
        oracle: add the Fock oracle fidelity of each optimum
        accept_locally_equivalent: aim at -pi / 4 where the conditional phase is negative

    Returns:
        (list): rows in the order of ``durations``
    """
    from pyiongate.gate_api.design import single_segment_scan

    static_design = design_mode != "micromotion"
    static_evaluation = design_mode == "static"
    results = single_segment_scan(
        model, detuning, durations, static=static_design, accept_locally_equivalent=accept_locally_equivalent
    )
    rows = []
    for duration, result in zip(durations, results):
        schedule = result.schedule
        integrals = result.integrals
        fidelity = result.fidelity
        if design_mode == "static-design-under-micromotion":
            integrals = model.integrals(schedule, static=False)
            fidelity = fidelity_analytic(integrals, model.thermal, result.target_phase).fidelity
        row = ScanRow(
            duration=duration,
            tau_over_tz=duration / model.secular_period,
            fidelity=fidelity,
            omega_star=schedule.amplitudes[0],
            variant=design_mode,
            theta=integrals.theta,
            residual=integrals.max_displacement,
            target_phase=result.target_phase,
        )
        if oracle:
            row.oracle_fidelity = model.fidelity(
                schedule, static=static_evaluation, method="fock-oracle", target_phase=result.target_phase
            ).fidelity
        rows.append(row)
    logger.info("Infidelity scan (%s) over %d gate times", design_mode, len(rows))
    return rows
