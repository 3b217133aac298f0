"""Mathieu equation solvers"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from pyiongate.constants import CODATA2018, PhysicalConstants
from pyiongate.exceptions import (
    DegenerateParametersException,
    DomainException,
    GridResolutionException,
    InstabilityException,
    IntegrationFailureException,
    TruncationFailureException,
)
from pyiongate.gate_api import MODE_LABEL
from pyiongate.settings import NumericsSettings

if TYPE_CHECKING:
    from pyiongate.gate_api.trap import MathieuParameters

logger = logging.getLogger(__name__)

# Period of the Mathieu coefficient in the dimensionless time xi = Omega_T t / 2
XI_PERIOD = math.pi
MAX_XI_STEP = math.pi / 64
MIN_DRIVE_TRUNCATION = 3


def _fundamental_rhs(a: float, q: float):
    def rhs(xi, y):
        k = a - 2.0 * q * math.cos(2.0 * xi)
        return np.array([y[1], -k * y[0], y[3], -k * y[2]])

    return rhs


def _integrate_period(a: float, q: float, settings: NumericsSettings, dense: bool = False):
    """Integrate the two fundamental solutions over one period of the coefficient"""
    sol = solve_ivp(
        _fundamental_rhs(a, q),
        (0.0, XI_PERIOD),
        np.array([1.0, 0.0, 0.0, 1.0]),
        method="DOP853",
        rtol=settings.ode_rtol,
        atol=settings.ode_atol,
        dense_output=dense,
    )
    if not sol.success:
        logger.error("Mathieu integration failed for a=%g, q=%g: %s", a, q, sol.message)
        raise IntegrationFailureException(f"Mathieu integration failed for a={a}, q={q}: {sol.message}")
    end = sol.y[:, -1]
    # columns are the two fundamental solutions, rows are value and derivative
    monodromy = np.array([[end[0], end[2]], [end[1], end[3]]])
    return monodromy, sol


@dataclass(frozen=True)
class MonodromyResult:
    """Floquet analysis of one period

    Attributes:
        trace (float): trace of the monodromy matrix
        nu (float): principal characteristic exponent in [0, 1]
        stable (bool): True if |trace| <= 2 within the stability slack
        matrix (np.ndarray): monodromy matrix
    """

    trace: float
    nu: float
    stable: bool
    matrix: np.ndarray = field(repr=False, compare=False, default=None)


def _monodromy_result(matrix: np.ndarray, settings: NumericsSettings) -> MonodromyResult:
    trace = float(np.trace(matrix))
    stable = abs(trace) <= 2.0 + settings.stability_slack
    nu = math.acos(min(1.0, max(-1.0, trace / 2.0))) / math.pi
    return MonodromyResult(trace=trace, nu=nu, stable=stable, matrix=matrix)


def characteristic_exponent(a: float, q: float, settings: Optional[NumericsSettings] = None) -> MonodromyResult:
    """Characteristic exponent of the Mathieu equation u'' + (a - 2q cos 2xi) u = 0

    Unstable parameters are reported with ``stable=False``; the caller decides what to do with them.

    Example:
        ```pycon

        >>> characteristic_exponent(0.25, 0.0).nu
        0.5000000000...
        ```
    """
    settings = settings or NumericsSettings()
    matrix, _ = _integrate_period(a, q, settings)
    result = _monodromy_result(matrix, settings)
    logger.debug("Monodromy a=%g q=%g: trace=%.15g nu=%.12g", a, q, result.trace, result.nu)
    return result


class FloquetPropagator:
    """Homogeneous Mathieu solutions at arbitrary times from a single integrated period

    One period is integrated with dense output; later (and earlier) periods follow from powers of the monodromy
    matrix, so long gate times cost no additional integration.

    Args:
        a: Mathieu a parameter
        q: Mathieu q parameter
        rf_frequency: r.f. frequency Omega_T [rad/s]
        settings: numerical settings
    """

    def __init__(self, a: float, q: float, rf_frequency: float, settings: Optional[NumericsSettings] = None):
        self.settings = settings or NumericsSettings()
        self.a = a
        self.q = q
        self.rf_frequency = rf_frequency
        matrix, sol = _integrate_period(a, q, self.settings, dense=True)
        self.monodromy = _monodromy_result(matrix, self.settings)
        if not self.monodromy.stable:
            logger.error("Unstable Mathieu parameters a=%g q=%g (trace %g)", a, q, self.monodromy.trace)
            raise InstabilityException(
                f"Mathieu parameters a={a:g}, q={q:g} are unstable (monodromy trace {self.monodromy.trace:.6g})",
                trace=self.monodromy.trace,
            )
        self._interpolant = sol.sol
        self._inverse = np.linalg.inv(matrix)

    @property
    def nu(self) -> float:
        """Characteristic exponent"""
        return self.monodromy.nu

    @property
    def omega(self) -> float:
        """Secular frequency nu * Omega_T / 2 [rad/s]"""
        return self.nu * self.rf_frequency / 2.0

    def _period_states(self, initial: np.ndarray, first: int, last: int) -> np.ndarray:
        """State (u, du/dxi) at the start of every period from ``first`` to ``last``"""
        states = np.empty((last - first + 1, 2), dtype=complex)
        forward = initial.astype(complex)
        backward = initial.astype(complex)
        for k in range(0, last + 1):
            if k >= first:
                states[k - first] = forward
            forward = self.monodromy.matrix @ forward
        for k in range(-1, first - 1, -1):
            backward = self._inverse @ backward
            if k <= last:
                states[k - first] = backward
        return states

    def solve(self, t: np.ndarray, initial: Tuple[complex, complex]) -> Tuple[np.ndarray, np.ndarray]:
        """Solution with the given initial value and xi-derivative at t = 0

        Args:
            t: times [s]
            initial: u(0) and du/dxi(0)

        Returns:
            (np.ndarray, np.ndarray): u(t) and du/dxi(t)
        """
        t = np.atleast_1d(np.asarray(t, dtype=float))
        xi = 0.5 * self.rf_frequency * t
        period = np.floor(xi / XI_PERIOD).astype(np.int64)
        phase = np.clip(xi - period * XI_PERIOD, 0.0, XI_PERIOD)
        first, last = int(period.min()), int(period.max())
        states = self._period_states(np.asarray(initial), first, last)[period - first]
        basis = self._interpolant(phase)
        u = basis[0] * states[:, 0] + basis[2] * states[:, 1]
        du = basis[1] * states[:, 0] + basis[3] * states[:, 1]
        return u, du

    def mode(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Mode function v with v(0) = 1, dv/dt(0) = i omega, and its time derivative"""
        v, dv = self.solve(t, (1.0, 1j * self.nu))
        vdot = 0.5 * self.rf_frequency * dv
        origin = np.asarray(t) == 0.0
        v[origin] = 1.0
        vdot[origin] = 1j * self.omega
        return v, vdot


@dataclass
class ModeFunction:
    """Sampled complex Floquet solution v(t)

    Attributes:
        t (np.ndarray): sample times [s]
        v (np.ndarray): mode function samples
        vdot (np.ndarray): time derivative samples [1/s]
        omega (float): secular frequency [rad/s]
        length (float): oscillator length [m]
        label (str): cm or r
        rf_frequency (float): r.f. frequency, None for a static harmonic mode
    """

    t: np.ndarray
    v: np.ndarray
    vdot: np.ndarray
    omega: float
    length: float
    label: MODE_LABEL
    rf_frequency: Optional[float] = None
    propagator: Optional[FloquetPropagator] = field(default=None, repr=False)

    @classmethod
    def harmonic(cls, t: np.ndarray, omega: float, length: float, label: MODE_LABEL) -> "ModeFunction":
        """Static trap mode v(t) = exp(i omega t)"""
        t = np.asarray(t, dtype=float)
        v = np.exp(1j * omega * t)
        return cls(t=t, v=v, vdot=1j * omega * v, omega=omega, length=length, label=label)

    def wronskian(self) -> np.ndarray:
        """Im[v* vdot], equal to omega for an exact solution"""
        return np.imag(np.conj(self.v) * self.vdot)

    def resample(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Evaluate v and vdot at other times"""
        t = np.asarray(t, dtype=float)
        if self.propagator is None:
            v = np.exp(1j * self.omega * t)
            return v, 1j * self.omega * v
        return self.propagator.mode(t)

    def restrict(self, t: np.ndarray) -> "ModeFunction":
        """Same mode sampled on another grid"""
        v, vdot = self.resample(t)
        return ModeFunction(
            t=np.asarray(t, dtype=float),
            v=v,
            vdot=vdot,
            omega=self.omega,
            length=self.length,
            label=self.label,
            rf_frequency=self.rf_frequency,
            propagator=self.propagator,
        )


def oscillator_length(label: MODE_LABEL, mass: float, omega: float, constants: PhysicalConstants = CODATA2018) -> float:
    """Oscillator length of the center-of-mass (hbar / 4 m omega) or relative (hbar / m omega) mode"""
    if not (mass > 0 and omega > 0):
        raise DomainException(f"Mass and frequency must be positive, got {mass}, {omega}")
    factor = 4.0 if label == "cm" else 1.0
    return math.sqrt(constants.hbar / (factor * mass * omega))


def mode_function(
    params: "MathieuParameters",
    t: np.ndarray,
    label: Optional[MODE_LABEL] = None,
    propagator: Optional[FloquetPropagator] = None,
    settings: Optional[NumericsSettings] = None,
    constants: PhysicalConstants = CODATA2018,
) -> ModeFunction:
    """Mode function sampled on the quadrature grid

    Args:
        params: Mathieu parameters of the axis
        t: sample times [s]
        label: cm or r, derived from the axis when omitted
        propagator: reuse an existing propagator of the same parameters
        settings: numerical settings
        constants: physical constants

    Returns:
        (ModeFunction): v with v(0) = 1 and vdot(0) = i omega
    """
    if label is None:
        if params.axis == "transverse":
            raise DomainException("Transverse axes carry no gate mode")
        label = "cm" if params.axis == "axial-cm" else "r"
    propagator = propagator or FloquetPropagator(params.a, params.q, params.rf_frequency, settings)
    t = np.asarray(t, dtype=float)
    v, vdot = propagator.mode(t)
    return ModeFunction(
        t=t,
        v=v,
        vdot=vdot,
        omega=propagator.omega,
        length=oscillator_length(label, params.ion_mass, propagator.omega, constants),
        label=label,
        rf_frequency=params.rf_frequency,
        propagator=propagator,
    )


def integrate_mathieu(
    a: float,
    q: float,
    initial: Sequence[complex],
    xi: np.ndarray,
    f0: float = 0.0,
    settings: Optional[NumericsSettings] = None,
) -> np.ndarray:
    """Integrate u'' + (a - 2q cos 2xi) u = f0 on a grid of dimensionless times

    Args:
        a: Mathieu a parameter
        q: Mathieu q parameter
        initial: u and du/dxi at xi[0], complex values allowed
        xi: increasing output grid, step at most pi/64
        f0: constant drive
        settings: numerical settings

    Returns:
        (np.ndarray): array of shape (2, len(xi)) with u and du/dxi
    """
    settings = settings or NumericsSettings()
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.size < 2 or np.any(np.diff(xi) <= 0):
        raise DomainException("Integration grid must be increasing with at least two points")
    if np.max(np.diff(xi)) > MAX_XI_STEP * (1.0 + 1e-12):
        raise GridResolutionException(f"Grid step {np.max(np.diff(xi)):.3g} exceeds pi/64 in xi")
    y0 = np.asarray(initial)
    y0 = y0.astype(complex) if np.iscomplexobj(y0) else y0.astype(float)

    def rhs(x, y):
        return np.array([y[1], f0 - (a - 2.0 * q * math.cos(2.0 * x)) * y[0]])

    sol = solve_ivp(
        rhs,
        (xi[0], xi[-1]),
        y0,
        method="DOP853",
        t_eval=xi,
        rtol=settings.ode_rtol,
        atol=settings.ode_atol,
    )
    if not sol.success:
        logger.error("Mathieu integration failed: %s", sol.message)
        raise IntegrationFailureException(f"Mathieu integration failed: {sol.message}")
    return sol.y


@dataclass(frozen=True)
class DriveSolution:
    """Periodic special solution of the driven relative-mode equation

    ``u(xi) = f0 * sum_n c_n cos(2 n xi)``

    Attributes:
        coefficients (np.ndarray): c_0 ... c_N
        f0 (float): drive [m]
        a (float): Mathieu a parameter
        q (float): Mathieu q parameter
        rf_frequency (float): r.f. frequency [rad/s], needed for time domain evaluation
    """

    coefficients: np.ndarray
    f0: float
    a: float
    q: float
    rf_frequency: Optional[float] = None

    @property
    def truncation(self) -> int:
        return len(self.coefficients) - 1

    @property
    def mean(self) -> float:
        """Period average f0 * c0 [m]"""
        return self.f0 * float(self.coefficients[0])

    @property
    def harmonic_ratio(self) -> float:
        """|c2 / c1|, size of the harmonics beyond the first micromotion sideband"""
        c = self.coefficients
        if len(c) < 3 or c[1] == 0:
            return 0.0
        return abs(float(c[2] / c[1]))

    def displacement_xi(self, xi: np.ndarray) -> np.ndarray:
        n = np.arange(len(self.coefficients))
        return self.f0 * np.cos(2.0 * np.multiply.outer(np.asarray(xi, dtype=float), n)) @ self.coefficients

    def displacement(self, t: np.ndarray) -> np.ndarray:
        """Micromotion displacement at times t [m]"""
        if not self.rf_frequency:
            raise DomainException("Drive solution has no r.f. frequency for time domain evaluation")
        return self.displacement_xi(0.5 * self.rf_frequency * np.asarray(t, dtype=float))

    def residual(self, xi: np.ndarray) -> np.ndarray:
        """Residual of u'' + (a - 2q cos 2xi) u - f0 on the reconstructed series"""
        xi = np.asarray(xi, dtype=float)
        n = np.arange(len(self.coefficients))
        basis = np.cos(2.0 * np.multiply.outer(xi, n))
        u = self.f0 * basis @ self.coefficients
        u2 = -self.f0 * basis @ (4.0 * n**2 * self.coefficients)
        return u2 + (self.a - 2.0 * self.q * np.cos(2.0 * xi)) * u - self.f0


def _drive_coefficients(a: float, q: float, truncation: int) -> np.ndarray:
    """Solve the truncated recursion for c_0 ... c_truncation"""
    size = truncation + 1
    n = np.arange(size)
    matrix = np.diag(a - 4.0 * n**2).astype(float)
    matrix[n[1:], n[:-1]] = -q
    matrix[n[:-1], n[1:]] = -q
    matrix[1, 0] = -2.0 * q
    if np.linalg.cond(matrix) > 1e13:
        logger.error("Driven Mathieu system singular at a=%g q=%g", a, q)
        raise TruncationFailureException(
            f"Driven Mathieu system is singular at a={a:g}, q={q:g}; try a larger truncation"
        )
    rhs = np.zeros(size)
    rhs[0] = 1.0
    return np.linalg.solve(matrix, rhs)


def driven_solution(
    a: float, q: float, f0: float, truncation: int = 8, rf_frequency: Optional[float] = None
) -> DriveSolution:
    """Fourier coefficients of the driven Mathieu special solution

    Solves the truncated recursion ``a c0 - q c1 = 1``, ``(a - 4) c1 - q (2 c0 + c2) = 0`` and
    ``(a - 4n^2) c_n - q (c_{n-1} + c_{n+1}) = 0``.

    Args:
        a: Mathieu a parameter
        q: Mathieu q parameter
        f0: drive [m]
        truncation: highest harmonic kept, at least 3
        rf_frequency: r.f. frequency stored for time domain evaluation

    Returns:
        (DriveSolution): coefficients c_0 ... c_truncation
    """
    if truncation < MIN_DRIVE_TRUNCATION:
        raise DomainException(f"Drive truncation must be at least {MIN_DRIVE_TRUNCATION}, got {truncation}")
    coefficients = _drive_coefficients(a, q, truncation)
    logger.debug("Driven solution c0=%.10g c1=%.10g c2=%.10g", *coefficients[:3])
    return DriveSolution(coefficients=coefficients, f0=f0, a=a, q=q, rf_frequency=rf_frequency)


def closed_form_c012(a: float, q: float) -> Tuple[float, float, float]:
    """Closed form c0, c1, c2 of the three-harmonic truncation"""
    denominator = (32.0 - 3.0 * a) * q**2 + a * (a - 4.0) * (a - 16.0)
    scale = (32.0 + 3.0 * abs(a)) * q**2 + abs(a) * (abs(a) + 4.0) * (abs(a) + 16.0)
    if abs(denominator) <= 1e-12 * max(scale, 1e-300):
        raise DegenerateParametersException(f"Closed form undefined at a={a:g}, q={q:g}")
    c0 = (64.0 + a * (a - 20.0) - q**2) / denominator
    c1 = 2.0 * (a - 16.0) * q / denominator
    c2 = 2.0 * q**2 / denominator
    return c0, c1, c2
