"""Two-stage micromotion averaged displacement integrals"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import special

from pyiongate.exceptions import DomainException, GridResolutionException, TruncationFailureException
from pyiongate.gate_api.common import grid_step, segment_integrals, segment_slices
from pyiongate.gate_api.dynamics import MicromotionPhase, PulseSchedule, chi, ion_sign
from pyiongate.gate_api.mathieu import ModeFunction

logger = logging.getLogger(__name__)

WINDOW_SAMPLES = 64
MIN_WINDOWS_PER_SECULAR_PERIOD = 8

ArrayLike = Union[float, np.ndarray]


def bessel_j0(x: ArrayLike) -> ArrayLike:
    """Bessel function of the first kind of order 0"""
    return special.j0(x)


def bessel_j1(x: ArrayLike) -> ArrayLike:
    """Bessel function of the first kind of order 1"""
    return special.j1(x)


@dataclass
class SlowFastDecomposition:
    """Integrand chi_j w split into slow functions and one micromotion harmonic

    ``Omega(t) sin(a0 + a1 cos(Omega_T t + phi)) (b0 + b1 cos(Omega_T t + varphi))`` for the real and imaginary part
    of w separately.

    Attributes:
        t (np.ndarray): sample times [s]
        ion (int): ion index
        amplitude (np.ndarray): Rabi amplitude at t [rad/s]
        a0 (np.ndarray): slow phase [rad]
        a1 (float): micromotion depth [rad]
        phi (float): micromotion phase of the force [rad]
        b0 (np.ndarray): slow part of w
        b1 (np.ndarray): first harmonic amplitude of Re w and Im w, shape (2, n)
        varphi (np.ndarray): first harmonic phase of Re w and Im w [rad], shape (2, n)
        rf_frequency (float): r.f. frequency [rad/s], None without micromotion
        exact (np.ndarray): chi_j w on the same samples
        harmonic_ratio (float): |c2 / c1| of the drive
        segments (int): pulse segments, integrated separately
    """

    t: np.ndarray
    ion: int
    amplitude: np.ndarray
    a0: np.ndarray
    a1: float
    phi: float
    b0: np.ndarray
    b1: np.ndarray
    varphi: np.ndarray
    rf_frequency: Optional[float]
    exact: np.ndarray
    harmonic_ratio: float = 0.0
    segments: int = 1

    def reconstruct(self) -> np.ndarray:
        """Integrand rebuilt from the slow functions"""
        rf_phase = (self.rf_frequency or 0.0) * self.t
        force = self.amplitude * np.sin(self.a0 + self.a1 * np.cos(rf_phase + self.phi))
        envelope = self.b0 + self.b1[0] * np.cos(rf_phase + self.varphi[0])
        envelope = envelope + 1j * self.b1[1] * np.cos(rf_phase + self.varphi[1])
        return force * envelope

    def residual(self) -> float:
        """Largest reconstruction error relative to the largest exact integrand value"""
        scale = np.max(np.abs(self.exact), initial=0.0)
        return float(np.max(np.abs(self.reconstruct() - self.exact)) / scale) if scale else 0.0


@dataclass(frozen=True)
class FastDisplacement:
    """Averaged displacement integral of one ion and mode

    Attributes:
        i1 (complex): slow term carrying J0(a1)
        i2 (complex): phase shifted term carrying J1(a1)
        reduction (float): effective Rabi reduction factor J0(a1)
    """

    i1: complex
    i2: complex
    reduction: float

    @property
    def total(self) -> complex:
        return self.i1 + self.i2

    def alpha(self, eta: float) -> complex:
        """Approximate alpha_mu,j = i eta (I1 + I2)"""
        return 1j * eta * self.total


def _window_projection(mode: ModeFunction, t: np.ndarray, rf_frequency: float):
    """Mean and first r.f. harmonic of w over one r.f. period around each window center"""
    period = 2.0 * math.pi / rf_frequency
    count = int(math.ceil(t[-1] / period))
    centers = (np.arange(count) + 0.5) * period
    offsets = (np.arange(WINDOW_SAMPLES) / WINDOW_SAMPLES - 0.5) * period
    samples = (centers[:, None] + offsets[None, :]).ravel()
    values, _ = mode.resample(samples)
    values = values.reshape(count, WINDOW_SAMPLES)
    phase = rf_frequency * (centers[:, None] + offsets[None, :])
    mean = values.mean(axis=1)
    cosine = np.stack([2.0 * np.mean(part * np.cos(phase), axis=1) for part in (values.real, values.imag)])
    sine = np.stack([2.0 * np.mean(part * np.sin(phase), axis=1) for part in (values.real, values.imag)])
    b0 = np.interp(t, centers, mean.real) + 1j * np.interp(t, centers, mean.imag)
    c = np.stack([np.interp(t, centers, row) for row in cosine])
    s = np.stack([np.interp(t, centers, row) for row in sine])
    return b0, np.hypot(c, s), np.arctan2(-s, c)


def decompose(
    schedule: PulseSchedule, mode: ModeFunction, micromotion: MicromotionPhase, ion: int, conjugate: bool = False
) -> SlowFastDecomposition:
    """Slow and fast parts of the displacement integrand of one ion and mode

    The constant part of eta_mm joins the slow phase a0, its first harmonic sets a1 and phi, and Re w and Im w are
    projected onto their one-period mean and first r.f. harmonic. Harmonics n >= 2 are dropped.

    Args:
        schedule: pulse schedule
        mode: mode function on the quadrature grid
        micromotion: micromotion phase
        ion: ion index 1 or 2
        conjugate: use v* instead of v

    Returns:
        (SlowFastDecomposition): slow functions on the mode samples
    """
    sign = ion_sign(ion)
    t = mode.t
    grid_step(t)
    w = np.conj(mode.v) if conjugate else mode.v
    exact = chi(t, ion, schedule, micromotion) * w
    a0 = schedule.detuning * t + schedule.phases[ion - 1] + sign * micromotion.mean
    a1, phi, ratio = 0.0, 0.0, 0.0
    if micromotion.active:
        drive = micromotion.drive
        if drive.truncation < 2:
            raise TruncationFailureException(f"Drive truncation {drive.truncation} keeps no second harmonic")
        c1 = float(drive.coefficients[1])
        a1 = micromotion.depth
        phi = 0.0 if sign * c1 >= 0 else math.pi
        ratio = drive.harmonic_ratio
    rf_frequency = micromotion.rf_frequency or mode.rf_frequency
    if rf_frequency:
        if rf_frequency / mode.omega < MIN_WINDOWS_PER_SECULAR_PERIOD:
            raise GridResolutionException(
                f"r.f. frequency only {rf_frequency / mode.omega:.3g} times the {mode.label} secular frequency"
            )
        b0, b1, varphi = _window_projection(mode, t, rf_frequency)
        if conjugate:
            b0 = np.conj(b0)
            varphi[1] = varphi[1] + math.pi
    else:
        b0, b1, varphi = w, np.zeros((2, t.size)), np.zeros((2, t.size))
    logger.debug("Decomposition of ion %d, %s mode: a1=%.6g |c2/c1|=%.3g", ion, mode.label, a1, ratio)
    return SlowFastDecomposition(
        t=t,
        ion=ion,
        amplitude=schedule.amplitude(t),
        a0=a0,
        a1=a1,
        phi=phi,
        b0=b0,
        b1=b1,
        varphi=varphi,
        rf_frequency=rf_frequency,
        exact=exact,
        harmonic_ratio=ratio,
        segments=schedule.segments,
    )


def fast_displacement(decomp: SlowFastDecomposition, duration: Optional[float] = None) -> FastDisplacement:
    """Period averaged integral of chi_j w

    ``I1 = int Omega sin(a0) J0(a1) b0 dt`` and ``I2 = int Omega cos(a0) J1(a1) b1 cos(varphi - phi) dt``.

    Args:
        decomp: slow and fast decomposition
        duration: gate time to check the samples against [s]

    Returns:
        (FastDisplacement): I1, I2 and the reduction factor J0(a1)
    """
    t = decomp.t
    if duration is not None and abs(t[-1] - duration) > 1e-9 * duration:
        raise DomainException(f"Decomposition ends at {t[-1]:.9g} s, not at {duration:.9g} s")
    step = grid_step(t)
    slices = segment_slices(t.size - 1, decomp.segments)
    j0, j1 = bessel_j0(decomp.a1), bessel_j1(decomp.a1)
    slow = decomp.amplitude * np.sin(decomp.a0) * j0 * decomp.b0
    shifted = decomp.amplitude * np.cos(decomp.a0) * j1
    second = shifted * (
        decomp.b1[0] * np.cos(decomp.varphi[0] - decomp.phi) + 1j * decomp.b1[1] * np.cos(decomp.varphi[1] - decomp.phi)
    )
    totals, _ = segment_integrals(np.stack([slow, second]), step, slices)
    i1, i2 = complex(totals[0].sum()), complex(totals[1].sum())
    logger.debug("Two-stage integrals I1=%s I2=%s", i1, i2)
    return FastDisplacement(i1=i1, i2=i2, reduction=float(j0))
