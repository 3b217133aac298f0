"""Physical constants (CODATA 2018)"""

from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalConstants:
    """SI constants used by every calculation of the package

    Attributes:
        e (float): elementary charge [C]
        epsilon0 (float): vacuum permittivity [F/m]
        hbar (float): reduced Planck constant [J s]
        u (float): atomic mass unit [kg]
        k_b (float): Boltzmann constant [J/K]
    """

    e: float = 1.602176634e-19
    epsilon0: float = 8.8541878128e-12
    hbar: float = 1.054571817e-34
    u: float = 1.66053906660e-27
    k_b: float = 1.380649e-23

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"Constant {name} must be positive, got {value}")

    @property
    def coulomb(self) -> float:
        """e^2 / (pi * epsilon0), the Coulomb factor of the axial parameters"""
        return self.e**2 / (3.141592653589793 * self.epsilon0)


CODATA2018 = PhysicalConstants()
