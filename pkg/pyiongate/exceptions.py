"""Ion gate exceptions"""

from typing import Optional


class IonGateException(Exception):
    """General ion gate error"""

    exit_code: int = 1


class ConfigurationException(IonGateException):
    """Invalid configuration or physical input"""

    exit_code = 2


class InstabilityException(IonGateException):
    """Mathieu parameters outside the stability region"""

    exit_code = 3

    def __init__(self, message: str, trace: Optional[float] = None):
        super().__init__(message)
        self.trace = trace


class InfeasibleDesignException(IonGateException):
    """No pulse schedule satisfies the gate constraints"""

    exit_code = 4

    def __init__(self, message: str, phase_sign: Optional[int] = None):
        super().__init__(message)
        self.phase_sign = phase_sign


class NumericalException(IonGateException):
    """General numerical failure"""

    exit_code = 5


class IntegrationFailureException(NumericalException):
    """ODE integration did not succeed"""


class TruncationFailureException(NumericalException):
    """Truncated linear system is singular"""


class DegenerateParametersException(NumericalException):
    """Closed form is undefined at these parameters"""


class NoEquilibriumException(NumericalException):
    """Equilibrium iteration did not converge"""


class GridResolutionException(NumericalException):
    """Time grid does not resolve the micromotion"""


class LeakageException(NumericalException):
    """Population leaked to the top of the truncated Fock basis"""


class DomainException(NumericalException):
    """Argument outside the valid domain"""
