"""Two-ion phase gates in Paul traps with micromotion"""

__version__ = "0.1.0"

from pyiongate.config import RunConfig, load_config
from pyiongate.gate_api.design import DesignResult, single_segment_scan, solve_segments, static_baseline
from pyiongate.gate_api.dynamics import PulseSchedule
from pyiongate.gate_api.fidelity import ThermalState, fidelity_analytic, fidelity_fock_oracle
from pyiongate.gate_api.model import GateModel, GateReport
from pyiongate.gate_api.trap import TrapConfiguration
from pyiongate.settings import NumericsSettings

__all__ = (
    "DesignResult",
    "GateModel",
    "GateReport",
    "NumericsSettings",
    "PulseSchedule",
    "RunConfig",
    "ThermalState",
    "TrapConfiguration",
    "fidelity_analytic",
    "fidelity_fock_oracle",
    "load_config",
    "single_segment_scan",
    "solve_segments",
    "static_baseline",
)
