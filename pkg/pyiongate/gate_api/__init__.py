"""Gate API library"""

from abc import ABC
from typing import Literal

from pydantic import BaseModel, ConfigDict

AXIS_LABEL = Literal["axial-cm", "axial-rel", "transverse"]
MODE_LABEL = Literal["cm", "r"]
EQUILIBRIUM_METHOD = Literal[
    "self-consistent",  # fixed point of the driven relative-mode solution
    "pseudopotential",  # static Coulomb balance at the pseudopotential frequency
]
DESIGN_MODE = Literal[
    "micromotion",  # design and evaluate with micromotion
    "static",  # design and evaluate in the static harmonic trap
    "static-design-under-micromotion",  # static design evaluated with micromotion
]
FIDELITY_METHOD = Literal["analytic", "fock-oracle"]


class GateBaseObject(BaseModel, ABC):
    """Abstract base for the immutable value objects of the gate pipeline

    Objects are frozen so they can be shared between scan workers.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")
