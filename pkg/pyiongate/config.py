"""Run configuration"""

import hashlib
import json
import logging
import math
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Annotated, Any, Dict, Literal, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from pyiongate.constants import CODATA2018
from pyiongate.exceptions import ConfigurationException
from pyiongate.gate_api import DESIGN_MODE, EQUILIBRIUM_METHOD
from pyiongate.gate_api.model import GateModel
from pyiongate.gate_api.trap import TrapConfiguration
from pyiongate.settings import NumericsSettings

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
BUNDLED = ("fig1", "fig2", "fig3")


class ConfigSection(BaseModel):
    """Base of the run configuration sections"""

    model_config = ConfigDict(extra="forbid", frozen=True)


class TrapSection(ConfigSection):
    """Trap and ion in engineering units

    Attributes:
        dc_voltage_v (float): d.c. voltage U0 [V]
        ac_voltage_v (float): a.c. voltage V0 [V]
        electrode_size_um (float): characteristic electrode size d0 [um]
        rf_frequency_mhz (float): r.f. frequency Omega_T / 2 pi [MHz]
        ion_mass_u (float): ion mass [u]
        equilibrium (str): equilibrium separation model
    """

    dc_voltage_v: Annotated[float, Field(description="d.c. voltage U0 [V]")]
    ac_voltage_v: Annotated[float, Field(description="a.c. voltage V0 [V]", gt=0)]
    electrode_size_um: Annotated[float, Field(description="Characteristic electrode size d0 [um]", gt=0)]
    rf_frequency_mhz: Annotated[float, Field(description="r.f. frequency Omega_T / 2 pi [MHz]", gt=0)]
    ion_mass_u: Annotated[float, Field(description="Ion mass [u]", gt=0)] = 9.0
    equilibrium: Annotated[EQUILIBRIUM_METHOD, Field(description="Equilibrium separation model")] = "self-consistent"

    def to_trap(self, wave_vector_per_um: float, temperature_ratio: float) -> TrapConfiguration:
        """SI trap configuration"""
        return TrapConfiguration(
            dc_voltage=self.dc_voltage_v,
            ac_voltage=self.ac_voltage_v,
            electrode_size=self.electrode_size_um * 1e-6,
            rf_frequency=TWO_PI * self.rf_frequency_mhz * 1e6,
            ion_mass=self.ion_mass_u * CODATA2018.u,
            wave_vector=wave_vector_per_um * 1e6,
            temperature_ratio=temperature_ratio,
            equilibrium=self.equilibrium,
        )

    @classmethod
    def from_trap(cls, trap: TrapConfiguration) -> "TrapSection":
        return cls(
            dc_voltage_v=trap.dc_voltage,
            ac_voltage_v=trap.ac_voltage,
            electrode_size_um=trap.electrode_size * 1e6,
            rf_frequency_mhz=trap.rf_frequency / TWO_PI / 1e6,
            ion_mass_u=trap.ion_mass / CODATA2018.u,
            equilibrium=trap.equilibrium,
        )


class LaserSection(ConfigSection):
    """Gate lasers

    Attributes:
        wave_vector_per_um (float): effective wave vector [1/um]
        detuning_over_omega_cm (float): detuning in units of the center-of-mass frequency
        phases (tuple): laser phases of the ions [rad]
        conjugate_modes (bool): use v* instead of v in the gate integrals
    """

    wave_vector_per_um: Annotated[float, Field(description="Effective wave vector [1/um]", ge=0)] = 8.0
    detuning_over_omega_cm: Annotated[float, Field(description="Detuning in units of omega_cm")] = 0.95
    phases: Annotated[Tuple[float, float], Field(description="Laser phases of the ions [rad]")] = (0.0, 0.0)
    conjugate_modes: Annotated[bool, Field(description="Use v* instead of v in the gate integrals")] = False


class DesignSection(ConfigSection):
    """Pulse design and scan grid

    Attributes:
        mode (str): ``segments`` (nullspace design) or ``single-segment`` (amplitude optimized constant pulse)
        segments (int): number of equal-time segments
        tau_over_tz (float): gate time of a single design in center-of-mass periods
        tau_start (float): first scanned gate time [T_z]
        tau_stop (float): last scanned gate time [T_z]
        tau_points (int): number of scanned gate times
        variants (tuple): pipeline variants of a scan
        accept_locally_equivalent (bool): accept a -pi / 4 conditional phase
        oracle (bool): add Fock oracle fidelities to scans
    """

    mode: Annotated[Literal["segments", "single-segment"], Field(description="Design method")] = "segments"
    segments: Annotated[int, Field(description="Number of equal-time segments", ge=1)] = 9
    tau_over_tz: Annotated[float, Field(description="Gate time of a single design [T_z]", gt=0)] = 1.31
    tau_start: Annotated[float, Field(description="First scanned gate time [T_z]", gt=0)] = 1.0
    tau_stop: Annotated[float, Field(description="Last scanned gate time [T_z]", gt=0)] = 2.0
    tau_points: Annotated[int, Field(description="Number of scanned gate times", ge=1)] = 11
    variants: Annotated[Tuple[DESIGN_MODE, ...], Field(description="Pipeline variants of a scan", min_length=1)] = (
        "micromotion",
    )
    accept_locally_equivalent: Annotated[bool, Field(description="Accept a -pi/4 conditional phase")] = False
    oracle: Annotated[bool, Field(description="Add Fock oracle fidelities to scans")] = False

    @model_validator(mode="after")
    def check_range(self):
        if self.tau_stop < self.tau_start:
            raise ValueError(f"tau_stop {self.tau_stop} is below tau_start {self.tau_start}")
        return self

    def tau_grid(self) -> np.ndarray:
        """Scanned gate times [T_z]"""
        return np.linspace(self.tau_start, self.tau_stop, self.tau_points)


class ThermalSection(ConfigSection):
    """Doppler temperature as k_B T_D / (hbar omega_cm)"""

    temperature_ratio: Annotated[float, Field(description="k_B T_D / (hbar omega_cm)", gt=0)] = 10.0


class OutputSection(ConfigSection):
    """Output files

    Attributes:
        directory (str): output directory
        window_tz (float): mode table window [T_z]
        step_tz (float): mode table step [T_z]
        waveform (bool): write the waveform CSV of designs
    """

    directory: Annotated[str, Field(description="Output directory")] = "results"
    window_tz: Annotated[float, Field(description="Mode table window [T_z]", gt=0)] = 2.0
    step_tz: Annotated[float, Field(description="Mode table step [T_z]", gt=0)] = 0.0005
    waveform: Annotated[bool, Field(description="Write the waveform CSV of designs")] = True

    @property
    def samples(self) -> int:
        return int(round(self.window_tz / self.step_tz)) + 1


class RunConfig(ConfigSection):
    """Complete run configuration

    Example:
        ```pycon

        >>> config = load_config("fig3")
        >>> config.design.segments
        9
        ```
    """

    trap: TrapSection
    laser: LaserSection = LaserSection()
    design: DesignSection = DesignSection()
    thermal: ThermalSection = ThermalSection()
    numerics: NumericsSettings = Field(default_factory=NumericsSettings)
    output: OutputSection = OutputSection()

    def canonical_json(self) -> str:
        """Resolved configuration with sorted keys"""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    def to_trap(self) -> TrapConfiguration:
        return self.trap.to_trap(self.laser.wave_vector_per_um, self.thermal.temperature_ratio)

    def build_model(self) -> GateModel:
        """Gate model with the detuning resolved against the exact center-of-mass frequency"""
        model = GateModel(
            self.to_trap(),
            settings=self.numerics,
            phases=self.laser.phases,
            conjugate_modes=self.laser.conjugate_modes,
        )
        model.trap = model.trap.model_copy(update={"detuning": self.laser.detuning_over_omega_cm * model.omega_cm})
        return model


class RunManifest(BaseModel):
    """Provenance of every emitted data file

    Attributes:
        command (str): CLI command
        config (dict): resolved configuration including defaults
        config_hash (str): SHA-256 of the canonical configuration
        derived (dict): derived trap quantities
        version (str): package version
        timestamp (str): creation time (UTC, ISO 8601)
    """

    command: str
    config: Dict[str, Any]
    config_hash: str
    derived: Dict[str, float]
    version: str
    timestamp: str

    @classmethod
    def create(cls, command: str, config: RunConfig, model: GateModel) -> "RunManifest":
        from pyiongate import __version__

        return cls(
            command=command,
            config=config.model_dump(mode="json"),
            config_hash=config.digest,
            derived=model.derived(),
            version=__version__,
            timestamp=datetime.now(timezone.utc).isoformat(),
        )

    @property
    def filename(self) -> str:
        return f"{self.command}-{self.config_hash[:12]}.manifest.json"

    def write(self, directory: Path) -> Path:
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / self.filename
        path.write_text(self.model_dump_json(indent=2) + "\n")
        logger.info("Manifest written to %s", path)
        return path


def _read(source: Union[str, Path]) -> Tuple[str, str]:
    """Text and name of a config file or a bundled config"""
    path = Path(source)
    if path.is_file():
        return path.read_text(), path.name
    name = path.name[: -len(".json")] if path.name.endswith(".json") else path.name
    if name in BUNDLED and not path.parent.parts:
        return resources.files("pyiongate.configs").joinpath(f"{name}.json").read_text(), f"{name}.json"
    raise ConfigurationException(f"Configuration file {source} not found (bundled: {', '.join(BUNDLED)})")


def load_config(source: Union[str, Path]) -> RunConfig:
    """Load a JSON (or YAML) run configuration

    Args:
        source: path or bundled config name (``fig1``, ``fig2``, ``fig3``)

    Returns:
        (RunConfig): validated configuration

    Raises:
        ConfigurationException: unreadable, malformed or invalid configuration
    """
    text, name = _read(source)
    try:
        if name.endswith((".yml", ".yaml")):
            data = YAML(typ="safe", pure=True).load(text)
        else:
            data = json.loads(text)
    except json.JSONDecodeError as err:
        logger.error("Malformed JSON in %s", name)
        raise ConfigurationException(f"Malformed JSON in {name}: {err.msg} at line {err.lineno}") from err
    except YAMLError as err:
        logger.error("Malformed YAML in %s", name)
        raise ConfigurationException(f"Malformed YAML in {name}: {err}") from err
    if not isinstance(data, dict):
        raise ConfigurationException(f"{name} must hold a mapping at the top level")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as err:
        first = err.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or "<root>"
        logger.error("Invalid configuration key %s in %s", key, name)
        raise ConfigurationException(f"Invalid configuration key '{key}' in {name}: {first['msg']}") from err
    logger.debug("Loaded configuration %s (%s)", name, config.digest[:12])
    return config
