"""Pytest setup"""

import json
from pathlib import Path

import pytest
from ruamel.yaml import YAML

from pyiongate import GateModel, RunConfig, load_config

# Small r.f. to secular ratio keeps grids short and Fock oracle propagation cheap
COMPACT_CONFIG = {
    "trap": {
        "dc_voltage_v": 0.0,
        "ac_voltage_v": 0.5524,
        "electrode_size_um": 200.0,
        "rf_frequency_mhz": 10.0,
        "ion_mass_u": 9.0,
        "equilibrium": "self-consistent",
    },
    "laser": {"wave_vector_per_um": 2.0, "detuning_over_omega_cm": 0.95},
    "design": {
        "mode": "single-segment",
        "segments": 1,
        "tau_over_tz": 2.0,
        "tau_start": 2.0,
        "tau_stop": 3.0,
        "tau_points": 3,
        "variants": ["micromotion", "static"],
    },
    "thermal": {"temperature_ratio": 10.0},
    "output": {"window_tz": 0.5, "step_tz": 0.01},
}


def pytest_addoption(parser):
    """Pytest options"""
    parser.addoption("--run_slow", action="store_true", default=False, help="run the published curve reproductions")
    parser.addoption("--numerics_config", action="store", default="numerics-config.yml")


def pytest_configure(config):
    """Pytest configuration"""
    pytest.numerics_config_file = Path(config.getoption("--numerics_config"))
    pytest.numerics_config = {}
    if pytest.numerics_config_file.is_file():
        yaml = YAML(typ="safe", pure=True)
        pytest.numerics_config = yaml.load(pytest.numerics_config_file) or {}


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run_slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run_slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def build_config(data: dict, **numerics) -> RunConfig:
    """Run configuration with the numerics overrides of the test session applied"""
    data = json.loads(json.dumps(data))
    data["numerics"] = {**data.get("numerics", {}), **pytest.numerics_config, **numerics}
    return RunConfig.model_validate(data)


@pytest.fixture(scope="session")
def fig_config() -> RunConfig:
    config = load_config("fig1")
    if pytest.numerics_config:
        config = build_config(config.model_dump(mode="json"))
    return config


@pytest.fixture(scope="session")
def fig_model(fig_config) -> GateModel:
    """Published trap at 0.95 omega_cm detuning"""
    return fig_config.build_model()


@pytest.fixture(scope="session")
def fig_trap(fig_config):
    return fig_config.to_trap()


@pytest.fixture(scope="session")
def compact_config() -> RunConfig:
    return build_config(COMPACT_CONFIG)


@pytest.fixture(scope="session")
def compact_model(compact_config) -> GateModel:
    return compact_config.build_model()


@pytest.fixture(scope="session")
def oracle_model() -> GateModel:
    """Compact trap on a finer grid for Fock oracle comparisons"""
    return build_config(COMPACT_CONFIG, samples_per_rf_period=256).build_model()


@pytest.fixture
def compact_config_file(tmp_path):
    """Write the compact configuration (optionally modified) and return its path"""

    def write(**sections) -> Path:
        data = json.loads(json.dumps(COMPACT_CONFIG))
        for section, values in sections.items():
            data.setdefault(section, {}).update(values)
        data["output"]["directory"] = str(tmp_path / "results")
        path = tmp_path / "compact.json"
        path.write_text(json.dumps(data))
        return path

    return write
