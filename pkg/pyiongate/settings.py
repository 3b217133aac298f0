"""Numerical settings"""

from typing import Annotated

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class NumericsSettings(BaseSettings):
    """Numerical knobs of the gate pipeline

    Every field can be overridden by an ``IONGATE_`` prefixed environment variable or by the ``numerics`` section of
    a run configuration.

    Attributes:
        ode_rtol (float): relative tolerance of the Mathieu integrator
        ode_atol (float): absolute tolerance of the Mathieu integrator
        samples_per_rf_period (int): quadrature samples per r.f. period
        samples_per_secular_period (int): minimum quadrature samples per slowest secular period
        drive_truncation (int): truncation order of the driven Mathieu series
        quadrature_rtol (float): accepted relative change of the Simpson halving check
        grid_refinements (int): grid doublings tried before a failed halving check raises
        nullspace_rtol (float): singular values below this times the largest one are treated as zero
        equilibrium_tolerance (float): relative tolerance of the equilibrium iteration
        equilibrium_max_iterations (int): iteration cap of the equilibrium search
        stability_slack (float): tolerance on the monodromy trace stability test
        oracle_tail (float): accepted thermal tail weight and top level population in the Fock oracle
        oracle_workers (int): maximum number of concurrent Fock oracle evaluations
    """

    model_config = SettingsConfigDict(env_prefix="IONGATE_", extra="forbid")

    ode_rtol: Annotated[float, Field(description="Relative tolerance of the Mathieu integrator", gt=0)] = 1e-12
    ode_atol: Annotated[float, Field(description="Absolute tolerance of the Mathieu integrator", gt=0)] = 1e-14
    samples_per_rf_period: Annotated[int, Field(description="Quadrature samples per r.f. period", ge=128)] = 128
    samples_per_secular_period: Annotated[
        int, Field(description="Minimum quadrature samples per slowest secular period", ge=8)
    ] = 256
    drive_truncation: Annotated[int, Field(description="Truncation order of the driven Mathieu series", ge=3)] = 8
    quadrature_rtol: Annotated[float, Field(description="Accepted relative change of the Simpson halving check")] = (
        1e-8
    )
    grid_refinements: Annotated[int, Field(description="Grid doublings before a failed halving check raises", ge=0)] = 4
    nullspace_rtol: Annotated[float, Field(description="Relative singular value threshold of the nullspace")] = 1e-10
    equilibrium_tolerance: Annotated[float, Field(description="Relative tolerance of the equilibrium iteration")] = (
        1e-12
    )
    equilibrium_max_iterations: Annotated[int, Field(description="Iteration cap of the equilibrium search", ge=1)] = 100
    stability_slack: Annotated[float, Field(description="Tolerance on the monodromy trace stability test")] = 1e-9
    oracle_tail: Annotated[float, Field(description="Accepted thermal tail and top level population", gt=0)] = 1e-6
    oracle_workers: Annotated[int, Field(description="Maximum number of concurrent Fock oracle evaluations", ge=1)] = 1

    @field_validator("samples_per_rf_period", mode="before")
    def check_samples(cls, v):
        """Simpson panels and oracle midpoints need a multiple of 4 samples per period"""
        v = int(v)
        if v % 4:
            raise ValueError(f"samples_per_rf_period must be a multiple of 4, got {v}")
        return v
