"""Command line interface"""

import functools
import json
import logging
import math
from pathlib import Path
from typing import Annotated, Callable, List, Optional

import numpy as np
import typer

from pyiongate.config import RunConfig, RunManifest, load_config
from pyiongate.exceptions import ConfigurationException, IonGateException
from pyiongate.gate_api.design import single_segment_scan, solve_segments
from pyiongate.gate_api.model import GateModel
from pyiongate.scan import run_scan

logger = logging.getLogger(__name__)

app = typer.Typer(help="Design and evaluate two-ion phase gates in a Paul trap with micromotion", add_completion=False)

ConfigOption = Annotated[str, typer.Option("--config", "-c", help="Run configuration (path or fig1, fig2, fig3)")]
OutOption = Annotated[Optional[Path], typer.Option("--out", "-o", help="Output directory")]
StaticOption = Annotated[bool, typer.Option("--static", help="Use the static harmonic trap without micromotion")]
SeedlessOption = Annotated[bool, typer.Option("--seedless", help="Reserved; the pipeline uses no random numbers")]


def handle_errors(func: Callable) -> Callable:
    """Map library exceptions to exit codes"""

    @functools.wraps(func)
    def decorated(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except IonGateException as err:
            logger.error("%s failed: %s", func.__name__, err)
            typer.echo(f"error: {err}", err=True)
            raise typer.Exit(code=err.exit_code) from err

    return decorated


def _prepare(config_source: str, seedless: bool):
    if seedless:
        raise ConfigurationException("--seedless is reserved; nothing in the pipeline draws random numbers")
    config = load_config(config_source)
    return config, config.build_model()


def _emit(text: str, out: Optional[Path], filename: str) -> None:
    if out is None:
        typer.echo(text, nl=False)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text)
    logger.info("Wrote %s", out / filename)


def _number(value: float) -> str:
    return f"{value:.17g}"


def _csv(manifest: RunManifest, header: List[str], rows) -> str:
    lines = [f"# manifest: {manifest.filename}", ",".join(header)]
    lines.extend(",".join(_number(value) if isinstance(value, float) else str(value) for value in row) for row in rows)
    return "\n".join(lines) + "\n"


def _print_table(title: str, values: dict) -> None:
    try:
        from rich.console import Console
        from rich.table import Table
    except ImportError:
        typer.echo(title)
        for key, value in values.items():
            typer.echo(f"  {key:<26} {value:.10g}")
        return
    table = Table(title=title)
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key, value in values.items():
        table.add_row(key, f"{value:.10g}")
    Console().print(table)


@app.callback()
def main(
    log_level: Annotated[str, typer.Option("--log-level", help="Logging level")] = "WARNING",
):
    """Two-ion gate design with micromotion"""
    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@app.command()
@handle_errors
def trap(config: ConfigOption, out: OutOption = None, seedless: SeedlessOption = False):
    """Derived trap parameters: Mathieu parameters, equilibrium, secular frequencies, Lamb-Dicke parameters"""
    run_config, model = _prepare(config, seedless)
    manifest = RunManifest.create("trap", run_config, model)
    _print_table("Trap parameters", model.derived())
    if out is not None:
        manifest.write(out)


@app.command()
@handle_errors
def modes(config: ConfigOption, out: OutOption = None, seedless: SeedlessOption = False):
    """Mode functions and micromotion phase over the configured window"""
    run_config, model = _prepare(config, seedless)
    manifest = RunManifest.create("modes", run_config, model)
    window = run_config.output
    t = np.linspace(0.0, window.window_tz * model.secular_period, window.samples)
    header = ["t_over_Tz", "re_v_cm", "im_v_cm", "re_v_r", "im_v_r", "eta_mm"]
    _emit(_csv(manifest, header, model.mode_table(t)), out, f"modes-{run_config.digest[:12]}.csv")
    if out is not None:
        manifest.write(out)


def _design(run_config: RunConfig, model: GateModel, static: bool):
    design = run_config.design
    duration = design.tau_over_tz * model.secular_period
    if design.mode == "single-segment":
        result = single_segment_scan(
            model,
            model.detuning,
            [duration],
            static=static,
            accept_locally_equivalent=design.accept_locally_equivalent,
        )[0]
        return result
    return solve_segments(
        model,
        duration,
        model.detuning,
        design.segments,
        static=static,
        accept_locally_equivalent=design.accept_locally_equivalent,
        raise_on_infeasible=True,
    )


@app.command()
@handle_errors
def design(
    config: ConfigOption,
    out: OutOption = None,
    static: StaticOption = False,
    seedless: SeedlessOption = False,
):
    """Design a pulse and report displacements, phases and fidelity as JSON"""
    run_config, model = _prepare(config, seedless)
    manifest = RunManifest.create("design", run_config, model)
    result = _design(run_config, model, static)
    report = model.report(result.schedule, static, target_phase=result.target_phase, feasible=result.feasible)
    document = {"manifest": manifest.filename, "report": json.loads(report.model_dump_json())}
    stem = f"design-{run_config.digest[:12]}{'-static' if static else ''}"
    _emit(json.dumps(document, indent=2) + "\n", out, f"{stem}.json")
    if out is not None:
        manifest.write(out)
        if run_config.output.waveform:
            schedule = result.schedule
            bounds = schedule.boundaries() / model.secular_period
            rows = [
                (beta + 1, float(bounds[beta]), float(bounds[beta + 1]), float(amplitude))
                for beta, amplitude in enumerate(schedule.amplitudes)
            ]
            header = ["segment", "t_start_over_Tz", "t_end_over_Tz", "omega_rad_s"]
            _emit(_csv(manifest, header, rows), out, f"{stem}.waveform.csv")


@app.command()
@handle_errors
def scan(
    config: ConfigOption,
    out: OutOption = None,
    static: StaticOption = False,
    workers: Annotated[int, typer.Option("--workers", "-w", help="Worker processes", min=1)] = 1,
    seedless: SeedlessOption = False,
):
    """Scan gate times and write fidelity and peak Rabi amplitude curves as CSV"""
    if seedless:
        raise ConfigurationException("--seedless is reserved; nothing in the pipeline draws random numbers")
    run_config = load_config(config)
    outcome = run_scan(run_config, out, workers=workers, static=static)
    best = min((p for p in outcome.points if not p.failed), key=lambda p: 1.0 - p.fidelity, default=None)
    typer.echo(f"{outcome.csv_path}")
    if best is not None and not math.isnan(best.fidelity):
        typer.echo(f"best: {best.variant} tau={best.tau_over_tz:.6g} T_z infidelity={1.0 - best.fidelity:.3g}")
    if outcome.failures:
        typer.echo(f"warning: {len(outcome.failures)} scan points failed", err=True)
