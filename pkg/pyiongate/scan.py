"""Parallel gate time scans"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from more_itertools import first

from pyiongate.config import RunConfig, RunManifest
from pyiongate.exceptions import IonGateException, NumericalException
from pyiongate.gate_api import DESIGN_MODE
from pyiongate.gate_api.design import solve_segments
from pyiongate.gate_api.dynamics import PulseSchedule
from pyiongate.gate_api.fidelity import CPF_PHASE, infidelity_scan
from pyiongate.gate_api.model import GateModel

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "variant",
    "index",
    "tau_over_Tz",
    "fidelity",
    "infidelity",
    "omega_star_rad_s",
    "method",
    "theta",
    "residual",
    "oracle_fidelity",
    "status",
)
VARIANT_ORDER = ("micromotion", "static", "static-design-under-micromotion")


@dataclass
class ScanPoint:
    """One evaluated scan point

    Attributes:
        variant (str): pipeline variant
        index (int): position on the gate time grid
        tau_over_tz (float): gate time [T_z]
        fidelity (float): analytic fidelity
        omega_star (float): optimal amplitude (single segment) or peak Rabi amplitude (segments) [rad/s]
        target_phase (float): conditional phase aimed at [rad]
        status (str): ``ok`` or the failure reason
    """

    variant: DESIGN_MODE
    index: int
    tau_over_tz: float
    fidelity: float = math.nan
    omega_star: float = math.nan
    theta: float = math.nan
    residual: float = math.nan
    oracle_fidelity: Optional[float] = None
    target_phase: float = CPF_PHASE
    status: str = "ok"

    @property
    def key(self) -> Tuple[int, int]:
        return VARIANT_ORDER.index(self.variant), self.index

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    @property
    def method(self) -> str:
        """Fidelity methods filled in on this row"""
        return "analytic" if self.oracle_fidelity is None else "analytic+fock-oracle"

    def csv_row(self) -> str:
        values = [
            self.variant,
            str(self.index),
            _number(self.tau_over_tz),
            _number(self.fidelity),
            _number(1.0 - self.fidelity),
            _number(self.omega_star),
            self.method,
            _number(self.theta),
            _number(self.residual),
            "" if self.oracle_fidelity is None else _number(self.oracle_fidelity),
            self.status.replace(",", ";").replace("\n", " "),
        ]
        return ",".join(values)


@dataclass
class ScanOutcome:
    """Rows and files of a finished scan"""

    points: List[ScanPoint]
    csv_path: Path
    manifest_path: Path
    failures: List[ScanPoint] = field(default_factory=list)

    def __bool__(self) -> bool:
        return not self.failures


def _number(value: float) -> str:
    return f"{value:.17g}"


@lru_cache(maxsize=4)
def _model(config_json: str) -> Tuple[RunConfig, GateModel]:
    """Gate model of a configuration, built once per worker process"""
    config = RunConfig.model_validate_json(config_json)
    return config, config.build_model()


def evaluate_point(config_json: str, variant: DESIGN_MODE, index: int, tau_over_tz: float) -> ScanPoint:
    """Design and evaluate one gate time of a scan"""
    config, model = _model(config_json)
    point = ScanPoint(variant=variant, index=index, tau_over_tz=tau_over_tz)
    duration = tau_over_tz * model.secular_period
    try:
        if config.design.mode == "single-segment":
            row = first(
                infidelity_scan(
                    model,
                    model.detuning,
                    [duration],
                    variant,
                    accept_locally_equivalent=config.design.accept_locally_equivalent,
                )
            )
            point.fidelity, point.omega_star = row.fidelity, row.omega_star
            point.theta, point.residual = row.theta, row.residual
            point.target_phase = row.target_phase
            return point
        result = solve_segments(
            model,
            duration,
            model.detuning,
            config.design.segments,
            static=variant != "micromotion",
            accept_locally_equivalent=config.design.accept_locally_equivalent,
        )
        point.omega_star, point.target_phase = result.max_rabi, result.target_phase
        if not result:
            point.status = f"infeasible: {result.message}"
            return point
        integrals = result.integrals
        fidelity = result.fidelity
        if variant == "static-design-under-micromotion":
            integrals = model.integrals(result.schedule, static=False)
            fidelity = model.fidelity(result.schedule, static=False, target_phase=result.target_phase).fidelity
        point.fidelity, point.theta, point.residual = fidelity, integrals.theta, integrals.max_displacement
    except IonGateException as err:
        logger.warning("Scan point %s #%d (tau=%.6g T_z) failed: %s", variant, index, tau_over_tz, err)
        point.status = f"{type(err).__name__}: {err}"
    return point


def evaluate_oracle(
    config_json: str,
    variant: DESIGN_MODE,
    tau_over_tz: float,
    amplitudes: Tuple[float, ...],
    target_phase: float = CPF_PHASE,
) -> float:
    """Fock oracle fidelity of an evaluated scan point"""
    _, model = _model(config_json)
    schedule = PulseSchedule(
        duration=tau_over_tz * model.secular_period,
        detuning=model.detuning,
        amplitudes=amplitudes,
        phases=model.phases,
    )
    return model.fidelity(
        schedule, static=variant == "static", method="fock-oracle", target_phase=target_phase
    ).fidelity


class ScanJournal:
    """Append-only record of completed scan points keyed by the configuration hash

    Args:
        path: journal file (JSON lines)
    """

    def __init__(self, path: Path):
        self.path = path
        self.entries: Dict[Tuple[str, int], ScanPoint] = {}
        if path.is_file():
            for line in path.read_text().splitlines():
                if not line.strip():
                    continue
                try:
                    point = ScanPoint(**json.loads(line))
                except (json.JSONDecodeError, TypeError):
                    logger.warning("Skipping damaged journal line in %s", path)
                    continue
                self.entries[(point.variant, point.index)] = point
            logger.info("Resuming scan with %d journaled points from %s", len(self.entries), path)

    def __contains__(self, key: Tuple[str, int]) -> bool:
        return key in self.entries

    def record(self, point: ScanPoint) -> None:
        self.entries[(point.variant, point.index)] = point
        if point.failed:
            return
        with self.path.open("a") as handle:
            handle.write(json.dumps(asdict(point)) + "\n")


def _run(
    function: Callable,
    tasks: List[tuple],
    workers: int,
    callback: Optional[Callable] = None,
) -> Iterable:
    if workers <= 1:
        for task in tasks:
            yield task, function(*task)
            if callback:
                callback()
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [(task, pool.submit(function, *task)) for task in tasks]
        for task, future in futures:
            yield task, future.result()
            if callback:
                callback()


def run_scan(
    config: RunConfig,
    directory: Optional[Path] = None,
    workers: int = 1,
    static: bool = False,
    callback: Optional[Callable[[int, int], None]] = None,
) -> ScanOutcome:
    """Scan the configured gate time grid for every variant

    Rows are written sorted by variant and grid index, so the CSV does not depend on the worker count or on how the
    scan was resumed.

    Args:
        config: run configuration
        directory: output directory, ``config.output.directory`` when omitted
        workers: worker processes
        static: scan only the static variant
        callback: called with (done, total) after every point

    Returns:
        (ScanOutcome): rows and written files

    Raises:
        NumericalException: every scan point failed
    """
    directory = Path(directory or config.output.directory)
    directory.mkdir(parents=True, exist_ok=True)
    variants = ("static",) if static else tuple(dict.fromkeys(config.design.variants))
    variants = tuple(sorted(variants, key=VARIANT_ORDER.index))
    config_json = config.model_dump_json()
    _, model = _model(config_json)
    manifest = RunManifest.create("scan", config, model)
    stem = f"scan-{config.digest[:12]}"
    journal = ScanJournal(directory / f"{stem}.journal.jsonl")

    grid = config.design.tau_grid()
    tasks = [
        (config_json, variant, index, float(tau))
        for variant in variants
        for index, tau in enumerate(grid)
        if (variant, index) not in journal
    ]
    total, done = len(variants) * len(grid), len(variants) * len(grid) - len(tasks)
    logger.info("Scanning %d points (%d journaled) with %d workers", total, done, workers)

    def progress():
        nonlocal done
        done += 1
        if callback:
            callback(done, total)

    for _, point in _run(evaluate_point, tasks, workers, progress):
        journal.record(point)

    points = sorted(journal.entries.values(), key=lambda point: point.key)
    if config.design.oracle:
        pending = [p for p in points if not p.failed and p.oracle_fidelity is None and config.design.mode != "segments"]
        oracle_tasks = [(config_json, p.variant, p.tau_over_tz, (p.omega_star,), p.target_phase) for p in pending]
        oracle_workers = min(workers, config.numerics.oracle_workers)
        for (_, variant, tau, *_), value in _run(evaluate_oracle, oracle_tasks, oracle_workers):
            point = first(p for p in pending if p.variant == variant and p.tau_over_tz == tau)
            point.oracle_fidelity = value
            journal.record(point)

    failures = [point for point in points if point.failed]
    manifest_path = manifest.write(directory)
    csv_path = directory / f"{stem}.csv"
    lines = [f"# manifest: {manifest.filename}", ",".join(CSV_COLUMNS)]
    lines.extend(point.csv_row() for point in points)
    csv_path.write_text("\n".join(lines) + "\n")
    logger.info("Scan written to %s", csv_path)
    if failures:
        logger.warning("%d of %d scan points failed", len(failures), len(points))
    if points and len(failures) == len(points):
        logger.error("Every scan point failed")
        raise NumericalException(f"All {len(points)} scan points failed; first: {failures[0].status}")
    return ScanOutcome(points=points, csv_path=csv_path, manifest_path=manifest_path, failures=failures)
