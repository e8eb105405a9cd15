"""Single runs, epsilon sweeps, viscous-ideal gaps and rate fits.

Every record a run produces (norm rows, diagnostics rows, gap rows) is
dispatched through a `Store`; the CSV writers are processors registered for
the duration of the run.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, NamedTuple

import numpy as np

from ._config import SweepConfig, config_from_dict, config_to_dict
from ._conormal import (
    NORM_COLUMNS,
    EnergyAccumulator,
    TimeRing,
    energy_Nm,
    initial_norm,
)
from ._diagnostics import (
    DIAGNOSTIC_COLUMNS,
    WallTraceMonitor,
    constraint_rows,
    evaluate_residuals,
)
from ._dynamics import Solver, SolverAbort
from ._grid import Grid
from ._global import _store_or_global
from ._state import FIELD_NAMES, make_initial, write_field_dump
from ._util import CsvWriter, dump_json

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from ._grid import Field, GridSpec
    from ._store import Store

logger = getLogger("conormal_mhd")

GAP_COLUMNS = ("time", "eps", "gap_sup", "gap_dy_sup")
UNIFORMITY_LIMIT = 3.0


# ---------------------------------- records -----------------------------------


@dataclass(frozen=True)
class NormRecord:
    run: str
    row: dict[str, Any]


@dataclass(frozen=True)
class DiagnosticRecord:
    run: str
    row: dict[str, Any]


@dataclass(frozen=True)
class GapRecord:
    row: dict[str, Any]


class SweepFailed(SolverAbort):
    """A member run of a sweep aborted; partial artifacts have been written."""

    def __init__(self, run: str, cause: SolverAbort) -> None:
        super().__init__(
            f"sweep member {run!r} aborted: {cause}",
            time=cause.time,
            stage=cause.stage,
            location=cause.location,
        )
        self.run = run


# ---------------------------------- runs --------------------------------------


def run_name(epsilon: float | None) -> str:
    return "ideal" if epsilon is None else f"eps_{epsilon:.6g}"


@dataclass
class RunResult:
    """Everything one run reports.

    ``snapshots`` hold the fields at every report time (``t = 0`` included) for
    the gap computation.
    """

    name: str
    epsilon: float | None
    grid: GridSpec
    norm_rows: list[dict[str, Any]] = field(default_factory=list)
    diagnostic_rows: list[dict[str, Any]] = field(default_factory=list)
    snapshots: list[tuple[float, dict[str, Field]]] = field(default_factory=list)
    initial_norm: float = 0.0
    wall_trace_max: float = 0.0
    steps: int = 0

    @property
    def report_times(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.snapshots)

    @property
    def max_norm(self) -> float:
        """``max_t N_m(t)`` at the full order."""
        if not self.norm_rows:
            return 0.0
        m = max(r["m"] for r in self.norm_rows)
        return max(r["N_m"] for r in self.norm_rows if r["m"] == m)

    @property
    def div_b_max(self) -> float:
        vals = [r["max_norm"] for r in self.diagnostic_rows if r["name"] == "div_b"]
        return max(vals, default=0.0)

    def summary(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "max_N_m": self.max_norm,
            "initial_norm": self.initial_norm,
            "wall_trace_max": self.wall_trace_max,
            "div_b_max": self.div_b_max,
            "steps": self.steps,
        }


def _is_report(k: int, every: int, last: int) -> bool:
    return k % every == 0 or k == last


def run_single(
    config: SweepConfig,
    epsilon: float | None = None,
    *,
    out_dir: str | Path | None = None,
    store: str | Store | None = None,
) -> RunResult:
    """Integrate one viscous run (`epsilon`) or the ideal run (``None``) to T.

    States are stored every ``store_dt``; once the ring is full, ``N_m`` is
    sampled at its centre time, and at report times the norm rows and the
    diagnostics are emitted. The run goes ``(capacity - 1) / 2`` store
    intervals past the horizon so that the last report is centred at T.

    Raises
    ------
    SolverAbort
        If the integration fails; rows emitted so far are already written.
    """
    _store = _store_or_global(store)
    name = run_name(epsilon)
    grid = Grid(config.grid)
    params = config.physics.params(epsilon if epsilon is not None else 0.0)
    if epsilon is None:
        model, wall = "ideal", config.physics.ideal_wall
    else:
        model, wall = "viscous", "no-slip"
    state0 = make_initial(grid, params, config.initial)
    tcfg, m = config.time, config.m
    capacity = config.norms.ring_capacity
    half = (capacity - 1) // 2
    every = tcfg.report_every
    last = round(tcfg.horizon / tcfg.store_dt)

    result = RunResult(name, epsilon, config.grid)
    result.initial_norm = initial_norm(state0, m)
    result.snapshots.append((0.0, dict(state0.fields())))
    monitor = WallTraceMonitor()
    monitor.record(state0.b2)

    def _collect_norms(rec: NormRecord) -> None:
        if rec.run == name:
            result.norm_rows.append(rec.row)

    def _collect_diagnostics(rec: DiagnosticRecord) -> None:
        if rec.run == name:
            result.diagnostic_rows.append(rec.row)

    processors: list[tuple] = [(_collect_norms,), (_collect_diagnostics,)]
    run_dir = Path(out_dir) if out_dir is not None else None
    if run_dir is not None:
        norms_csv = CsvWriter(run_dir / "norms.csv", NORM_COLUMNS)
        diag_csv = CsvWriter(run_dir / "diagnostics.csv", DIAGNOSTIC_COLUMNS)

        def _write(writer: CsvWriter) -> Callable[[Any], None]:
            def _processor(rec: Any) -> None:
                if rec.run == name:
                    writer.write(rec.row)

            return _processor

        processors += [
            (_write(norms_csv), NormRecord, 10),
            (_write(diag_csv), DiagnosticRecord, 10),
        ]
        if config.output.dump_fields:
            write_field_dump(state0, run_dir / "fields" / "t_000000.bin")

    solver = Solver(
        state0,
        model,
        tcfg.control,
        config.stabilization,
        wall=wall,
        store=_store,
        on_step=lambda s: monitor.record(s.b2),
    )
    ring = TimeRing(capacity)
    ring.push(state0)
    logger.info(
        "Run %s: %dx%d grid, T=%s, amplitude=%s",
        name,
        grid.nx,
        grid.ny,
        tcfg.horizon,
        config.initial.amplitude,
    )
    acc = EnergyAccumulator(m)
    with _store.register(processors=processors):
        t_final = tcfg.horizon + half * tcfg.store_dt
        for state in solver.iter_stores(t_final, tcfg.store_dt):
            ring.push(state)
            k_now = round(state.time / tcfg.store_dt)
            if k_now <= last and _is_report(k_now, every, last):
                result.snapshots.append((state.time, dict(state.fields())))
                if run_dir is not None and config.output.dump_fields:
                    write_field_dump(state, run_dir / "fields" / f"t_{k_now:06d}.bin")
            if not ring.is_full:
                continue
            acc.update(energy_Nm(ring, m, config.norms.alpha0_max))
            k = round(ring.center_time / tcfg.store_dt)
            if not _is_report(k, every, last):
                continue
            for row in acc.rows():
                _store.process(NormRecord(name, row), raise_exception=True)
            center = ring.center
            drift = float(np.max(np.abs(center.b2[:, 0] - state0.b2[:, 0])))
            rows = evaluate_residuals(ring, m, config.stabilization)
            rows += constraint_rows(center, drift)
            for row in rows:
                _store.process(DiagnosticRecord(name, row), raise_exception=True)
            logger.info(
                "Run %s: report at t=%.6g, N_%d=%.6g", name, center.time, m, acc.value
            )
    result.wall_trace_max = monitor.max_drift
    result.steps = solver.steps
    logger.info("Run %s finished after %d steps", name, solver.steps)
    return result


# ---------------------------------- gaps --------------------------------------


def gap_series(viscous: RunResult, ideal: RunResult) -> list[dict[str, Any]]:
    """``G(eps, t)``: sup-norm of the field differences and of their ``ddy``.

    Raises
    ------
    ValueError
        If the runs were made on different grids or report at different times.
    """
    if viscous.grid != ideal.grid:
        raise ValueError(
            f"gap of runs on different grids: {viscous.grid} vs {ideal.grid}"
        )
    if viscous.report_times != ideal.report_times:
        raise ValueError("gap of runs with different report times")
    grid = Grid(viscous.grid)
    rows = []
    for (t, fv), (_, fi) in zip(viscous.snapshots, ideal.snapshots):
        diffs = [fv[n] - fi[n] for n in FIELD_NAMES]
        rows.append(
            {
                "time": t,
                "eps": viscous.epsilon if viscous.epsilon is not None else 0.0,
                "gap_sup": max(float(np.max(np.abs(d))) for d in diffs),
                "gap_dy_sup": max(float(np.max(np.abs(grid.ddy(d)))) for d in diffs),
            }
        )
    return rows


def g_max(rows: Iterable[dict[str, Any]]) -> float:
    return max((max(r["gap_sup"], r["gap_dy_sup"]) for r in rows), default=0.0)


class RateFit(NamedTuple):
    """Least-squares power law ``G = C eps**q``; `residual` is the RMS in log space."""

    q: float
    C: float
    residual: float


def fit_rate(pairs: Sequence[tuple[float, float]]) -> RateFit:
    """Fit ``log G = log C + q log eps``.

    Raises
    ------
    ValueError
        With fewer than 3 pairs or any non-positive value.
    """
    if len(pairs) < 3:
        raise ValueError(f"fit_rate needs at least 3 pairs, got {len(pairs)}")
    eps = np.array([p[0] for p in pairs], dtype=float)
    gap = np.array([p[1] for p in pairs], dtype=float)
    if np.any(eps <= 0) or np.any(gap <= 0):
        raise ValueError(f"fit_rate needs positive values, got {list(pairs)}")
    x, y = np.log(eps), np.log(gap)
    q, logc = np.polyfit(x, y, 1)
    residual = math.sqrt(float(np.mean((y - (logc + q * x)) ** 2)))
    return RateFit(float(q), float(math.exp(logc)), residual)


# ---------------------------------- sweeps ------------------------------------


@dataclass
class SweepResult:
    """Aggregate of a sweep: per-run results, gaps, uniformity ratio and rate."""

    config: SweepConfig
    ideal: RunResult
    runs: dict[float, RunResult]
    gaps: dict[float, list[dict[str, Any]]]
    uniformity_ratio: float | None
    uniformity_status: str
    fit: RateFit | None
    fit_status: str

    @property
    def g_max(self) -> dict[float, float]:
        return {eps: g_max(rows) for eps, rows in self.gaps.items()}

    @property
    def g_max_decreasing(self) -> bool:
        vals = [self.g_max[e] for e in sorted(self.gaps, reverse=True)]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def to_dict(self) -> dict[str, Any]:
        runs = {"ideal": self.ideal.summary()}
        for eps, run in self.runs.items():
            runs[run.name] = {**run.summary(), "G_max": self.g_max[eps]}
        fit = None if self.fit is None else self.fit._asdict()
        return {
            "config": config_to_dict(self.config),
            "runs": runs,
            "uniformity_ratio": self.uniformity_ratio,
            "uniformity_status": self.uniformity_status,
            "uniform": (
                self.uniformity_ratio is not None
                and self.uniformity_ratio <= UNIFORMITY_LIMIT
            ),
            "rate": {"fit": fit, "status": self.fit_status},
            "g_max_decreasing": self.g_max_decreasing,
        }


def uniformity_ratio(maxima: Iterable[float]) -> tuple[float | None, str]:
    """``R = max / min`` of the per-run maxima of ``N_m``.

    ``R = 1`` when all maxima agree (zero included); ``None`` with status
    ``"degenerate"`` when the smallest is 0 and the largest is not.
    """
    vals = list(maxima)
    hi, lo = max(vals), min(vals)
    if hi == lo:
        return 1.0, "ok"
    if lo <= 0:
        return None, "degenerate"
    return hi / lo, "ok"


def _rate(g: dict[float, float]) -> tuple[RateFit | None, str]:
    if len(g) < 3:
        return None, "insufficient"
    try:
        return fit_rate(sorted(g.items(), reverse=True)), "ok"
    except ValueError:
        return None, "degenerate"


def _member(args: tuple[dict[str, Any], float | None, Path]) -> RunResult:
    # configs travel in canonical form: mapping proxies do not pickle
    doc, eps, root = args
    return run_single(config_from_dict(doc), eps, out_dir=root / run_name(eps))


def run_sweep(config: SweepConfig, *, store: str | Store | None = None) -> SweepResult:
    """Run the ideal reference and every viscous member, then aggregate.

    With ``sweep.workers > 1`` the members run in separate processes, which
    only see the built-in models. Artifacts: ``sweep.json``, ``gaps.csv`` and
    one directory per run.

    Raises
    ------
    SweepFailed
        If any member aborts; ``sweep.json`` then records the failure.
    """
    _store = _store_or_global(store)
    root = config.output_dir
    members: list[float | None] = [None, *config.epsilon_list]
    results: dict[str, RunResult] = {}
    try:
        if config.sweep.workers > 1:
            with ProcessPoolExecutor(config.sweep.workers) as pool:
                doc = config_to_dict(config)
                jobs = [(doc, eps, root) for eps in members]
                for eps, res in zip(members, pool.map(_member, jobs)):
                    results[run_name(eps)] = res
                    logger.info("Sweep member %s done", run_name(eps))
        else:
            for eps in members:
                results[run_name(eps)] = run_single(
                    config, eps, out_dir=root / run_name(eps), store=_store
                )
                logger.info("Sweep member %s done", run_name(eps))
    except SolverAbort as e:
        failed = next(run_name(eps) for eps in members if run_name(eps) not in results)
        dump_json(
            {
                "config": config_to_dict(config),
                "status": "failed",
                "failed_run": failed,
                "error": str(e),
                "completed": sorted(results),
            },
            root / "sweep.json",
        )
        logger.error("Sweep failed in %s: %s", failed, e)
        raise SweepFailed(failed, e) from e

    ideal = results["ideal"]
    runs = {eps: results[run_name(eps)] for eps in config.epsilon_list}
    gaps_csv = CsvWriter(root / "gaps.csv", GAP_COLUMNS)
    gaps: dict[float, list[dict[str, Any]]] = {}
    with _store.register(processors=[(lambda r: gaps_csv.write(r.row), GapRecord)]):
        for eps, run in runs.items():
            gaps[eps] = gap_series(run, ideal)
            for row in gaps[eps]:
                _store.process(GapRecord(row), raise_exception=True)

    ratio, status = uniformity_ratio(r.max_norm for r in runs.values())
    fit, fit_status = _rate({eps: g_max(rows) for eps, rows in gaps.items()})
    result = SweepResult(config, ideal, runs, gaps, ratio, status, fit, fit_status)
    dump_json({**result.to_dict(), "status": "ok"}, root / "sweep.json")
    logger.info("Sweep finished: R=%s, rate=%s", ratio, fit)
    return result

