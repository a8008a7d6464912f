"""Top-level simulation loop and run-directory output."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numba

from .coalescence import MergeEvent, write_events
from .config import RunConfig
from .diagnostics import MomentRecord, SeriesWriter, record, write_snapshot
from .dynamics import StepOptions, macro_step
from .errors import ConfigurationError, SolverError, StepError
from .model import SystemState

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3


@dataclass
class RunResult:
    state: SystemState
    records: list[MomentRecord] = field(default_factory=list)
    events: list[MergeEvent] = field(default_factory=list)
    steps: int = 0


def dump_state(state: SystemState, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "x", "y", "mass", "species"])
        for i, (x, y), m, s in zip(state.ids, state.positions, state.masses, state.species):
            w.writerow([int(i), repr(float(x)), repr(float(y)), repr(float(m)), int(s)])
    return path


def simulate(config: RunConfig, out_dir=None, *, state: SystemState | None = None,
             callback=None) -> RunResult:
    """Run ``config`` to t_end. Writes the run directory when ``out_dir`` is given.

    ``callback(step_result)`` is invoked after every macro step.
    """
    config.validate()
    if config.threads:
        numba.set_num_threads(config.threads)
    state = config.initial_state() if state is None else state
    grid = config.make_grid()
    opts = StepOptions(eta=config.eta, p=config.p, merge_rule=config.merge_rule, seed=config.seed)
    crit = config.critical_mass
    n_steps = int(round(config.t_end / config.dt))
    t0 = state.time

    out = None
    writer = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        config.save(out / "config.ini")
        writer = SeriesWriter(out / "timeseries.csv", state.n_species)
        write_events([], out / "events.csv")
        if config.snapshot_stride:
            (out / "snapshots").mkdir(exist_ok=True)

    result = RunResult(state)
    rec = record(state, crit)
    result.records.append(rec)
    if writer:
        writer.write(rec)
    fld = None
    try:
        for k in range(n_steps):
            res = macro_step(state, config.dt, grid, opts, previous=fld)
            state, fld = res.state, res.field
            state.time = t0 + (k + 1) * config.dt
            for e in res.events:
                e.time = state.time
            result.events.extend(res.events)
            if out is not None and res.events:
                write_events(res.events, out / "events.csv", append=True)
            if (k + 1) % config.record_stride == 0 or k + 1 == n_steps:
                rec = record(state, crit)
                result.records.append(rec)
                if writer:
                    writer.write(rec)
            if out is not None and config.snapshot_stride and (k + 1) % config.snapshot_stride == 0:
                write_snapshot(fld, out / "snapshots", state.time)
            if callback is not None:
                callback(res)
            result.steps = k + 1
    except (StepError, SolverError):
        result.state = state
        if out is not None:
            dump_state(state, out / "abort_state.csv")
        raise
    finally:
        if writer:
            writer.close()
    result.state = state
    return result


def run(config: RunConfig, out_dir=None) -> int:
    """simulate() with exit-status reporting for the command line."""
    out_dir = config.out_dir if out_dir is None else out_dir
    try:
        config.validate()
    except ConfigurationError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    try:
        res = simulate(config, out_dir)
    except ConfigurationError as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except (StepError, SolverError) as exc:
        log.error("run aborted: %s (state dumped to %s)", exc, Path(out_dir) / "abort_state.csv")
        return EXIT_ABORT
    log.info("finished %d steps, %d particles, %d merges", res.steps, res.state.n, len(res.events))
    return EXIT_OK
