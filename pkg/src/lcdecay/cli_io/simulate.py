"""Run orchestration: time loop, records, checkpoints and resume.

Time is always ``step * dt`` (never accumulated), and at every checkpoint
step the state is reduced to its physical samples before anything else
uses it.  A run resumed from a checkpoint therefore repeats the
uninterrupted run bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..bootstrap import shell_schedule
from ..diagnostics import EnergyReport, energy_report, write_csv
from ..dynamics import CFLViolation, NumericalFailure, State, Stepper
from ..potentials import PotentialHypothesesReport, verify_hypotheses
from ..spectral import QField, VecField, read_checkpoint, write_checkpoint
from .config import RunConfig, synthesize_initial_data

MAX_SUBSTEPS = 64


@dataclass
class RunResult:
    reports: list
    state: State
    steps: int
    substeps: int = 0
    metadata: dict = field(default_factory=dict)


def step_count(T: float, dt: float) -> int:
    """Number of steps of size ``dt`` covering ``[0, T]`` (last one may be short)."""
    n = T / dt
    k = int(round(n))
    return k if abs(n - k) <= 1e-9 * max(1.0, n) else int(math.ceil(n))


def _advance(stepper: Stepper, state: State, t_new: float, stats: dict) -> State:
    """One step to ``t_new``, split into equal substeps while the CFL bound fails."""
    try:
        return stepper.step(state, t_new)
    except CFLViolation as exc:
        m = int(math.ceil(stepper.dt / exc.advisory_dt))
        while m <= MAX_SUBSTEPS:
            sub = stepper.with_dt(stepper.dt / m)
            s = state
            try:
                for j in range(1, m + 1):
                    t_j = t_new if j == m else state.t + j * sub.dt
                    s = sub.step(s, t_j)
            except CFLViolation:
                m *= 2
                continue
            stats["substeps"] = stats.get("substeps", 0) + m
            return s
        raise NumericalFailure(
            f"CFL bound not met with {MAX_SUBSTEPS} substeps at t={state.t:g}", state) from exc


def metadata(cfg: RunConfig, report: Optional[PotentialHypothesesReport]) -> dict:
    scope = "inside theorem scope" if cfg.model.xi == 0.0 else "outside theorem scope"
    meta = {"theorem_scope": scope, "config": cfg.to_dict()}
    if report is not None:
        meta["hypotheses"] = {
            "r1": report.r1, "r2": report.r2, "i6_ok": report.i6_ok,
            "i7_ok": report.i7_ok, "lambda": report.lam, "alpha": report.alpha,
            "samples": report.samples,
        }
    return meta


def _write_metadata(path: str, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def integrate(cfg: RunConfig, state: State, start_step: int = 0,
              on_record: Optional[Callable[[EnergyReport], None]] = None,
              write_checkpoints: bool = True) -> RunResult:
    """Advance ``state`` (at ``start_step``) to ``T``, recording every
    ``record_interval`` steps, at ``start_step`` and at the final step."""
    params = cfg.model_params()
    grid = state.grid
    dt = cfg.time.dt
    nsteps = step_count(cfg.time.T, dt)
    rec_every = cfg.time.record_interval
    ck_every = cfg.output.checkpoint_interval if write_checkpoints else 0
    ck_path = cfg.output.checkpoint_path
    beta = cfg.analysis.beta
    frac = cfg.analysis.contamination_fraction
    stepper = Stepper(grid, params, dt, cfg.time.cfl_safety)
    stats = {}
    reports = []

    def record(s):
        rep = energy_report(s, params, lambda t: shell_schedule(t, beta), frac)
        reports.append(rep)
        if on_record is not None:
            on_record(rep)

    partial = nsteps * dt > cfg.time.T * (1.0 + 1e-12)
    last = stepper.with_dt(cfg.time.T - (nsteps - 1) * dt) if partial else stepper
    record(state)
    for k in range(start_step + 1, nsteps + 1):
        if k == nsteps and partial:
            state = _advance(last, state, cfg.time.T, stats)
        else:
            state = _advance(stepper, state, k * dt, stats)
        if ck_every and ck_path and k % ck_every == 0:
            state = state.canonical()
            write_checkpoint(ck_path, grid, state.t, state.u.data, state.q.data)
        if k % rec_every == 0 or k == nsteps:
            record(state)
    return RunResult(reports, state, max(nsteps - start_step, 0), stats.get("substeps", 0))


def run(cfg: RunConfig, csv_path: Optional[str] = None, write_files: bool = True) -> RunResult:
    """Synthesise the initial data and integrate to ``T``.

    Writes the CSV (``csv_path`` or the configured one) and a JSON metadata
    sidecar ``<csv>.meta.json`` when ``write_files`` is set.
    """
    grid = cfg.make_grid()
    report = verify_hypotheses(cfg.potential())
    state = synthesize_initial_data(cfg, grid, report)
    result = integrate(cfg, state, 0, write_checkpoints=write_files)
    result.metadata = metadata(cfg, report)
    if write_files:
        path = csv_path or cfg.output.csv_path
        write_csv(result.reports, path)
        _write_metadata(path + ".meta.json", result.metadata)
    return result


def load_checkpoint_state(path, cfg: RunConfig):
    """``(state, step)`` from a checkpoint; grid must match ``cfg``."""
    grid, t, u, q = read_checkpoint(path)
    if grid != cfg.make_grid():
        raise ValueError(f"checkpoint grid {grid} does not match the configuration")
    step = int(round(t / cfg.time.dt))
    if abs(step * cfg.time.dt - t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError(f"checkpoint time {t!r} is not a multiple of dt")
    return State(step * cfg.time.dt, VecField(grid, u), QField(grid, q)), step


def resume(checkpoint, cfg: RunConfig, csv_path: Optional[str] = None,
           write_files: bool = True) -> RunResult:
    """Continue from ``checkpoint`` to ``T``; records start at the checkpoint time."""
    state, step = load_checkpoint_state(checkpoint, cfg)
    result = integrate(cfg, state, step, write_checkpoints=write_files)
    meta = metadata(cfg, None)
    meta["resumed_from"] = str(checkpoint)
    meta["resumed_step"] = step
    result.metadata = meta
    if write_files:
        path = csv_path or cfg.output.csv_path
        write_csv(result.reports, path)
        _write_metadata(path + ".meta.json", meta)
    return result
