"""
Scenario Runner
===============

Runs one scenario end to end and writes its artifacts:

    ledger.csv          energy ledger, one row per knot
    snapshot_u_t*.txt   nodal displacement at each requested time
    snapshot_w_t*.txt   internal variable at element centroids
    equivalence.json    coupled w against the closed-form reconstruction
    summary.json        run metadata and the outcome of every enabled check
    events.json         solver events
    checks.json         one entry per evaluated check
"""

import json
import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional

import numpy as np

import config
from energy_ledger import (assert_inequality, build_ledger, check_inequality, inequality_tolerance,
                           initial_attainment, u_only_energies)
from errors import InequalityViolation, OutputError, SamplingError, ViscoFracError
from logger import SimulationLogger, _jsonable
from memory_oracle import equivalence_check
from mesh import dofs_per_node
from problem import build_problem
from stepper import Trajectory, interpolate, run

logger = logging.getLogger(__name__)

ATTAINMENT_TOL = 1e-12


@dataclass
class RunResult:
    status: int
    output_dir: str
    failed_checks: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    trajectory: Optional[Trajectory] = None

    @property
    def passed(self) -> bool:
        return self.status == 0


def _write_text(path: str, text: str) -> None:
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(path, str(e)) from None


def _write_json(path: str, data: Dict[str, Any]) -> None:
    _write_text(path, json.dumps(_jsonable(data), indent=2) + "\n")


def _time_tag(t: float) -> str:
    return f"{t:.6g}"


def write_snapshots(traj: Trajectory, times: List[float], out_dir: str) -> List[str]:
    """Plain-text grids: `x y value...` per node (u) or per element centroid (w)."""
    problem = traj.problem
    nodes = problem.mesh.nodes
    centroids = problem.operators.geometry.centroids
    dpn = dofs_per_node(problem.mode)
    written = []
    for t in times:
        u = interpolate(traj, t, "pw_linear", "u").reshape(-1, dpn)
        w = interpolate(traj, t, "pw_linear", "w")
        for name, points, values in (("u", nodes, u), ("w", centroids, w)):
            path = os.path.join(out_dir, f"snapshot_{name}_t{_time_tag(t)}.txt")
            header = f"# {name} at t={t:.12g} mode={problem.mode}\n# x y " + " ".join(
                f"{name}{i}" for i in range(values.shape[1])) + "\n"
            rows = np.column_stack([points, values])
            body = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in rows)
            _write_text(path, header + body + "\n")
            written.append(path)
    return written


def _run_checks(cfg, traj: Trajectory, ledger, equivalence, sim_logger: SimulationLogger) -> Dict[str, Any]:
    checks = cfg.checks
    results: Dict[str, Any] = {}

    def record(name, passed, value, tolerance, **details):
        sim_logger.log_check(name, passed, value, tolerance, details)
        results[name] = {"passed": bool(passed), "value": value, "tolerance": tolerance, **details}

    if checks.active("balance"):
        relative = max(abs(r) / s for r, s in zip(ledger["balance_residual"][1:], ledger["balance_scale"][1:]))
        record("balance", relative <= checks.balance_rtol, float(relative), checks.balance_rtol)

    if checks.active("discrete_inequality"):
        tol = checks.balance_rtol * float(ledger["balance_scale"].sum())
        worst = float(ledger["discrete_slack"].min())
        record("discrete_inequality", worst >= -tol, worst, tol)

    if checks.active("inequality"):
        slack = check_inequality(traj)
        tol = inequality_tolerance(traj.tau, checks.slack_tol, checks.slack_tau_factor)
        worst = int(np.argmin(slack))
        try:
            assert_inequality(slack, traj.tau, checks.slack_tol, checks.slack_tau_factor)
            passed = True
        except InequalityViolation as e:
            sim_logger.log_event("inequality violated", {"reason": str(e)})
            passed = False
        record("inequality", passed, float(slack[worst]), tol, knot=worst)

    if checks.active("equivalence"):
        record("equivalence", equivalence.relative_error <= config.EQUIVALENCE_RTOL,
               equivalence.relative_error, config.EQUIVALENCE_RTOL, ratio=equivalence.ratio)

    if checks.active("attainment"):
        report = initial_attainment(traj)
        gap = abs(report["w_distance"] - report["w_identity"])
        tol = ATTAINMENT_TOL * (1.0 + report["w_identity"])
        record("attainment", gap <= tol, gap, tol, **report)

    if checks.active("u_only"):
        if np.any(traj.states[0].w_curr) or traj.n > config.UONLY_MAX_STEPS:
            sim_logger.log_event("u-only check skipped", {"reason": "w0 != 0 or too many steps"})
        else:
            energy, diss = u_only_energies(traj, traj.T)
            ref_e, ref_d = float(ledger["energy"].iloc[-1]), float(ledger["dissipation"].iloc[-1])
            scale = max(abs(ref_e) + abs(ref_d), np.finfo(float).tiny)
            gap = (abs(energy - ref_e) + abs(diss - ref_d)) / scale
            record("u_only", gap <= config.EQUIVALENCE_RTOL, gap, config.EQUIVALENCE_RTOL,
                   energy=energy, dissipation=diss)
    return results


def run_scenario(cfg, out_dir: Optional[str] = None, steps: Optional[int] = None,
                 checks: bool = True, progress: bool = False) -> RunResult:
    """
    Run a scenario and write every artifact into its output directory.

    Args:
        cfg: validated ScenarioConfig
        out_dir: overrides the configured output directory
        steps: overrides the configured step count
        checks: False disables every check
        progress: log step progress

    Returns:
        RunResult; status 1 when an enabled check failed
    """
    if steps is not None:
        cfg = cfg.with_steps(steps)
    if not checks:
        cfg = replace(cfg, checks=replace(cfg.checks, enabled=False))
    out_dir = out_dir or cfg.output_dir()
    try:
        sim_logger = SimulationLogger(out_dir)
    except OSError as e:
        raise OutputError(out_dir, str(e)) from None
    for stale in (sim_logger.events_file, sim_logger.checks_file):
        if os.path.exists(stale):
            os.remove(stale)

    started = time.perf_counter()
    sim_logger.log_event("run started", {"scenario": cfg.name, "n": cfg.steps, "mode": cfg.mode})
    try:
        problem = build_problem(cfg)
        traj = run(problem, cfg.steps, progress=progress)
    except ViscoFracError as e:
        sim_logger.log_error(str(e), {"type": type(e).__name__})
        raise
    sim_logger.log_event("run finished", {"factorizations": len(set(s.released for s in traj.states)),
                                          "max_conditioning": max(traj.conditioning)})

    ledger = build_ledger(traj)
    ledger_path = os.path.join(out_dir, config.LEDGER_FILE)
    try:
        ledger.to_csv(ledger_path, index=False, float_format="%.17g")
    except OSError as e:
        raise OutputError(ledger_path, str(e)) from None
    snapshots = write_snapshots(traj, cfg.output.snapshot_times, out_dir)

    refined = None
    if cfg.checks.active("equivalence") and cfg.checks.equivalence_refined:
        try:
            refined = run(problem, 2 * traj.n)
        except SamplingError as e:
            sim_logger.log_event("refined equivalence run skipped", {"reason": str(e)})
    equivalence = equivalence_check(traj, problem.w0, refined=refined)
    _write_json(os.path.join(out_dir, config.EQUIVALENCE_FILE), equivalence.to_dict())

    summary: Dict[str, Any] = {
        "app": config.APP_NAME,
        "version": config.APP_VERSION,
        "format_version": cfg.format_version,
        "scenario": cfg.name,
        "source": cfg.source,
        "mode": cfg.mode,
        "n": traj.n,
        "T": cfg.T,
        "tau": traj.tau,
        "beta": cfg.beta,
        "nodes": problem.mesh.n_nodes,
        "elements": problem.mesh.n_triangles,
        "crack_pairs": problem.crack.n_pairs,
        "released_at_T": traj.states[-1].released,
        "outputs": {"ledger": ledger_path, "snapshots": snapshots},
    }
    if cfg.checks.enabled:
        summary["checks"] = _run_checks(cfg, traj, ledger, equivalence, sim_logger)
    failed = list(sim_logger.failed_checks)
    status = 1 if failed else 0
    summary["status"] = "failed" if failed else "passed"
    summary["runtime_seconds"] = time.perf_counter() - started
    summary["session"] = sim_logger.get_session_summary()
    _write_json(os.path.join(out_dir, config.SUMMARY_FILE), summary)

    logger.info("Scenario '%s' n=%d: %s (%s)", cfg.name, traj.n, summary["status"], out_dir)
    return RunResult(status=status, output_dir=out_dir, failed_checks=failed,
                     summary=summary, trajectory=traj)
