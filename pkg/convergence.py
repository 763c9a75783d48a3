"""
Convergence Study
=================

Runs one scenario for a nested list of step counts and compares the
trajectories at shared knots. Members run in a thread pool of
VISCOFRAC_THREADS workers; results are joined in n-order, so the report
does not depend on the worker count.
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from tabulate import tabulate

import config
from energy_ledger import balance_terms, check_inequality, estimate_bounds
from errors import ConfigurationError
from memory_oracle import equivalence_check
from problem import build_problem
from stepper import Trajectory, run

logger = logging.getLogger(__name__)

BOUND_KEYS = ("max_velocity", "max_strain", "max_w", "dw_square_sum")


def check_nested(n_list: Sequence[int]) -> List[int]:
    """Strictly increasing step counts, each dividing the next."""
    values = [int(n) for n in n_list]
    if len(values) < 2:
        raise ConfigurationError("a convergence study needs at least two step counts", key="n_list")
    for coarse, fine in zip(values, values[1:]):
        if fine <= coarse or fine % coarse:
            raise ConfigurationError(f"step counts {coarse} and {fine} are not nested", key="n_list")
    if values[0] < 2:
        raise ConfigurationError("step counts must be at least 2", key="n_list")
    return values


def knot_difference(coarse: Trajectory, fine: Trajectory) -> Dict[str, float]:
    """Max over the coarse knots of the V, H (velocity) and L2 (w) differences."""
    ratio = fine.n // coarse.n
    ops = coarse.problem.operators
    G, M = ops.geometry, ops.mass

    def strain_norm(X):
        return math.sqrt(max(G.pairing(X, X), 0.0))

    v_diff = h_diff = w_diff = 0.0
    for state in coarse.states:
        other = fine.states[state.k * ratio]
        du = state.u_curr - other.u_curr
        v_diff = max(v_diff, math.sqrt(max(M.quad(du), 0.0) + G.pairing(G.strain(du), G.strain(du))))
        w_diff = max(w_diff, strain_norm(state.w_curr - other.w_curr))
        if state.k > 0:
            h_diff = max(h_diff, math.sqrt(max(M.quad(state.velocity - other.velocity), 0.0)))
    return {"v_diff": v_diff, "h_diff": h_diff, "w_diff": w_diff}


def observed_order(coarse_error: float, fine_error: float, ratio: float = 2.0) -> Optional[float]:
    """log(e_coarse / e_fine) / log(ratio); None when either error vanishes."""
    if coarse_error <= 0.0 or fine_error <= 0.0:
        return None
    return math.log(coarse_error / fine_error) / math.log(ratio)


def _member_row(traj: Trajectory) -> Dict[str, float]:
    equivalence = equivalence_check(traj, traj.problem.w0)
    slack = check_inequality(traj)
    relative = [abs(t["residual"]) / t["scale"] for t in (balance_terms(traj, k) for k in range(1, traj.n + 1))]
    row = {
        "n": traj.n,
        "tau": traj.tau,
        "equivalence_error": equivalence.relative_error,
        "min_inequality_slack": float(slack.min()),
        "max_balance_residual": float(max(relative)),
    }
    row.update(estimate_bounds(traj))
    return row


@dataclass
class ConvergenceReport:
    """Per-n metrics, pairwise knot differences and their observed orders."""
    n_list: List[int]
    members: pd.DataFrame
    differences: pd.DataFrame
    orders: pd.DataFrame
    bound_ratios: Dict[str, float] = field(default_factory=dict)

    def order(self, column: str = "v_diff") -> List[Optional[float]]:
        return [None if pd.isna(v) else float(v) for v in self.orders[column]]

    def to_frame(self) -> pd.DataFrame:
        """One row per n; differences are attached to the coarser member of each pair."""
        frame = self.members.merge(self.differences, on="n", how="left")
        return frame.merge(self.orders, on="n", how="left", suffixes=("", "_order"))

    def create_report(self, save_path: str = None) -> str:
        def fmt(v):
            return "undefined" if v is None or pd.isna(v) else f"{v:.3f}"

        lines = ["Convergence study", "=================", ""]
        lines.append(tabulate(self.members, headers="keys", showindex=False, floatfmt=".4e"))
        lines.append("")
        pairs = [[f"{a} -> {b}", row.v_diff, row.h_diff, row.w_diff]
                 for (a, b), row in zip(zip(self.n_list, self.n_list[1:]), self.differences.itertuples())]
        lines.append(tabulate(pairs, headers=["pair", "V diff", "H diff", "w diff"], floatfmt=".4e"))
        lines.append("")
        orders = [[row.n, fmt(row.v_diff), fmt(row.h_diff), fmt(row.w_diff)] for row in self.orders.itertuples()]
        lines.append(tabulate(orders, headers=["n", "V order", "H order", "w order"]))
        lines.append("")
        lines.append(tabulate([[k, fmt(v)] for k, v in self.bound_ratios.items()],
                              headers=["monitored quantity", "max/min over n"]))
        report = "\n".join(lines) + "\n"
        if save_path:
            os.makedirs(os.path.dirname(save_path) or ".", exist_ok=True)
            with open(save_path, "w") as f:
                f.write(report)
        return report

    def save(self, out_dir: str) -> Dict[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, config.CONVERGENCE_FILE)
        txt_path = os.path.splitext(csv_path)[0] + ".txt"
        self.to_frame().to_csv(csv_path, index=False)
        self.create_report(txt_path)
        return {"csv": csv_path, "report": txt_path}


def convergence_study(cfg, n_list: Sequence[int], threads: Optional[int] = None) -> ConvergenceReport:
    """
    Refinement study of a scenario.

    Args:
        cfg: validated ScenarioConfig
        n_list: nested step counts, e.g. 16, 32, 64, 128
        threads: worker count (defaults to VISCOFRAC_THREADS)

    Returns:
        ConvergenceReport
    """
    n_values = check_nested(n_list)
    problem = build_problem(cfg)
    problem.operators  # assemble once before the workers share the problem

    workers = max(1, int(threads or config.THREADS))
    logger.info("Convergence study of '%s' for n = %s on %d worker(s)", cfg.name, n_values, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        trajectories = list(pool.map(lambda n: run(problem, n), n_values))

    members = pd.DataFrame([_member_row(traj) for traj in trajectories])
    diffs = [dict(n=c.n, **knot_difference(c, f)) for c, f in zip(trajectories, trajectories[1:])]
    differences = pd.DataFrame(diffs, columns=["n", "v_diff", "h_diff", "w_diff"])

    orders = []
    for first, second in zip(diffs, diffs[1:]):
        ratio = second["n"] / first["n"]
        orders.append({"n": second["n"],
                       **{key: observed_order(first[key], second[key], ratio)
                          for key in ("v_diff", "h_diff", "w_diff")}})
    orders = pd.DataFrame(orders, columns=["n", "v_diff", "h_diff", "w_diff"])

    bound_ratios = {}
    for key in BOUND_KEYS:
        values = members[key].to_numpy()
        bound_ratios[key] = float(values.max() / values.min()) if values.min() > 0 else None

    return ConvergenceReport(n_list=n_values, members=members, differences=differences,
                             orders=orders, bound_ratios=bound_ratios)
