"""
Smooth Uncracked Scenario
=========================

Clamped unit square without a crack, smooth body force and initial
velocity. Used for the refinement studies (equivalence, cross-solver
agreement, u-only rewriting, a-priori bounds).

The moduli are soft enough (lowest squared frequency about 4) that the
implicit damping of the stepper stays small from n = 16 on, so every
refinement ratio is already first order at the step counts the studies use.
"""

from typing import Any, Dict

from scenarios.base_scenario import BaseScenario


class SmoothUncrackedScenario(BaseScenario):
    scenario_name = "smooth_uncracked"

    def get_scenario_description(self) -> str:
        return "Clamped 8x8 square, f = sin(pi x) sin(pi y) cos(t), beta = 1, mu_A = mu_B = 0.1"

    def build(self) -> Dict[str, Any]:
        return {
            "mode": "antiplane",
            "T": 1.0,
            "steps": 64,
            "beta": 1.0,
            "geometry": {"nx": 8, "ny": 8},
            "materials": {"A": {"mu": 0.1}, "B": {"mu": 0.1}},
            "data": {
                "f": "sin(pi*x)*sin(pi*y)*cos(t)",
                "u1": "sin(pi*x)*sin(pi*y)",
            },
            "output": {"snapshot_times": [0.5, 1.0]},
        }
