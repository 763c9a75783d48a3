"""
Past History Scenario
=====================

Uncracked square whose material was strained before t = 0. The history is
reduced to an initial internal variable w0, which then relaxes and drives
the body through the fading forcing exp(-t/beta) B w0.
"""

from typing import Any, Dict

from scenarios.base_scenario import BaseScenario


class PastHistoryDemoScenario(BaseScenario):
    scenario_name = "past_history_demo"

    def get_scenario_description(self) -> str:
        return "Uniform shear strain history on (-20 beta, 0] reduced to w0, free right edge"

    def build(self) -> Dict[str, Any]:
        return {
            "mode": "antiplane",
            "T": 1.0,
            "steps": 64,
            "beta": 0.5,
            "geometry": {"nx": 8, "ny": 8, "dirichlet_sides": ["bottom", "left", "top"]},
            "materials": {"A": {"mu": 1.0}, "B": {"mu": 1.0}},
            "data": {
                "past_strain": ["0.1*exp(t)", "0.05"],
                "history_samples": 4001,
            },
            "output": {"snapshot_times": [1.0]},
        }
