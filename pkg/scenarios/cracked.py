"""
Cracked Plate Scenarios
=======================

cracked_plate          antiplane unit square, mid-line crack opening
                       linearly in time between clamped top and bottom
planar_elastic_crack   planar version with a half-length crack pulled
                       open by a moving top edge; weak, slow viscosity
"""

from typing import Any, Dict

from scenarios.base_scenario import BaseScenario


def mid_line(nx: int, stop: float = 1.0):
    """Crack polyline along y = 0.5 through every mesh node up to x = stop."""
    return [[i / nx, 0.5] for i in range(int(round(stop * nx)) + 1)]


class CrackedPlateScenario(BaseScenario):
    scenario_name = "cracked_plate"

    def get_scenario_description(self) -> str:
        return "16x16 antiplane square, crack along y = 0.5 growing linearly to full width by T"

    def build(self) -> Dict[str, Any]:
        nx = 16
        return {
            "mode": "antiplane",
            "T": 1.0,
            "steps": 128,
            "beta": 1.0,
            "geometry": {"nx": nx, "ny": nx, "dirichlet_sides": ["bottom", "top"]},
            "crack": {"points": mid_line(nx), "front": {"linear": True}},
            "materials": {"A": {"mu": 1.0}, "B": {"mu": 1.0}},
            "data": {"u1": "x*sin(pi*y)*(1+sin(2*pi*y))"},
            "output": {"snapshot_times": [0.5, 1.0]},
        }


class PlanarElasticCrackScenario(BaseScenario):
    scenario_name = "planar_elastic_crack"

    def get_scenario_description(self) -> str:
        return "Planar 8x8 square, half-length crack opened by a top edge moving up at 0.01"

    def build(self) -> Dict[str, Any]:
        nx = 8
        return {
            "mode": "planar",
            "T": 1.0,
            "steps": 64,
            "beta": 10.0,
            "geometry": {"nx": nx, "ny": nx, "dirichlet_sides": ["bottom", "top"]},
            "crack": {"points": mid_line(nx, 0.5), "front": {"linear": True}},
            "materials": {"A": {"lambda": 1.0, "mu": 1.0}, "B": {"lambda": 0.0, "mu": 0.05}},
            "data": {
                "z": ["0", "0.01*t*y"],
                "u1": ["0", "0.01*y"],
            },
            "output": {"snapshot_times": [1.0]},
        }
