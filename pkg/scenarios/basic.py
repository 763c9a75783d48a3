"""
Basic Scenarios
===============

zero        all data zero: trajectory and ledger vanish identically
static      crack fully open from t = 0 (frozen front) under a constant load
single_dof  one free node, calibrated so the FEM system is the scalar model
            u'' + a u + b (u - w) = f, beta w' = u - w with a = b = 1
"""

from typing import Any, Dict

from scenarios.base_scenario import BaseScenario


def _isotropic(mu: float, lam: float = 0.0) -> Dict[str, float]:
    return {"lambda": lam, "mu": mu}


class ZeroScenario(BaseScenario):
    scenario_name = "zero"

    def get_scenario_description(self) -> str:
        return "Zero data on a 4x4 antiplane square; every output is identically zero"

    def build(self) -> Dict[str, Any]:
        return {
            "mode": "antiplane",
            "T": 1.0,
            "steps": 16,
            "beta": 1.0,
            "geometry": {"nx": 4, "ny": 4},
            "materials": {"A": _isotropic(1.0), "B": _isotropic(1.0)},
            "data": {},
        }


class StaticScenario(BaseScenario):
    scenario_name = "static"

    def get_scenario_description(self) -> str:
        return "Half-length crack held open from t = 0 under a constant body force"

    def build(self) -> Dict[str, Any]:
        return {
            "mode": "antiplane",
            "T": 1.0,
            "steps": 32,
            "beta": 0.5,
            "geometry": {"nx": 8, "ny": 8},
            "crack": {"points": [[i / 8, 0.5] for i in range(5)], "front": {"frozen": 0.5}},
            "materials": {"A": _isotropic(1.0), "B": _isotropic(0.5)},
            "data": {"f": 1.0},
        }


def single_dof_modulus() -> float:
    """Shear modulus making K_cc / M_cc = 1 at the centre node of the 2x2 mesh."""
    from assembly import assemble_mass, assemble_stiffness
    from materials import MaterialField, isotropic, validate
    from mesh import build_rect_mesh, node_at

    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    unit = isotropic(0.0, 1.0, "antiplane")
    material = MaterialField.uniform("antiplane", mesh.n_triangles, unit, unit, 1.0)
    validate(material)
    centre = node_at(mesh, 0.5, 0.5)
    mass = assemble_mass(mesh, mode="antiplane").matrix[centre, centre]
    stiffness = assemble_stiffness(mesh, None, material, "A").matrix[centre, centre]
    return float(mass / stiffness)


class SingleDofScenario(BaseScenario):
    scenario_name = "single_dof"

    def get_scenario_description(self) -> str:
        return "One free node with a = b = beta = 1, u0 = 1, u1 = 0; compared with the RK4 oracle"

    def build(self) -> Dict[str, Any]:
        mu = single_dof_modulus()
        return {
            "mode": "antiplane",
            "T": 1.0,
            "steps": 1024,
            "beta": 1.0,
            "geometry": {"nx": 2, "ny": 2},
            "materials": {"A": _isotropic(mu), "B": _isotropic(mu)},
            "data": {"u0": "sin(pi*x)*sin(pi*y)"},
            "checks": {"u_only": False},
        }
