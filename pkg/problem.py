"""
Discrete Problem
================

Wires a validated ScenarioConfig into the objects the solvers work on:
cracked mesh, material field, data functions, initial fields and the full
(unreduced) operators, which are assembled once per problem.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from assembly import (ElementGeometry, ProblemData, SparseSymOperator, assemble_mass,
                      assemble_stiffness, element_geometry)
from data_functions import DataFunction
from errors import ConfigurationError
from materials import SQRT2, MaterialField, isotropic, read_tensor_table, strain_dim, validate
from mesh import (CrackPath, DofSpace, FrontSchedule, Mesh2D, active_space, build_rect_mesh,
                  dofs_per_node, insert_crack, node_at, read_mesh_file)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Operators:
    """Full operators of a problem; reduced ones are formed per DofSpace."""
    geometry: ElementGeometry
    material: MaterialField
    mass: SparseSymOperator
    stiff_A: SparseSymOperator
    stiff_B: SparseSymOperator


@dataclass(eq=False)
class Problem:
    """Everything needed to run the scheme for any number of steps."""
    name: str
    mode: str
    mesh: Mesh2D
    crack: CrackPath
    material: MaterialField
    data: ProblemData
    u0: np.ndarray
    u1: np.ndarray
    w0: np.ndarray
    T: float
    solver: str = "direct"
    cg_rtol: float = 1e-12
    info: dict = field(default_factory=dict)

    @property
    def beta(self) -> float:
        return self.material.beta

    @property
    def geometry(self) -> ElementGeometry:
        return element_geometry(self.mesh, self.mode)

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes * dofs_per_node(self.mode)

    @cached_property
    def operators(self) -> Operators:
        return Operators(
            geometry=self.geometry,
            material=self.material,
            mass=assemble_mass(self.mesh, mode=self.mode),
            stiff_A=assemble_stiffness(self.mesh, None, self.material, "A"),
            stiff_B=assemble_stiffness(self.mesh, None, self.material, "B"),
        )

    def space(self, t: float) -> DofSpace:
        return active_space(self.mesh, self.crack, t, mode=self.mode)


def tensor_scale(mode: str) -> np.ndarray:
    """Component factors turning (G11, G22, G12) input into Mandel vectors."""
    return np.array([1.0, 1.0, SQRT2]) if mode == "planar" else np.ones(2)


def _material(cfg, mesh: Mesh2D, mode: str) -> MaterialField:
    m = cfg.materials
    n_el = mesh.n_triangles
    if m.table:
        A, B = read_tensor_table(m.table, mode, n_el)
        material = MaterialField(mode=mode, A=A, B=B, beta=cfg.beta)
    else:
        default = (isotropic(m.A.get("lambda", 0.0), m.A["mu"], mode),
                   isotropic(m.B.get("lambda", 0.0), m.B["mu"], mode))
        regions = [(r["where"],
                    isotropic(r["A"].get("lambda", 0.0), r["A"]["mu"], mode),
                    isotropic(r["B"].get("lambda", 0.0), r["B"]["mu"], mode)) for r in m.regions]
        material = MaterialField.from_regions(mode, element_geometry(mesh, mode).centroids,
                                              default, regions, cfg.beta)
    validate(material)
    return material


def _crack(cfg, mesh: Mesh2D):
    c = cfg.crack
    if c.points:
        polyline = [node_at(mesh, float(x), float(y)) for x, y in c.points]
    else:
        polyline = list(c.nodes or [])
    if not polyline:
        return insert_crack(mesh, [])
    schedule = FrontSchedule.frozen(c.frozen_length or 0.0)
    cracked, crack = insert_crack(mesh, polyline, schedule)
    if c.linear:
        schedule = FrontSchedule.linear(crack.length, cfg.T)
    elif c.front_times:
        schedule = FrontSchedule(tuple(c.front_times), tuple(c.front_lengths))
    return cracked, crack.with_schedule(schedule)


def build_problem(cfg) -> Problem:
    """
    Build the discrete problem of a ScenarioConfig.

    Args:
        cfg: validated ScenarioConfig

    Returns:
        Problem with validated materials and initial fields
    """
    from memory_oracle import history_from_config, past_history_to_w0

    mode = cfg.mode
    dpn = dofs_per_node(mode)
    d = strain_dim(mode)
    g = cfg.geometry
    if g.mesh_file:
        base = read_mesh_file(g.mesh_file)
    else:
        base = build_rect_mesh(g.width, g.height, g.nx, g.ny, g.dirichlet_sides)
    mesh, crack = _crack(cfg, base)
    material = _material(cfg, mesh, mode)
    geometry = element_geometry(mesh, mode)
    scale = tensor_scale(mode)

    dc = cfg.data
    data = ProblemData(
        f=DataFunction.parse(dc.f, dpn, "f"),
        F=DataFunction.parse(dc.F, d, "F", scale=scale),
        z=DataFunction.parse(dc.z, dpn, "z"),
        N=DataFunction.parse(dc.N, dpn, "N") if dc.N is not None else None,
    )
    u0 = DataFunction.parse(dc.u0, dpn, "u0")(0.0, mesh.nodes).ravel()
    u1 = DataFunction.parse(dc.u1, dpn, "u1")(0.0, mesh.nodes).ravel()

    info = {}
    history = history_from_config(dc, mode, geometry.n_elements, material.beta)
    if history is not None:
        if dc.w0 is not None:
            raise ConfigurationError("give either w0 or a past history, not both", key="data.w0")
        w0, _ = past_history_to_w0(history, material)
        info["history_weight"] = history.weight
    else:
        w0 = DataFunction.parse(dc.w0, d, "w0", scale=scale)(0.0, geometry.centroids)

    problem = Problem(name=cfg.name, mode=mode, mesh=mesh, crack=crack, material=material,
                      data=data, u0=u0, u1=u1, w0=w0, T=cfg.T, solver=cfg.solver.method,
                      cg_rtol=cfg.solver.cg_rtol, info=info)
    logger.info("Problem '%s': %s mode, %d nodes, %d elements, %d crack pairs",
                cfg.name, mode, mesh.n_nodes, mesh.n_triangles, crack.n_pairs)
    return problem
