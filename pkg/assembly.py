"""
Assembly
========

P1 finite-element operators on a (possibly cracked) mesh:

- consistent mass matrix and stiffness matrices for A and B,
- the sparse strain operator e: nodal field -> elementwise strain,
- load vectors for strain-type data (F, h, B w) and Neumann tractions,
- the time samples f_n^k, F_n^k, h_n^k, z_n^k used by the stepper.

Every operator is made exactly symmetric by averaging with its transpose,
which is exact in floating point. Constraint reduction is the congruence
P^T A P with the prolongation of a DofSpace.
"""

import functools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import config
from data_functions import DataFunction
from errors import ConfigurationError, ContractError, GeometryError, NumericalError
from materials import MaterialField, SQRT2, strain_dim
from mesh import DIRICHLET, NEUMANN, DofSpace, Mesh2D, dofs_per_node

logger = logging.getLogger(__name__)

_REFERENCE_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def symmetrize(matrix: sp.spmatrix) -> sp.csr_matrix:
    m = sp.csr_matrix(matrix)
    return sp.csr_matrix(0.5 * (m + m.T))


# ==================== ELEMENT GEOMETRY ====================

@dataclass(frozen=True, eq=False)
class ElementGeometry:
    """Per-element areas, shape gradients, centroids and the strain operator."""
    mode: str
    areas: np.ndarray
    gradients: np.ndarray
    centroids: np.ndarray
    operator: sp.csr_matrix

    @property
    def n_elements(self) -> int:
        return len(self.areas)

    @property
    def strain_dim(self) -> int:
        return strain_dim(self.mode)

    @property
    def n_dofs(self) -> int:
        return self.operator.shape[1]

    def strain(self, u: np.ndarray) -> np.ndarray:
        """StrainField (n_elements, d) of a full nodal vector."""
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_dofs,):
            raise ContractError(f"nodal field of shape {u.shape} does not match {self.n_dofs} DOFs")
        return (self.operator @ u).reshape(self.n_elements, self.strain_dim)

    def pairing(self, G: np.ndarray, H: np.ndarray) -> float:
        """L2 product of two StrainFields."""
        return float(np.sum(self.areas[:, None] * G * H))

    def check_field(self, G: np.ndarray, name: str = "strain field") -> np.ndarray:
        G = np.asarray(G, dtype=float)
        if G.shape != (self.n_elements, self.strain_dim):
            raise ContractError(f"{name} of shape {G.shape} does not match "
                                f"({self.n_elements}, {self.strain_dim})")
        return G

    def strain_load(self, G: np.ndarray) -> np.ndarray:
        """Full nodal vector with entries (G, e phi_i)."""
        G = self.check_field(G)
        return self.operator.T @ (self.areas[:, None] * G).ravel()

    def weight(self, tensors: np.ndarray) -> sp.bsr_matrix:
        """Block-diagonal area * tensor matrix acting on flattened StrainFields."""
        n, d = self.n_elements, self.strain_dim
        blocks = self.areas[:, None, None] * tensors
        return sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(n * d, n * d))


@functools.lru_cache(maxsize=32)
def element_geometry(mesh: Mesh2D, mode: str) -> ElementGeometry:
    """Element geometry of a mesh in a kinematic mode (cached per mesh object)."""
    dpn = dofs_per_node(mode)
    d = strain_dim(mode)
    p = mesh.nodes[mesh.triangles]
    areas = mesh.signed_areas()
    if np.any(areas <= 0):
        raise GeometryError(f"{int(np.sum(areas <= 0))} degenerate triangles")

    x, y = p[:, :, 0], p[:, :, 1]
    twice = (2.0 * areas)[:, None]
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / twice
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / twice
    gradients = np.stack([gx, gy], axis=2)

    n_el = mesh.n_triangles
    rows, cols, vals = [], [], []
    element_rows = np.arange(n_el)[:, None] * d
    nodes = mesh.triangles
    if mode == "antiplane":
        for c in range(2):
            rows.append(np.broadcast_to(element_rows + c, nodes.shape))
            cols.append(nodes)
            vals.append(gradients[:, :, c])
    else:
        # Mandel rows: e11, e22, sqrt(2) e12
        for row, comp, g in ((0, 0, gx), (1, 1, gy), (2, 0, gy / SQRT2), (2, 1, gx / SQRT2)):
            rows.append(np.broadcast_to(element_rows + row, nodes.shape))
            cols.append(nodes * dpn + comp)
            vals.append(g)
    operator = sp.csr_matrix(
        (np.concatenate([v.ravel() for v in vals]),
         (np.concatenate([r.ravel() for r in rows]), np.concatenate([c.ravel() for c in cols]))),
        shape=(n_el * d, mesh.n_nodes * dpn),
    )
    return ElementGeometry(mode=mode, areas=areas, gradients=gradients,
                           centroids=p.mean(axis=1), operator=operator)


# ==================== OPERATORS ====================

@dataclass(frozen=True, eq=False)
class SparseSymOperator:
    """Exactly symmetric sparse operator, full or constraint-reduced."""
    matrix: sp.csr_matrix
    reduced: bool = False

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, v):
        return self.matrix @ v

    def quad(self, v: np.ndarray) -> float:
        return float(v @ (self.matrix @ v))

    def bilinear(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.matrix @ v))

    def is_symmetric(self, tol: float = 0.0) -> bool:
        diff = abs(self.matrix - self.matrix.T)
        return (diff.max() if diff.nnz else 0.0) <= tol

    def reduce(self, space: DofSpace) -> "SparseSymOperator":
        if self.reduced:
            raise ContractError("operator is already constraint-reduced")
        P = space.prolongation
        if P.shape[0] != self.dimension:
            raise ContractError(f"space with {P.shape[0]} DOFs does not match operator of size {self.dimension}")
        return SparseSymOperator(symmetrize(P.T @ self.matrix @ P), reduced=True)

    def factorize(self, method: Optional[str] = None, rtol: Optional[float] = None) -> "Factorization":
        return Factorization(self, method or config.SOLVER, config.CG_RTOL if rtol is None else rtol)


def combine(terms: Sequence[Tuple[float, SparseSymOperator]]) -> SparseSymOperator:
    """Linear combination sum c_i A_i of operators of one kind."""
    reduced = {op.reduced for _, op in terms}
    if len(reduced) != 1:
        raise ContractError("cannot combine full and reduced operators")
    matrix = sum(c * op.matrix for c, op in terms)
    return SparseSymOperator(sp.csr_matrix(matrix), reduced=reduced.pop())


class Factorization:
    """
    Symmetric positive-definite solver.

    Args:
        operator: reduced system operator
        method: 'direct' (sparse LU in symmetric mode) or 'cg'
        rtol: relative residual tolerance for CG
    """

    def __init__(self, operator: SparseSymOperator, method: str = "direct", rtol: float = 1e-12):
        if method not in ("direct", "cg"):
            raise ConfigurationError(f"unknown solver '{method}'", key="solver.method")
        self.operator = operator
        self.method = method
        self.rtol = rtol
        self._lu = None
        self.conditioning = 1.0

        if operator.dimension == 0:
            return
        matrix = sp.csc_matrix(operator.matrix)
        diag = matrix.diagonal()
        if np.any(diag <= 0):
            raise NumericalError("system matrix has a nonpositive diagonal entry",
                                 conditioning=float("inf"))
        if method == "cg":
            self.conditioning = float(diag.max() / diag.min())
            self._precond = sp.diags(1.0 / diag)
            return
        try:
            self._lu = spla.splu(matrix, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                                 options=dict(SymmetricMode=True))
        except RuntimeError as e:
            raise NumericalError(f"factorization failed: {e}", conditioning=float("inf")) from None
        pivots = np.abs(self._lu.U.diagonal())
        self.conditioning = float(pivots.max() / pivots.min()) if pivots.min() > 0 else float("inf")
        if np.any(self._lu.U.diagonal() <= 0):
            raise NumericalError("system matrix is not positive definite", conditioning=self.conditioning)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.operator.dimension == 0:
            return np.zeros(0)
        if self._lu is not None:
            return self._lu.solve(rhs)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        x, info = spla.cg(self.operator.matrix, rhs, rtol=self.rtol, atol=0.0,
                          maxiter=10 * self.operator.dimension, M=self._precond)
        if info != 0:
            raise NumericalError(f"CG did not converge (info={info})", conditioning=self.conditioning)
        return x


def assemble_mass(mesh: Mesh2D, space: Optional[DofSpace] = None, *,
                  mode: Optional[str] = None) -> SparseSymOperator:
    """
    Consistent P1 mass matrix.

    Returns the full operator when no space is given, the constraint-reduced
    one otherwise.
    """
    mode = space.mode if space is not None else (mode or "antiplane")
    dpn = dofs_per_node(mode)
    areas = element_geometry(mesh, mode).areas
    blocks = areas[:, None, None] * _REFERENCE_MASS
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1)
    cols = np.tile(tri, (1, 3))
    n = mesh.n_nodes * dpn
    I, J, V = [], [], []
    for c in range(dpn):
        I.append((rows * dpn + c).ravel())
        J.append((cols * dpn + c).ravel())
        V.append(blocks.ravel())
    mass = SparseSymOperator(symmetrize(sp.coo_matrix(
        (np.concatenate(V), (np.concatenate(I), np.concatenate(J))), shape=(n, n))))
    return mass.reduce(space) if space is not None else mass


def assemble_stiffness(mesh: Mesh2D, space: Optional[DofSpace], material: MaterialField,
                       which: str = "A") -> SparseSymOperator:
    """
    Stiffness (C e u, e v) for C = A or B.

    Returns:
        full operator when space is None, constraint-reduced otherwise
    """
    if not material.validated:
        raise ContractError("material field must be validated before assembly")
    if material.n_elements != mesh.n_triangles:
        raise ContractError(f"material covers {material.n_elements} elements, mesh has {mesh.n_triangles}")
    geometry = element_geometry(mesh, material.mode)
    G = geometry.operator
    K = SparseSymOperator(symmetrize(G.T @ geometry.weight(material.tensors(which)) @ G))
    return K.reduce(space) if space is not None else K


def strain_load(mesh: Mesh2D, space: DofSpace, G: np.ndarray) -> np.ndarray:
    """Full nodal vector with entries integral of G : e phi_i."""
    return element_geometry(mesh, space.mode).strain_load(G)


def boundary_load(mesh: Mesh2D, space: DofSpace, N: np.ndarray) -> np.ndarray:
    """
    Edge-lumped trapezoidal surface load.

    Args:
        N: traction at both endpoints of every boundary edge, shape
            (n_edges, 2, dofs_per_node); (n_edges, 2) in antiplane mode

    Returns:
        full nodal load vector
    """
    dpn = dofs_per_node(space.mode)
    N = np.asarray(N, dtype=float)
    if N.shape == (mesh.n_edges, 2) and dpn == 1:
        N = N[:, :, None]
    if N.shape != (mesh.n_edges, 2, dpn):
        raise ContractError(f"traction samples of shape {N.shape} do not match ({mesh.n_edges}, 2, {dpn})")
    loaded = np.abs(N).max(axis=(1, 2)) > 0
    bad = [i for i in np.flatnonzero(loaded) if mesh.edge_tags[i] != NEUMANN]
    if bad:
        raise ConfigurationError(f"traction given on {len(bad)} dirichlet edges (first: {bad[0]})", key="data.N")
    edges = mesh.boundary_edges
    lengths = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    load = np.zeros(mesh.n_nodes * dpn)
    for end in range(2):
        for c in range(dpn):
            np.add.at(load, edges[:, end] * dpn + c, 0.5 * lengths * N[:, end, c])
    return load


# ==================== DATA SAMPLES ====================

@dataclass
class ProblemData:
    """Time-dependent scenario data. N is optional (None means no traction)."""
    f: DataFunction
    F: DataFunction
    z: DataFunction
    N: Optional[DataFunction] = None


@dataclass(eq=False)
class DataSamples:
    """
    Time samples on the uniform grid t_k = k tau, k = 0..n.

    f holds interval averages (row 0 unused, zero); F, z and the `*_pt`
    arrays are pointwise knot values; dz and ddz are the difference
    quotients with dz[0] = z'(0) and ddz[0] = z''(0). Nodal arrays are full
    vectors over all DOFs, strain arrays are (n_elements, d) per knot.
    """
    n: int
    T: float
    tau: float
    beta: float
    times: np.ndarray
    f: np.ndarray
    F: np.ndarray
    h: np.ndarray
    z: np.ndarray
    dz: np.ndarray
    ddz: np.ndarray
    Bw0: np.ndarray
    neumann: Optional[np.ndarray] = None
    f_pt: Optional[np.ndarray] = None
    F_dot: Optional[np.ndarray] = None
    z_dot: Optional[np.ndarray] = None
    z_ddot: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def has_neumann(self) -> bool:
        return self.neumann is not None and bool(np.any(self.neumann))


def _nodal(fn: DataFunction, t: float, mesh: Mesh2D) -> np.ndarray:
    return fn(t, mesh.nodes).ravel()


def _traction(fn: DataFunction, t: float, mesh: Mesh2D, space: DofSpace) -> np.ndarray:
    N = np.zeros((mesh.n_edges, 2, fn.n_components))
    neumann = np.array([tag == NEUMANN for tag in mesh.edge_tags], dtype=bool)
    for end in range(2):
        N[neumann, end] = fn(t, mesh.nodes[mesh.boundary_edges[neumann, end]])
    return boundary_load(mesh, space, N)


def sample_data(mesh: Mesh2D, space: DofSpace, material: MaterialField, data: ProblemData,
                w0: np.ndarray, n: int, T: float,
                subintervals: Optional[int] = None) -> DataSamples:
    """
    Sample scenario data on the grid t_k = k T/n.

    Args:
        mesh, space: discretization (the space fixes the kinematic mode)
        material: validated field, supplies B and beta for h
        data: f, F, z and optional N
        w0: initial internal variable (StrainField)
        n: number of steps (>= 1)
        T: final time

    Returns:
        DataSamples
    """
    if int(n) < 1:
        raise ContractError(f"number of steps must be at least 1, got {n}")
    n = int(n)
    tau = T / n
    subintervals = subintervals or config.GAUSS_SUBINTERVALS
    geometry = element_geometry(mesh, space.mode)
    w0 = geometry.check_field(w0, "w0")
    for fn in (data.f, data.F, data.z) + ((data.N,) if data.N is not None else ()):
        fn.check_resolution(tau)

    times = tau * np.arange(n + 1)
    times[-1] = T
    Bw0 = material.stress(w0, "B")
    decay = np.exp(-times / material.beta)

    f = np.zeros((n + 1, space.n_dofs))
    for k in range(1, n + 1):
        f[k] = data.f.interval_average(times[k - 1], times[k], mesh.nodes, subintervals).ravel()
    F = np.stack([data.F(t, geometry.centroids) for t in times])
    z = np.stack([_nodal(data.z, t, mesh) for t in times])

    z_dot_fn = data.z.diff_t()
    z_ddot_fn = z_dot_fn.diff_t()
    z_dot = np.stack([_nodal(z_dot_fn, t, mesh) for t in times])
    z_ddot = np.stack([_nodal(z_ddot_fn, t, mesh) for t in times])

    dz = np.empty_like(z)
    dz[0] = z_dot[0]
    dz[1:] = np.diff(z, axis=0) / tau
    ddz = np.empty_like(z)
    ddz[0] = z_ddot[0]
    ddz[1:] = np.diff(dz, axis=0) / tau

    F_dot_fn = data.F.diff_t()
    samples = DataSamples(
        n=n, T=float(T), tau=tau, beta=material.beta, times=times,
        f=f, F=F, h=decay[:, None, None] * Bw0[None], z=z, dz=dz, ddz=ddz, Bw0=Bw0,
        f_pt=np.stack([_nodal(data.f, t, mesh) for t in times]),
        F_dot=np.stack([F_dot_fn(t, geometry.centroids) for t in times]),
        z_dot=z_dot, z_ddot=z_ddot,
    )
    if data.N is not None and not data.N.is_zero:
        samples.neumann = np.stack([_traction(data.N, t, mesh, space) for t in times])
    logger.debug("Sampled data: n=%d, tau=%.4g, T=%.4g", n, tau, T)
    return samples
