"""
Domain Mesh
===========

Triangulations of the reference rectangle, crack insertion by node duplication,
and the time-dependent discrete space obtained from a monotone tie schedule.

A crack is a polyline along mesh edges. Every interior crack vertex gets a
geometrically coincident twin node; triangles on the right-hand side of the
polyline are re-indexed to the twins. While the crack front has not reached a
vertex, the twin pair is tied (constrained equal) so the discrete space is the
uncracked one; once the front passes, the tie is released for good.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import scipy.sparse as sp

from errors import ConfigurationError, ContractError, DomainError, GeometryError

logger = logging.getLogger(__name__)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
TAGS = (DIRICHLET, NEUMANN)
SIDES = ("bottom", "right", "top", "left")
MODES = {"antiplane": 1, "planar": 2}

_AREA_TOL = 1e-14


def dofs_per_node(mode: str) -> int:
    """Number of displacement components per node for a kinematic mode."""
    try:
        return MODES[mode]
    except KeyError:
        raise ConfigurationError(f"unknown kinematic mode '{mode}'", key="mode") from None


def _readonly(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _edge_key(a: int, b: int) -> Tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, eq=False)
class Mesh2D:
    """Triangulation of the domain with tagged boundary edges."""
    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: Tuple[str, ...]
    normals: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.boundary_edges)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def diameter(self) -> float:
        span = self.nodes.max(axis=0) - self.nodes.min(axis=0)
        return float(np.hypot(*span))

    def edge_set(self) -> Set[Tuple[int, int]]:
        edges = set()
        for a, b, c in self.triangles:
            edges.update((_edge_key(a, b), _edge_key(b, c), _edge_key(c, a)))
        return edges

    def boundary_nodes(self, tag: Optional[str] = None) -> np.ndarray:
        if tag is None:
            return np.unique(self.boundary_edges)
        mask = np.array([t == tag for t in self.edge_tags], dtype=bool)
        return np.unique(self.boundary_edges[mask]) if mask.any() else np.zeros(0, dtype=int)


def _outward_normals(nodes: np.ndarray, triangles: np.ndarray, edges: np.ndarray) -> np.ndarray:
    owner: Dict[Tuple[int, int], int] = {}
    for a, b, c in triangles:
        owner[_edge_key(a, b)] = c
        owner[_edge_key(b, c)] = a
        owner[_edge_key(c, a)] = b
    normals = np.zeros((len(edges), 2))
    for i, (a, b) in enumerate(edges):
        key = _edge_key(a, b)
        if key not in owner:
            raise GeometryError(f"boundary edge ({a}, {b}) does not belong to any triangle")
        d = nodes[b] - nodes[a]
        length = np.hypot(*d)
        n = np.array([d[1], -d[0]]) / length
        if np.dot(n, nodes[owner[key]] - nodes[a]) > 0:
            n = -n
        normals[i] = n
    return normals


def make_mesh(nodes, triangles, boundary_edges, edge_tags: Sequence[str],
              check_boundary: bool = True) -> Mesh2D:
    """
    Build and validate a Mesh2D.

    Args:
        nodes: (N, 2) coordinates
        triangles: (M, 3) node indices, positively oriented
        boundary_edges: (E, 2) node index pairs
        edge_tags: one of 'dirichlet' | 'neumann' per boundary edge
        check_boundary: also require the tagged edges to be exactly the
            edges owned by a single triangle (false for cracked meshes,
            whose crack lips are not part of the outer boundary)

    Returns:
        Immutable Mesh2D
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
    triangles = np.asarray(triangles, dtype=int).reshape(-1, 3)
    boundary_edges = np.asarray(boundary_edges, dtype=int).reshape(-1, 2)
    edge_tags = tuple(str(t) for t in edge_tags)

    if len(edge_tags) != len(boundary_edges):
        raise GeometryError("one tag per boundary edge is required")
    bad = sorted(set(edge_tags) - set(TAGS))
    if bad:
        raise GeometryError(f"unknown boundary tags {bad}")
    if triangles.size and (triangles.min() < 0 or triangles.max() >= len(nodes)):
        raise GeometryError("triangle references a missing node")

    mesh = Mesh2D(
        nodes=_readonly(nodes, float),
        triangles=_readonly(triangles, int),
        boundary_edges=_readonly(boundary_edges, int),
        edge_tags=edge_tags,
        normals=_readonly(_outward_normals(nodes, triangles, boundary_edges), float),
    )

    areas = mesh.signed_areas()
    if np.any(areas <= _AREA_TOL * max(1.0, mesh.diameter() ** 2)):
        raise GeometryError(f"{int(np.sum(areas <= 0))} triangles are degenerate or negatively oriented")

    degree = np.bincount(boundary_edges.ravel(), minlength=len(nodes))
    touched = degree[np.unique(boundary_edges)] if boundary_edges.size else degree[:0]
    if np.any(touched != 2):
        raise GeometryError("boundary edges do not form closed loops")

    if check_boundary:
        counts: Dict[Tuple[int, int], int] = {}
        for a, b, c in triangles:
            for key in (_edge_key(a, b), _edge_key(b, c), _edge_key(c, a)):
                counts[key] = counts.get(key, 0) + 1
        outer = {k for k, v in counts.items() if v == 1}
        tagged = [_edge_key(a, b) for a, b in boundary_edges]
        if len(set(tagged)) != len(tagged) or set(tagged) != outer:
            raise GeometryError("tagged edges must cover the outer boundary exactly once")

    return mesh


def build_rect_mesh(width: float, height: float, nx: int, ny: int,
                    dirichlet_sides: Sequence[str] = SIDES) -> Mesh2D:
    """
    Structured triangulation of [0, width] x [0, height].

    Each cell is split along alternating diagonals, giving (nx+1)(ny+1)
    nodes and 2*nx*ny triangles. Node (i, j) has index j*(nx+1) + i.

    Args:
        width, height: rectangle dimensions
        nx, ny: subdivisions along x and y
        dirichlet_sides: sides tagged dirichlet, the rest are neumann

    Returns:
        Mesh2D
    """
    if width <= 0 or height <= 0:
        raise ConfigurationError(f"rectangle dimensions must be positive, got {width} x {height}", key="geometry")
    if int(nx) < 1 or int(ny) < 1:
        raise ConfigurationError(f"subdivisions must be at least 1, got {nx} x {ny}", key="geometry")
    unknown = set(dirichlet_sides) - set(SIDES)
    if unknown:
        raise ConfigurationError(f"unknown sides {sorted(unknown)}", key="dirichlet_sides")
    nx, ny = int(nx), int(ny)

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    triangles = []
    for j in range(ny):
        for i in range(nx):
            n00, n10, n01, n11 = idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)
            if (i + j) % 2 == 0:
                triangles += [(n00, n10, n11), (n00, n11, n01)]
            else:
                triangles += [(n00, n10, n01), (n10, n11, n01)]

    edges, tags = [], []

    def side(name, pairs):
        tag = DIRICHLET if name in dirichlet_sides else NEUMANN
        for a, b in pairs:
            edges.append((a, b))
            tags.append(tag)

    side("bottom", [(idx(i, 0), idx(i + 1, 0)) for i in range(nx)])
    side("right", [(idx(nx, j), idx(nx, j + 1)) for j in range(ny)])
    side("top", [(idx(i + 1, ny), idx(i, ny)) for i in reversed(range(nx))])
    side("left", [(idx(0, j + 1), idx(0, j)) for j in reversed(range(ny))])

    mesh = make_mesh(nodes, triangles, edges, tags)
    logger.debug("Built %dx%d rectangle mesh: %d nodes, %d triangles", nx, ny, mesh.n_nodes, mesh.n_triangles)
    return mesh


def node_at(mesh: Mesh2D, x: float, y: float) -> int:
    """Index of the (first) node at (x, y)."""
    dist = np.hypot(mesh.nodes[:, 0] - x, mesh.nodes[:, 1] - y)
    i = int(np.argmin(dist))
    if dist[i] > 1e-9 * max(1.0, mesh.diameter()):
        raise GeometryError(f"no mesh node at ({x}, {y}); nearest is {dist[i]:.3e} away")
    return i


# ==================== MESH FILES ====================

def read_mesh_file(path: str) -> Mesh2D:
    """
    Read the plain-text mesh format (see docs/FORMATS.md).

    Header `n_nodes n_triangles n_edges`, then node lines `x y`, triangle
    lines `i j k` and boundary lines `i j tag`. Blank lines and `#` comments
    are ignored.
    """
    with open(path, "r") as f:
        rows = [line.split("#", 1)[0].split() for line in f]
    rows = [r for r in rows if r]
    if not rows or len(rows[0]) != 3:
        raise GeometryError(f"{path}: header must be 'n_nodes n_triangles n_edges'")
    try:
        n_nodes, n_tris, n_edges = (int(v) for v in rows[0])
    except ValueError:
        raise GeometryError(f"{path}: header counts must be integers") from None
    body = rows[1:]
    if len(body) != n_nodes + n_tris + n_edges:
        raise GeometryError(f"{path}: expected {n_nodes + n_tris + n_edges} data lines, found {len(body)}")
    try:
        nodes = [(float(r[0]), float(r[1])) for r in body[:n_nodes]]
        tris = [(int(r[0]), int(r[1]), int(r[2])) for r in body[n_nodes:n_nodes + n_tris]]
        edge_rows = body[n_nodes + n_tris:]
        edges = [(int(r[0]), int(r[1])) for r in edge_rows]
        tags = [r[2] for r in edge_rows]
    except (ValueError, IndexError) as e:
        raise GeometryError(f"{path}: malformed data line ({e})") from None
    return make_mesh(nodes, tris, edges, tags)


def write_mesh_file(mesh: Mesh2D, path: str) -> None:
    """Write a mesh in the plain-text format read by read_mesh_file."""
    with open(path, "w") as f:
        f.write(f"{mesh.n_nodes} {mesh.n_triangles} {mesh.n_edges}\n")
        for x, y in mesh.nodes:
            f.write(f"{x!r} {y!r}\n")
        for a, b, c in mesh.triangles:
            f.write(f"{a} {b} {c}\n")
        for (a, b), tag in zip(mesh.boundary_edges, mesh.edge_tags):
            f.write(f"{a} {b} {tag}\n")


# ==================== CRACK ====================

@dataclass(frozen=True)
class FrontSchedule:
    """Nondecreasing piecewise-linear crack-front arclength s(t)."""
    times: Tuple[float, ...]
    lengths: Tuple[float, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        lengths = np.asarray(self.lengths, dtype=float)
        if times.ndim != 1 or len(times) < 1 or len(times) != len(lengths):
            raise ConfigurationError("front schedule needs matching 'times' and 'lengths'", key="crack.front")
        if np.any(np.diff(times) <= 0):
            raise ConfigurationError("front schedule times must be strictly increasing", key="crack.front.times")
        if np.any(np.diff(lengths) < 0) or np.any(lengths < 0):
            raise ConfigurationError("front schedule must be nonnegative and nondecreasing", key="crack.front.lengths")

    @classmethod
    def frozen(cls, length: float = 0.0) -> "FrontSchedule":
        return cls(times=(0.0, float("inf")), lengths=(float(length), float(length)))

    @classmethod
    def linear(cls, length: float, t_end: float, t_start: float = 0.0) -> "FrontSchedule":
        return cls(times=(float(t_start), float(t_end)), lengths=(0.0, float(length)))

    def domain(self) -> Tuple[float, float]:
        return self.times[0], self.times[-1]

    def __call__(self, t: float) -> float:
        lo, hi = self.domain()
        eps = 1e-12 * max(1.0, abs(lo), abs(hi) if np.isfinite(hi) else 0.0)
        if t < lo - eps or t > hi + eps:
            raise DomainError(f"time {t} outside front schedule domain [{lo}, {hi}]")
        if self.lengths[0] == self.lengths[-1]:
            return float(self.lengths[0])
        return float(np.interp(t, self.times, self.lengths))


@dataclass(frozen=True)
class CrackPath:
    """Crack polyline on mesh nodes with its duplicate pairs and front schedule."""
    polyline: Tuple[int, ...]
    vertex_arclength: Tuple[float, ...]
    duplicate_pairs: Tuple[Tuple[int, int], ...]
    pair_arclength: Tuple[float, ...]
    front_schedule: FrontSchedule = field(default_factory=FrontSchedule.frozen)

    @property
    def length(self) -> float:
        return self.vertex_arclength[-1] if self.vertex_arclength else 0.0

    @property
    def n_pairs(self) -> int:
        return len(self.duplicate_pairs)

    def with_schedule(self, schedule: FrontSchedule) -> "CrackPath":
        return replace(self, front_schedule=schedule)

    def released_count(self, t: float) -> int:
        """Number of pairs with arclength <= s(t); pairs are in arclength order."""
        s = self.front_schedule(t)
        tol = 1e-12 * max(1.0, self.length)
        return int(np.searchsorted(np.asarray(self.pair_arclength), s + tol, side="right"))


def _fan_components(triangles: np.ndarray, fan: List[int], v: int,
                    crack_edges: Set[Tuple[int, int]]) -> List[Set[int]]:
    """Split the triangles around v into groups connected across non-crack edges."""
    by_vertex: Dict[int, List[int]] = {}
    for t in fan:
        for x in triangles[t]:
            if x != v:
                by_vertex.setdefault(int(x), []).append(t)
    parent = {t: t for t in fan}

    def find(t):
        while parent[t] != t:
            parent[t] = parent[parent[t]]
            t = parent[t]
        return t

    for x, owners in by_vertex.items():
        if len(owners) == 2 and _edge_key(v, x) not in crack_edges:
            parent[find(owners[0])] = find(owners[1])

    groups: Dict[int, Set[int]] = {}
    for t in fan:
        groups.setdefault(find(t), set()).add(t)
    return list(groups.values())


def insert_crack(mesh: Mesh2D, polyline: Sequence[int],
                 schedule: Optional[FrontSchedule] = None) -> Tuple[Mesh2D, CrackPath]:
    """
    Embed a crack polyline by duplicating its interior vertices.

    Args:
        mesh: uncracked mesh
        polyline: node indices, consecutive ones joined by mesh edges
        schedule: crack-front schedule (default: frozen closed crack)

    Returns:
        (cracked mesh, CrackPath)
    """
    schedule = schedule or FrontSchedule.frozen()
    verts = [int(v) for v in polyline]
    if not verts:
        return mesh, CrackPath((), (), (), (), schedule)
    if len(verts) == 1:
        raise GeometryError("a crack polyline needs at least two vertices")
    if min(verts) < 0 or max(verts) >= mesh.n_nodes:
        raise GeometryError("crack polyline references a missing node")
    if len(set(verts)) != len(verts):
        raise GeometryError("crack polyline self-intersects")

    edges = mesh.edge_set()
    outer = {_edge_key(a, b) for a, b in mesh.boundary_edges}
    segments = [_edge_key(a, b) for a, b in zip(verts[:-1], verts[1:])]
    for a, b in segments:
        if (a, b) not in edges:
            raise GeometryError(f"crack segment ({a}, {b}) is not a mesh edge")
        if (a, b) in outer:
            raise GeometryError(f"crack segment ({a}, {b}) lies on the domain boundary")
    crack_edges = set(segments)
    on_boundary = set(mesh.boundary_edges.ravel().tolist())
    for v in verts[1:-1]:
        if v in on_boundary:
            raise GeometryError(f"interior crack vertex {v} lies on the domain boundary")

    incident: Dict[int, List[int]] = {}
    for t, tri in enumerate(mesh.triangles):
        for x in tri:
            incident.setdefault(int(x), []).append(t)

    steps = np.diff(mesh.nodes[verts], axis=0)
    arclength = np.concatenate([[0.0], np.cumsum(np.hypot(steps[:, 0], steps[:, 1]))])

    nodes = [tuple(p) for p in mesh.nodes]
    triangles = np.array(mesh.triangles, dtype=int)
    pairs, pair_s = [], []
    for i in range(1, len(verts) - 1):
        v, nxt = verts[i], verts[i + 1]
        groups = _fan_components(mesh.triangles, incident[v], v, crack_edges)
        if len(groups) != 2:
            raise GeometryError(f"crack does not split the neighbourhood of node {v} in two")
        minus_tri = None
        for t in incident[v]:
            tri = mesh.triangles[t]
            if nxt in tri:
                c = next(int(x) for x in tri if x != v and x != nxt)
                d = mesh.nodes[nxt] - mesh.nodes[v]
                e = mesh.nodes[c] - mesh.nodes[v]
                if d[0] * e[1] - d[1] * e[0] < 0:
                    minus_tri = t
        if minus_tri is None:
            raise GeometryError(f"no triangle on the minus side of segment ({v}, {nxt})")
        minus = groups[0] if minus_tri in groups[0] else groups[1]
        dup = len(nodes)
        nodes.append(tuple(mesh.nodes[v]))
        for t in minus:
            triangles[t][triangles[t] == v] = dup
        pairs.append((v, dup))
        pair_s.append(float(arclength[i]))

    cracked = make_mesh(nodes, triangles, mesh.boundary_edges, mesh.edge_tags, check_boundary=False)
    crack = CrackPath(
        polyline=tuple(verts),
        vertex_arclength=tuple(float(s) for s in arclength),
        duplicate_pairs=tuple(pairs),
        pair_arclength=tuple(pair_s),
        front_schedule=schedule,
    )
    logger.info("Inserted crack with %d segments, %d duplicate pairs, length %.4g",
                len(segments), len(pairs), crack.length)
    return cracked, crack


# ==================== DISCRETE SPACE ====================

@dataclass(frozen=True, eq=False)
class DofSpace:
    """Discrete V_t^D: free, Dirichlet and tied degrees of freedom at time t."""
    mesh: Mesh2D
    mode: str
    t: float
    free_dofs: np.ndarray
    dirichlet_dofs: np.ndarray
    active_ties: Tuple[Tuple[int, int], ...]
    released: int
    prolongation: sp.csr_matrix

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes * dofs_per_node(self.mode)

    @property
    def dimension(self) -> int:
        return len(self.free_dofs)

    def embed(self, reduced: np.ndarray, dirichlet_values: Optional[np.ndarray] = None) -> np.ndarray:
        """Full nodal vector from reduced values plus Dirichlet values (full-sized)."""
        full = self.prolongation @ np.asarray(reduced, dtype=float)
        if dirichlet_values is not None:
            full[self.dirichlet_dofs] = np.asarray(dirichlet_values, dtype=float)[self.dirichlet_dofs]
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full, dtype=float)[self.free_dofs]

    def is_admissible(self, v: np.ndarray, atol: float = 0.0) -> bool:
        """True when v vanishes on Dirichlet DOFs and respects every active tie."""
        v = np.asarray(v, dtype=float)
        if len(v) != self.n_dofs:
            raise ContractError(f"vector of size {len(v)} does not match space of size {self.n_dofs}")
        if self.dirichlet_dofs.size and np.max(np.abs(v[self.dirichlet_dofs])) > atol:
            return False
        for master, slave in self.active_ties:
            if abs(v[master] - v[slave]) > atol:
                return False
        return True


def active_space(mesh: Mesh2D, crack: CrackPath, t: float,
                 dirichlet_tag: str = DIRICHLET, mode: str = "antiplane") -> DofSpace:
    """
    Discrete space at time t.

    Duplicate pairs with arclength <= s(t) are released, the others stay tied;
    Dirichlet DOFs are all components of nodes on edges tagged dirichlet_tag.
    """
    dpn = dofs_per_node(mode)
    released = crack.released_count(t)
    n_dofs = mesh.n_nodes * dpn

    d_nodes = mesh.boundary_nodes(dirichlet_tag)
    dirichlet = np.sort(np.concatenate([d_nodes * dpn + c for c in range(dpn)])).astype(int) \
        if d_nodes.size else np.zeros(0, dtype=int)

    ties = []
    for plus, minus in crack.duplicate_pairs[released:]:
        for c in range(dpn):
            ties.append((plus * dpn + c, minus * dpn + c))
    slaves = np.array([s for _, s in ties], dtype=int)

    blocked = np.zeros(n_dofs, dtype=bool)
    blocked[dirichlet] = True
    if slaves.size:
        if np.any(blocked[slaves]):
            raise GeometryError("a tied crack node is also a Dirichlet node")
        blocked[slaves] = True
    free = np.flatnonzero(~blocked)

    column = -np.ones(n_dofs, dtype=int)
    column[free] = np.arange(len(free))
    for master, slave in ties:
        if column[master] < 0:
            raise GeometryError(f"tie master DOF {master} is constrained")
        column[slave] = column[master]
    rows = np.flatnonzero(column >= 0)
    prolongation = sp.csr_matrix(
        (np.ones(len(rows)), (rows, column[rows])), shape=(n_dofs, len(free))
    )

    return DofSpace(
        mesh=mesh,
        mode=mode,
        t=float(t),
        free_dofs=_readonly(free, int),
        dirichlet_dofs=_readonly(dirichlet, int),
        active_ties=tuple(ties),
        released=released,
        prolongation=prolongation,
    )


def v_norm(space: DofSpace, u: np.ndarray) -> float:
    """(||u||^2 + ||e u||^2)^(1/2) with the assembly quadrature; e u is the gradient in antiplane mode."""
    from assembly import assemble_mass, element_geometry

    u = np.asarray(u, dtype=float)
    if u.shape != (space.n_dofs,):
        raise ContractError(f"field of shape {u.shape} does not match space with {space.n_dofs} DOFs")
    geometry = element_geometry(space.mesh, space.mode)
    mass = assemble_mass(space.mesh, mode=space.mode)
    strain = geometry.strain(u)
    value = mass.quad(u) + float(np.sum(geometry.areas[:, None] * strain * strain))
    return float(np.sqrt(max(value, 0.0)))
