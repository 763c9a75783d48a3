"""
Incremental Stepper
===================

Implicit time stepping of the coupled (u, w) system on the growing-crack
space. Per step the internal variable is eliminated pointwise,

    w^k = (beta w^{k-1} + tau e u^k) / (beta + tau),

leaving the symmetric positive-definite system

    (M / tau^2 + K_A + c K_B) u^k = M (2 u^{k-1} - u^{k-2}) / tau^2 + M f^k
                                    + (F^k - h^k + c B w^{k-1}, e .)  [+ N^k]

with c = beta / (beta + tau). The solution is the minimizer of the convex
incremental functional, so solving the linear system is the minimization.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from assembly import DataSamples, Factorization, SparseSymOperator, combine, sample_data
from errors import ContractError, DataError, DomainError
from mesh import DofSpace

logger = logging.getLogger(__name__)

KINDS = ("pw_linear", "right_const", "left_const")
FIELDS = ("u", "velocity", "w")


@dataclass(frozen=True, eq=False)
class StepState:
    """(u^{k-1}, u^k, w^k) at t = k tau."""
    k: int
    t: float
    tau: float
    u_prev: np.ndarray
    u_curr: np.ndarray
    w_curr: np.ndarray
    released: int = 0

    @property
    def velocity(self) -> np.ndarray:
        return (self.u_curr - self.u_prev) / self.tau


@dataclass(eq=False)
class Trajectory:
    """States k = 0..n of one run, with the samples and spaces they were computed on."""
    states: List[StepState]
    tau: float
    n: int
    problem: object = None
    samples: Optional[DataSamples] = None
    spaces: List[DofSpace] = field(default_factory=list)
    solver: str = "coupled"
    conditioning: List[float] = field(default_factory=list)

    @property
    def T(self) -> float:
        return self.states[-1].t

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def u(self) -> np.ndarray:
        return np.stack([s.u_curr for s in self.states])

    @property
    def w(self) -> np.ndarray:
        return np.stack([s.w_curr for s in self.states])

    @property
    def velocities(self) -> np.ndarray:
        return np.stack([s.velocity for s in self.states])


class StepSystem:
    """
    System operators of the scheme with factorizations cached by tie state.

    Args:
        operators: full operators of the problem
        tau: time step
        weight_B: factor multiplying K_B in the system matrix
        method: 'direct' or 'cg'
        rtol: CG tolerance
    """

    def __init__(self, operators, tau: float, weight_B: float, method: str = "direct",
                 rtol: float = 1e-12):
        self.operators = operators
        self.tau = tau
        self.weight_B = weight_B
        self.method = method
        self.rtol = rtol
        self.matrix = combine([(1.0 / tau ** 2, operators.mass), (1.0, operators.stiff_A),
                               (weight_B, operators.stiff_B)])
        self._factors: Dict[int, Tuple[SparseSymOperator, Factorization]] = {}

    def factor(self, space: DofSpace) -> Tuple[SparseSymOperator, Factorization]:
        if space.released not in self._factors:
            reduced = self.matrix.reduce(space)
            self._factors[space.released] = (reduced, reduced.factorize(self.method, self.rtol))
            logger.debug("Factorized system with %d released pairs (dimension %d)",
                         space.released, reduced.dimension)
        return self._factors[space.released]

    def solve(self, space: DofSpace, rhs: np.ndarray, dirichlet: np.ndarray) -> Tuple[np.ndarray, float]:
        """Solve for the full vector u = P u_r + g with g the Dirichlet values."""
        g = np.zeros(space.n_dofs)
        g[space.dirichlet_dofs] = dirichlet[space.dirichlet_dofs]
        _, factorization = self.factor(space)
        P = space.prolongation
        reduced = factorization.solve(P.T @ (rhs - self.matrix @ g))
        return P @ reduced + g, factorization.conditioning


def init_state(u0: np.ndarray, u1: np.ndarray, w0: np.ndarray, tau: float,
               space: Optional[DofSpace] = None, z0: Optional[np.ndarray] = None) -> StepState:
    """
    State at k = 0 with u^{-1} = u0 - tau u1, so that delta u^0 = u1.

    When a space and z(0) are given, u0 must match z(0) on Dirichlet DOFs.
    """
    u0 = np.asarray(u0, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    if u0.shape != u1.shape or u0.ndim != 1:
        raise ContractError(f"u0 and u1 must be nodal vectors of one size, got {u0.shape} and {u1.shape}")
    if not tau > 0:
        raise ContractError(f"time step must be positive, got {tau}")
    released = 0
    if space is not None:
        if u0.shape != (space.n_dofs,):
            raise ContractError(f"u0 of size {len(u0)} does not match space with {space.n_dofs} DOFs")
        released = space.released
        if z0 is not None and space.dirichlet_dofs.size:
            gap = np.max(np.abs(u0[space.dirichlet_dofs] - np.asarray(z0)[space.dirichlet_dofs]))
            if gap > 1e-10:
                raise DataError(f"u0 differs from the Dirichlet datum z(0) by {gap:.3e}")
    return StepState(k=0, t=0.0, tau=tau, u_prev=u0 - tau * u1, u_curr=u0.copy(),
                     w_curr=np.array(w0, dtype=float), released=released)


def w_update(w_prev: np.ndarray, eu_curr: np.ndarray, beta: float, tau: float) -> np.ndarray:
    """Solve beta (w - w_prev) / tau + w = e u per quadrature point."""
    w_prev = np.asarray(w_prev, dtype=float)
    eu_curr = np.asarray(eu_curr, dtype=float)
    if w_prev.shape != eu_curr.shape:
        raise ContractError(f"w of shape {w_prev.shape} does not match strain of shape {eu_curr.shape}")
    if not (beta > 0 and tau > 0):
        raise ContractError("beta and tau must be positive")
    return (beta * w_prev + tau * eu_curr) / (beta + tau)


def inertia_load(state: StepState, operators, samples: DataSamples, k: int) -> np.ndarray:
    """Right-hand side terms shared by the coupled and the convolution scheme."""
    tau = samples.tau
    rhs = operators.mass @ ((2.0 * state.u_curr - state.u_prev) / tau ** 2 + samples.f[k])
    if samples.neumann is not None:
        rhs = rhs + samples.neumann[k]
    return rhs


def _check_nesting(state: StepState, space_k: DofSpace) -> None:
    if space_k.released < state.released:
        raise DomainError(f"tie release is not monotone: {space_k.released} released pairs "
                          f"after {state.released}")


def step(state: StepState, space_k: DofSpace, operators: StepSystem, samples: DataSamples,
         k: int) -> StepState:
    """
    Advance from step k-1 to step k.

    Args:
        state: state at k-1
        space_k: discrete space at k tau
        operators: StepSystem of the coupled scheme
        samples: data samples of the run
        k: step index, 1..n

    Returns:
        state at k
    """
    if state.k != k - 1:
        raise ContractError(f"state at step {state.k} cannot advance to step {k}")
    _check_nesting(state, space_k)
    full = operators.operators
    tau, beta = samples.tau, samples.beta
    c = beta / (beta + tau)

    memory = samples.F[k] - samples.h[k] + c * full.material.stress(state.w_curr, "B")
    rhs = inertia_load(state, full, samples, k) + full.geometry.strain_load(memory)
    u, conditioning = operators.solve(space_k, rhs, samples.z[k])
    w = w_update(state.w_curr, full.geometry.strain(u), beta, tau)
    return StepState(k=k, t=float(samples.times[k]), tau=tau, u_prev=state.u_curr,
                     u_curr=u, w_curr=w, released=space_k.released)


def run(problem, n: int, progress: bool = False) -> Trajectory:
    """
    Run the coupled scheme for n steps on [0, T].

    Args:
        problem: Problem built from a scenario
        n: number of steps (>= 2)
        progress: log a line every tenth of the run at INFO

    Returns:
        Trajectory with states k = 0..n
    """
    if int(n) < 2:
        raise ContractError(f"the scheme needs at least 2 steps, got {n}")
    n = int(n)
    space0 = problem.space(0.0)
    samples = sample_data(problem.mesh, space0, problem.material, problem.data, problem.w0, n, problem.T)
    tau, beta = samples.tau, problem.beta
    system = StepSystem(problem.operators, tau, beta / (beta + tau), problem.solver, problem.cg_rtol)

    state = init_state(problem.u0, problem.u1, problem.w0, tau, space=space0, z0=samples.z[0])
    states, spaces, conditioning = [state], [space0], [1.0]
    for k in range(1, n + 1):
        space = problem.space(samples.times[k])
        state = step(state, space, system, samples, k)
        states.append(state)
        spaces.append(space)
        conditioning.append(system.factor(space)[1].conditioning)
        if progress and k % max(1, n // 10) == 0:
            logger.info("step %d/%d  t=%.4g  released=%d", k, n, state.t, state.released)

    logger.info("Coupled run finished: n=%d, %d factorizations", n, len(system._factors))
    return Trajectory(states=states, tau=tau, n=n, problem=problem, samples=samples,
                      spaces=spaces, solver="coupled", conditioning=conditioning)


def interpolate(traj: Trajectory, t: float, kind: str = "pw_linear", field: str = "u") -> np.ndarray:
    """
    Interpolants of the knot values.

    pw_linear is the continuous piecewise-linear interpolant, right_const
    takes the value at the right end of ((k-1) tau, k tau], left_const the
    value at the left end of [(k-1) tau, k tau). All three agree at knots.
    field 'velocity' interpolates delta u^k (delta u^0 = u1).
    """
    if kind not in KINDS:
        raise ContractError(f"unknown interpolation kind '{kind}', expected one of {KINDS}")
    if field == "u":
        values = [s.u_curr for s in traj.states]
    elif field == "w":
        values = [s.w_curr for s in traj.states]
    elif field == "velocity":
        values = [s.velocity for s in traj.states]
    else:
        raise ContractError(f"unknown field '{field}', expected one of {FIELDS}")
    T = traj.T
    if t < -1e-12 * max(1.0, T) or t > T * (1 + 1e-12):
        raise DomainError(f"time {t} outside [0, {T}]")

    s = min(max(t / traj.tau, 0.0), float(traj.n))
    j = int(round(s))
    if abs(s - j) <= 1e-9 * max(1.0, s):
        return values[j].copy()
    k = int(np.ceil(s))
    theta = s - (k - 1)
    if kind == "right_const":
        return values[k].copy()
    if kind == "left_const":
        return values[k - 1].copy()
    return (1.0 - theta) * values[k - 1] + theta * values[k]


def incremental_functional(traj: Trajectory, k: int, u: np.ndarray, w: np.ndarray) -> float:
    """
    Value of the step-k incremental functional at (u, w):

        |u - 2u^{k-1} + u^{k-2}|^2 / (2 tau^2) + (A e u, e u)/2
        + (B(e u - w), e u - w)/2 + beta/(2 tau) (B(w - w^{k-1}), w - w^{k-1})
        - (f^k, u) - (F^k - h^k, e u) [- (N^k, u)]
    """
    if not 1 <= k <= traj.n:
        raise DomainError(f"step {k} outside 1..{traj.n}")
    ops = traj.problem.operators
    samples = traj.samples
    prev = traj.states[k - 1]
    tau, beta = samples.tau, samples.beta
    G = ops.geometry

    accel = u - 2.0 * prev.u_curr + prev.u_prev
    eu = G.strain(u)
    gap = eu - w
    dw = w - prev.w_curr
    value = (ops.mass.quad(accel) / (2.0 * tau ** 2)
             + 0.5 * ops.stiff_A.quad(u)
             + 0.5 * G.pairing(ops.material.stress(gap, "B"), gap)
             + beta / (2.0 * tau) * G.pairing(ops.material.stress(dw, "B"), dw)
             - float(samples.f[k] @ (ops.mass @ u))
             - G.pairing(samples.F[k] - samples.h[k], eu))
    if samples.neumann is not None:
        value -= float(samples.neumann[k] @ u)
    return value


def solve_coupled(state: StepState, space_k: DofSpace, operators, samples: DataSamples,
                  k: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve step k as the block system in (u, w) without eliminating w.

    Used as an independent check of the elimination; returns full u and w.
    """
    _check_nesting(state, space_k)
    tau, beta = samples.tau, samples.beta
    G = operators.geometry
    D_B = sp.csr_matrix(G.weight(operators.material.tensors("B")))
    A_uu = combine([(1.0 / tau ** 2, operators.mass), (1.0, operators.stiff_A),
                    (1.0, operators.stiff_B)]).matrix
    A_uw = -(G.operator.T @ D_B)
    A_ww = (1.0 + beta / tau) * D_B

    b_u = inertia_load(state, operators, samples, k) + G.strain_load(samples.F[k] - samples.h[k])
    b_w = (beta / tau) * (D_B @ state.w_curr.ravel())

    g = np.zeros(space_k.n_dofs)
    g[space_k.dirichlet_dofs] = samples.z[k][space_k.dirichlet_dofs]
    P = space_k.prolongation
    system = sp.bmat([[P.T @ A_uu @ P, P.T @ A_uw], [A_uw.T @ P, A_ww]], format="csc")
    rhs = np.concatenate([P.T @ (b_u - A_uu @ g), b_w - A_uw.T @ g])
    solution = spla.spsolve(system, rhs)
    m = P.shape[1]
    u = P @ solution[:m] + g
    return u, solution[m:].reshape(state.w_curr.shape)
