"""
Memory-Kernel Oracle
====================

The convolution form of the Maxwell law, kept independent of the coupled
stepper:

- ConvAccumulator integrates (1/beta) exp(-(t - s)/beta) g(s) exactly for a
  piecewise-linear input g,
- w_closed_form rebuilds w(t) = w0 exp(-t/beta) + (kernel * e u)(t) from a
  trajectory,
- conv_solve steps the memory equation directly with trapezoidal-exponential
  history weights (a different quadrature than the stepper's implicit
  Euler internal variable),
- past_history_to_w0 compresses a strain history on (-T_p, 0] into an
  initial internal variable.
"""

import logging
from dataclasses import asdict, dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

import config
from assembly import sample_data
from data_functions import Expression
from errors import ConfigurationError, ContractError, DataError, DomainError
from materials import MaterialField, strain_dim
from stepper import StepState, StepSystem, Trajectory, init_state, inertia_load

logger = logging.getLogger(__name__)


def exp_weights(h: float, beta: float) -> Tuple[float, float, float]:
    """
    (E, wa, wb) with E = exp(-h/beta) such that the kernel integral over one
    interval of a linear input from a to b is wa*a + wb*b.
    """
    r = h / beta
    decay = np.exp(-r)
    ratio = -np.expm1(-r) / r
    return decay, ratio - decay, 1.0 - ratio


@dataclass
class ConvAccumulator:
    """Running value of the exponential-kernel convolution of a piecewise-linear input."""
    beta: float
    value: np.ndarray
    t: float = 0.0
    last_input: Optional[np.ndarray] = None

    @classmethod
    def start(cls, beta: float, first_input: np.ndarray, t0: float = 0.0) -> "ConvAccumulator":
        first_input = np.asarray(first_input, dtype=float)
        return cls(beta=beta, value=np.zeros_like(first_input), t=t0, last_input=first_input)

    def advance(self, next_input: np.ndarray, t_next: float) -> np.ndarray:
        next_input = np.asarray(next_input, dtype=float)
        h = t_next - self.t
        if h < 0:
            raise DomainError(f"cannot accumulate backwards from {self.t} to {t_next}")
        if h > 0:
            decay, wa, wb = exp_weights(h, self.beta)
            self.value = decay * self.value + wa * self.last_input + wb * next_input
        self.t = t_next
        self.last_input = next_input
        return self.value


def _knot_strains(traj: Trajectory) -> np.ndarray:
    G = traj.problem.operators.geometry
    return np.stack([G.strain(s.u_curr) for s in traj.states])


def w_closed_form_knots(traj: Trajectory, w0: np.ndarray) -> np.ndarray:
    """w(t_k) for every knot, for the piecewise-linear interpolant of e u."""
    beta = traj.problem.beta
    strains = _knot_strains(traj)
    times = traj.times
    acc = ConvAccumulator.start(beta, strains[0], times[0])
    out = np.empty_like(strains)
    out[0] = w0
    for k in range(1, len(times)):
        out[k] = w0 * np.exp(-times[k] / beta) + acc.advance(strains[k], times[k])
    return out


def w_closed_form(traj: Trajectory, w0: np.ndarray, t: float) -> np.ndarray:
    """
    w(t) = w0 exp(-t/beta) + integral_0^t (1/beta) exp(-(t-s)/beta) e u(s) ds

    with e u replaced by its piecewise-linear interpolant in time, integrated
    exactly interval by interval.
    """
    T = traj.T
    if t < -1e-12 * max(1.0, T) or t > T * (1 + 1e-12):
        raise DomainError(f"time {t} outside [0, {T}]")
    t = min(max(t, 0.0), T)
    beta = traj.problem.beta
    G = traj.problem.operators.geometry
    states = traj.states
    acc = ConvAccumulator.start(beta, G.strain(states[0].u_curr))
    for state in states[1:]:
        if state.t <= t:
            acc.advance(G.strain(state.u_curr), state.t)
            continue
        theta = (t - acc.t) / (state.t - acc.t)
        partial = (1.0 - theta) * acc.last_input + theta * G.strain(state.u_curr)
        acc.advance(partial, t)
        break
    return np.asarray(w0) * np.exp(-t / beta) + acc.value


def conv_solve(problem, n: int) -> Trajectory:
    """
    Step the memory equation

        (u'', phi) + ((A + B) e u, e phi) - (C(t), e phi) = (f, phi) + (F, e phi),
        C(t) = integral_0^t (1/beta) exp(-(t-s)/beta) B e u(s) ds,

    with C^k = E C^{k-1} + tau/(2 beta) (E B e u^{k-1} + B e u^k), E = exp(-tau/beta).
    The fading initial-history terms h cancel between both sides. w is
    rebuilt afterwards with the closed form.
    """
    if int(n) < 2:
        raise ContractError(f"the scheme needs at least 2 steps, got {n}")
    n = int(n)
    space0 = problem.space(0.0)
    samples = sample_data(problem.mesh, space0, problem.material, problem.data, problem.w0, n, problem.T)
    tau, beta = samples.tau, problem.beta
    ops = problem.operators
    G, material = ops.geometry, ops.material
    decay = np.exp(-tau / beta)
    half = tau / (2.0 * beta)
    if half >= 1.0:
        logger.warning("tau = %.3g >= 2 beta: convolution system may lose definiteness", tau)
    system = StepSystem(ops, tau, 1.0 - half, problem.solver, problem.cg_rtol)

    state = init_state(problem.u0, problem.u1, problem.w0, tau, space=space0, z0=samples.z[0])
    history = np.zeros_like(problem.w0)
    Beu_prev = material.stress(G.strain(state.u_curr), "B")
    states, spaces = [state], [space0]
    for k in range(1, n + 1):
        space = problem.space(samples.times[k])
        if space.released < state.released:
            raise DomainError("tie release is not monotone")
        lagged = decay * history + half * decay * Beu_prev
        rhs = inertia_load(state, ops, samples, k) + G.strain_load(samples.F[k] + lagged)
        u, _ = system.solve(space, rhs, samples.z[k])
        Beu = material.stress(G.strain(u), "B")
        history = lagged + half * Beu
        Beu_prev = Beu
        state = StepState(k=k, t=float(samples.times[k]), tau=tau, u_prev=state.u_curr, u_curr=u,
                          w_curr=problem.w0, released=space.released)
        states.append(state)
        spaces.append(space)

    traj = Trajectory(states=states, tau=tau, n=n, problem=problem, samples=samples,
                      spaces=spaces, solver="convolution")
    w = w_closed_form_knots(traj, problem.w0)
    traj.states = [replace(s, w_curr=w[s.k]) for s in states]
    logger.info("Convolution run finished: n=%d", n)
    return traj


@dataclass
class EquivalenceReport:
    """Coupled w against the closed-form reconstruction."""
    n: int
    w_error: float
    w_scale: float
    residual: float
    residual_scale: float
    refined_n: Optional[int] = None
    refined_w_error: Optional[float] = None
    ratio: Optional[float] = None

    @property
    def relative_error(self) -> float:
        return self.w_error / self.w_scale if self.w_scale > 0 else 0.0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["relative_error"] = self.relative_error
        return out


def _equivalence_errors(traj: Trajectory, w0: np.ndarray) -> Tuple[float, float, float, float]:
    ops = traj.problem.operators
    G, material = ops.geometry, ops.material
    samples = traj.samples
    tau = samples.tau
    w_cf = w_closed_form_knots(traj, w0)

    def norm(X):
        return float(np.sqrt(max(G.pairing(X, X), 0.0)))

    w_error = max(norm(s.w_curr - w_cf[s.k]) for s in traj.states)
    w_scale = max(norm(s.w_curr) for s in traj.states)

    stiffness = ops.stiff_A.matrix + ops.stiff_B.matrix
    residual, scale = 0.0, 0.0
    for k in range(1, traj.n + 1):
        state, prev = traj.states[k], traj.states[k - 1]
        accel = (state.velocity - prev.velocity) / tau
        P = traj.spaces[k].prolongation
        inertia = ops.mass @ (accel - samples.f[k])
        elastic = stiffness @ state.u_curr
        memory = G.strain_load(material.stress(w_cf[k], "B") + samples.F[k] - samples.h[k])
        r = inertia + elastic - memory
        if samples.neumann is not None:
            r = r - samples.neumann[k]
        residual = max(residual, float(np.linalg.norm(P.T @ r)))
        scale = max(scale, float(np.linalg.norm(P.T @ elastic)), float(np.linalg.norm(P.T @ inertia)))
    return w_error, w_scale, residual, scale


def equivalence_check(coupled: Trajectory, w0: np.ndarray,
                      refined: Optional[Trajectory] = None) -> EquivalenceReport:
    """
    Compare the coupled scheme's w^k with the closed-form w on the same u.

    Reports the max-knot L2 error, the weak-form residual of the memory
    equation evaluated with the reconstructed convolution (free DOFs), and,
    when a refined run is given, the error ratio between n and its refinement.
    """
    w_error, w_scale, residual, scale = _equivalence_errors(coupled, w0)
    report = EquivalenceReport(n=coupled.n, w_error=w_error, w_scale=w_scale,
                               residual=residual, residual_scale=scale)
    if refined is not None:
        fine_error = _equivalence_errors(refined, w0)[0]
        report.refined_n = refined.n
        report.refined_w_error = fine_error
        report.ratio = w_error / fine_error if fine_error > 0 else None
    logger.info("Equivalence: max |w - w_cf| = %.3e (relative %.3e)", w_error, report.relative_error)
    return report


# ==================== PAST HISTORY ====================

@dataclass(frozen=True, eq=False)
class PastHistory:
    """Strain history e u_p sampled on (-T_p, 0]."""
    times: np.ndarray
    strains: np.ndarray
    beta: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise DataError("a past history needs at least two samples")
        if np.any(np.diff(times) <= 0):
            raise DataError("past history times must be strictly increasing")
        if abs(times[-1]) > 1e-12 * max(1.0, abs(times[0])):
            raise DataError(f"past history must end at t = 0, ends at {times[-1]}")
        if len(self.strains) != len(times):
            raise DataError("one strain field per history sample is required")

    @property
    def weight(self) -> float:
        """Trapezoid value of integral exp(t/beta) |e u_p(t)| dt."""
        norms = np.sqrt(np.sum(np.asarray(self.strains) ** 2, axis=tuple(range(1, np.ndim(self.strains)))))
        return float(trapezoid(np.exp(np.asarray(self.times) / self.beta) * norms, self.times))


def past_history_to_w0(hist: PastHistory, materials: MaterialField) -> Tuple[np.ndarray, Callable]:
    """
    w0 = (1/beta) integral_{-T_p}^0 exp(s/beta) e u_p(s) ds for the
    piecewise-linear history (zero before the window), and the closure
    F0(t) = exp(-t/beta) B w0.
    """
    beta = materials.beta
    if not np.isfinite(hist.weight):
        raise DataError("past history weight integral is not finite")
    acc = ConvAccumulator.start(beta, hist.strains[0], float(hist.times[0]))
    for t, strain in zip(hist.times[1:], hist.strains[1:]):
        acc.advance(strain, float(t))
    w0 = np.array(acc.value)
    Bw0 = materials.stress(w0, "B") if w0.ndim == 2 and len(w0) == materials.n_elements else None

    def F0(t: float) -> np.ndarray:
        if Bw0 is None:
            raise ContractError("F0 needs a history sized to the material field")
        return np.exp(-t / beta) * Bw0

    logger.info("Past history reduced: %d samples on [%.4g, 0], weight %.4g",
                len(hist.times), hist.times[0], hist.weight)
    return w0, F0


def _uniform_history(times: np.ndarray, values: np.ndarray, n_elements: int, mode: str,
                     beta: float) -> PastHistory:
    scale = np.array([1.0, 1.0, np.sqrt(2.0)]) if mode == "planar" else np.ones(2)
    strains = np.repeat((values * scale)[:, None, :], n_elements, axis=1)
    return PastHistory(times=times, strains=strains, beta=beta)


def load_past_history(path: str, n_elements: int, mode: str, beta: float,
                      window: Optional[float] = None) -> PastHistory:
    """
    Read a spatially uniform past history CSV (`t, g1, g2[, g3]`, t <= 0).

    Rows before -window*beta are dropped (window defaults to
    VISCOFRAC_HISTORY_WINDOW).
    """
    d = strain_dim(mode)
    window = config.HISTORY_WINDOW if window is None else window
    try:
        table = pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigurationError(f"cannot read past history {path}: {e}", key="data.past_history") from None
    if table.shape[1] != 1 + d:
        raise ConfigurationError(f"past history needs {1 + d} columns, found {table.shape[1]}",
                                 key="data.past_history")
    data = table.to_numpy(dtype=float)
    if np.any(data[:, 0] > 1e-12):
        raise DataError("past history times must be <= 0")
    kept = data[data[:, 0] >= -window * beta - 1e-12]
    if len(kept) < len(data):
        logger.info("Past history truncated to the window [%.4g, 0]", -window * beta)
    return _uniform_history(kept[:, 0], kept[:, 1:], n_elements, mode, beta)


def history_from_config(data_cfg, mode: str, n_elements: int, beta: float) -> Optional[PastHistory]:
    """PastHistory described by a scenario's data section, if any."""
    window = data_cfg.history_window if data_cfg.history_window is not None else config.HISTORY_WINDOW
    if data_cfg.past_history:
        return load_past_history(data_cfg.past_history, n_elements, mode, beta, window)
    if data_cfg.past_strain is None:
        return None
    d = strain_dim(mode)
    entries = list(data_cfg.past_strain)
    if len(entries) != d:
        raise ConfigurationError(f"past_strain needs {d} components", key="data.past_strain")
    times = np.linspace(-window * beta, 0.0, int(data_cfg.history_samples))
    values = np.column_stack([Expression(e, "past_strain")(times, np.zeros_like(times), np.zeros_like(times))
                              for e in entries])
    return _uniform_history(times, values, n_elements, mode, beta)
