"""
Energy Ledger
=============

Mechanical energy, dissipation and total work of a trajectory, with

- the exact per-step discrete energy balance (the primary certificate of a
  run: it holds up to linear-solver roundoff),
- the cumulative discrete energy-dissipation inequality,
- the continuous-style inequality E(t) + D(t) <= E(0) + W_tot(t) with the
  time integrals of W_tot taken by the composite trapezoid rule,
- the u-only rewriting of energy and dissipation (w0 = 0),
- the initial-condition attainment report and the a-priori bound monitors.

Velocities at knots are the right difference quotients delta u^k, with
delta u^0 = u1.
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

import config
from errors import DomainError, InequalityViolation, PreconditionError
from mesh import v_norm
from stepper import StepState, Trajectory

logger = logging.getLogger(__name__)

LEDGER_COLUMNS = [
    "k", "t", "kinetic", "elastic", "coupling", "energy", "dissipation", "total_work",
    "balance_residual", "balance_scale", "discrete_slack", "inequality_slack",
]


def _check_k(traj: Trajectory, k: int, lowest: int = 0) -> None:
    if not lowest <= k <= traj.n:
        raise DomainError(f"step {k} outside {lowest}..{traj.n}")


def _a_form(ops, u: np.ndarray, w: np.ndarray, phi: np.ndarray, psi: np.ndarray) -> float:
    """a((u, w), (phi, psi)) = (A e u, e phi) + (B(e u - w), e phi - psi)."""
    G = ops.geometry
    gap = G.strain(u) - w
    gap_test = G.strain(phi) - psi
    return ops.stiff_A.bilinear(u, phi) + G.pairing(ops.material.stress(gap, "B"), gap_test)


def mech_energy(state: StepState, operators) -> Tuple[float, float, float]:
    """(kinetic, elastic, coupling) = (|du|^2/2, (A e u, e u)/2, (B(e u - w), e u - w)/2)."""
    G = operators.geometry
    gap = G.strain(state.u_curr) - state.w_curr
    return (0.5 * operators.mass.quad(state.velocity),
            0.5 * operators.stiff_A.quad(state.u_curr),
            0.5 * G.pairing(operators.material.stress(gap, "B"), gap))


def _dissipation_increments(traj: Trajectory) -> np.ndarray:
    ops = traj.problem.operators
    G = ops.geometry
    tau, beta = traj.tau, traj.problem.beta
    out = np.zeros(traj.n + 1)
    for k in range(1, traj.n + 1):
        dw = (traj.states[k].w_curr - traj.states[k - 1].w_curr) / tau
        out[k] = tau * beta * G.pairing(ops.material.stress(dw, "B"), dw)
    return out


def dissipation(traj: Trajectory, up_to_k: int) -> float:
    """sum_{j <= k} tau beta (B delta w^j, delta w^j) = beta * integral (B w', w') of the pw-linear w."""
    _check_k(traj, up_to_k)
    return float(np.sum(_dissipation_increments(traj)[: up_to_k + 1]))


def balance_terms(traj: Trajectory, k: int) -> Dict[str, float]:
    """
    Terms of the exact step-k identity

        |du^k|^2/2 - |du^{k-1}|^2/2 + tau^2/2 |dd u^k|^2
        + a(om^k, om^k)/2 - a(om^{k-1}, om^{k-1})/2 + tau^2/2 a(d om^k, d om^k)
        + tau beta (B dw^k, dw^k) - tau W^k = 0

    obtained by testing the step equations with (du^k - dz^k, dw^k).
    """
    _check_k(traj, k, lowest=1)
    ops = traj.problem.operators
    samples = traj.samples
    G = ops.geometry
    tau, beta = traj.tau, traj.problem.beta
    cur, prev = traj.states[k], traj.states[k - 1]

    du, du_prev = cur.velocity, prev.velocity
    ddu = (du - du_prev) / tau
    dw = (cur.w_curr - prev.w_curr) / tau
    dz = samples.dz[k]
    zero_w = np.zeros_like(dw)
    test = du - dz

    work = (float(samples.f[k] @ (ops.mass @ test))
            + G.pairing(samples.F[k] - samples.h[k], G.strain(test))
            + ops.mass.bilinear(ddu, dz)
            + _a_form(ops, cur.u_curr, cur.w_curr, dz, zero_w))
    if samples.neumann is not None:
        work += float(samples.neumann[k] @ test)

    terms = {
        "kinetic": 0.5 * ops.mass.quad(du) - 0.5 * ops.mass.quad(du_prev),
        "kinetic_jump": 0.5 * tau ** 2 * ops.mass.quad(ddu),
        "stored": 0.5 * _a_form(ops, cur.u_curr, cur.w_curr, cur.u_curr, cur.w_curr)
                  - 0.5 * _a_form(ops, prev.u_curr, prev.w_curr, prev.u_curr, prev.w_curr),
        "stored_jump": 0.5 * tau ** 2 * _a_form(ops, du, dw, du, dw),
        "dissipation": tau * beta * G.pairing(ops.material.stress(dw, "B"), dw),
        "work": tau * work,
    }
    terms["residual"] = (terms["kinetic"] + terms["kinetic_jump"] + terms["stored"]
                         + terms["stored_jump"] + terms["dissipation"] - terms["work"])
    terms["scale"] = 1.0 + max(abs(v) for v in terms.values())
    return terms


def discrete_balance(traj: Trajectory, samples=None, k: int = 1) -> float:
    """Residual of the exact discrete energy identity at step k."""
    return balance_terms(traj, k)["residual"]


def total_work_series(traj: Trajectory) -> np.ndarray:
    """W_tot at every knot, integrals by the composite trapezoid rule."""
    ops = traj.problem.operators
    samples = traj.samples
    G, material, M = ops.geometry, ops.material, ops.mass
    beta = traj.problem.beta
    times = traj.times
    w0 = traj.states[0].w_curr
    Bw0 = material.stress(w0, "B")
    stiff_AB = ops.stiff_A.matrix + ops.stiff_B.matrix

    integrand = np.zeros(traj.n + 1)
    point = np.zeros(traj.n + 1)
    for k, state in enumerate(traj.states):
        v = state.velocity
        eu = G.strain(state.u_curr)
        ez = G.strain(samples.z[k])
        ez_dot = G.strain(samples.z_dot[k])
        decay = np.exp(-times[k] / beta)
        g = (float(samples.f_pt[k] @ (M @ (v - samples.z_dot[k])))
             - G.pairing(samples.F_dot[k], eu - ez)
             + float(samples.z_dot[k] @ (stiff_AB @ state.u_curr))
             - G.pairing(material.stress(state.w_curr, "B"), ez_dot)
             - M.bilinear(v, samples.z_ddot[k])
             + decay * G.pairing(Bw0, ez_dot)
             - decay / beta * G.pairing(Bw0, eu))
        if samples.neumann is not None:
            g += float(samples.neumann[k] @ (v - samples.z_dot[k]))
        integrand[k] = g
        point[k] = (M.bilinear(v, samples.z_dot[k])
                    + G.pairing(samples.F[k], eu - ez)
                    - decay * G.pairing(Bw0, eu))

    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (integrand[1:] + integrand[:-1]))])
    return cumulative + point - point[0]


def total_work(traj: Trajectory, samples=None, k: Optional[int] = None) -> float:
    """W_tot at knot k (default: final time)."""
    k = traj.n if k is None else k
    _check_k(traj, k)
    return float(total_work_series(traj)[k])


def energy_series(traj: Trajectory) -> np.ndarray:
    """(n+1, 3) array of (kinetic, elastic, coupling) per knot."""
    ops = traj.problem.operators
    return np.array([mech_energy(s, ops) for s in traj.states])


def check_inequality(traj: Trajectory, samples=None) -> np.ndarray:
    """slack(t_k) = E(0) + W_tot(t_k) - E(t_k) - D(t_k) at every knot."""
    energy = energy_series(traj).sum(axis=1)
    diss = np.cumsum(_dissipation_increments(traj))
    return energy[0] + total_work_series(traj) - energy - diss


def inequality_tolerance(tau: float, slack_tol: Optional[float] = None,
                         tau_factor: Optional[float] = None) -> float:
    """tol(tau) = SLACK_TOL + C_quad * tau."""
    slack_tol = config.SLACK_TOL if slack_tol is None else slack_tol
    tau_factor = config.SLACK_TAU_FACTOR if tau_factor is None else tau_factor
    return slack_tol + tau_factor * tau


def assert_inequality(slack: np.ndarray, tau: float, slack_tol: Optional[float] = None,
                      tau_factor: Optional[float] = None) -> None:
    tol = inequality_tolerance(tau, slack_tol, tau_factor)
    worst = int(np.argmin(slack))
    if slack[worst] < -tol:
        raise InequalityViolation(f"energy-dissipation inequality violated at knot {worst}: "
                                  f"slack {slack[worst]:.3e} < -{tol:.3e}")


def build_ledger(traj: Trajectory) -> pd.DataFrame:
    """One row per knot, columns in LEDGER_COLUMNS order."""
    energies = energy_series(traj)
    diss = np.cumsum(_dissipation_increments(traj))
    work = total_work_series(traj)
    total = energies.sum(axis=1)

    residual = np.zeros(traj.n + 1)
    scale = np.ones(traj.n + 1)
    jumps = np.zeros(traj.n + 1)
    for k in range(1, traj.n + 1):
        terms = balance_terms(traj, k)
        residual[k] = terms["residual"]
        scale[k] = terms["scale"]
        jumps[k] = terms["kinetic_jump"] + terms["stored_jump"]
    # RHS - LHS of the cumulative discrete inequality; equals the dropped tau^2 terms
    discrete_slack = np.cumsum(jumps) - np.cumsum(residual)

    ledger = pd.DataFrame({
        "k": np.arange(traj.n + 1),
        "t": traj.times,
        "kinetic": energies[:, 0],
        "elastic": energies[:, 1],
        "coupling": energies[:, 2],
        "energy": total,
        "dissipation": diss,
        "total_work": work,
        "balance_residual": residual,
        "balance_scale": scale,
        "discrete_slack": discrete_slack,
        "inequality_slack": total[0] + work - total - diss,
    })
    return ledger[LEDGER_COLUMNS]


# ==================== U-ONLY FORM ====================

def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    h = np.diff(times)
    w = np.zeros(len(times))
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def u_only_energies(traj: Trajectory, t: float) -> Tuple[float, float]:
    """
    Energy and dissipation written through u alone (requires w0 = 0):

        E(t) = |u'|^2/2 + ((A+B) e u, e u)/2 - int_0^t k(t-s) (B e u(s), e u(t)) ds
               + 1/(2 beta^2) int int exp(-(2t-r-s)/beta) (B e u(r), e u(s))
        D(t) = 1/beta int (B e u, e u) - 1/beta^2 int_0^t int_0^s exp(-(s-r)/beta) (B e u(r), e u(s))
               - 1/(2 beta^2) int int exp(-(2t-r-s)/beta) (B e u(r), e u(s))

    with k(s) = exp(-s/beta)/beta; all integrals by tensorized trapezoid on
    the knots up to t (t must be a knot).
    """
    G = traj.problem.operators.geometry
    material = traj.problem.operators.material
    if np.any(traj.states[0].w_curr):
        raise PreconditionError("the u-only form requires w0 = 0")
    k = int(round(t / traj.tau))
    if abs(k * traj.tau - t) > 1e-9 * max(1.0, t) or not 0 <= k <= traj.n:
        raise DomainError(f"time {t} is not a knot of the trajectory")
    if k > config.UONLY_MAX_STEPS:
        raise PreconditionError(f"u-only double integrals are capped at {config.UONLY_MAX_STEPS} steps")

    beta = traj.problem.beta
    times = traj.times[: k + 1]
    strains = np.stack([G.strain(s.u_curr) for s in traj.states[: k + 1]])
    weighted = np.stack([G.areas[:, None] * material.stress(e, "B") for e in strains])
    gram = weighted.reshape(k + 1, -1) @ strains.reshape(k + 1, -1).T  # (B e u_j, e u_l)

    state = traj.states[k]
    kinetic = 0.5 * traj.problem.operators.mass.quad(state.velocity)
    stored = 0.5 * traj.problem.operators.stiff_A.quad(state.u_curr) + 0.5 * gram[k, k]
    if k == 0:
        return kinetic + stored, 0.0

    omega = _trapezoid_weights(times)
    fade = omega * np.exp(-(times[k] - times) / beta)
    memory = float(fade @ gram[:, k]) / beta
    double = float(fade @ gram @ fade) / (2.0 * beta ** 2)

    # inner trapezoid weights on [0, t_l] for every l, kernel exp(-(t_l - t_j)/beta)
    inner = np.zeros((k + 1, k + 1))
    for l in range(1, k + 1):
        inner[:l + 1, l] = _trapezoid_weights(times[:l + 1]) * np.exp(-(times[l] - times[:l + 1]) / beta)
    triangle = float(np.sum(omega[None, :] * inner * gram))

    energy = kinetic + stored - memory + double
    diss = float(omega @ np.diag(gram)) / beta - triangle / beta ** 2 - double
    return energy, diss


# ==================== DIAGNOSTICS ====================

def initial_attainment(traj: Trajectory) -> Dict[str, float]:
    """
    Distances of the first step from the initial data:
    |u^1 - u0|_V, |delta u^1 - u1|_H and |w^1 - w0|, with the exact value
    tau/(beta+tau) |e u^1 - w0| of the last one and the e u0 based estimate.
    """
    ops = traj.problem.operators
    G = ops.geometry
    tau, beta = traj.tau, traj.problem.beta
    s0, s1 = traj.states[0], traj.states[1]
    u1 = s0.velocity

    def strain_norm(X):
        return float(np.sqrt(max(G.pairing(X, X), 0.0)))

    factor = tau / (beta + tau)
    return {
        "n": traj.n,
        "tau": tau,
        "u_distance_V": v_norm(traj.spaces[0], s1.u_curr - s0.u_curr),
        "velocity_distance_H": float(np.sqrt(max(ops.mass.quad(s1.velocity - u1), 0.0))),
        "w_distance": strain_norm(s1.w_curr - s0.w_curr),
        "w_identity": factor * strain_norm(G.strain(s1.u_curr) - s0.w_curr),
        "w_estimate_eu0": factor * strain_norm(G.strain(s0.u_curr) - s0.w_curr),
    }


def estimate_bounds(traj: Trajectory) -> Dict[str, float]:
    """max |delta u^k|, max |e u^k|, max |w^k| and sum tau |delta w^k|^2."""
    ops = traj.problem.operators
    G = ops.geometry
    tau = traj.tau

    def strain_norm(X):
        return float(np.sqrt(max(G.pairing(X, X), 0.0)))

    dw = [(traj.states[k].w_curr - traj.states[k - 1].w_curr) / tau for k in range(1, traj.n + 1)]
    return {
        "max_velocity": max(float(np.sqrt(max(ops.mass.quad(s.velocity), 0.0))) for s in traj.states),
        "max_strain": max(strain_norm(G.strain(s.u_curr)) for s in traj.states),
        "max_w": max(strain_norm(s.w_curr) for s in traj.states),
        "dw_square_sum": float(sum(tau * strain_norm(x) ** 2 for x in dw)),
    }
