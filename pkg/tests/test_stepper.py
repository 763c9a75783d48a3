"""
Tests for the incremental stepper: the eliminated scheme, its minimality
and the interpolants of a trajectory.
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import ContractError, DataError, DomainError
from problem import build_problem
from scenarios import ScenarioLoader
from scenarios.cracked import mid_line
from stepper import incremental_functional, init_state, interpolate, run, solve_coupled, w_update


def scenario_problem(name, params=None):
    return build_problem(ScenarioLoader().get_scenario(name, params).config())


@pytest.fixture(scope="module")
def static_traj():
    return run(scenario_problem("static", {"geometry": {"nx": 4, "ny": 4},
                                           "crack": {"points": [[0.0, 0.5], [0.25, 0.5], [0.5, 0.5]]}}), 8)


@pytest.fixture(scope="module")
def cracked_traj():
    params = {"geometry": {"nx": 4, "ny": 4}, "crack": {"points": mid_line(4)}}
    return run(scenario_problem("cracked_plate", params), 8)


class TestUpdates:
    def test_w_update_solves_backward_euler(self):
        w_prev = np.array([[1.0, 2.0]])
        eu = np.array([[3.0, -1.0]])
        w = w_update(w_prev, eu, beta=2.0, tau=0.5)
        assert np.allclose(2.0 * (w - w_prev) / 0.5 + w, eu)

    def test_w_update_contract(self):
        with pytest.raises(ContractError):
            w_update(np.zeros((2, 2)), np.zeros((3, 2)), 1.0, 0.1)
        with pytest.raises(ContractError):
            w_update(np.zeros((2, 2)), np.zeros((2, 2)), 0.0, 0.1)

    def test_initial_state(self):
        state = init_state(np.array([1.0, 2.0]), np.array([1.0, 1.0]), np.zeros((1, 2)), 0.5)
        assert np.allclose(state.u_prev, [0.5, 1.5])
        assert np.allclose(state.velocity, [1.0, 1.0])

    def test_initial_state_must_match_dirichlet_datum(self):
        problem = scenario_problem("zero")
        space = problem.space(0.0)
        with pytest.raises(DataError):
            init_state(np.zeros(space.n_dofs), np.zeros(space.n_dofs), problem.w0, 0.1,
                       space=space, z0=np.ones(space.n_dofs))


class TestRun:
    def test_zero_data_stays_zero(self):
        traj = run(scenario_problem("zero"), 8)
        assert traj.n == 8
        assert traj.T == pytest.approx(1.0)
        assert not np.any(traj.u)
        assert not np.any(traj.w)

    def test_needs_two_steps(self):
        with pytest.raises(ContractError):
            run(scenario_problem("zero"), 1)

    def test_release_is_monotone_and_admissible(self, cracked_traj):
        released = [space.released for space in cracked_traj.spaces]
        assert released == sorted(released)
        assert released[0] == 0 and released[-1] > 0
        for state, space in zip(cracked_traj.states, cracked_traj.spaces):
            assert space.is_admissible(state.u_curr, atol=1e-12)

    def test_elimination_matches_block_solve(self, cracked_traj):
        ops = cracked_traj.problem.operators
        for k in (1, 5):
            u, w = solve_coupled(cracked_traj.states[k - 1], cracked_traj.spaces[k], ops,
                                 cracked_traj.samples, k)
            assert np.allclose(u, cracked_traj.states[k].u_curr, atol=1e-10)
            assert np.allclose(w, cracked_traj.states[k].w_curr, atol=1e-10)

    def test_step_minimizes_incremental_functional(self, static_traj):
        rng = np.random.default_rng(7)
        for k in (1, 4, 8):
            state, space = static_traj.states[k], static_traj.spaces[k]
            best = incremental_functional(static_traj, k, state.u_curr, state.w_curr)
            for _ in range(10):
                du = 1e-3 * space.embed(rng.standard_normal(space.dimension))
                dw = 1e-3 * rng.standard_normal(state.w_curr.shape)
                assert incremental_functional(static_traj, k, state.u_curr + du, state.w_curr + dw) > best

    def test_single_dof_step_minimizes_incremental_functional(self):
        traj = run(scenario_problem("single_dof"), 64)
        rng = np.random.default_rng(11)
        for k in (1, 32, 64):
            state, space = traj.states[k], traj.spaces[k]
            assert space.dimension == 1
            best = incremental_functional(traj, k, state.u_curr, state.w_curr)
            for sign in (1.0, -1.0):
                du = sign * 1e-3 * space.embed(np.ones(1))
                dw = 1e-3 * rng.standard_normal(state.w_curr.shape)
                assert incremental_functional(traj, k, state.u_curr + du, state.w_curr) > best
                assert incremental_functional(traj, k, state.u_curr + du, state.w_curr + dw) > best

    def test_functional_step_range(self, static_traj):
        state = static_traj.states[0]
        with pytest.raises(DomainError):
            incremental_functional(static_traj, 0, state.u_curr, state.w_curr)


class TestInterpolate:
    def test_knots(self, static_traj):
        t = 3 * static_traj.tau
        for kind in ("pw_linear", "right_const", "left_const"):
            assert np.array_equal(interpolate(static_traj, t, kind), static_traj.states[3].u_curr)

    def test_between_knots(self, static_traj):
        tau = static_traj.tau
        u2, u3 = static_traj.states[2].u_curr, static_traj.states[3].u_curr
        t = 2.5 * tau
        assert np.allclose(interpolate(static_traj, t), 0.5 * (u2 + u3))
        assert np.array_equal(interpolate(static_traj, t, "right_const"), u3)
        assert np.array_equal(interpolate(static_traj, t, "left_const"), u2)
        assert np.allclose(interpolate(static_traj, t, field="velocity"),
                           0.5 * (static_traj.states[2].velocity + static_traj.states[3].velocity))

    def test_errors(self, static_traj):
        with pytest.raises(DomainError):
            interpolate(static_traj, 1.5)
        with pytest.raises(ContractError):
            interpolate(static_traj, 0.5, kind="cubic")
        with pytest.raises(ContractError):
            interpolate(static_traj, 0.5, field="stress")
