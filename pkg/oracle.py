"""
Zero-Dimensional Oracle
=======================

Dense reference solution of the scalar Maxwell model

    u' = v,  v' = f(t) - a u - b (u - w),  beta w' = u - w

by classical fourth-order Runge-Kutta. Shares no code with the FEM solvers;
the 1-DOF scenario is compared against it.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

import config
from errors import ContractError

logger = logging.getLogger(__name__)

Forcing = Union[float, Callable[[float], float]]


@dataclass(eq=False)
class OracleTrajectory:
    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def at(self, t) -> np.ndarray:
        """u interpolated at t (the grid is fine enough for linear interpolation)."""
        return np.interp(t, self.times, self.u)

    def w_at(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.w)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "u": self.u, "v": self.v, "w": self.w})


def zero_dim_oracle(a: float, b: float, beta: float, f: Forcing, u0: float, u1: float,
                    w0: float, T: float, step: Optional[float] = None) -> OracleTrajectory:
    """
    Integrate the scalar model on [0, T].

    Args:
        a, b: elastic and viscous stiffness
        beta: relaxation time (> 0)
        f: constant or callable forcing f(t)
        u0, u1, w0: initial displacement, velocity and internal variable
        T: horizon (> 0)
        step: RK4 step relative to T (defaults to VISCOFRAC_ORACLE_STEP)

    Returns:
        OracleTrajectory on the uniform RK4 grid
    """
    if not T > 0:
        raise ContractError(f"oracle horizon must be positive, got {T}")
    if not beta > 0:
        raise ContractError(f"beta must be positive, got {beta}")
    force = f if callable(f) else (lambda t, c=float(f): c)
    m = int(math.ceil(1.0 / (step or config.ORACLE_STEP)))
    h = T / m

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        u, v, w = y
        return np.array([v, force(t) - a * u - b * (u - w), (u - w) / beta])

    out = np.empty((m + 1, 3))
    y = np.array([u0, u1, w0], dtype=float)
    out[0] = y
    for i in range(m):
        t = i * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = y

    logger.debug("RK4 oracle: %d steps of %.3g", m, h)
    return OracleTrajectory(times=np.linspace(0.0, T, m + 1), u=out[:, 0], v=out[:, 1], w=out[:, 2])
