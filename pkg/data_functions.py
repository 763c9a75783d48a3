"""
Scenario Data Functions
=======================

Data in scenario files are either closed-form expressions in (t, x, y) or
tabulated time series multiplied by a spatial profile.

Expressions are parsed with sympy (`^` is accepted as power, `pi` and the
usual elementary functions are available) and compiled to numpy callables;
time derivatives are taken symbolically. Tabulated series are linearly
interpolated CSV tables with columns `t, value`.
"""

import logging
from tokenize import TokenError
from typing import Any, Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from errors import ConfigurationError, SamplingError

logger = logging.getLogger(__name__)

T, X, Y = sympy.symbols("t x y", real=True)
_LOCALS = {"t": T, "x": X, "y": Y, "pi": sympy.pi, "e": sympy.E}
_TRANSFORMS = standard_transformations + (convert_xor,)

# 4-point Gauss-Legendre rule on [-1, 1]
GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(4)


def _parse(source: Union[str, float, int], name: str = "expression") -> sympy.Expr:
    if isinstance(source, (int, float, np.floating, np.integer)) and not isinstance(source, bool):
        return sympy.Float(float(source)) if float(source) != 0 else sympy.Integer(0)
    if not isinstance(source, str):
        raise ConfigurationError(f"expected an expression string or number, got {type(source).__name__}", key=name)
    try:
        expr = parse_expr(source, local_dict=_LOCALS, transformations=_TRANSFORMS)
    except (SyntaxError, TokenError, TypeError, ValueError, sympy.SympifyError) as e:
        raise ConfigurationError(f"cannot parse '{source}': {e}", key=name) from None
    unknown = {str(s) for s in expr.free_symbols} - {"t", "x", "y"}
    if unknown:
        raise ConfigurationError(f"unknown symbols {sorted(unknown)} in '{source}'", key=name)
    return expr


def compile_expression(source: Union[str, float], space: bool = True,
                       name: str = "expression") -> Callable:
    """Compile an expression or predicate to a numpy callable f(t, x, y)."""
    expr = _parse(source, name)
    fn = sympy.lambdify((T, X, Y), expr, modules="numpy")

    def evaluate(t, x=0.0, y=0.0):
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape if space else np.shape(t)
        return np.broadcast_to(fn(t, x, y), shape).copy()

    evaluate.expr = expr
    return evaluate


class Expression:
    """Closed-form scalar data in (t, x, y)."""

    def __init__(self, source: Union[str, float, sympy.Expr], name: str = "expression"):
        self.name = name
        self.expr = source if isinstance(source, sympy.Basic) else _parse(source, name)
        self._fn = sympy.lambdify((T, X, Y), self.expr, modules="numpy")

    def __repr__(self):
        return f"Expression({self.expr})"

    @property
    def is_zero(self) -> bool:
        return self.expr == 0

    def __call__(self, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.broadcast_to(np.asarray(self._fn(t, x, y), dtype=float), shape).copy()

    def diff_t(self) -> "Expression":
        return Expression(sympy.diff(self.expr, T), self.name)

    def check_resolution(self, tau: float) -> None:
        pass


def read_series(path: str) -> pd.DataFrame:
    """Read a `t, value` CSV table sorted by strictly increasing t."""
    try:
        table = pd.read_csv(path, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigurationError(f"cannot read series {path}: {e}", key="data") from None
    table.columns = [str(c).strip() for c in table.columns]
    if list(table.columns[:2]) != ["t", "value"]:
        raise ConfigurationError(f"series {path} needs columns 't, value'", key="data")
    if len(table) < 2 or np.any(np.diff(table["t"].to_numpy(float)) <= 0):
        raise ConfigurationError(f"series {path} needs at least two strictly increasing times", key="data")
    return table


class TabulatedSeries:
    """amplitude(t) * profile(x, y), amplitude linearly interpolated from a table."""

    def __init__(self, times: Sequence[float], values: Sequence[float],
                 profile: Union[str, float, Expression] = 1.0, slope: bool = False, name: str = "series"):
        self.name = name
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.profile = profile if isinstance(profile, Expression) else Expression(profile, name)
        self.slope = slope

    @classmethod
    def from_csv(cls, path: str, profile: Union[str, float] = 1.0, name: str = "series") -> "TabulatedSeries":
        table = read_series(path)
        return cls(table["t"].to_numpy(float), table["value"].to_numpy(float), profile, name=name)

    @property
    def is_zero(self) -> bool:
        return self.profile.is_zero or not np.any(self.values)

    def amplitude(self, t: float) -> float:
        lo, hi = self.times[0], self.times[-1]
        if t < lo - 1e-12 * max(1.0, abs(lo)) or t > hi + 1e-12 * max(1.0, abs(hi)):
            raise SamplingError(f"time {t} outside tabulated range [{lo}, {hi}] of {self.name}")
        if not self.slope:
            return float(np.interp(t, self.times, self.values))
        # right-continuous piecewise slope
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        return float((self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i]))

    def __call__(self, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.amplitude(t) * self.profile(t, x, y)

    def diff_t(self) -> Union["TabulatedSeries", Expression]:
        if self.slope:
            return Expression(0.0, self.name)
        return TabulatedSeries(self.times, self.values, self.profile, slope=True, name=self.name)

    def check_resolution(self, tau: float) -> None:
        spacing = float(np.max(np.diff(self.times)))
        if spacing > tau * (1.0 + 1e-12):
            raise SamplingError(f"{self.name}: table spacing {spacing:g} is coarser than the time step {tau:g}")


Component = Union[Expression, TabulatedSeries]


class DataFunction:
    """
    Vector-valued scenario datum evaluated at a set of points.

    Args:
        components: one Expression or TabulatedSeries per component
        scale: per-component factors applied on evaluation (Mandel sqrt(2)
            on the shear entry of tensor data)
        name: datum name used in error messages
    """

    def __init__(self, components: Sequence[Component], scale: Optional[Sequence[float]] = None,
                 name: str = "data"):
        self.components = list(components)
        self.scale = np.ones(len(self.components)) if scale is None else np.asarray(scale, dtype=float)
        self.name = name

    def __repr__(self):
        return f"DataFunction({self.name}, {self.components})"

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    @classmethod
    def zero(cls, n_components: int, name: str = "data") -> "DataFunction":
        return cls([Expression(0.0, name) for _ in range(n_components)], name=name)

    @classmethod
    def parse(cls, value: Any, n_components: int, name: str = "data",
              scale: Optional[Sequence[float]] = None) -> "DataFunction":
        """
        Build from a scenario value.

        A number or expression string is allowed for single-component data,
        and a bare number broadcasts to every component; otherwise a list with
        one entry per component. A table `{csv = path, profile = expr}` makes
        a tabulated component.
        """
        if value is None:
            return cls.zero(n_components, name)
        if isinstance(value, (list, tuple)):
            entries = list(value)
        elif n_components == 1 or isinstance(value, (int, float)):
            entries = [value] * n_components
        else:
            raise ConfigurationError(f"'{name}' needs a list of {n_components} components", key=name)
        if len(entries) != n_components:
            raise ConfigurationError(f"'{name}' needs {n_components} components, got {len(entries)}", key=name)
        components: List[Component] = []
        for entry in entries:
            if isinstance(entry, dict):
                if "csv" not in entry:
                    raise ConfigurationError(f"tabulated '{name}' needs a 'csv' path", key=f"{name}.csv")
                components.append(TabulatedSeries.from_csv(entry["csv"], entry.get("profile", 1.0), name))
            else:
                components.append(Expression(entry, name))
        return cls(components, scale, name)

    def __call__(self, t: float, points: np.ndarray) -> np.ndarray:
        """Values at (n_points, 2) coordinates, shape (n_points, n_components)."""
        points = np.asarray(points, dtype=float)
        out = np.empty((len(points), self.n_components))
        for c, component in enumerate(self.components):
            out[:, c] = component(t, points[:, 0], points[:, 1])
        return out * self.scale

    def diff_t(self) -> "DataFunction":
        return DataFunction([c.diff_t() for c in self.components], self.scale, f"d{self.name}/dt")

    def check_resolution(self, tau: float) -> None:
        for component in self.components:
            component.check_resolution(tau)

    def interval_average(self, a: float, b: float, points: np.ndarray,
                         subintervals: int = 2) -> np.ndarray:
        """(1/(b-a)) * integral of the datum over (a, b), composite 4-point Gauss."""
        edges = np.linspace(a, b, subintervals + 1)
        total = np.zeros((len(points), self.n_components))
        for lo, hi in zip(edges[:-1], edges[1:]):
            half = 0.5 * (hi - lo)
            mid = 0.5 * (hi + lo)
            for node, weight in zip(GAUSS_NODES, GAUSS_WEIGHTS):
                total += weight * half * self(mid + half * node, points)
        return total / (b - a)
