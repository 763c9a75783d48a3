"""
Materials
=========

Elementwise elasticity tensor A and viscosity tensor B with their symmetry
and coercivity checks.

Planar tensors act on symmetric 2x2 strains stored in Mandel notation
(e11, e22, sqrt(2) e12): the Euclidean product of two Mandel vectors is the
Frobenius product of the matrices, so the stored 3x3 matrix is symmetric
exactly when the tensor is, and its eigenvalues are those of the operator.
Antiplane tensors are symmetric 2x2 matrices acting on gradients.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

import config
from errors import ConfigurationError, ContractError, MaterialError
from mesh import dofs_per_node

logger = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)
STRAIN_DIM = {"antiplane": 2, "planar": 3}


Predicate = Union[str, Callable[[np.ndarray, np.ndarray], np.ndarray]]


def strain_dim(mode: str) -> int:
    dofs_per_node(mode)
    return STRAIN_DIM[mode]


def to_mandel(eta) -> np.ndarray:
    """Symmetric 2x2 matrix (or stack of them) to Mandel vectors."""
    eta = np.asarray(eta, dtype=float)
    return np.stack([eta[..., 0, 0], eta[..., 1, 1], SQRT2 * eta[..., 0, 1]], axis=-1)


def from_mandel(v) -> np.ndarray:
    """Mandel vector (or stack of them) to symmetric 2x2 matrices."""
    v = np.asarray(v, dtype=float)
    off = v[..., 2] / SQRT2
    return np.stack([np.stack([v[..., 0], off], axis=-1),
                     np.stack([off, v[..., 1]], axis=-1)], axis=-2)


def isotropic(lam: float, mu: float, mode: str = "planar") -> np.ndarray:
    """
    Isotropic element tensor.

    Args:
        lam: first Lame parameter, lam >= 0 (ignored in antiplane mode)
        mu: shear modulus, mu > 0
        mode: 'planar' for eta -> 2 mu eta + lam tr(eta) I, 'antiplane' for mu I

    Returns:
        3x3 Mandel matrix (planar) or 2x2 matrix (antiplane)
    """
    if not mu > 0:
        raise ConfigurationError(f"shear modulus must be positive, got {mu}", key="mu")
    if lam < 0:
        raise ConfigurationError(f"Lame parameter must be nonnegative, got {lam}", key="lambda")
    if strain_dim(mode) == 2:
        return mu * np.eye(2)
    trace = np.array([1.0, 1.0, 0.0])
    return 2.0 * mu * np.eye(3) + lam * np.outer(trace, trace)


@dataclass
class MaterialField:
    """Per-element tensors A, B and the relaxation time beta."""
    mode: str
    A: np.ndarray
    B: np.ndarray
    beta: float
    C_A: Optional[float] = None
    C_B: Optional[float] = None

    @property
    def n_elements(self) -> int:
        return len(self.A)

    @property
    def validated(self) -> bool:
        return self.C_A is not None and self.C_B is not None

    def tensors(self, which: str) -> np.ndarray:
        if which == "A":
            return self.A
        if which == "B":
            return self.B
        raise ContractError(f"unknown tensor '{which}', expected 'A' or 'B'")

    def stress(self, strain: np.ndarray, which: str = "A") -> np.ndarray:
        """Elementwise action on a StrainField of shape (n_elements, d)."""
        strain = np.asarray(strain, dtype=float)
        if strain.shape != (self.n_elements, self.A.shape[1]):
            raise ContractError(f"strain field of shape {strain.shape} does not match "
                                f"{self.n_elements} elements in {self.mode} mode")
        return np.einsum("eij,ej->ei", self.tensors(which), strain)

    @classmethod
    def uniform(cls, mode: str, n_elements: int, A: np.ndarray, B: np.ndarray,
                beta: float) -> "MaterialField":
        A = np.asarray(A, dtype=float)
        B = np.asarray(B, dtype=float)
        return cls(mode=mode,
                   A=np.repeat(A[None], n_elements, axis=0),
                   B=np.repeat(B[None], n_elements, axis=0),
                   beta=float(beta))

    @classmethod
    def from_regions(cls, mode: str, centroids: np.ndarray,
                     default: Tuple[np.ndarray, np.ndarray],
                     regions: Sequence[Tuple[Predicate, np.ndarray, np.ndarray]],
                     beta: float) -> "MaterialField":
        """
        Piecewise-constant field. Later regions override earlier ones.

        Args:
            centroids: (n_elements, 2) element centroids
            default: (A, B) used where no region matches
            regions: (predicate, A, B); a predicate is an (x, y) expression
                string in the data grammar or a callable returning a mask
        """
        from data_functions import compile_expression

        centroids = np.asarray(centroids, dtype=float)
        field = cls.uniform(mode, len(centroids), default[0], default[1], beta)
        for predicate, A, B in regions:
            if isinstance(predicate, str):
                fn = compile_expression(predicate, space=True)
                mask = fn(0.0, centroids[:, 0], centroids[:, 1])
            else:
                mask = predicate(centroids[:, 0], centroids[:, 1])
            mask = np.broadcast_to(np.asarray(mask, dtype=bool), (len(centroids),))
            field.A[mask] = A
            field.B[mask] = B
            logger.debug("Material region %r covers %d elements", predicate, int(mask.sum()))
        return field


def _coercivity(tensors: np.ndarray, name: str) -> float:
    asym = float(np.max(np.abs(tensors - np.swapaxes(tensors, 1, 2)))) if tensors.size else 0.0
    if asym > config.SYMMETRY_TOL:
        raise MaterialError(f"tensor {name} is not symmetric (deviation {asym:.3e})")
    eig = np.linalg.eigvalsh(tensors)
    bound = float(eig[:, 0].min())
    if not bound > 0:
        worst = int(np.argmin(eig[:, 0]))
        raise MaterialError(f"tensor {name} is not coercive: eigenvalue {bound:.3e} on element {worst}")
    return bound


def validate(field: MaterialField) -> Tuple[float, float]:
    """
    Certify symmetry and coercivity and store the bounds on the field.

    Returns:
        (C_A, C_B): minimum over elements of the smallest eigenvalue
    """
    if not field.beta > 0:
        raise MaterialError(f"relaxation time beta must be positive, got {field.beta}")
    d = strain_dim(field.mode)
    for name, tensors in (("A", field.A), ("B", field.B)):
        if tensors.ndim != 3 or tensors.shape[1:] != (d, d):
            raise MaterialError(f"tensor {name} must have shape (n_elements, {d}, {d}), got {tensors.shape}")
        if not np.all(np.isfinite(tensors)):
            raise MaterialError(f"tensor {name} has non-finite entries")
    if field.A.shape != field.B.shape:
        raise MaterialError("tensors A and B must cover the same elements")

    field.C_A = _coercivity(field.A, "A")
    field.C_B = _coercivity(field.B, "B")
    logger.info("Materials validated: C_A=%.4g, C_B=%.4g, beta=%.4g", field.C_A, field.C_B, field.beta)
    return field.C_A, field.C_B


def apply(field: MaterialField, element: int, strain, which: str = "A") -> np.ndarray:
    """Stress on one element. Planar strains may be 2x2 matrices or Mandel vectors; the result matches."""
    if not 0 <= int(element) < field.n_elements:
        raise ContractError(f"element {element} out of range [0, {field.n_elements})")
    strain = np.asarray(strain, dtype=float)
    tensor = field.tensors(which)[int(element)]
    if strain.shape == (2, 2):
        return from_mandel(tensor @ to_mandel(strain))
    if strain.shape != (tensor.shape[0],):
        raise ContractError(f"strain of shape {strain.shape} does not match a {field.mode} tensor")
    return tensor @ strain


def read_tensor_table(path: str, mode: str, n_elements: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read a per-element tensor table (see docs/FORMATS.md).

    Each row is `element which c_11 ... c_dd` with `which` in {A, B} and the
    d x d entries row-major (d = 2 antiplane, 3 planar Mandel). Every element
    needs exactly one A row and one B row.
    """
    d = strain_dim(mode)
    try:
        table = pd.read_csv(path, sep=r"\s+", comment="#", header=None)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigurationError(f"cannot read tensor table {path}: {e}", key="materials.table") from None
    if table.shape[1] != 2 + d * d:
        raise ConfigurationError(f"tensor table rows need {2 + d * d} columns, found {table.shape[1]}",
                                 key="materials.table")
    out = {"A": np.full((n_elements, d, d), np.nan), "B": np.full((n_elements, d, d), np.nan)}
    for row in table.itertuples(index=False):
        element, which = int(row[0]), str(row[1])
        if which not in out or not 0 <= element < n_elements:
            raise ConfigurationError(f"bad tensor table row for element {element}, tensor {which}",
                                     key="materials.table")
        out[which][element] = np.asarray(row[2:], dtype=float).reshape(d, d)
    for which, tensors in out.items():
        missing = np.flatnonzero(np.isnan(tensors).any(axis=(1, 2)))
        if missing.size:
            raise MaterialError(f"tensor table has no {which} entry for elements {missing[:5].tolist()}")
    return out["A"], out["B"]
