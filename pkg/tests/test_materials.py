"""
Tests for material tensors: Mandel storage, validation and table input.
"""

import os
import sys

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import ConfigurationError, ContractError, MaterialError
from materials import (MaterialField, apply, from_mandel, isotropic, read_tensor_table,
                       strain_dim, to_mandel, validate)


def planar_field(n=2, lam=2.0, mu=1.0, beta=1.0):
    C = isotropic(lam, mu, "planar")
    return MaterialField.uniform("planar", n, C, 0.5 * C, beta)


class TestMandel:
    def test_frobenius_product_is_preserved(self):
        rng = np.random.default_rng(1)
        a = rng.standard_normal((2, 2))
        b = rng.standard_normal((2, 2))
        a, b = a + a.T, b + b.T
        assert to_mandel(a) @ to_mandel(b) == pytest.approx(np.sum(a * b))
        assert np.allclose(from_mandel(to_mandel(a)), a)

    def test_strain_dims(self):
        assert strain_dim("antiplane") == 2
        assert strain_dim("planar") == 3


class TestIsotropic:
    def test_planar_eigenvalues(self):
        C = isotropic(2.0, 1.0, "planar")
        assert np.allclose(np.linalg.eigvalsh(C), [2.0, 2.0, 6.0])

    def test_antiplane(self):
        assert np.array_equal(isotropic(5.0, 3.0, "antiplane"), 3.0 * np.eye(2))

    def test_invalid_moduli(self):
        with pytest.raises(ConfigurationError) as exc:
            isotropic(0.0, 0.0, "planar")
        assert exc.value.key == "mu"
        with pytest.raises(ConfigurationError) as exc:
            isotropic(-1.0, 1.0, "planar")
        assert exc.value.key == "lambda"


class TestValidation:
    def test_bounds(self):
        field = planar_field()
        C_A, C_B = validate(field)
        assert C_A == pytest.approx(2.0)
        assert C_B == pytest.approx(1.0)
        assert field.validated

    def test_asymmetric_rejected(self):
        field = planar_field()
        field.A[1, 0, 2] += 1e-3
        with pytest.raises(MaterialError):
            validate(field)

    def test_symmetry_tolerance_is_absolute(self):
        stiff = planar_field(lam=2e6, mu=1e6)
        stiff.A[0, 0, 2] += 1e-9
        with pytest.raises(MaterialError):
            validate(stiff)
        nearly = planar_field(lam=2e6, mu=1e6)
        nearly.A[0, 0, 2] += 1e-13
        assert validate(nearly)[0] > 0

    def test_degenerate_viscosity_rejected(self):
        field = planar_field()
        field.B[0] = 0.0
        with pytest.raises(MaterialError):
            validate(field)

    def test_beta_must_be_positive(self):
        with pytest.raises(MaterialError):
            validate(planar_field(beta=0.0))


class TestApply:
    def test_matrix_strain(self):
        field = planar_field()
        validate(field)
        eta = np.array([[1.0, 0.5], [0.5, 2.0]])
        stress = apply(field, 0, eta)
        assert np.allclose(stress, [[8.0, 1.0], [1.0, 10.0]])
        assert np.allclose(apply(field, 1, to_mandel(eta)), to_mandel(stress))

    def test_contract(self):
        field = planar_field()
        with pytest.raises(ContractError):
            apply(field, 5, np.zeros(3))
        with pytest.raises(ContractError):
            apply(field, 0, np.zeros(2))
        with pytest.raises(ContractError):
            field.stress(np.zeros((3, 3)))
        with pytest.raises(ContractError):
            field.tensors("C")


class TestRegions:
    def test_predicate_regions(self):
        soft, stiff = isotropic(0.0, 1.0, "antiplane"), isotropic(0.0, 4.0, "antiplane")
        centroids = np.array([[0.25, 0.5], [0.75, 0.5]])
        field = MaterialField.from_regions("antiplane", centroids, (soft, soft),
                                           [("x > 0.5", stiff, soft)], beta=1.0)
        assert np.array_equal(field.A[0], soft)
        assert np.array_equal(field.A[1], stiff)
        assert np.array_equal(field.B[1], soft)


class TestTensorTable:
    def test_read(self, tmp_path):
        path = tmp_path / "tensors.txt"
        path.write_text("# element which c11 c12 c21 c22\n"
                        "0 A 1 0 0 1\n0 B 2 0 0 2\n1 A 3 0 0 3\n1 B 4 0 0 4\n")
        A, B = read_tensor_table(str(path), "antiplane", 2)
        assert np.array_equal(A[1], 3.0 * np.eye(2))
        assert np.array_equal(B[0], 2.0 * np.eye(2))

    def test_missing_entry(self, tmp_path):
        path = tmp_path / "tensors.txt"
        path.write_text("0 A 1 0 0 1\n0 B 2 0 0 2\n1 A 3 0 0 3\n")
        with pytest.raises(MaterialError):
            read_tensor_table(str(path), "antiplane", 2)

    def test_wrong_width(self, tmp_path):
        path = tmp_path / "tensors.txt"
        path.write_text("0 A 1 0 0 1\n0 B 2 0 0 2\n")
        with pytest.raises(ConfigurationError):
            read_tensor_table(str(path), "planar", 1)
