"""
Tests for assembly: operators, reduction, factorization and data sampling.
"""

import os
import sys

import numpy as np
import pytest
import scipy.sparse as sp

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from assembly import (Factorization, ProblemData, SparseSymOperator, assemble_mass, assemble_stiffness,
                      boundary_load, combine, element_geometry, sample_data, strain_load)
from data_functions import DataFunction
from errors import ConfigurationError, ContractError, NumericalError
from materials import MaterialField, isotropic, validate
from mesh import FrontSchedule, active_space, build_rect_mesh, insert_crack, node_at


def material_for(mesh, mode, lam=0.0, mu=1.0, beta=1.0):
    C = isotropic(lam, mu, mode)
    field = MaterialField.uniform(mode, mesh.n_triangles, C, C, beta)
    validate(field)
    return field


def space_for(mesh, mode="antiplane"):
    return active_space(mesh, insert_crack(mesh, [])[1], 0.0, mode=mode)


@pytest.fixture
def mesh():
    return build_rect_mesh(1.0, 1.0, 4, 4, dirichlet_sides=["bottom", "top"])


class TestOperators:
    def test_mass_integrates_constants(self, mesh):
        M = assemble_mass(mesh, mode="antiplane")
        assert M.quad(np.ones(mesh.n_nodes)) == pytest.approx(1.0)
        Mp = assemble_mass(mesh, mode="planar")
        assert Mp.quad(np.ones(2 * mesh.n_nodes)) == pytest.approx(2.0)

    def test_exact_symmetry(self, mesh):
        for mode, lam in (("antiplane", 0.0), ("planar", 1.5)):
            K = assemble_stiffness(mesh, None, material_for(mesh, mode, lam), "A")
            assert K.is_symmetric(0.0)
            assert assemble_mass(mesh, mode=mode).is_symmetric(0.0)

    def test_antiplane_energy_of_linear_field(self, mesh):
        K = assemble_stiffness(mesh, None, material_for(mesh, "antiplane", mu=3.0), "A")
        assert np.allclose(K @ np.ones(mesh.n_nodes), 0.0, atol=1e-12)
        assert K.quad(mesh.nodes[:, 0].copy()) == pytest.approx(3.0)

    def test_planar_rigid_motions(self, mesh):
        K = assemble_stiffness(mesh, None, material_for(mesh, "planar", lam=2.0, mu=1.0), "B")
        x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
        for ux, uy in ((np.ones_like(x), 0 * x), (0 * x, np.ones_like(x)), (-y, x)):
            u = np.column_stack([ux, uy]).ravel()
            assert np.allclose(K @ u, 0.0, atol=1e-12)
        stretch = np.column_stack([x, 0 * x]).ravel()
        assert K.quad(stretch) == pytest.approx(2.0 * 1.0 + 2.0)

    def test_unvalidated_material(self, mesh):
        C = isotropic(0.0, 1.0, "antiplane")
        with pytest.raises(ContractError):
            assemble_stiffness(mesh, None, MaterialField.uniform("antiplane", mesh.n_triangles, C, C, 1.0))

    def test_strain_operator(self, mesh):
        G = element_geometry(mesh, "antiplane")
        assert G is element_geometry(mesh, "antiplane")
        strain = G.strain(mesh.nodes[:, 0].copy())
        assert np.allclose(strain, [1.0, 0.0])
        load = strain_load(mesh, space_for(mesh), np.tile([1.0, 0.0], (G.n_elements, 1)))
        assert load.sum() == pytest.approx(0.0, abs=1e-12)
        with pytest.raises(ContractError):
            G.strain(np.zeros(3))

    def test_combine(self, mesh):
        M = assemble_mass(mesh, mode="antiplane")
        K = assemble_stiffness(mesh, None, material_for(mesh, "antiplane"), "A")
        S = combine([(1.0, M), (2.0, K)])
        u = np.sin(mesh.nodes[:, 0])
        assert S.quad(u) == pytest.approx(M.quad(u) + 2.0 * K.quad(u))
        with pytest.raises(ContractError):
            combine([(1.0, M), (1.0, M.reduce(space_for(mesh)))])


class TestReduction:
    def test_congruence(self, mesh):
        cracked, crack = insert_crack(mesh, [node_at(mesh, x, 0.5) for x in (0.0, 0.25, 0.5)],
                                      FrontSchedule.frozen())
        space = active_space(cracked, crack, 0.0)
        M = assemble_mass(cracked, mode="antiplane")
        R = M.reduce(space)
        P = space.prolongation
        assert R.reduced
        assert R.is_symmetric(0.0)
        assert np.allclose(R.matrix.toarray(), (P.T @ M.matrix @ P).toarray())
        assert np.allclose(assemble_mass(cracked, space).matrix.toarray(), R.matrix.toarray())
        with pytest.raises(ContractError):
            R.reduce(space)


class TestFactorization:
    def test_direct_and_cg_agree(self, mesh):
        space = space_for(mesh)
        A = combine([(1.0, assemble_mass(mesh, space)),
                     (1.0, assemble_stiffness(mesh, space, material_for(mesh, "antiplane")))])
        rhs = np.random.default_rng(3).standard_normal(A.dimension)
        direct = A.factorize("direct").solve(rhs)
        cg = A.factorize("cg", rtol=1e-12).solve(rhs)
        assert np.allclose(A @ direct, rhs)
        assert np.allclose(direct, cg, atol=1e-9)

    def test_indefinite_rejected(self):
        op = SparseSymOperator(sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]])), reduced=True)
        with pytest.raises(NumericalError):
            op.factorize("direct")
        neg = SparseSymOperator(sp.csr_matrix(np.diag([1.0, -1.0])), reduced=True)
        with pytest.raises(NumericalError):
            neg.factorize("cg")

    def test_unknown_method(self):
        op = SparseSymOperator(sp.csr_matrix(np.eye(2)), reduced=True)
        with pytest.raises(ConfigurationError):
            Factorization(op, "qr")

    def test_empty_space(self):
        op = SparseSymOperator(sp.csr_matrix((0, 0)), reduced=True)
        assert op.factorize().solve(np.zeros(0)).shape == (0,)


class TestBoundaryLoad:
    def test_total_traction(self, mesh):
        space = space_for(mesh)
        N = np.zeros((mesh.n_edges, 2))
        right = [i for i, (a, b) in enumerate(mesh.boundary_edges)
                 if np.allclose(mesh.nodes[[a, b], 0], 1.0)]
        N[right] = 1.0
        assert boundary_load(mesh, space, N).sum() == pytest.approx(1.0)

    def test_traction_on_dirichlet_edge(self, mesh):
        N = np.ones((mesh.n_edges, 2))
        with pytest.raises(ConfigurationError):
            boundary_load(mesh, space_for(mesh), N)


class TestSampling:
    def test_samples(self, mesh):
        space = space_for(mesh)
        material = material_for(mesh, "antiplane", beta=2.0)
        data = ProblemData(f=DataFunction.parse("t", 1), F=DataFunction.zero(2),
                           z=DataFunction.parse("t*x", 1))
        w0 = np.tile([1.0, 0.0], (mesh.n_triangles, 1))
        samples = sample_data(mesh, space, material, data, w0, 4, 1.0)
        assert samples.tau == pytest.approx(0.25)
        assert samples.times[-1] == 1.0
        assert np.all(samples.f[0] == 0.0)
        assert np.allclose(samples.f[2], 0.375)
        assert np.allclose(samples.dz[1], mesh.nodes[:, 0])
        assert np.allclose(samples.dz[0], mesh.nodes[:, 0])
        assert np.allclose(samples.ddz, 0.0)
        assert np.allclose(samples.h[4], np.exp(-0.5) * w0)
        assert not samples.has_neumann

    def test_neumann_samples(self, mesh):
        space = space_for(mesh)
        data = ProblemData(f=DataFunction.zero(1), F=DataFunction.zero(2), z=DataFunction.zero(1),
                           N=DataFunction.parse("1", 1))
        samples = sample_data(mesh, space, material_for(mesh, "antiplane"), data,
                              np.zeros((mesh.n_triangles, 2)), 2, 1.0)
        assert samples.has_neumann
        assert samples.neumann[1].sum() == pytest.approx(2.0)

    def test_bad_step_count(self, mesh):
        space = space_for(mesh)
        data = ProblemData(f=DataFunction.zero(1), F=DataFunction.zero(2), z=DataFunction.zero(1))
        with pytest.raises(ContractError):
            sample_data(mesh, space, material_for(mesh, "antiplane"), data,
                        np.zeros((mesh.n_triangles, 2)), 0, 1.0)
