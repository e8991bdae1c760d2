import numpy as np
import pytest
import scipy.linalg as sla

from tvesim.basis import (
    ComplementError, build_bases, build_complement, d_gram, eigen_residuals, load_bases, save_bases,
    solve_displacement_eigs, solve_temperature_eigs,
)
from tvesim.fem import BoxMesh, assemble


def test_displacement_eigenvalues_match_dense_oracle(asm4):
    basis = solve_displacement_eigs(asm4, 6)
    K, M = asm4.K_u.toarray(), asm4.M_u.toarray()
    # independent route: Cholesky-reduce to a standard symmetric problem
    Lc = np.linalg.cholesky(M)
    Li = np.linalg.inv(Lc)
    ref = np.sort(np.linalg.eigvalsh(Li @ K @ Li.T))[:6]
    assert np.allclose(basis.eigenvalues, ref, rtol=1e-10)


def test_displacement_normalisation(bases4):
    a = bases4.assembly
    W = bases4.disp.vectors
    assert np.max(np.abs(d_gram(a, bases4.disp.strains) - np.eye(bases4.k))) < 1e-10
    # D-unit strain energy means int w.w = 1/lambda
    l2 = W @ (a.M_u @ W.T)
    assert np.allclose(np.diag(l2), 1.0 / bases4.disp.eigenvalues, rtol=1e-10)
    assert np.max(np.abs(l2 - np.diag(np.diag(l2)))) < 1e-10
    assert np.max(eigen_residuals(a.K_u, a.M_u, W, bases4.disp.eigenvalues)) < 1e-12


def test_temperature_basis(bases4):
    a = bases4.assembly
    V = bases4.temp.vectors
    assert np.max(np.abs(V @ (a.M_theta @ V.T) - np.eye(bases4.l_theta))) < 1e-10
    assert bases4.temp.eigenvalues[0] == 0.0
    assert np.ptp(V[0]) < 1e-14
    assert abs(V[0, 0] - 1 / np.sqrt(a.mesh.volume)) < 1e-14
    assert np.all(np.diff(bases4.temp.eigenvalues) >= -1e-12)


def test_temperature_eigenvalues_approach_continuum(D):
    a = assemble(BoxMesh.cube(8), D)
    mu = solve_temperature_eigs(a, 2).eigenvalues
    assert abs(mu[1] - np.pi ** 2) / np.pi ** 2 < 0.05


def test_lowest_elastic_eigenvalue_converges(asm4, D):
    lam4 = solve_displacement_eigs(asm4, 1).eigenvalues[0]
    lam8 = solve_displacement_eigs(assemble(BoxMesh.cube(8), D), 1).eigenvalues[0]
    assert abs(lam4 - lam8) / lam8 < 0.1
    assert lam8 <= lam4  # conforming refinement lowers the Rayleigh quotient


def test_complement_is_d_orthonormal_and_orthogonal(bases4):
    a = bases4.assembly
    Z = bases4.comp.fields
    assert np.max(np.abs(d_gram(a, Z) - np.eye(bases4.l_zeta))) < 1e-10
    assert np.max(np.abs(d_gram(a, bases4.disp.strains, Z))) < 1e-10


def test_first_complement_fields_are_constant(bases4):
    Z = bases4.comp.fields[:6]
    assert np.max(np.ptp(Z, axis=1)) < 1e-12


def test_complement_without_strain_modes(asm2):
    disp = solve_displacement_eigs(asm2, 0)
    comp = build_complement(asm2, disp, 10)
    assert np.max(np.abs(d_gram(asm2, comp.fields) - np.eye(10))) < 1e-10


def test_complement_too_large(asm2):
    disp = solve_displacement_eigs(asm2, 3)
    full = 6 * asm2.n_qp - 3
    comp = build_complement(asm2, disp, full)
    assert comp.l == full
    with pytest.raises(ComplementError):
        build_complement(asm2, disp, full + 1)


def test_divergence_coupling(bases4, rng):
    a = bases4.assembly
    C = bases4.coupling
    assert C.shape == (bases4.k, bases4.l_theta)
    assert np.max(np.abs(C[:, 0])) < 1e-12  # div w integrates to zero against constants
    assert np.max(np.abs(C)) > 1e-6
    n, m = rng.integers(bases4.k), rng.integers(bases4.l_theta)
    div = a.div @ bases4.disp.vectors[n]
    v = a.N @ bases4.temp.vectors[m]
    assert abs(C[n, m] - np.sum(a.weights * div * v)) < 1e-12


def test_too_many_modes(asm2):
    with pytest.raises(ValueError):
        solve_displacement_eigs(asm2, asm2.n_free + 1)
    with pytest.raises(ValueError):
        solve_temperature_eigs(asm2, asm2.n_nodes + 1)


def test_sparse_path_matches_dense(D, monkeypatch):
    import tvesim.basis as basis_mod

    a = assemble(BoxMesh.cube(3), D)
    dense = solve_displacement_eigs(a, 4).eigenvalues
    monkeypatch.setattr(basis_mod, "DENSE_LIMIT", 0)
    sparse = solve_displacement_eigs(a, 4).eigenvalues
    assert np.allclose(dense, sparse, rtol=1e-9)


def test_cache_round_trip(tmp_path, bases4, D):
    path = tmp_path / "bases.bin"
    save_bases(path, bases4)
    back = load_bases(path, bases4.assembly)
    assert np.array_equal(back.disp.vectors, bases4.disp.vectors)
    assert np.array_equal(back.temp.eigenvalues, bases4.temp.eigenvalues)
    assert np.array_equal(back.comp.fields, bases4.comp.fields)
    with pytest.raises(ValueError, match="different mesh"):
        load_bases(path, assemble(BoxMesh.cube(3), D))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_bases(path, bases4.assembly)
