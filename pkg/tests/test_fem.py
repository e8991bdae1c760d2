import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvesim.fem import BoxMesh, assemble, boundary_integral, integrate_qp, strain_of
from tvesim.tensor import ElasticityTensor, SymTensor


@pytest.fixture(scope="module")
def skew_box(D):
    return assemble(BoxMesh((1.0, 2.0, 0.5), (3, 2, 4)), D)


def test_mesh_validation():
    with pytest.raises(ValueError):
        BoxMesh((1.0, 1.0, 1.0), (1, 2, 2))
    with pytest.raises(ValueError):
        BoxMesh((1.0, -1.0, 1.0), (2, 2, 2))


def test_counts(asm2):
    assert asm2.n_nodes == 27
    assert asm2.n_qp == 8 * 8
    assert asm2.n_free == 3  # one interior node
    assert asm2.mesh.hash() == BoxMesh.cube(2).hash()
    assert asm2.mesh.hash() != BoxMesh.cube(3).hash()


def test_temperature_matrices(skew_box):
    a = skew_box
    ones = np.ones(a.n_nodes)
    assert np.max(np.abs(a.K_theta @ ones)) < 1e-12
    assert abs(ones @ (a.M_theta @ ones) - a.mesh.volume) < 1e-12


def test_displacement_stiffness_is_spd(asm4):
    K = asm4.K_u.toarray()
    assert np.allclose(K, K.T, atol=1e-12)
    assert np.linalg.eigvalsh(K)[0] > 0


def test_patch_test_linear_field(skew_box, rng):
    a = skew_box
    A = rng.normal(size=(3, 3))
    u = (a.mesh.nodes @ A.T).reshape(-1)
    eps = strain_of(a, u, full=True)
    expected = SymTensor.from_matrix(0.5 * (A + A.T)).mandel
    assert np.max(np.abs(eps - expected)) < 1e-12


def test_rigid_rotation_has_zero_strain(skew_box):
    a = skew_box
    W = np.array([[0.0, -0.3, 0.2], [0.3, 0.0, -0.7], [-0.2, 0.7, 0.0]])
    u = (a.mesh.nodes @ W.T + np.array([1.0, -2.0, 0.5])).reshape(-1)
    assert np.max(np.abs(strain_of(a, u, full=True))) < 1e-12


def test_divergence_of_interior_fields_integrates_to_zero(asm4, rng):
    u = rng.normal(size=asm4.n_free)
    assert abs(integrate_qp(asm4, asm4.div @ u)) < 1e-12


def test_surface_area(skew_box):
    L1, L2, L3 = skew_box.mesh.extents
    expected = 2 * (L1 * L2 + L2 * L3 + L1 * L3)
    assert abs(boundary_integral(skew_box, 1.0) - expected) < 1e-12
    assert abs(skew_box.mesh.surface_area - expected) < 1e-12


def test_boundary_integral_of_constant_field(skew_box):
    v = np.full(skew_box.n_nodes, 2.5)
    assert abs(boundary_integral(skew_box, 1.0, v) - 2.5 * skew_box.mesh.surface_area) < 1e-12


def test_boundary_integral_per_side(skew_box):
    L1, L2, L3 = skew_box.mesh.extents
    g = np.arange(6, dtype=float)
    total = boundary_integral(skew_box, g)
    # sides are ordered -x, +x, -y, +y, -z, +z
    areas = np.array([L2 * L3] * 2 + [L1 * L3] * 2 + [L1 * L2] * 2)
    assert abs(total - g @ areas) < 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3))
def test_quadrature_is_exact_for_low_degree(px, py, pz):
    a = assemble(BoxMesh((1.0, 1.5, 0.8), (2, 3, 2)), ElasticityTensor.isotropic(1.0, 1.0))
    val = integrate_qp(a, lambda x: x[:, 0] ** px * x[:, 1] ** py * x[:, 2] ** pz)
    ext = a.mesh.extents
    exact = np.prod([e ** (p + 1) / (p + 1) for e, p in zip(ext, (px, py, pz))])
    assert abs(val - exact) < 1e-12 * max(1.0, exact)


def test_strain_shape_check(asm2):
    with pytest.raises(ValueError):
        strain_of(asm2, np.zeros(5))
