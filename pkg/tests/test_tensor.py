import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tvesim.tensor import (
    IDENTITY, ElasticityTensor, NotPositiveDefiniteError, SymTensor, apply_D, contract, deviatoric,
    inner_D, norm, sqrt_D, to_mandel, to_matrix, trace,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
mats = arrays(np.float64, (3, 3), elements=finite)


def _sym(m):
    return 0.5 * (m + m.T)


@given(mats, mats)
def test_mandel_contraction_is_frobenius(a, b):
    A, B = _sym(a), _sym(b)
    assert contract(to_mandel(A), to_mandel(B)) == pytest.approx(np.sum(A * B), rel=1e-12, abs=1e-9)


@given(mats)
def test_mandel_round_trip(a):
    A = _sym(a)
    np.testing.assert_allclose(to_matrix(to_mandel(A)), A, rtol=1e-13, atol=1e-12)


@given(mats)
def test_deviatoric_is_traceless_and_idempotent(a):
    v = to_mandel(_sym(a))
    d = deviatoric(v)
    assert abs(trace(d)) <= 1e-12 * (1 + np.abs(v).max())
    np.testing.assert_allclose(deviatoric(d), d, atol=1e-10)


def test_symtensor_algebra():
    A = SymTensor.from_matrix([[1, 2, 0], [2, 3, 1], [0, 1, 5]])
    assert A.trace == pytest.approx(9.0)
    assert (A @ SymTensor.identity()) == pytest.approx(9.0)
    assert A.deviatoric().trace == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose((A - A).mandel, 0.0)
    assert (A * 2.0).norm == pytest.approx(2 * A.norm)
    assert SymTensor.diag(1, 1, 1).norm == pytest.approx(np.sqrt(3))
    with pytest.raises(ValueError):
        SymTensor.from_matrix(np.eye(2))


def test_symtensor_storage_is_symmetric():
    A = SymTensor.from_matrix([[0, 2, 0], [0, 0, 0], [0, 0, 0]])
    np.testing.assert_allclose(A.matrix, A.matrix.T)
    assert A.matrix[0, 1] == pytest.approx(1.0)


@pytest.mark.parametrize("diag, expected", [
    ((1, 1, 1), (0, 0, 0)),
    ((1, -1, 0), (1, -1, 0)),
    ((3, 0, 0), (2, -1, -1)),
])
def test_deviatoric_examples(diag, expected):
    np.testing.assert_allclose(SymTensor.diag(*diag).deviatoric().mandel[:3], expected, atol=1e-15)


@given(mats, mats)
def test_traceless_contraction_identity(a, b):
    A = deviatoric(to_mandel(_sym(a)))
    B = to_mandel(_sym(b))
    lhs, rhs = contract(A, deviatoric(B)), contract(A, B)
    assert lhs == pytest.approx(rhs, rel=1e-13, abs=1e-13 * (1 + np.abs(A).max() * np.abs(B).max()))


def test_isotropic_matches_component_form():
    lam, mu = 0.7, 1.3
    D = ElasticityTensor.isotropic(lam, mu)
    d = np.zeros((3, 3, 3, 3))
    I = np.eye(3)
    for i, j, k, l in np.ndindex(3, 3, 3, 3):
        d[i, j, k, l] = lam * I[i, j] * I[k, l] + mu * (I[i, k] * I[j, l] + I[i, l] * I[j, k])
    rng = np.random.default_rng(0)
    A = _sym(rng.standard_normal((3, 3)))
    direct = np.einsum("ijkl,kl->ij", d, A)
    np.testing.assert_allclose(to_matrix(apply_D(D, to_mandel(A))), direct, atol=1e-13)
    np.testing.assert_allclose(ElasticityTensor.from_components(d).voigt, D.voigt, atol=1e-13)
    np.testing.assert_allclose(D.components(), d, atol=1e-13)


def test_isotropic_on_identity():
    D = ElasticityTensor.isotropic(2.0, 0.5)
    np.testing.assert_allclose(apply_D(D, IDENTITY), (3 * 2.0 + 2 * 0.5) * IDENTITY)


def test_component_symmetry_violation_rejected():
    d = ElasticityTensor.isotropic(1.0, 1.0).components()
    d[0, 1, 2, 2] += 0.1
    with pytest.raises(ValueError, match="symmetry"):
        ElasticityTensor.from_components(d)


@settings(max_examples=30)
@given(st.floats(0.01, 10), st.floats(0.01, 10))
def test_sqrt_squares_back(lam, mu):
    D = ElasticityTensor.isotropic(lam, mu)
    R = sqrt_D(D)
    np.testing.assert_allclose(R @ R, D.voigt, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(R, R.T)


def test_coercivity_and_bound():
    D = ElasticityTensor.isotropic(1.0, 1.0)
    assert D.coercivity == pytest.approx(2.0)
    assert D.bound == pytest.approx(2.0 + 3.0)
    rng = np.random.default_rng(3)
    a = rng.standard_normal((200, 6))
    q = inner_D(D, a, a)
    assert np.all(q >= D.coercivity * norm(a) ** 2 - 1e-12)
    assert np.all(norm(apply_D(D, a)) <= D.bound * norm(a) + 1e-12)


def test_identity_cases():
    D = ElasticityTensor.isotropic(0.0, 0.5)
    a = np.random.default_rng(5).standard_normal((10, 6))
    np.testing.assert_allclose(apply_D(D, a), a, atol=1e-15)
    np.testing.assert_allclose(sqrt_D(ElasticityTensor.identity()), np.eye(6), atol=1e-15)
    np.testing.assert_allclose(inner_D(ElasticityTensor.identity(), a, a), norm(a) ** 2)
    np.testing.assert_allclose(apply_D(D, np.zeros(6)), 0.0)


def test_inner_D_symmetric(rng):
    D = ElasticityTensor.isotropic(1.0, 1.0)
    a, b = rng.standard_normal((2, 100, 6))
    np.testing.assert_allclose(inner_D(D, a, b), inner_D(D, b, a), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(inner_D(D, a, b), contract(a, apply_D(D, b)), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(inner_D(D, a, 0 * b), 0.0)


def test_indefinite_operator_rejected():
    D = ElasticityTensor.isotropic(1.0, -1.0)
    assert not D.is_positive_definite
    with pytest.raises(NotPositiveDefiniteError):
        sqrt_D(D)


def test_asymmetric_matrix_rejected():
    m = np.eye(6)
    m[0, 1] = 1.0
    with pytest.raises(ValueError):
        ElasticityTensor(m)
