"""Symmetric 3x3 tensors and the elasticity operator.

Tensors are stored as Mandel 6-vectors ``[a11, a22, a33, s*a23, s*a13, s*a12]``
with ``s = sqrt(2)``, so the Euclidean dot product of two 6-vectors equals the
Frobenius contraction ``A:B``.  Every function here accepts stacked arrays of
shape ``(..., 6)`` so quadrature-point fields go through the same code path as
single tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

SQRT2 = np.sqrt(2.0)

# (row, col) of each Mandel slot
MANDEL_INDEX = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))
_SCALE = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])

IDENTITY = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def to_mandel(mat):
    """Symmetric part of ``(..., 3, 3)`` matrices as ``(..., 6)`` Mandel vectors."""
    mat = np.asarray(mat, dtype=float)
    sym = 0.5 * (mat + np.swapaxes(mat, -1, -2))
    rows = [i for i, _ in MANDEL_INDEX]
    cols = [j for _, j in MANDEL_INDEX]
    return sym[..., rows, cols] * _SCALE


def to_matrix(vec):
    vec = np.asarray(vec, dtype=float)
    out = np.empty(vec.shape[:-1] + (3, 3))
    plain = vec / _SCALE
    for slot, (i, j) in enumerate(MANDEL_INDEX):
        out[..., i, j] = plain[..., slot]
        out[..., j, i] = plain[..., slot]
    return out


def trace(vec):
    vec = np.asarray(vec, dtype=float)
    return vec[..., 0] + vec[..., 1] + vec[..., 2]


def deviatoric(vec):
    """``A - tr(A)/3 I``."""
    vec = np.array(vec, dtype=float, copy=True)
    mean = trace(vec) / 3.0
    vec[..., :3] -= mean[..., None]
    return vec


def contract(a, b):
    """Frobenius product ``A:B`` (broadcasting over leading axes)."""
    return np.einsum("...i,...i->...", np.asarray(a, float), np.asarray(b, float))


def norm(vec):
    return np.sqrt(contract(vec, vec))


@dataclass(frozen=True)
class SymTensor:
    """A single symmetric 3x3 tensor.

    Convenience wrapper around a Mandel 6-vector; field-level code works on raw
    ``(n, 6)`` arrays instead.
    """

    mandel: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.mandel, dtype=float).reshape(6)
        vec.setflags(write=False)
        object.__setattr__(self, "mandel", vec)

    @classmethod
    def from_matrix(cls, mat) -> SymTensor:
        mat = np.asarray(mat, dtype=float)
        if mat.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {mat.shape}")
        return cls(to_mandel(mat))

    @classmethod
    def diag(cls, a: float, b: float, c: float) -> SymTensor:
        return cls([a, b, c, 0.0, 0.0, 0.0])

    @classmethod
    def identity(cls) -> SymTensor:
        return cls(IDENTITY)

    @classmethod
    def zero(cls) -> SymTensor:
        return cls(np.zeros(6))

    @property
    def matrix(self) -> np.ndarray:
        return to_matrix(self.mandel)

    @property
    def trace(self) -> float:
        return float(trace(self.mandel))

    @property
    def norm(self) -> float:
        return float(norm(self.mandel))

    def deviatoric(self) -> SymTensor:
        return SymTensor(deviatoric(self.mandel))

    def __add__(self, other: SymTensor) -> SymTensor:
        return SymTensor(self.mandel + other.mandel)

    def __sub__(self, other: SymTensor) -> SymTensor:
        return SymTensor(self.mandel - other.mandel)

    def __mul__(self, scalar: float) -> SymTensor:
        return SymTensor(self.mandel * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other: SymTensor) -> float:
        """Double contraction ``A:B``."""
        return float(contract(self.mandel, other.mandel))


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True)
class ElasticityTensor:
    """Constant fourth-order elasticity operator ``D`` acting on S^3.

    Held as its 6x6 Mandel matrix.  The index symmetries
    ``d_ijkl = d_jikl = d_ijlk = d_klij`` are exactly what makes this matrix
    well-defined and symmetric.
    """

    voigt: np.ndarray

    def __post_init__(self):
        mat = np.array(self.voigt, dtype=float).reshape(6, 6)
        asym = np.max(np.abs(mat - mat.T))
        if asym > 1e-12 * max(1.0, np.max(np.abs(mat))):
            raise ValueError(f"elasticity matrix not symmetric (max |D - D^T| = {asym:.3e})")
        mat = 0.5 * (mat + mat.T)
        mat.setflags(write=False)
        object.__setattr__(self, "voigt", mat)

    @classmethod
    def isotropic(cls, lame_lambda: float, lame_mu: float) -> ElasticityTensor:
        """``D A = 2 mu A + lambda tr(A) I``."""
        mat = 2.0 * lame_mu * np.eye(6)
        mat[:3, :3] += lame_lambda
        return cls(mat)

    @classmethod
    def identity(cls) -> ElasticityTensor:
        return cls(np.eye(6))

    @classmethod
    def from_components(cls, d, atol: float = 1e-12) -> ElasticityTensor:
        """Build from a full ``(3, 3, 3, 3)`` array after checking its symmetries."""
        d = np.asarray(d, dtype=float)
        if d.shape != (3, 3, 3, 3):
            raise ValueError(f"expected shape (3, 3, 3, 3), got {d.shape}")
        scale = atol * max(1.0, np.max(np.abs(d)))
        for name, perm in (("minor (ij)", (1, 0, 2, 3)), ("minor (kl)", (0, 1, 3, 2)), ("major", (2, 3, 0, 1))):
            if np.max(np.abs(d - d.transpose(perm))) > scale:
                raise ValueError(f"elasticity components violate the {name} symmetry")
        mat = np.empty((6, 6))
        for a, (i, j) in enumerate(MANDEL_INDEX):
            for b, (k, l) in enumerate(MANDEL_INDEX):
                mat[a, b] = _SCALE[a] * _SCALE[b] * d[i, j, k, l]
        return cls(mat)

    def components(self) -> np.ndarray:
        d = np.empty((3, 3, 3, 3))
        for a, (i, j) in enumerate(MANDEL_INDEX):
            for b, (k, l) in enumerate(MANDEL_INDEX):
                v = self.voigt[a, b] / (_SCALE[a] * _SCALE[b])
                for ii, jj in {(i, j), (j, i)}:
                    for kk, ll in {(k, l), (l, k)}:
                        d[ii, jj, kk, ll] = v
        return d

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.voigt)

    @property
    def coercivity(self) -> float:
        """Largest ``c`` with ``A:(D A) >= c |A|^2``."""
        return float(self.eigenvalues[0])

    @property
    def bound(self) -> float:
        """Smallest ``d`` with ``|D A| <= d |A|``."""
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def is_positive_definite(self) -> bool:
        return self.coercivity > 0.0

    @cached_property
    def sqrt(self) -> np.ndarray:
        return sqrt_D(self)


def apply_D(D: ElasticityTensor, a):
    """``(D A)_ij = sum_kl d_ijkl A_kl`` for stacked Mandel vectors."""
    return np.asarray(a, dtype=float) @ D.voigt.T


def sqrt_D(D: ElasticityTensor) -> np.ndarray:
    """Symmetric positive-definite square root of the Mandel matrix of ``D``."""
    vals, vecs = np.linalg.eigh(D.voigt)
    if vals[0] <= 0.0:
        raise NotPositiveDefiniteError(
            f"elasticity operator is not positive definite (smallest eigenvalue {vals[0]:.6g})"
        )
    root = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (root + root.T)


def inner_D(D: ElasticityTensor, a, b):
    """Pointwise ``(D A):B``."""
    return contract(apply_D(D, a), b)
