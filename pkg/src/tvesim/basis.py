"""Galerkin bases: elasticity and Neumann-Laplacian eigenpairs, and a
D-orthonormal basis of the complement of the basis strains."""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import FEAssembly, strain_of

DENSE_LIMIT = 3000
DROP_TOL = 1e-8


class EigenSolverError(RuntimeError):
    pass


class ComplementError(RuntimeError):
    pass


def _fix_signs(vecs):
    """Make the first entry with ``|v| > 1e-12`` of each column positive."""
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size and col[idx[0]] < 0:
            vecs[:, j] = -col
    return vecs


def generalized_eigs(K, M, count: int):
    """Lowest ``count`` eigenpairs of ``K x = lam M x``, ``M``-orthonormal."""
    n = K.shape[0]
    if count > n:
        raise ValueError(f"requested {count} eigenpairs of a {n}-dimensional problem")
    if count < 1:
        return np.zeros(0), np.zeros((n, 0))
    if n <= DENSE_LIMIT:
        vals, vecs = sla.eigh(K.toarray(), M.toarray(), subset_by_index=[0, count - 1])
    else:
        try:
            vals, vecs = spla.eigsh(K.tocsc(), k=count, M=M.tocsc(), sigma=-1e-8, which="LM")
        except spla.ArpackNoConvergence as exc:
            raise EigenSolverError(f"shift-invert Lanczos did not converge: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    if not np.all(np.isfinite(vals)):
        raise EigenSolverError("eigensolver returned non-finite eigenvalues")
    return vals, _fix_signs(np.array(vecs))


@dataclass(frozen=True)
class DisplacementBasis:
    """Eigenvectors of the discrete ``-div D eps(.)`` with homogeneous Dirichlet
    data, scaled so that ``(eps(w_i), eps(w_j))_D = delta_ij``."""

    vectors: np.ndarray  # (k, n_free)
    eigenvalues: np.ndarray  # (k,)
    strains: np.ndarray  # (k, nq, 6)

    @property
    def k(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class TemperatureBasis:
    """L2-orthonormal Neumann eigenvectors; the first is the constant."""

    vectors: np.ndarray  # (l, n_nodes)
    eigenvalues: np.ndarray
    qp_values: np.ndarray  # (l, nq)

    @property
    def l(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class ComplementBasis:
    fields: np.ndarray  # (l, nq, 6)

    @property
    def l(self) -> int:
        return self.fields.shape[0]


def solve_displacement_eigs(assembly: FEAssembly, k: int) -> DisplacementBasis:
    if k > assembly.n_free:
        raise ValueError(f"k={k} exceeds the {assembly.n_free} free displacement dofs")
    lam, vecs = generalized_eigs(assembly.K_u, assembly.M_u, k)
    if k and lam[0] <= 0:
        raise EigenSolverError(f"non-positive elasticity eigenvalue {lam[0]:.3e}")
    vecs = vecs / np.sqrt(lam)[None, :]
    vecs = vecs.T.copy()
    return DisplacementBasis(vecs, lam, strain_of(assembly, vecs).reshape(k, assembly.n_qp, 6))


def solve_temperature_eigs(assembly: FEAssembly, l: int) -> TemperatureBasis:
    if l > assembly.n_nodes:
        raise ValueError(f"l={l} exceeds the {assembly.n_nodes} temperature nodes")
    mu, vecs = generalized_eigs(assembly.K_theta, assembly.M_theta, l)
    if l:
        # kernel of the Neumann Laplacian: replace by the exact normalized constant
        mu = mu.copy()
        mu[0] = 0.0 if abs(mu[0]) < 1e-10 * max(1.0, abs(mu[-1])) else mu[0]
        const = np.full(assembly.n_nodes, 1.0 / np.sqrt(assembly.mesh.volume))
        if abs(vecs[:, 0] @ (assembly.M_theta @ const)) > 1.0 - 1e-8:
            vecs[:, 0] = const
    vecs = vecs.T.copy()
    return TemperatureBasis(vecs, mu, (assembly.N @ vecs.T).T.copy())


def _d_isometry(assembly: FEAssembly):
    """Per-point maps between tensor fields and Euclidean coordinates where the
    Euclidean inner product equals ``(., .)_D``."""
    root = assembly.D.sqrt
    rootinv = np.linalg.inv(root)
    sw = np.sqrt(assembly.weights)[:, None]

    def forward(fields):
        return (fields @ root.T * sw).reshape(fields.shape[:-2] + (-1,))

    def backward(vecs):
        f = vecs.reshape(vecs.shape[:-1] + (len(sw), 6)) / sw
        return f @ rootinv.T

    return forward, backward


def candidate_fields(assembly: FEAssembly):
    """Yield candidate tensor fields ``(nq, 6)`` in a fixed order: cosine modes
    of increasing total frequency times the six Mandel unit tensors, then one
    indicator per quadrature point and Mandel slot."""
    x = assembly.qp_coords / np.array(assembly.mesh.extents)
    nq = assembly.n_qp
    freqs = sorted(
        itertools.product(*(range(2 * n) for n in assembly.mesh.cells)),
        key=lambda f: (sum(f), f),
    )
    for fa, fb, fc in freqs:
        mode = np.cos(np.pi * fa * x[:, 0]) * np.cos(np.pi * fb * x[:, 1]) * np.cos(np.pi * fc * x[:, 2])
        for slot in range(6):
            field = np.zeros((nq, 6))
            field[:, slot] = mode
            yield field
    for q in range(nq):
        for slot in range(6):
            field = np.zeros((nq, 6))
            field[q, slot] = 1.0
            yield field


def build_complement(assembly: FEAssembly, dbasis: DisplacementBasis, l: int,
                     drop_tol: float = DROP_TOL) -> ComplementBasis:
    """First ``l`` D-orthonormal fields orthogonal to ``span{eps(w_n)}``."""
    total = 6 * assembly.n_qp - dbasis.k
    if l > total:
        raise ComplementError(f"l={l} exceeds the complement dimension {total}")
    forward, backward = _d_isometry(assembly)
    Yw = forward(dbasis.strains) if dbasis.k else np.zeros((0, 6 * assembly.n_qp))
    accepted = np.zeros((l, 6 * assembly.n_qp))
    count = 0
    if l:
        for cand in candidate_fields(assembly):
            y = forward(cand)
            ref = np.linalg.norm(y)
            for _ in range(2):  # second pass restores orthogonality lost to rounding
                if dbasis.k:
                    y = y - Yw.T @ (Yw @ y)
                for j in range(count):
                    y = y - (accepted[j] @ y) * accepted[j]
            nrm = np.linalg.norm(y)
            if nrm <= drop_tol * ref:
                continue
            accepted[count] = y / nrm
            count += 1
            if count == l:
                break
    if count < l:
        raise ComplementError(f"only {count} independent complement fields survived, {l} requested")
    return ComplementBasis(backward(accepted))


def d_gram(assembly: FEAssembly, a, b=None):
    """Matrix of ``(a_i, b_j)_D`` for stacks of quadrature fields ``(n, nq, 6)``."""
    b = a if b is None else b
    Da = a @ assembly.D.voigt.T
    return np.einsum("iqs,jqs,q->ij", Da, b, assembly.weights)


def divergence_coupling(assembly: FEAssembly, dbasis: DisplacementBasis, tbasis: TemperatureBasis):
    """``C[n, m] = int div(w_n) v_m dx``."""
    divs = (assembly.div @ dbasis.vectors.T).T  # (k, nq)
    return (divs * assembly.weights) @ tbasis.qp_values.T


@dataclass
class Bases:
    """All Galerkin data for one mesh and truncation pair.

    ``l_theta`` and ``l_zeta`` are the temperature and complement counts;
    they coincide unless the complement is requested larger than the
    temperature space allows.
    """

    assembly: FEAssembly
    disp: DisplacementBasis
    temp: TemperatureBasis
    comp: ComplementBasis

    @property
    def k(self) -> int:
        return self.disp.k

    @property
    def l_theta(self) -> int:
        return self.temp.l

    @property
    def l_zeta(self) -> int:
        return self.comp.l

    @cached_property
    def coupling(self) -> np.ndarray:
        return divergence_coupling(self.assembly, self.disp, self.temp)

    @cached_property
    def div_qp(self) -> np.ndarray:
        """``(k, nq)`` divergence of each displacement basis vector."""
        return (self.assembly.div @ self.disp.vectors.T).T.copy()

    @cached_property
    def D_strains(self) -> np.ndarray:
        return self.disp.strains @ self.assembly.D.voigt.T

    @cached_property
    def D_comp(self) -> np.ndarray:
        return self.comp.fields @ self.assembly.D.voigt.T

    @cached_property
    def mean_div(self) -> np.ndarray:
        return self.div_qp @ self.assembly.weights


def build_bases(assembly: FEAssembly, k: int, l: int, l_zeta: int | None = None) -> Bases:
    disp = solve_displacement_eigs(assembly, k)
    temp = solve_temperature_eigs(assembly, l)
    comp = build_complement(assembly, disp, l if l_zeta is None else l_zeta)
    return Bases(assembly, disp, temp, comp)


def eigen_residuals(K, M, vectors, values):
    """Backward errors ``|K w - lam M w| / ((|K| + |lam| |M|) |w|)`` per pair
    (1-norms of the matrices); well defined for a zero eigenvalue."""
    nK = spla.norm(K, 1) if sp.issparse(K) else np.linalg.norm(K, 1)
    nM = spla.norm(M, 1) if sp.issparse(M) else np.linalg.norm(M, 1)
    out = []
    for w, lam in zip(vectors, values):
        r = np.linalg.norm(K @ w - lam * (M @ w))
        out.append(r / max((nK + abs(lam) * nM) * np.linalg.norm(w), 1e-300))
    return np.array(out)


# ---- cache file --------------------------------------------------------------
# header: b"TVEB", u32 version, 32-byte mesh hash, u32 k, l_theta, l_zeta,
#         n_free, n_nodes, n_qp; body (all <f8): lambda, W, mu, V, zeta
_MAGIC = b"TVEB"
_HEADER = struct.Struct("<4sI32s6I")


def save_bases(path, bases: Bases) -> None:
    a = bases.assembly
    head = _HEADER.pack(_MAGIC, 1, a.mesh.hash(), bases.k, bases.l_theta, bases.l_zeta,
                        a.n_free, a.n_nodes, a.n_qp)
    parts = [bases.disp.eigenvalues, bases.disp.vectors, bases.temp.eigenvalues,
             bases.temp.vectors, bases.comp.fields]
    body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in parts)
    from .io import atomic_write_bytes

    atomic_write_bytes(path, head + body)


def load_bases(path, assembly: FEAssembly) -> Bases:
    raw = open(path, "rb").read()
    magic, version, mhash, k, lt, lz, nf, nn, nq = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a basis cache file")
    if mhash != assembly.mesh.hash() or (nf, nn, nq) != (assembly.n_free, assembly.n_nodes, assembly.n_qp):
        raise ValueError(f"{path}: basis cache was built for a different mesh")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    sizes = [k, k * nf, lt, lt * nn, lz * nq * 6]
    if data.size != sum(sizes):
        raise ValueError(f"{path}: truncated basis cache")
    chunks = np.split(data.astype(float), np.cumsum(sizes)[:-1])
    lam, W, mu, V, Z = chunks
    W = W.reshape(k, nf)
    V = V.reshape(lt, nn)
    disp = DisplacementBasis(W, lam, strain_of(assembly, W).reshape(k, assembly.n_qp, 6))
    temp = TemperatureBasis(V, mu, (assembly.N @ V.T).T.copy())
    return Bases(assembly, disp, temp, ComplementBasis(Z.reshape(lz, nq, 6)))
