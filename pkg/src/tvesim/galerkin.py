"""Coefficient dynamics of the two-level Galerkin approximation.

Unknowns (homogeneous part, after lifting)::

    u     = sum_n alpha_n w_n          (n <= k)
    theta = sum_m beta_m v_m           (m <= l_theta)
    eps_p = sum_n gamma_n eps(w_n) + sum_m delta_m zeta_m

With ``(eps(w_i), eps(w_j))_D = delta_ij`` and ``zeta`` D-orthonormal and
D-orthogonal to every ``eps(w_n)``, projecting the flow rule gives
``gamma_n' = (G, eps(w_n))_D`` and ``delta_m' = (G, zeta_m)_D``; the momentum
equation tested by ``w_n`` gives ``alpha_n = gamma_n + int a(x) div w_n``
where ``a`` is the thermal stress coefficient.  Only ``xi = (beta, gamma,
delta)`` is integrated.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .basis import Bases
from .constitutive import Truncation
from .lifting import LiftedFields
from .ode import IntegratorConfig, NonFiniteError, StepSizeUnderflow, integrate_ode
from .tensor import IDENTITY, contract, deviatoric

log = logging.getLogger(__name__)

VARIANTS = ("symmetric", "broken", "nonlinear")


@dataclass(frozen=True)
class CouplingVariant:
    """Thermal-expansion model.

    ``symmetric``: stress ``T - alpha*theta_bar I``, heat coupling
    ``alpha*theta_bar div u_t``.  ``broken``: stress
    ``T - alpha (theta - theta_R) I``, heat coupling ``gamma div u_t``.
    ``nonlinear``: ``alpha (theta - theta_R)`` in both places (no existence
    theory; runs are flagged).
    """

    kind: str = "symmetric"
    alpha: float = 1.0
    theta_R: float = 0.0
    theta_bar: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise ValueError(f"unknown coupling variant {self.kind!r}; expected one of {VARIANTS}")
        if self.kind == "symmetric" and not self.alpha * self.theta_bar > 0:
            raise ValueError("the linearized expansion constant alpha*theta_bar must be positive")

    @property
    def linear_constant(self) -> float:
        return self.alpha * self.theta_bar

    @property
    def has_theory(self) -> bool:
        return self.kind != "nonlinear"

    def stress_coefficient(self, theta_full):
        """Thermal stress factor ``a(x)`` such that ``sigma = T - a I``."""
        if self.kind == "symmetric":
            return np.full_like(theta_full, self.linear_constant)
        return self.alpha * (theta_full - self.theta_R)

    def heat_coefficient(self, theta_full):
        if self.kind == "symmetric":
            return np.full_like(theta_full, self.linear_constant)
        if self.kind == "broken":
            return np.full_like(theta_full, self.gamma)
        return self.alpha * (theta_full - self.theta_R)


@dataclass
class Sources:
    """Auxiliary manufactured-solution sources; zero in every physical run."""

    plastic: Callable | None = None  # (x_qp, t) -> (nq, 6)
    heat: Callable | None = None  # (x_qp, t) -> (nq,)


@dataclass
class Problem:
    bases: Bases
    lifted: LiftedFields
    law: object
    variant: CouplingVariant
    k_trunc: float = 1e6
    sources: Sources = field(default_factory=Sources)

    @property
    def assembly(self):
        return self.bases.assembly

    @cached_property
    def truncation(self) -> Truncation:
        return Truncation(self.k_trunc)

    @property
    def sizes(self):
        b = self.bases
        return b.l_theta, b.k, b.l_zeta

    @cached_property
    def weighted_D_strains(self):
        return self.bases.D_strains * self.assembly.weights[None, :, None]

    @cached_property
    def weighted_D_comp(self):
        return self.bases.D_comp * self.assembly.weights[None, :, None]

    @cached_property
    def weighted_v(self):
        return self.bases.temp.qp_values * self.assembly.weights[None, :]

    @cached_property
    def weighted_div(self):
        return self.bases.div_qp * self.assembly.weights[None, :]


@dataclass
class GalerkinState:
    t: float
    beta: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray | None = None

    @property
    def xi(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma, self.delta])

    @classmethod
    def from_xi(cls, t, xi, sizes, alpha=None) -> GalerkinState:
        lt, k, lz = sizes
        xi = np.asarray(xi, dtype=float)
        return cls(t, xi[:lt].copy(), xi[lt:lt + k].copy(), xi[lt + k:lt + k + lz].copy(), alpha)

    @classmethod
    def zeros(cls, sizes, t=0.0) -> GalerkinState:
        return cls.from_xi(t, np.zeros(sum(sizes)), sizes)


@dataclass
class Evaluation:
    """Everything computed while evaluating the right-hand side at one state."""

    dxi: np.ndarray
    alpha: np.ndarray
    alpha_rate: np.ndarray
    theta_full: np.ndarray  # qp
    stress_dev: np.ndarray  # (T~ + T)^d at qp
    lifted_dev: np.ndarray
    G: np.ndarray
    heat_source: np.ndarray  # truncated, qp
    dissipation: float  # int (T~+T)^d : G
    power: float  # int T~^d : G
    div_ut: np.ndarray  # qp, homogeneous part


def _alpha_from(problem: Problem, gamma, theta_full):
    """Stationarity of the momentum equation: ``alpha_n = gamma_n + int a div w_n``.

    For a constant ``a`` the integral vanishes up to rounding, so the
    symmetric coupling gives ``alpha = gamma``.
    """
    if not problem.bases.k:
        return gamma.copy()
    a = problem.variant.stress_coefficient(theta_full)
    return gamma + problem.weighted_div @ a


def homogeneous_stress(problem: Problem, alpha, gamma, delta):
    """``T = D(eps(u) - eps_p)`` of the homogeneous part at quadrature points."""
    b = problem.bases
    T = np.tensordot(alpha - gamma, b.D_strains, axes=(0, 0)) if b.k else 0.0
    if b.l_zeta:
        T = T - np.tensordot(delta, b.D_comp, axes=(0, 0))
    return np.broadcast_to(T, (problem.assembly.n_qp, 6)) if np.ndim(T) == 0 else T


def evaluate(problem: Problem, t: float, xi) -> Evaluation:
    b = problem.bases
    a = problem.assembly
    lt, k, lz = problem.sizes
    beta, gamma, delta = xi[:lt], xi[lt:lt + k], xi[lt + k:lt + k + lz]
    lifted = problem.lifted
    variant = problem.variant

    theta_qp = beta @ b.temp.qp_values if lt else np.zeros(a.n_qp)
    theta_full = lifted.theta_qp(t) + theta_qp
    alpha = _alpha_from(problem, gamma, theta_full)

    T = homogeneous_stress(problem, alpha, gamma, delta)
    lifted_dev = lifted.stress_dev(t)
    S = lifted_dev + deviatoric(T)
    G_law = problem.law(theta_full, S)
    G = G_law
    if problem.sources.plastic is not None:
        G = G_law + problem.sources.plastic(a.qp_coords, t)

    gamma_rate = np.tensordot(problem.weighted_D_strains, G, axes=([1, 2], [0, 1])) if k else np.zeros(0)
    delta_rate = np.tensordot(problem.weighted_D_comp, G, axes=([1, 2], [0, 1])) if lz else np.zeros(0)

    raw_source = contract(S, G_law)
    source = problem.truncation(raw_source)
    if problem.sources.heat is not None:
        source = source + problem.sources.heat(a.qp_coords, t)
    r = problem.weighted_v @ source - b.temp.eigenvalues * beta

    C = b.coupling  # (k, lt)
    if variant.kind == "symmetric":
        alpha_rate = gamma_rate
        c = variant.linear_constant
        beta_rate = r - c * (C.T @ alpha_rate)
    else:
        theta_lift_rate = _theta_lift_rate(lifted, t)
        h = problem.weighted_div @ theta_lift_rate if k else np.zeros(0)
        ax = variant.alpha
        if variant.kind == "broken":
            E = variant.gamma * C.T  # (lt, k)
        else:
            c_qp = variant.heat_coefficient(theta_full)
            E = (problem.weighted_v * c_qp[None, :]) @ b.div_qp.T  # (lt, k)
        lhs = np.eye(lt) + ax * (E @ C)
        beta_rate = np.linalg.solve(lhs, r - E @ (gamma_rate + ax * h))
        alpha_rate = gamma_rate + ax * (h + C @ beta_rate)

    div_ut = alpha_rate @ b.div_qp if k else np.zeros(a.n_qp)
    dxi = np.concatenate([beta_rate, gamma_rate, delta_rate])
    if not np.all(np.isfinite(dxi)):
        raise NonFiniteError(f"non-finite coefficient rates at t={t:.6g}")
    w = a.weights
    return Evaluation(
        dxi=dxi, alpha=alpha, alpha_rate=alpha_rate, theta_full=theta_full, stress_dev=S,
        lifted_dev=lifted_dev, G=G, heat_source=source,
        dissipation=float(w @ raw_source), power=float(w @ contract(lifted_dev, G_law)), div_ut=div_ut,
    )


def _theta_lift_rate(lifted: LiftedFields, t):
    if lifted.thermal_zero:
        return np.zeros(lifted.assembly.n_qp)
    times, vals = lifted.theta_grid
    i = min(max(int(np.searchsorted(times, t, side="right")) - 1, 0), len(times) - 2)
    return lifted.assembly.N @ ((vals[i + 1] - vals[i]) / (times[i + 1] - times[i]))


def rhs(state: GalerkinState, problem: Problem) -> np.ndarray:
    """``d xi / dt`` at ``state``."""
    return evaluate(problem, state.t, state.xi).dxi


def initial_state(problem: Problem, theta0, eps_p0, k_trunc: float | None = None) -> GalerkinState:
    """Project truncated ``theta0`` (L2) and ``eps_p0`` (D inner product).

    ``theta0`` is a nodal vector, a quadrature-point vector or a callable of
    the coordinates; ``eps_p0`` is ``(nq, 6)`` or a callable.
    """
    b = problem.bases
    a = problem.assembly
    k_trunc = problem.k_trunc if k_trunc is None else k_trunc
    if callable(theta0):
        th = np.asarray(theta0(a.qp_coords), dtype=float)
    else:
        th = np.asarray(theta0, dtype=float)
        if th.shape == (a.n_nodes,):
            th = a.N @ th
        elif th.shape != (a.n_qp,):
            raise ValueError(f"theta0 has shape {th.shape}; expected ({a.n_nodes},) or ({a.n_qp},)")
    th = Truncation(k_trunc)(th)
    eps = np.asarray(eps_p0(a.qp_coords) if callable(eps_p0) else eps_p0, dtype=float)
    if eps.shape != (a.n_qp, 6):
        raise ValueError(f"eps_p0 has shape {eps.shape}; expected ({a.n_qp}, 6)")
    beta = problem.weighted_v @ th
    gamma = np.tensordot(problem.weighted_D_strains, eps, axes=([1, 2], [0, 1])) if b.k else np.zeros(0)
    delta = np.tensordot(problem.weighted_D_comp, eps, axes=([1, 2], [0, 1])) if b.l_zeta else np.zeros(0)
    state = GalerkinState(0.0, beta, gamma, delta)
    state.alpha = evaluate(problem, 0.0, state.xi).alpha
    return state


@dataclass
class Trajectory:
    problem: Problem
    dense: object
    times: np.ndarray
    xi: np.ndarray  # (nt, dim)
    work: np.ndarray  # int_0^t power
    dissipated: np.ndarray  # int_0^t dissipation
    n_eval: int
    config: IntegratorConfig
    flags: list = field(default_factory=list)

    @property
    def sizes(self):
        return self.problem.sizes

    def state(self, i: int) -> GalerkinState:
        ev = evaluate(self.problem, self.times[i], self.xi[i])
        return GalerkinState.from_xi(self.times[i], self.xi[i], self.sizes, ev.alpha)

    def xi_at(self, t: float) -> np.ndarray:
        return self.dense(t)[: sum(self.sizes)]

    def split(self):
        lt, k, lz = self.sizes
        return self.xi[:, :lt], self.xi[:, lt:lt + k], self.xi[:, lt + k:]


def integrate(problem: Problem, state0: GalerkinState, config: IntegratorConfig, t_end: float,
              samples: int | np.ndarray = 101) -> Trajectory:
    """Integrate the coefficient system and sample it.

    Two running integrals ride along (excluded from step control): the work of
    the lifted stress on the plastic flow, and the total dissipation.
    """
    if problem.k_trunc != config.k_trunc:
        problem = Problem(problem.bases, problem.lifted, problem.law, problem.variant,
                          config.k_trunc, problem.sources)
    dim = state0.xi.size
    t0 = state0.t

    def f(t, y):
        ev = evaluate(problem, t, y[:dim])
        return np.concatenate([ev.dxi, [ev.power, ev.dissipation]])

    y0 = np.concatenate([state0.xi, [0.0, 0.0]])
    try:
        dense = integrate_ode(f, t0, y0, t_end, config, error_slice=slice(0, dim))
    except StepSizeUnderflow as exc:
        log.error("integration stopped at t=%.6g: %s", exc.t, exc)
        raise
    times = np.linspace(t0, t_end, samples) if np.isscalar(samples) else np.asarray(samples, dtype=float)
    Y = np.array([dense(t) for t in times])
    Y[0] = y0
    flags = [] if problem.variant.has_theory else ["no-theory"]
    return Trajectory(problem, dense, times, Y[:, :dim], Y[:, dim], Y[:, dim + 1],
                      dense.n_eval, config, flags)


@dataclass
class ReconstructedFields:
    t: float
    u: np.ndarray  # full nodal displacement (lift + Galerkin)
    theta: np.ndarray  # nodal temperature (lift + Galerkin)
    theta_qp: np.ndarray
    eps_p: np.ndarray  # (nq, 6)
    strain: np.ndarray  # eps(u) at qp
    T: np.ndarray
    T_dev: np.ndarray
    sigma: np.ndarray


def plastic_strain(problem: Problem, gamma, delta):
    b = problem.bases
    out = np.zeros((problem.assembly.n_qp, 6))
    if b.k:
        out += np.tensordot(gamma, b.disp.strains, axes=(0, 0))
    if b.l_zeta:
        out += np.tensordot(delta, b.comp.fields, axes=(0, 0))
    return out


def reconstruct(problem: Problem, state: GalerkinState) -> ReconstructedFields:
    b = problem.bases
    a = problem.assembly
    t = state.t
    theta_nodes = problem.lifted.theta(t) + (state.beta @ b.temp.vectors if b.l_theta else 0.0)
    theta_qp = a.N @ theta_nodes
    alpha = _alpha_from(problem, state.gamma, theta_qp)
    u = problem.lifted.displacement(t) + (a.expand(alpha @ b.disp.vectors) if b.k else 0.0)
    strain = (a.B_full @ u).reshape(-1, 6)
    eps_p = plastic_strain(problem, state.gamma, state.delta)
    T = (strain - eps_p) @ a.D.voigt.T
    coef = problem.variant.stress_coefficient(theta_qp)
    sigma = T - coef[:, None] * IDENTITY[None, :]
    return ReconstructedFields(t, u, theta_nodes, theta_qp, eps_p, strain, T, deviatoric(T), sigma)


def _time_weights(times):
    """Composite Simpson weights on uniform samples (trapezoid fallback)."""
    n = len(times)
    h = np.diff(times)
    if n >= 3 and (n - 1) % 2 == 0 and np.ptp(h) < 1e-9 * h[0]:
        w = np.ones(n)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        return w * h[0] / 3.0
    w = np.zeros(n)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass
class PlasticRecovery:
    times: np.ndarray
    integral_form: np.ndarray  # (nt, nq, 6)
    coefficient_form: np.ndarray
    deviation: np.ndarray  # max over qp per time

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviation))


def recover_plastic_strain(traj: Trajectory, eps_p0=None, nodes_per_interval: int = 4) -> PlasticRecovery:
    """Recompute ``eps_p(t) = eps_p(0) + int_0^t G`` pointwise by Gauss-Legendre
    quadrature on the dense trajectory and compare with the coefficient
    reconstruction.  ``eps_p0`` defaults to the projected initial field, which
    makes the comparison exact when the basis spans the whole tensor space."""
    p = traj.problem
    lt, k, lz = traj.sizes
    nodes, wts = np.polynomial.legendre.leggauss(nodes_per_interval)
    times = traj.times
    coef = np.array([plastic_strain(p, x[lt:lt + k], x[lt + k:]) for x in traj.xi])
    base = coef[0] if eps_p0 is None else np.asarray(eps_p0, dtype=float)
    integral = np.empty_like(coef)
    integral[0] = base
    acc = base.copy()
    for i in range(1, len(times)):
        a_, b_ = times[i - 1], times[i]
        for s, wq in zip(nodes, wts):
            tq = 0.5 * (a_ + b_) + 0.5 * (b_ - a_) * s
            acc = acc + 0.5 * (b_ - a_) * wq * evaluate(p, tq, traj.xi_at(tq)).G
        integral[i] = acc
    dev = np.max(np.abs(integral - coef), axis=(1, 2))
    return PlasticRecovery(times, integral, coef, dev)
