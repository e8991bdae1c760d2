"""Energy bookkeeping, a-priori bound monitors and weak-form residual checks.

Energies refer to the Galerkin (homogeneous) part of the solution::

    E = 1/2 (e, e)_D,  e = eps(u) - eps_p,      H = int theta

With the lifting absorbing the data, ``d/dt (E + H)`` equals the work of the
lifted deviatoric stress on the plastic flow, ``int T~^d : G``, plus whatever
the coupling variant fails to cancel and whatever the truncation removes.
``R(t)`` measures exactly that leftover.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre

from .galerkin import (
    CouplingVariant, Problem, Trajectory, _time_weights, evaluate, homogeneous_stress,
    integrate, initial_state, plastic_strain, reconstruct, recover_plastic_strain,
)
from .tensor import contract

Q_MONITOR = 1.2
PROBE_COUNT = 20


@dataclass
class EnergyReport:
    t: np.ndarray
    E: np.ndarray
    H: np.ndarray
    dissipation: np.ndarray
    power: np.ndarray
    residual: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def scale(self) -> float:
        return float(self.E[0] + abs(self.H[0]) + 1.0)

    def rows(self):
        return zip(self.t, self.E, self.H, self.dissipation, self.power, self.residual)

    HEADER = ("t", "E", "H", "dissipation", "power", "residual")


def _homogeneous_strain(problem: Problem, alpha, gamma, delta):
    b = problem.bases
    e = np.zeros((problem.assembly.n_qp, 6))
    if b.k:
        e += np.tensordot(alpha - gamma, b.disp.strains, axes=(0, 0))
    if b.l_zeta:
        e -= np.tensordot(delta, b.comp.fields, axes=(0, 0))
    return e


def potential_energy(problem: Problem, alpha, gamma, delta) -> float:
    a = problem.assembly
    e = _homogeneous_strain(problem, alpha, gamma, delta)
    T = homogeneous_stress(problem, alpha, gamma, delta)
    return 0.5 * float(a.weights @ contract(e, T))


def thermal_energy(problem: Problem, beta) -> float:
    b = problem.bases
    if not b.l_theta:
        return 0.0
    return float(problem.assembly.weights @ (beta @ b.temp.qp_values))


def energy_report(traj: Trajectory) -> EnergyReport:
    p = traj.problem
    lt, k, _ = traj.sizes
    n = len(traj.times)
    E, H, diss, power = (np.empty(n) for _ in range(4))
    for i, (t, xi) in enumerate(zip(traj.times, traj.xi)):
        ev = evaluate(p, t, xi)
        E[i] = potential_energy(p, ev.alpha, xi[lt:lt + k], xi[lt + k:])
        H[i] = thermal_energy(p, xi[:lt])
        diss[i] = ev.dissipation
        power[i] = ev.power
    residual = (E + H) - (E[0] + H[0]) - traj.work
    return EnergyReport(traj.times.copy(), E, H, diss, power, residual, list(traj.flags))


@dataclass
class BoundMonitor:
    sup_E: float
    stress_Lp: float  # ||T~^d + T^d||_{L^p(L^p)}
    G_Lq: float  # ||G||_{L^p'(L^p')}
    dissipation_L1: float
    theta_W1q: float  # ||theta||_{L^q(W^{1,q})}, q = 1.2
    sup_mean_theta: float
    ut_norm: float  # ||eps(u_t)||_{L^p'(L^p')}
    eps_p_rate_norm: float
    p: float

    @property
    def stress_Lp_power(self) -> float:
        return self.stress_Lp ** self.p

    @property
    def energy_stress(self) -> float:
        """``sup_t E + ||T~^d + T^d||^p``, the combination held uniform in k and l."""
        return self.sup_E + self.stress_Lp_power

    def as_dict(self):
        return {
            "sup_E": self.sup_E, "stress_Lp": self.stress_Lp, "G_Lpprime": self.G_Lq,
            "dissipation_L1": self.dissipation_L1, "theta_L1.2_W1.2": self.theta_W1q,
            "sup_int_theta": self.sup_mean_theta, "eps_ut_Lpprime": self.ut_norm,
            "eps_p_rate_Lpprime": self.eps_p_rate_norm,
        }

    def finite(self) -> bool:
        return all(np.isfinite(v) for v in self.as_dict().values())


def bound_monitor(traj: Trajectory, report: EnergyReport | None = None) -> BoundMonitor:
    p = traj.problem
    a = p.assembly
    b = p.bases
    lt, k, _ = traj.sizes
    pexp = float(getattr(p.law, "p", 2.0))
    pq = pexp / (pexp - 1.0)
    q = Q_MONITOR
    w = a.weights
    tw = _time_weights(traj.times)
    s_lp = g_lq = d_l1 = th = ut = ept = 0.0
    mean_theta = []
    for wt, t, xi in zip(tw, traj.times, traj.xi):
        ev = evaluate(p, t, xi)
        beta = xi[:lt]
        s_lp += wt * (w @ np.linalg.norm(ev.stress_dev, axis=1) ** pexp)
        g_lq += wt * (w @ np.linalg.norm(ev.G, axis=1) ** pq)
        d_l1 += wt * (w @ np.abs(contract(ev.stress_dev, ev.G)))
        nodal = p.lifted.theta(t) + (beta @ b.temp.vectors if lt else 0.0)
        grad = np.column_stack([g @ nodal for g in a.grad])
        th += wt * (w @ (np.abs(ev.theta_full) ** q + np.linalg.norm(grad, axis=1) ** q))
        mean_theta.append(float(w @ ev.theta_full))
        strain_rate = np.tensordot(ev.alpha_rate, b.disp.strains, axes=(0, 0)) if k else np.zeros((a.n_qp, 6))
        lifted_rate = (a.B_full @ p.lifted.velocity(t)).reshape(-1, 6)
        ut += wt * (w @ np.linalg.norm(strain_rate + lifted_rate, axis=1) ** pq)
        rate = plastic_strain(p, ev.dxi[lt:lt + k], ev.dxi[lt + k:])
        ept += wt * (w @ np.linalg.norm(rate, axis=1) ** pq)
    report = report or energy_report(traj)
    return BoundMonitor(
        sup_E=float(np.max(report.E)), stress_Lp=float(s_lp ** (1 / pexp)), G_Lq=float(g_lq ** (1 / pq)),
        dissipation_L1=float(d_l1), theta_W1q=float(th ** (1 / q)), sup_mean_theta=float(np.max(mean_theta)),
        ut_norm=float(ut ** (1 / pq)), eps_p_rate_norm=float(ept ** (1 / pq)), p=pexp,
    )


# ---------------------------------------------------------------------------
# weak residuals


def probe_indices(count: int = PROBE_COUNT, degree: int = 3):
    """Multi-indices of tensor Legendre polynomials, by total degree then lexicographic."""
    idx = [(i, j, l) for i in range(degree + 1) for j in range(degree + 1) for l in range(degree + 1)]
    idx.sort(key=lambda m: (sum(m), m))
    return idx[:count]


def legendre_probe(mesh, index, x):
    """``prod_d P_{i_d}(2 x_d / L_d - 1)``."""
    ext = np.asarray(mesh.extents, dtype=float)
    s = 2.0 * np.asarray(x) / ext - 1.0
    out = np.ones(len(x))
    for d, deg in enumerate(index):
        c = np.zeros(deg + 1)
        c[-1] = 1.0
        out = out * legendre.legval(s[:, d], c)
    return out


def time_bump(t, t0, t1):
    """Smooth bump supported on ``(t0, t1)`` with its derivative."""
    t = np.asarray(t, dtype=float)
    s = (2 * t - (t0 + t1)) / (t1 - t0)
    inside = np.abs(s) < 1
    val = np.zeros_like(t)
    der = np.zeros_like(t)
    si = s[inside]
    val[inside] = np.exp(1.0 - 1.0 / (1.0 - si ** 2))
    der[inside] = val[inside] * (-2 * si / (1 - si ** 2) ** 2) * 2 / (t1 - t0)
    return val, der


@dataclass
class WeakResiduals:
    momentum: np.ndarray  # per probe
    heat: np.ndarray
    plastic_recovery: float

    @property
    def worst_momentum(self) -> float:
        return float(np.max(np.abs(self.momentum))) if self.momentum.size else 0.0

    @property
    def worst_heat(self) -> float:
        return float(np.max(np.abs(self.heat))) if self.heat.size else 0.0


def _time_nodes(times, per_interval=6, min_intervals=128):
    """Gauss-Legendre nodes on a uniform grid of at least ``min_intervals``."""
    nodes, wts = legendre.leggauss(per_interval)
    grid = np.linspace(times[0], times[-1], max(len(times) - 1, min_intervals) + 1)
    ts, ws = [], []
    for a_, b_ in zip(grid[:-1], grid[1:]):
        ts.extend(0.5 * (a_ + b_) + 0.5 * (b_ - a_) * nodes)
        ws.extend(0.5 * (b_ - a_) * wts)
    return np.array(ts), np.array(ws)


def _full_fields(traj: Trajectory, t):
    """Full temperature (nodal), full u_t (nodal), evaluation at ``t``."""
    p = traj.problem
    b = p.bases
    a = p.assembly
    lt, k, _ = traj.sizes
    xi = traj.xi_at(t)
    ev = evaluate(p, t, xi)
    theta = p.lifted.theta(t) + (xi[:lt] @ b.temp.vectors if lt else 0.0)
    ut = p.lifted.velocity(t) + (a.expand(ev.alpha_rate @ b.disp.vectors) if k else 0.0)
    return theta, ut, ev, xi


def weak_residuals(traj: Trajectory, probe_count: int = PROBE_COUNT, momentum_probes=None,
                   heat_probes=None) -> WeakResiduals:
    """Space-time weak residuals of the momentum and heat equations.

    Default probes: nodal interpolants of tensor Legendre polynomials (degree
    <= 3); momentum probes are multiplied by the box bubble so they vanish on
    the boundary and cycle through the three directions.  Every probe is
    multiplied by a smooth bump in time, so no initial-value terms appear.
    Custom probes are nodal arrays (``3 nnodes`` for momentum, ``nnodes`` for
    heat).
    """
    p = traj.problem
    a = p.assembly
    mesh = a.mesh
    x = mesh.nodes
    ext = np.asarray(mesh.extents, dtype=float)
    if momentum_probes is None or heat_probes is None:
        idx = probe_indices(probe_count)
        bubble = np.prod(x * (ext - x), axis=1) / np.prod(ext / 2) ** 2
        polys = [legendre_probe(mesh, m, x) for m in idx]
    if momentum_probes is None:
        momentum_probes = []
        for i, poly in enumerate(polys):
            phi = np.zeros((len(x), 3))
            phi[:, i % 3] = bubble * poly
            momentum_probes.append(phi.reshape(-1))
    if heat_probes is None:
        heat_probes = polys
    mom = np.asarray(momentum_probes, dtype=float).reshape(-1, 3 * a.n_nodes)
    heat = np.asarray(heat_probes, dtype=float).reshape(-1, a.n_nodes)

    mom_strain = np.array([(a.B_full @ phi).reshape(-1, 6) for phi in mom])  # (P, nq, 6)
    mom_div = np.array([a.div_full @ phi for phi in mom])
    load_op = a.N_vec.T
    heat_qp = np.array([a.N @ psi for psi in heat])
    heat_grad = np.array([np.column_stack([g @ psi for g in a.grad]) for psi in heat])  # (P, nq, 3)

    ts, ws = _time_nodes(traj.times)
    eta, eta_t = time_bump(ts, traj.times[0], traj.times[-1])
    r_mom = np.zeros(len(mom))
    r_heat = np.zeros(len(heat))
    w = a.weights
    for t, wt, e, e_t in zip(ts, ws, eta, eta_t):
        if e == 0.0 and e_t == 0.0:
            continue
        theta, ut, ev, xi = _full_fields(traj, t)
        f = reconstruct(p, _state_at(traj, t, xi))
        # momentum: int sigma : eps(phi) - int f . phi
        body = np.einsum("pqi,qi->p", mom_strain, f.sigma * w[:, None])
        fq = p.lifted.f(a.qp_coords, t) if not getattr(p.lifted.f, "is_zero", True) else None
        if fq is not None:
            body = body - mom @ (load_op @ (np.repeat(w, 3) * fq.reshape(-1)))
        r_mom += wt * e * body
        # heat: int (-theta psi eta_t + eta grad theta . grad psi + eta c div u_t psi - eta source psi)
        theta_qp = a.N @ theta
        grad_theta = np.column_stack([g @ theta for g in a.grad])
        c = p.variant.heat_coefficient(theta_qp)
        div_ut = a.div_full @ ut
        term = (-e_t * heat_qp @ (w * theta_qp)
                + e * np.einsum("pqd,qd->p", heat_grad, grad_theta * w[:, None])
                + e * heat_qp @ (w * (c * div_ut - ev.heat_source)))
        g_theta = p.lifted.g_theta
        if not getattr(g_theta, "is_zero", True):
            gq = g_theta(a.face_coords, t)
            term = term - e * (heat @ (a.face_N.T @ (a.face_weights * gq)))
        r_heat += wt * term
    recovery = recover_plastic_strain(traj).max_deviation
    return WeakResiduals(r_mom, r_heat, recovery)


def _state_at(traj: Trajectory, t, xi):
    from .galerkin import GalerkinState

    return GalerkinState.from_xi(t, xi, traj.sizes)


# ---------------------------------------------------------------------------
# variant comparison


@dataclass
class VariantComparison:
    symmetric: EnergyReport
    broken: EnergyReport
    drift_quadrature: float  # int int (a(x) - gamma) div u_t for the broken run
    gamma: float

    @property
    def ratio(self) -> float:
        return self.broken.max_residual / max(self.symmetric.max_residual, 1e-300)

    def as_text(self) -> str:
        return "\n".join([
            f"symmetric_max_residual = {self.symmetric.max_residual!r}",
            f"broken_max_residual = {self.broken.max_residual!r}",
            f"ratio = {self.ratio!r}",
            f"broken_gamma = {self.gamma!r}",
            f"broken_drift_quadrature = {self.drift_quadrature!r}",
        ])


def coupling_drift(traj: Trajectory) -> float:
    """``int_0^T int (a(x) - c(x)) div u_t`` by Gauss quadrature on the dense output.

    This is exactly the term the broken coupling fails to cancel in
    ``d/dt (E + H)``.
    """
    p = traj.problem
    lt, _, _ = traj.sizes
    ts, ws = _time_nodes(traj.times)
    total = 0.0
    for t, wt in zip(ts, ws):
        ev = evaluate(p, t, traj.xi_at(t))
        mismatch = p.variant.stress_coefficient(ev.theta_full) - p.variant.heat_coefficient(ev.theta_full)
        total += wt * float(p.assembly.weights @ (mismatch * ev.div_ut))
    return float(total)


def theta_range(traj: Trajectory):
    lo, hi = np.inf, -np.inf
    for t, xi in zip(traj.times, traj.xi):
        th = evaluate(traj.problem, t, xi).theta_full
        lo, hi = min(lo, th.min()), max(hi, th.max())
    return float(lo), float(hi)


def compare_variants(problem: Problem, theta0, eps_p0, config, t_end, samples=101,
                     gamma: float | None = None) -> VariantComparison:
    """Run the symmetric and the broken coupling on identical data.

    Unless given, the broken constant ``gamma`` is placed ``0.5 alpha`` above
    the range of ``alpha (theta - theta_R)`` seen on the symmetric trajectory,
    so the two thermal terms never coincide.
    """
    v = problem.variant
    sym_var = CouplingVariant("symmetric", v.alpha, v.theta_R, v.theta_bar, v.gamma)
    sym = Problem(problem.bases, problem.lifted, problem.law, sym_var, problem.k_trunc, problem.sources)
    s0 = initial_state(sym, theta0, eps_p0)
    traj_s = integrate(sym, s0, config, t_end, samples)
    if gamma is None:
        lo, hi = theta_range(traj_s)
        gamma = v.alpha * (hi - v.theta_R) + 0.5 * v.alpha
    br_var = CouplingVariant("broken", v.alpha, v.theta_R, v.theta_bar, gamma)
    br = Problem(problem.bases, problem.lifted, problem.law, br_var, problem.k_trunc, problem.sources)
    b0 = initial_state(br, theta0, eps_p0)
    traj_b = integrate(br, b0, config, t_end, samples)
    return VariantComparison(energy_report(traj_s), energy_report(traj_b), coupling_drift(traj_b), gamma)
