"""Auxiliary problems that absorb the boundary data and the volume force.

The displacement lift solves the Dirichlet elasticity problem at any requested
time (the data are closed-form, so this is exact in time).  The temperature
lift marches the linear heat problem with implicit Euler on a uniform grid and
is interpolated linearly in between.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .data import ZERO_SCALAR, ZERO_VECTOR
from .fem import FEAssembly, boundary_load, strain_of
from .tensor import apply_D, deviatoric


class _Elliptic:
    """Factorized reduced elasticity system plus the boundary coupling block."""

    def __init__(self, assembly: FEAssembly):
        self.a = assembly
        K = assembly.K_u_full
        self.K_fb = K[assembly.free_dofs][:, assembly.fixed_dofs].tocsr()
        self.solve_free = spla.factorized(sp.csc_matrix(assembly.K_u))
        self.bnode_dofs = assembly.fixed_dofs
        self.load_op = (assembly.N_vec.T @ sp.diags(np.repeat(assembly.weights, 3))).tocsr()

    def __call__(self, g, f, t):
        a = self.a
        u = np.zeros(3 * a.n_nodes)
        x = a.mesh.nodes
        gv = np.asarray(g(x, t), dtype=float).reshape(-1)
        u[self.bnode_dofs] = gv[self.bnode_dofs]
        rhs = -(self.K_fb @ u[self.bnode_dofs])
        if f is not None:
            fq = np.asarray(f(a.qp_coords, t), dtype=float).reshape(-1)
            rhs = rhs + (self.load_op @ fq)[a.free_dofs]
        u[a.free_dofs] = self.solve_free(rhs)
        return u


def _series(solver, g, f, times):
    return np.array([solver(g, f, float(t)) for t in np.atleast_1d(times)])


def lift_displacement(assembly: FEAssembly, g, f, times):
    """Nodal lift ``u~`` (``(nt, 3 nnodes)``) and ``T~ = D eps(u~)`` (``(nt, nq, 6)``)."""
    solver = _Elliptic(assembly)
    u = _series(solver, g, f, times)
    T = apply_D(assembly.D, strain_of(assembly, u, full=True))
    return u, T


def lift_displacement_rate(assembly: FEAssembly, g_t, f_t, times):
    """Same elliptic problem driven by the time-differentiated data."""
    return _series(_Elliptic(assembly), g_t, f_t, times)


class _HeatStepper:
    def __init__(self, assembly: FEAssembly, dt: float):
        if not dt > 0:
            raise ValueError("time step must be positive")
        self.a = assembly
        self.dt = dt
        self.solve = spla.factorized(sp.csc_matrix(assembly.M_theta + dt * assembly.K_theta))
        self.src_op = (assembly.N.T @ sp.diags(assembly.weights)).tocsr()

    def load(self, g_theta, t, div_ut):
        b = np.zeros(self.a.n_nodes)
        if g_theta is not None:
            b += boundary_load(self.a, lambda x: g_theta(x, t))
        if div_ut is not None:
            b -= self.src_op @ div_ut
        return b

    def step(self, theta, b_next):
        return self.solve(self.a.M_theta @ theta + self.dt * b_next)


def lift_temperature(assembly: FEAssembly, g_theta, theta0, u_t_series, alpha: float, times):
    """Implicit-Euler march of ``th_t - lap th + alpha div u~_t = 0`` with
    Neumann flux ``g_theta``; ``times`` must be uniformly spaced."""
    times = np.asarray(times, dtype=float)
    dts = np.diff(times)
    if len(times) > 1 and (np.any(dts <= 0) or np.ptp(dts) > 1e-9 * dts[0]):
        raise ValueError("lift_temperature needs strictly increasing, uniform times")
    a = assembly
    theta = np.asarray(theta0(a.mesh.nodes) if callable(theta0) else theta0, dtype=float)
    out = [theta.copy()]
    if len(times) == 1:
        return np.array(out)
    stepper = _HeatStepper(a, float(dts[0]))
    for n in range(1, len(times)):
        div_ut = None
        if u_t_series is not None:
            div_ut = alpha * (a.div_full @ u_t_series[n])
        theta = stepper.step(theta, stepper.load(g_theta, times[n], div_ut))
        out.append(theta.copy())
    return np.array(out)


@dataclass
class LiftedFields:
    """Time-continuous access to ``u~, u~_t, T~, T~^d, th~``.

    ``g`` and ``f`` are vector descriptors (or callables with a ``rate``
    method); ``g_theta`` and ``theta0`` are scalar descriptors.
    """

    assembly: FEAssembly
    g: object = ZERO_VECTOR
    f: object = ZERO_VECTOR
    g_theta: object = ZERO_SCALAR
    theta0: object = ZERO_SCALAR
    alpha: float = 0.0
    t_end: float = 1.0
    dt: float = 1e-3
    _cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def mechanical_zero(self) -> bool:
        return getattr(self.g, "is_zero", False) and getattr(self.f, "is_zero", False)

    @cached_property
    def thermal_zero(self) -> bool:
        return (self.mechanical_zero and getattr(self.g_theta, "is_zero", False)
                and getattr(self.theta0, "is_zero", False))

    @property
    def is_zero(self) -> bool:
        return self.thermal_zero

    @cached_property
    def _solver(self):
        return _Elliptic(self.assembly)

    def _f(self, rate=False):
        if getattr(self.f, "is_zero", False):
            return None
        return self.f.rate if rate else self.f

    def displacement(self, t):
        if self.mechanical_zero:
            return np.zeros(3 * self.assembly.n_nodes)
        key = ("u", float(t))
        if key not in self._cache:
            self._cache[key] = self._solver(self.g, self._f(), float(t))
        return self._cache[key]

    def velocity(self, t):
        if self.mechanical_zero:
            return np.zeros(3 * self.assembly.n_nodes)
        key = ("ut", float(t))
        if key not in self._cache:
            self._cache[key] = self._solver(self.g.rate, self._f(rate=True), float(t))
        return self._cache[key]

    def stress(self, t):
        """``T~`` at quadrature points."""
        if self.mechanical_zero:
            return np.zeros((self.assembly.n_qp, 6))
        return apply_D(self.assembly.D, strain_of(self.assembly, self.displacement(t), full=True))

    def stress_dev(self, t):
        return deviatoric(self.stress(t))

    def div_velocity(self, t):
        return self.assembly.div_full @ self.velocity(t)

    @cached_property
    def theta_grid(self):
        n = max(1, int(np.ceil(self.t_end / self.dt - 1e-9)))
        times = np.linspace(0.0, self.t_end, n + 1)
        if self.thermal_zero:
            return times, np.zeros((len(times), self.assembly.n_nodes))
        ut = None if self.mechanical_zero else np.array([self.velocity(t) for t in times])
        g_theta = None if getattr(self.g_theta, "is_zero", False) else self.g_theta
        theta = lift_temperature(self.assembly, g_theta, lambda x: self.theta0(x, 0.0),
                                 ut, self.alpha, times)
        return times, theta

    def theta(self, t):
        """Nodal ``th~(t)``, linear in time between march steps."""
        if self.thermal_zero:
            return np.zeros(self.assembly.n_nodes)
        times, vals = self.theta_grid
        t = float(np.clip(t, times[0], times[-1]))
        i = min(int(np.searchsorted(times, t, side="right")) - 1, len(times) - 2)
        s = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - s) * vals[i] + s * vals[i + 1]

    def theta_qp(self, t):
        return self.assembly.N @ self.theta(t)
