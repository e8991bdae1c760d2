"""Manufactured-solution verification.

The exact triple is ``u* = 0``, ``theta*(x, t) = c0 + A cos(pi x_1 / L_1) e^{-t}``
and a spatially constant ``eps_p*(t) = E0 (1 + sin t / 2)``.  A constant
plastic strain is balanced by zero displacement under homogeneous data, and
``theta*`` has zero normal flux on the box, so only two auxiliary sources are
needed: one added to the flow rule and one to the heat equation (outside the
truncation).  Both are zero in every physical scenario.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import build_bases
from .fem import BoxMesh, assemble
from .galerkin import CouplingVariant, Problem, Sources, initial_state, integrate, plastic_strain, reconstruct
from .lifting import LiftedFields
from .ode import IntegratorConfig
from .tensor import ElasticityTensor, contract, deviatoric


@dataclass(frozen=True)
class Manufactured:
    c0: float = 0.0
    amplitude: float = 1.0
    eps_amplitude: tuple = (0.0,) * 6
    length: float = 1.0

    def theta(self, x, t):
        return self.c0 + self.amplitude * np.cos(np.pi * x[:, 0] / self.length) * np.exp(-t)

    def theta_rate(self, x, t):
        return -self.amplitude * np.cos(np.pi * x[:, 0] / self.length) * np.exp(-t)

    def laplacian(self, x, t):
        return -(np.pi / self.length) ** 2 * self.amplitude * np.cos(np.pi * x[:, 0] / self.length) * np.exp(-t)

    def eps_p(self, t):
        return np.asarray(self.eps_amplitude, dtype=float) * (1.0 + 0.5 * np.sin(t))

    def eps_p_rate(self, t):
        return np.asarray(self.eps_amplitude, dtype=float) * 0.5 * np.cos(t)

    @property
    def has_plastic(self) -> bool:
        return bool(np.any(self.eps_amplitude))

    def sources(self, D: ElasticityTensor, law) -> Sources:
        """Sources making the triple exact for the symmetric coupling."""

        def stress(t):
            return deviatoric(-(self.eps_p(t) @ D.voigt.T))

        def plastic(x, t):
            S = np.broadcast_to(stress(t), (len(x), 6))
            return self.eps_p_rate(t)[None, :] - law(self.theta(x, t), S)

        def heat(x, t):
            S = np.broadcast_to(stress(t), (len(x), 6))
            dissipation = contract(S, law(self.theta(x, t), S))
            return self.theta_rate(x, t) - self.laplacian(x, t) - dissipation

        return Sources(plastic=plastic if self.has_plastic else None, heat=heat)


HEAT_ONLY = Manufactured(c0=0.0, amplitude=1.0)
CONSTANT = Manufactured(c0=0.7, amplitude=0.0)
COUPLED = Manufactured(c0=1.0, amplitude=0.5, eps_amplitude=(0.2, -0.1, -0.1, 0.05, 0.0, 0.1))


@dataclass(frozen=True)
class Rung:
    cells: tuple
    k: int
    l_zeta: int
    tol: float


HEAT_LADDER = (Rung((4, 2, 2), 1, 0, 1e-10), Rung((8, 2, 2), 1, 0, 1e-10), Rung((16, 2, 2), 1, 0, 1e-10))
COUPLED_LADDER = (Rung((2, 2, 2), 1, 6, 1e-6), Rung((4, 2, 2), 2, 6, 1e-8), Rung((8, 2, 2), 4, 6, 1e-10))


@dataclass
class MMSRow:
    h: float
    k: int
    l_theta: int
    l_zeta: int
    tol: float
    err_u: float
    err_theta: float
    err_eps_p: float

    HEADER = ("h", "k", "l_theta", "l_zeta", "tol", "err_u", "err_theta", "err_eps_p")

    def as_tuple(self):
        return (self.h, self.k, self.l_theta, self.l_zeta, self.tol, self.err_u, self.err_theta, self.err_eps_p)


def run_rung(solution: Manufactured, rung: Rung, law, D: ElasticityTensor, t_end: float = 0.5,
             alpha: float = 1.0) -> MMSRow:
    """One solve with the full temperature space on a ``rung.cells`` box mesh."""
    mesh = BoxMesh((solution.length, 1.0, 1.0), rung.cells)
    a = assemble(mesh, D)
    bases = build_bases(a, rung.k, a.n_nodes, rung.l_zeta)
    problem = Problem(bases, LiftedFields(a, t_end=t_end), law,
                      CouplingVariant("symmetric", alpha=alpha, theta_bar=1.0),
                      sources=solution.sources(D, law))
    eps0 = np.broadcast_to(solution.eps_p(0.0), (a.n_qp, 6))
    state0 = initial_state(problem, lambda x: solution.theta(x, 0.0), eps0)
    config = IntegratorConfig(rtol=rung.tol, atol=rung.tol)
    traj = integrate(problem, state0, config, t_end, samples=2)
    final = traj.state(len(traj.times) - 1)
    fields = reconstruct(problem, final)
    w = a.weights
    u_qp = (a.N_vec @ fields.u).reshape(-1, 3)
    err_u = np.sqrt(w @ np.sum(u_qp ** 2, axis=1))
    err_theta = np.sqrt(w @ (fields.theta_qp - solution.theta(a.qp_coords, t_end)) ** 2)
    lt, k, _ = problem.sizes
    eps = plastic_strain(problem, final.gamma, final.delta)
    err_eps = np.sqrt(w @ np.sum((eps - solution.eps_p(t_end)) ** 2, axis=1))
    return MMSRow(float(mesh.spacing[0]), rung.k, bases.l_theta, bases.l_zeta, rung.tol,
                  float(err_u), float(err_theta), float(err_eps))


def mms_verify(solution: Manufactured, ladder, law, D: ElasticityTensor | None = None,
               t_end: float = 0.5) -> list[MMSRow]:
    D = D or ElasticityTensor.isotropic(1.0, 1.0)
    return [run_rung(solution, r, law, D, t_end) for r in ladder]


def observed_orders(rows, key="err_theta"):
    errs = np.array([getattr(r, key) for r in rows])
    hs = np.array([r.h for r in rows])
    return np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])
