"""Explicit Runge-Kutta integrators with dense output.

``dopri5`` is the Dormand-Prince 5(4) pair: the fifth-order solution is
propagated, the embedded fourth-order one drives step control, and the
Shampine continuous extension gives fourth-order dense output.  ``rk4`` is the
classical fixed-step scheme with cubic Hermite dense output, kept for
convergence studies.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between fifth- and fourth-order weights (7 stages, FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


class StepSizeUnderflow(RuntimeError):
    def __init__(self, message, t, y):
        super().__init__(message)
        self.t = t
        self.y = y


class NonFiniteError(FloatingPointError):
    pass


@dataclass
class IntegratorConfig:
    method: str = "dopri5"
    rtol: float = 1e-8
    atol: float = 1e-10
    h_min: float = 1e-12
    h_max: float = np.inf
    step: float = 1e-2  # fixed step for rk4
    k_trunc: float = 1e6
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("dopri5", "rk4"):
            raise ValueError(f"unknown integration method {self.method!r}")
        if not (self.rtol > 0 and self.atol > 0 and self.k_trunc > 0 and self.step > 0):
            raise ValueError("tolerances, step and truncation level must be positive")


@dataclass
class DenseSolution:
    """Piecewise polynomial ``y(t)`` over the accepted steps."""

    t: list = field(default_factory=list)  # step start times
    h: list = field(default_factory=list)
    y0: list = field(default_factory=list)
    Q: list = field(default_factory=list)  # (dim, 4) per step, y = y0 + Q @ [s, s^2, s^3, s^4]
    n_eval: int = 0

    @property
    def t_end(self):
        return self.t[-1] + self.h[-1]

    def __call__(self, t):
        t = float(t)
        i = int(np.searchsorted(self.t, t, side="right")) - 1
        i = min(max(i, 0), len(self.t) - 1)
        s = (t - self.t[i]) / self.h[i]
        return self.y0[i] + self.Q[i] @ np.array([s, s * s, s ** 3, s ** 4])


def _dopri_step(f, t, y, h, k0):
    K = np.empty((7, y.size))
    K[0] = k0
    for s in range(1, 6):
        dy = h * (np.asarray(_A[s]) @ K[:s])
        K[s] = f(t + _C[s] * h, y + dy)
    y_new = y + h * (_B @ K[:6])
    K[6] = f(t + h, y_new)
    err = h * (_E @ K)
    return y_new, err, K


def _initial_step(f, t0, y0, f0, rtol, atol, order=5):
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def integrate_ode(f, t0, y0, t_end, config: IntegratorConfig, error_slice=None) -> DenseSolution:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t_end``.

    ``error_slice`` restricts the step-control norm to part of the state (the
    rest, e.g. running quadratures, rides along without steering the steps).
    """
    if not t_end > t0:
        raise ValueError("t_end must exceed the initial time")
    y = np.array(y0, dtype=float)
    calls = [0]

    def rhs(t, yy):
        calls[0] += 1
        out = f(t, yy)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError(f"non-finite right-hand side at t={t:.6g}")
        return out

    sol = DenseSolution()
    if config.method == "rk4":
        _run_rk4(rhs, t0, y, t_end, config, sol)
    else:
        _run_dopri(rhs, t0, y, t_end, config, sol, error_slice)
    sol.n_eval = calls[0]
    return sol


def _run_rk4(f, t, y, t_end, config, sol):
    n = max(1, int(np.ceil((t_end - t) / config.step - 1e-9)))
    h = (t_end - t) / n
    k1 = f(t, y)
    for i in range(n):
        tn = t + i * h  # avoids drift from repeated addition
        k2 = f(tn + h / 2, y + h / 2 * k1)
        k3 = f(tn + h / 2, y + h / 2 * k2)
        k4 = f(tn + h, y + h * k3)
        y_new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        k_new = f(tn + h, y_new)
        # cubic Hermite through (y, h k1) and (y_new, h k_new)
        dy = y_new - y
        c1 = h * k1
        c2 = 3 * dy - 2 * h * k1 - h * k_new
        c3 = -2 * dy + h * k1 + h * k_new
        sol.t.append(tn)
        sol.h.append(h)
        sol.y0.append(y.copy())
        sol.Q.append(np.column_stack([c1, c2, c3, np.zeros_like(y)]))
        y, k1 = y_new, k_new


def _run_dopri(f, t, y, t_end, config, sol, error_slice):
    sel = slice(None) if error_slice is None else error_slice
    k0 = f(t, y)
    h = min(_initial_step(f, t, y, k0, config.rtol, config.atol), config.h_max, t_end - t)
    steps = 0
    while t < t_end:
        if steps >= config.max_steps:
            raise StepSizeUnderflow(f"exceeded {config.max_steps} steps at t={t:.6g}", t, y.copy())
        if h < config.h_min:
            raise StepSizeUnderflow(f"step size {h:.3e} below minimum at t={t:.6g}", t, y.copy())
        last = t + h >= t_end - 1e-14 * max(1.0, abs(t_end))
        if last:
            h = t_end - t
        y_new, err, K = _dopri_step(f, t, y, h, k0)
        scale = config.atol + config.rtol * np.maximum(np.abs(y[sel]), np.abs(y_new[sel]))
        enorm = np.sqrt(np.mean((err[sel] / scale) ** 2)) if y[sel].size else 0.0
        if enorm <= 1.0:
            sol.t.append(t)
            sol.h.append(h)
            sol.y0.append(y.copy())
            sol.Q.append(h * (K.T @ _P))
            t = t_end if last else t + h
            y, k0 = y_new, K[6]
            steps += 1
            fac = 5.0 if enorm == 0 else min(5.0, 0.9 * enorm ** -0.2)
            h = min(h * fac, config.h_max)
        else:
            h = h * max(0.2, 0.9 * enorm ** -0.2)
