"""Norton-Hoff-type flow rules, an empirical check of their admissibility, and truncation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .tensor import contract, deviatoric, norm, trace

TRACE_TOL = 1e-10


class NotTracelessError(ValueError):
    pass


def _check_traceless(td):
    tr = np.abs(trace(td))
    lim = TRACE_TOL * (1.0 + norm(td))
    if np.any(tr > lim):
        worst = float(np.max(tr - lim))
        raise NotTracelessError(f"stress argument is not traceless (excess {worst:.3e})")


@dataclass(frozen=True)
class Kappa:
    """Temperature modulation ``kappa(theta) = base + amp / (1 + (theta/scale)^2)``.

    With ``base >= 1`` and ``amp >= 0`` the range is ``[base, base + amp]``
    (the lower end is approached as ``|theta| -> inf``).
    """

    base: float = 1.0
    amp: float = 1.0
    scale: float = 1.0

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.base + self.amp / (1.0 + (theta / self.scale) ** 2)

    @property
    def lower(self) -> float:
        return self.base

    @property
    def upper(self) -> float:
        return self.base + self.amp


@dataclass(frozen=True)
class NortonHoff:
    """``G(theta, T^d) = kappa(theta) |T^d|^(p-2) T^d``."""

    p: float = 3.0
    kappa: Kappa = field(default_factory=Kappa)
    name: str = "norton-hoff"

    def __post_init__(self):
        if not self.p >= 2.0:
            raise ValueError(f"growth exponent must satisfy p >= 2, got {self.p}")

    @classmethod
    def constant(cls, p: float, kappa: float = 1.0) -> NortonHoff:
        """Temperature-independent variant with ``kappa == const``."""
        return cls(p=p, kappa=Kappa(base=kappa, amp=0.0))

    def __call__(self, theta, td):
        td = np.asarray(td, dtype=float)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), td.shape[:-1])
        mag = norm(td)
        if self.p == 2.0:
            scale = self.kappa(theta)
        else:
            scale = self.kappa(theta) * mag ** (self.p - 2.0)
        return scale[..., None] * td

    @property
    def beta(self) -> float:
        return self.kappa.lower

    @property
    def growth(self) -> float:
        return self.kappa.upper


@dataclass(frozen=True)
class CallableLaw:
    """Wraps an arbitrary ``G(theta, Td)`` for admissibility checking."""

    func: Callable
    p: float = 2.0
    name: str = "user"

    def __call__(self, theta, td):
        td = np.asarray(td, dtype=float)
        theta = np.broadcast_to(np.asarray(theta, dtype=float), td.shape[:-1])
        return np.asarray(self.func(theta, td), dtype=float)


def eval_G(law, theta, td, check: bool = True):
    """Evaluate a flow rule on traceless arguments; result is traceless."""
    td = np.asarray(td, dtype=float)
    if check:
        _check_traceless(td)
    return law(theta, td)


@dataclass
class AssumptionReport:
    law: str
    p: float
    samples: int
    radius: float
    seed: int
    violations: int
    growth_constant: float
    coercivity_constant: float
    worst_monotonicity: float
    worst_growth_sample: list = field(default_factory=list)
    worst_coercivity_sample: list = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.violations == 0 and self.coercivity_constant > 0.0

    def as_text(self) -> str:
        rows = asdict(self)
        rows["admissible"] = self.admissible
        lines = []
        for key, val in rows.items():
            if isinstance(val, list):
                val = " ".join(f"{v:.6g}" for v in val)
            elif isinstance(val, float):
                val = f"{val:.10g}"
            lines.append(f"{key} = {val}")
        return "\n".join(lines) + "\n"


def random_traceless(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    """``n`` traceless tensors with norm uniform in ``[0, radius]``."""
    raw = deviatoric(rng.standard_normal((n, 6)))
    mag = norm(raw)
    mag[mag == 0.0] = 1.0
    return raw / mag[:, None] * (radius * rng.random(n))[:, None]


def check_assumption(law, samples: int, radius: float = 10.0, seed: int = 0,
                     theta_range: float = 10.0, chunk: int = 20000) -> AssumptionReport:
    """Sample monotonicity, growth and coercivity of ``law``.

    This can refute admissibility but never prove it.  Chunks are drawn from
    one generator in order, so the result only depends on ``seed``.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    p = float(law.p)
    rng = np.random.default_rng(seed)
    violations = 0
    worst_mono = np.inf
    growth, growth_at = 0.0, []
    coerc, coerc_at = np.inf, []
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        theta = theta_range * (2.0 * rng.random(n) - 1.0)
        t1 = random_traceless(rng, n, radius)
        t2 = random_traceless(rng, n, radius)
        g1 = law(theta, t1)
        g2 = law(theta, t2)

        mono = contract(g1 - g2, t1 - t2)
        slack = 1e-12 * (1.0 + norm(t1) + norm(t2)) ** (2 * p)
        violations += int(np.count_nonzero(mono < -slack))
        worst_mono = min(worst_mono, float(np.min(mono)))

        ratio = norm(g1) / (1.0 + norm(t1)) ** (p - 1.0)
        i = int(np.argmax(ratio))
        if ratio[i] > growth:
            growth, growth_at = float(ratio[i]), [float(theta[i]), *t1[i].tolist()]

        mag = norm(t1)
        nz = mag > 1e-8
        if np.any(nz):
            cr = contract(g1[nz], t1[nz]) / mag[nz] ** p
            j = int(np.argmin(cr))
            if cr[j] < coerc:
                coerc, coerc_at = float(cr[j]), [float(theta[nz][j]), *t1[nz][j].tolist()]
        done += n
    if not np.isfinite(coerc):
        coerc = 0.0
    return AssumptionReport(
        law=getattr(law, "name", type(law).__name__),
        p=p, samples=samples, radius=radius, seed=seed,
        violations=violations,
        growth_constant=growth,
        coercivity_constant=coerc,
        worst_monotonicity=worst_mono,
        worst_growth_sample=growth_at,
        worst_coercivity_sample=coerc_at,
    )


@dataclass(frozen=True)
class Truncation:
    level: float

    def __post_init__(self):
        if not self.level > 0:
            raise ValueError("truncation level must be positive")

    def __call__(self, x):
        return truncate(self, x)


def truncate(tr: Truncation, x):
    """Clamp to ``[-k, k]``."""
    return np.clip(x, -tr.level, tr.level)
