"""Closed-form boundary, forcing and initial data.

Every descriptor is a finite sum of ``spatial(x) * time_factor(t)`` terms so
that exact time derivatives are available to the lifting problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TIME_KINDS = ("const", "linear", "sin", "cos", "exp")


@dataclass(frozen=True)
class TimeFactor:
    kind: str = "const"
    omega: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.kind not in TIME_KINDS:
            raise ValueError(f"unknown time factor {self.kind!r}; expected one of {TIME_KINDS}")

    def __call__(self, t):
        a, w = self.amplitude, self.omega
        return {
            "const": lambda: a + 0.0 * t,
            "linear": lambda: a * t,
            "sin": lambda: a * np.sin(w * t),
            "cos": lambda: a * np.cos(w * t),
            "exp": lambda: a * np.exp(w * t),
        }[self.kind]()

    def rate(self, t):
        a, w = self.amplitude, self.omega
        return {
            "const": lambda: 0.0 * t,
            "linear": lambda: a + 0.0 * t,
            "sin": lambda: a * w * np.cos(w * t),
            "cos": lambda: -a * w * np.sin(w * t),
            "exp": lambda: a * w * np.exp(w * t),
        }[self.kind]()

    def to_dict(self):
        return {"kind": self.kind, "omega": self.omega, "amplitude": self.amplitude}


@dataclass(frozen=True)
class VectorTerm:
    """``(c + A x) * phi(t)``."""

    constant: tuple = (0.0, 0.0, 0.0)
    gradient: tuple = ((0.0,) * 3,) * 3
    time: TimeFactor = field(default_factory=TimeFactor)

    def spatial(self, x):
        c = np.asarray(self.constant, dtype=float)
        A = np.asarray(self.gradient, dtype=float)
        return c + np.asarray(x, dtype=float) @ A.T

    def to_dict(self):
        return {"constant": list(map(float, self.constant)),
                "gradient": [list(map(float, r)) for r in self.gradient],
                "time": self.time.to_dict()}


@dataclass(frozen=True)
class VectorField:
    terms: tuple = ()

    @property
    def is_zero(self) -> bool:
        return all(not np.any(t.constant) and not np.any(t.gradient) for t in self.terms)

    def __call__(self, x, t):
        out = np.zeros((len(x), 3))
        for term in self.terms:
            out += term.spatial(x) * term.time(t)
        return out

    def rate(self, x, t):
        out = np.zeros((len(x), 3))
        for term in self.terms:
            out += term.spatial(x) * term.time.rate(t)
        return out

    def to_list(self):
        return [t.to_dict() for t in self.terms]


@dataclass(frozen=True)
class ScalarTerm:
    """``(c + a.x + amp * prod_d cos(pi f_d x_d / L_d)) * phi(t)``."""

    constant: float = 0.0
    gradient: tuple = (0.0, 0.0, 0.0)
    cos_amplitude: float = 0.0
    cos_freq: tuple = (0, 0, 0)
    extents: tuple = (1.0, 1.0, 1.0)
    time: TimeFactor = field(default_factory=TimeFactor)

    def spatial(self, x):
        x = np.asarray(x, dtype=float)
        val = self.constant + x @ np.asarray(self.gradient, dtype=float)
        if self.cos_amplitude:
            mode = np.ones(len(x))
            for d in range(3):
                mode = mode * np.cos(np.pi * self.cos_freq[d] * x[:, d] / self.extents[d])
            val = val + self.cos_amplitude * mode
        return val

    def to_dict(self):
        out = {"constant": float(self.constant), "gradient": list(map(float, self.gradient)),
               "time": self.time.to_dict()}
        if self.cos_amplitude:
            out["cos_amplitude"] = float(self.cos_amplitude)
            out["cos_freq"] = list(map(int, self.cos_freq))
        return out


@dataclass(frozen=True)
class ScalarField:
    terms: tuple = ()

    @property
    def is_zero(self) -> bool:
        return all(t.constant == 0 and not np.any(t.gradient) and t.cos_amplitude == 0 for t in self.terms)

    def __call__(self, x, t=0.0):
        out = np.zeros(len(x))
        for term in self.terms:
            out += term.spatial(x) * term.time(t)
        return out

    def rate(self, x, t):
        out = np.zeros(len(x))
        for term in self.terms:
            out += term.spatial(x) * term.time.rate(t)
        return out

    def to_list(self):
        return [t.to_dict() for t in self.terms]


ZERO_VECTOR = VectorField()
ZERO_SCALAR = ScalarField()
