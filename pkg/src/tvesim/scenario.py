"""Scenario files: parsing, serialization and assembly into a runnable problem.

A scenario is a YAML document with the sections ``mesh``, ``material``,
``variant``, ``data``, ``initial``, ``galerkin``, ``integrator``, ``time``
and ``output``.  Missing keys take the defaults of :class:`Scenario`.
Parsing then serializing reproduces the same document, key for key.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .basis import Bases, build_bases
from .constitutive import Kappa, NortonHoff
from .data import ScalarField, ScalarTerm, TimeFactor, VectorField, VectorTerm
from .fem import BoxMesh, FEAssembly, assemble
from .galerkin import CouplingVariant, Problem
from .lifting import LiftedFields
from .ode import IntegratorConfig
from .tensor import ElasticityTensor, deviatoric, norm


class ScenarioError(ValueError):
    """Invalid scenario content (maps to the validation exit code)."""


@dataclass
class MeshSpec:
    extents: list = field(default_factory=lambda: [1.0, 1.0, 1.0])
    cells: list = field(default_factory=lambda: [4, 4, 4])


@dataclass
class MaterialSpec:
    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    p: float = 3.0
    kappa_base: float = 1.0
    kappa_amp: float = 1.0
    kappa_scale: float = 1.0
    alpha: float = 1.0
    theta_R: float = 0.0
    theta_bar: float = 1.0
    gamma: float = 1.0


@dataclass
class InitialSpec:
    # theta0: "eigenmode" (amplitude * v_index) or "field" (scalar terms)
    theta_kind: str = "eigenmode"
    theta_index: int = 2
    theta_amplitude: float = 1.0
    theta_terms: list = field(default_factory=list)
    # eps_p0: "random_traceless" (seeded constant tensor of given norm) or "constant"
    eps_kind: str = "random_traceless"
    eps_radius: float = 0.1
    eps_value: list = field(default_factory=lambda: [0.0] * 6)


@dataclass
class GalerkinSpec:
    k: int = 8
    l: int = 8
    l_zeta: int | None = None
    k_trunc: float = 1e6


@dataclass
class IntegratorSpec:
    method: str = "dopri5"
    rtol: float = 1e-9
    atol: float = 1e-9
    h_min: float = 1e-12
    h_max: float | None = None
    step: float = 1e-2


@dataclass
class TimeSpec:
    t_end: float = 1.0
    samples: int = 11
    lift_dt: float = 1e-3


@dataclass
class OutputSpec:
    dir: str = "out"
    field_times: list = field(default_factory=lambda: [0.0, 1.0])


@dataclass
class DataSpec:
    g: list = field(default_factory=list)
    f: list = field(default_factory=list)
    g_theta: list = field(default_factory=list)


@dataclass
class Scenario:
    name: str = "scenario"
    seed: int = 0
    variant: str = "symmetric"
    mesh: MeshSpec = field(default_factory=MeshSpec)
    material: MaterialSpec = field(default_factory=MaterialSpec)
    data: DataSpec = field(default_factory=DataSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    galerkin: GalerkinSpec = field(default_factory=GalerkinSpec)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def save(self, path) -> None:
        from .io import atomic_write_text

        atomic_write_text(path, self.dumps())

    @classmethod
    def from_dict(cls, raw: dict) -> Scenario:
        if not isinstance(raw, dict):
            raise ScenarioError("scenario must be a mapping")
        raw = copy.deepcopy(raw)
        sections = {
            "mesh": MeshSpec, "material": MaterialSpec, "data": DataSpec, "initial": InitialSpec,
            "galerkin": GalerkinSpec, "integrator": IntegratorSpec, "time": TimeSpec, "output": OutputSpec,
        }
        kwargs = {}
        for key, value in raw.items():
            if key in sections:
                if not isinstance(value, dict):
                    raise ScenarioError(f"section {key!r} must be a mapping")
                try:
                    kwargs[key] = sections[key](**value)
                except TypeError as exc:
                    raise ScenarioError(f"section {key!r}: {exc}") from None
            elif key in ("name", "seed", "variant"):
                kwargs[key] = value
            else:
                raise ScenarioError(f"unknown scenario key {key!r}")
        sc = cls(**kwargs)
        sc._coerce()
        sc.validate()
        return sc

    @classmethod
    def loads(cls, text: str) -> Scenario:
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from None
        return cls.from_dict(raw or {})

    @classmethod
    def load(cls, path) -> Scenario:
        return cls.loads(Path(path).read_text())

    def _coerce(self):
        m, mat, g, it, tm = self.mesh, self.material, self.galerkin, self.integrator, self.time
        try:
            m.extents = [float(v) for v in m.extents]
            m.cells = [int(v) for v in m.cells]
            for name in vars(mat):
                setattr(mat, name, float(getattr(mat, name)))
            g.k, g.l = int(g.k), int(g.l)
            g.l_zeta = None if g.l_zeta is None else int(g.l_zeta)
            g.k_trunc = float(g.k_trunc)
            for name in ("rtol", "atol", "h_min", "step"):
                setattr(it, name, float(getattr(it, name)))
            it.h_max = None if it.h_max is None else float(it.h_max)
            tm.t_end, tm.samples, tm.lift_dt = float(tm.t_end), int(tm.samples), float(tm.lift_dt)
            self.seed = int(self.seed)
            self.initial.theta_index = int(self.initial.theta_index)
            self.initial.theta_amplitude = float(self.initial.theta_amplitude)
            self.initial.eps_radius = float(self.initial.eps_radius)
            self.initial.eps_value = [float(v) for v in self.initial.eps_value]
            self.output.field_times = [float(v) for v in self.output.field_times]
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad numeric value: {exc}") from None

    def validate(self):
        if self.variant not in ("symmetric", "broken", "nonlinear"):
            raise ScenarioError(f"unknown variant {self.variant!r}")
        if len(self.mesh.extents) != 3 or len(self.mesh.cells) != 3:
            raise ScenarioError("mesh needs three extents and three cell counts")
        if min(self.mesh.cells) < 2 or min(self.mesh.extents) <= 0:
            raise ScenarioError("mesh needs at least two cells per axis and positive extents")
        if self.material.p < 2:
            raise ScenarioError(f"growth exponent p must be >= 2, got {self.material.p}")
        if self.material.kappa_base < 1 or self.material.kappa_amp < 0:
            raise ScenarioError("kappa needs base >= 1 and amp >= 0")
        if self.galerkin.k < 1 or self.galerkin.l < 1:
            raise ScenarioError("k and l must be positive")
        if not self.galerkin.k_trunc > 0:
            raise ScenarioError("k_trunc must be positive")
        if not (self.integrator.rtol > 0 and self.integrator.atol > 0):
            raise ScenarioError("integrator tolerances must be positive")
        if self.integrator.method not in ("dopri5", "rk4"):
            raise ScenarioError(f"unknown integrator {self.integrator.method!r}")
        if not self.time.t_end > 0 or self.time.samples < 2:
            raise ScenarioError("t_end must be positive and samples >= 2")
        if self.initial.theta_kind not in ("eigenmode", "field"):
            raise ScenarioError(f"unknown theta0 kind {self.initial.theta_kind!r}")
        if self.initial.eps_kind not in ("random_traceless", "constant"):
            raise ScenarioError(f"unknown eps_p0 kind {self.initial.eps_kind!r}")
        if len(self.initial.eps_value) != 6:
            raise ScenarioError("eps_value needs six Mandel components")
        if self.variant == "symmetric" and not self.material.alpha * self.material.theta_bar > 0:
            raise ScenarioError("alpha * theta_bar must be positive")
        try:
            self.data_fields()
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"bad data descriptor: {exc}") from None

    def with_overrides(self, **kw) -> Scenario:
        """Copy with command-line overrides (``k``, ``l``, ``k_trunc``, ``variant``, ``tol``, ``seed``)."""
        sc = copy.deepcopy(self)
        if kw.get("k") is not None:
            sc.galerkin.k = int(kw["k"])
        if kw.get("l") is not None:
            sc.galerkin.l = int(kw["l"])
        if kw.get("k_trunc") is not None:
            sc.galerkin.k_trunc = float(kw["k_trunc"])
        if kw.get("variant") is not None:
            sc.variant = kw["variant"]
        if kw.get("tol") is not None:
            sc.integrator = replace(sc.integrator, rtol=float(kw["tol"]), atol=float(kw["tol"]))
        if kw.get("seed") is not None:
            sc.seed = int(kw["seed"])
        sc.validate()
        return sc

    # -- construction ------------------------------------------------------

    def data_fields(self):
        return (_vector_field(self.data.g), _vector_field(self.data.f),
                _scalar_field(self.data.g_theta, self.mesh.extents))

    @property
    def homogeneous(self) -> bool:
        g, f, gt = self.data_fields()
        return g.is_zero and f.is_zero and gt.is_zero

    def elasticity(self) -> ElasticityTensor:
        return ElasticityTensor.isotropic(self.material.lame_lambda, self.material.lame_mu)

    def law(self) -> NortonHoff:
        m = self.material
        return NortonHoff(m.p, Kappa(m.kappa_base, m.kappa_amp, m.kappa_scale))

    def coupling(self) -> CouplingVariant:
        m = self.material
        return CouplingVariant(self.variant, m.alpha, m.theta_R, m.theta_bar, m.gamma)

    def integrator_config(self) -> IntegratorConfig:
        it = self.integrator
        return IntegratorConfig(it.method, it.rtol, it.atol, it.h_min,
                                np.inf if it.h_max is None else it.h_max, it.step, self.galerkin.k_trunc)

    def box(self) -> BoxMesh:
        return BoxMesh(tuple(self.mesh.extents), tuple(self.mesh.cells))

    def assemble(self) -> FEAssembly:
        return assemble(self.box(), self.elasticity())

    def bases(self, assembly: FEAssembly) -> Bases:
        g = self.galerkin
        return build_bases(assembly, g.k, g.l, g.l_zeta)

    def lifted(self, assembly: FEAssembly) -> LiftedFields:
        g, f, gt = self.data_fields()
        var = self.coupling()
        # the auxiliary heat problem needs a constant coupling coefficient
        c = var.gamma if var.kind == "broken" else var.linear_constant
        return LiftedFields(assembly, g=g, f=f, g_theta=gt, alpha=c,
                            t_end=self.time.t_end, dt=self.time.lift_dt)

    def problem(self, assembly: FEAssembly | None = None, bases: Bases | None = None) -> Problem:
        assembly = assembly or self.assemble()
        bases = bases or self.bases(assembly)
        return Problem(bases, self.lifted(assembly), self.law(), self.coupling(), self.galerkin.k_trunc)

    def initial_fields(self, bases: Bases):
        """Nodal ``theta0`` and quadrature-point ``eps_p0``."""
        a = bases.assembly
        ini = self.initial
        if ini.theta_kind == "eigenmode":
            idx = ini.theta_index - 1
            if not 0 <= idx < bases.l_theta:
                raise ScenarioError(f"theta0 eigenmode {ini.theta_index} outside 1..{bases.l_theta}")
            theta0 = ini.theta_amplitude * bases.temp.vectors[idx]
        else:
            theta0 = _scalar_field(ini.theta_terms, self.mesh.extents)(a.mesh.nodes, 0.0)
        if ini.eps_kind == "random_traceless":
            rng = np.random.default_rng(self.seed)
            direction = deviatoric(rng.standard_normal(6))
            eps = direction / norm(direction) * ini.eps_radius
        else:
            eps = np.asarray(ini.eps_value, dtype=float)
        return theta0, np.tile(eps, (a.n_qp, 1))


def _time(d) -> TimeFactor:
    d = d or {}
    return TimeFactor(d.get("kind", "const"), float(d.get("omega", 1.0)), float(d.get("amplitude", 1.0)))


def _vector_field(terms) -> VectorField:
    out = []
    for t in terms or []:
        out.append(VectorTerm(tuple(float(v) for v in t.get("constant", (0, 0, 0))),
                              tuple(tuple(float(v) for v in r) for r in t.get("gradient", ((0,) * 3,) * 3)),
                              _time(t.get("time"))))
    return VectorField(tuple(out))


def _scalar_field(terms, extents) -> ScalarField:
    out = []
    for t in terms or []:
        out.append(ScalarTerm(float(t.get("constant", 0.0)),
                              tuple(float(v) for v in t.get("gradient", (0, 0, 0))),
                              float(t.get("cos_amplitude", 0.0)),
                              tuple(int(v) for v in t.get("cos_freq", (0, 0, 0))),
                              tuple(float(v) for v in extents),
                              _time(t.get("time"))))
    return ScalarField(tuple(out))


BUNDLED = ("homogeneous", "loaded")


def bundled(name: str = "homogeneous") -> Scenario:
    if name not in BUNDLED:
        raise ScenarioError(f"no bundled scenario {name!r}; available: {BUNDLED}")
    text = resources.files("tvesim.scenarios").joinpath(f"{name}.yaml").read_text()
    return Scenario.loads(text)
