"""Run configuration: YAML text validated by a strict schema.

Unknown keys are rejected and every failure is reported with its path,
e.g. ``kernel.z0: Input should be greater than or equal to 0``.
"""

from __future__ import annotations

import re
import warnings
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .kernels import KernelSpec, SamplerConfig
from .measures import DiffusiveDescriptor, DiscreteMeasure, fractional_density, tabulated_density
from .wavesim import BCSpec, BoundarySpec, Grid1D, WaveSimulator, delay_cells, pulse, smooth_random

__all__ = [
    "RunConfig",
    "ConfigError",
    "parse_config",
    "serialize_config",
    "load_config",
    "kernel_spec",
    "build_grid",
    "build_bc",
    "build_simulator",
    "generator_inputs",
]


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DomainConfig(_Strict):
    L: float = Field(1.0, gt=0)
    n: int = Field(200, ge=2)


BoundaryKind = Literal["dirichlet_p0", "neumann_u0", "ibc", "driven_u"]


class BoundaryConfig(_Strict):
    kind: BoundaryKind = "neumann_u0"
    amplitude: float = 0.0
    omega: float = 0.0

    @model_validator(mode="before")
    @classmethod
    def _shorthand(cls, v):
        return {"kind": v} if isinstance(v, str) else v


class BCConfig(_Strict):
    left: BoundaryConfig = BoundaryConfig(kind="neumann_u0")
    right: BoundaryConfig = BoundaryConfig(kind="ibc")


class DiffusiveConfig(_Strict):
    kind: Literal["fractional", "tabulated", "discrete"] = "fractional"
    alpha: Optional[float] = None
    xi: Optional[list[float]] = None
    rho: Optional[list[float]] = None  # tabulated density values
    w: Optional[list[float]] = None  # discrete weights
    n_poles: int = Field(100, ge=1)
    xi_min: float = Field(1e-6, gt=0)
    xi_max: float = Field(1e6, gt=0)

    @model_validator(mode="after")
    def _check(self):
        self.descriptor()
        return self

    def descriptor(self) -> DiffusiveDescriptor:
        opts = {"n_poles": self.n_poles, "xi_min": self.xi_min, "xi_max": self.xi_max}
        if self.kind == "fractional":
            return fractional_density(self.alpha if self.alpha is not None else float("nan"), **opts)
        if self.xi is None:
            raise ValueError(f"{self.kind} measure needs 'xi'")
        if self.kind == "tabulated":
            if self.rho is None:
                raise ValueError("tabulated measure needs 'rho'")
            return tabulated_density(np.array(self.xi), np.array(self.rho), **opts)
        if self.w is None:
            raise ValueError("discrete measure needs 'w'")
        return DiffusiveDescriptor(kind="discrete", measure=DiscreteMeasure(self.xi, self.w))


class KernelConfig(_Strict):
    z0: float = Field(0.0, ge=0)
    z_tau: float = 0.0
    tau: float = Field(0.0, ge=0)
    z1: float = Field(0.0, ge=0)
    k: Optional[float] = Field(None, gt=0)  # delay energy weight; default z0
    certified_pr: bool = False
    diff_standard: Optional[DiffusiveConfig] = None
    diff_extended: Optional[DiffusiveConfig] = None
    delayed_diffusive: Optional[tuple[float, float]] = None

    @model_validator(mode="after")
    def _check(self):
        self.spec()  # raises ValueError (including the PR condition) on bad combinations
        return self

    def spec(self) -> KernelSpec:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return KernelSpec(
                z0=self.z0, z_tau=self.z_tau, tau=self.tau, z1=self.z1,
                diff_standard=self.diff_standard.descriptor() if self.diff_standard else None,
                diff_extended=self.diff_extended.descriptor() if self.diff_extended else None,
                delayed_diffusive=self.delayed_diffusive,
                certified_pr=self.certified_pr,
            )


class TimeConfig(_Strict):
    T_final: float = Field(10.0, gt=0)
    dt: Optional[float] = Field(None, gt=0)


class InitialConfig(_Strict):
    kind: Literal["pulse", "random", "zero"] = "pulse"
    center: Optional[float] = None  # default L/2
    width: float = Field(0.05, gt=0)
    direction: Literal["right", "left", "standing"] = "right"
    n_modes: int = Field(4, ge=1)


class OutputsConfig(_Strict):
    csv: Optional[str] = None
    json_path: Optional[str] = Field(None, alias="json")
    record_every: int = Field(1, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class SamplerOptions(_Strict):
    eps: float = Field(1e-8, gt=0)
    R: float = Field(1e3, gt=0)
    n_re: int = Field(40, ge=1)
    n_im: int = Field(81, ge=1)
    omega_min: float = Field(1e-3, gt=0)
    omega_max: float = Field(1e4, gt=0)
    n_omega: int = Field(4000, ge=1)
    n_real: int = Field(200, ge=1)
    tol: float = Field(1e-10, ge=0)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(**self.model_dump())


class MeasureFitOptions(_Strict):
    check_s: list[float] = [0.01, 0.1, 1.0, 10.0, 100.0]
    tol: float = Field(1e-3, gt=0)

    @field_validator("check_s")
    @classmethod
    def _positive(cls, v):
        if any(s <= 0 for s in v):
            raise ValueError("check points must be positive")
        return v


class ScanOptions(_Strict):
    n_samples: int = Field(100, ge=1)
    s_min: float = Field(1e-2, gt=0)
    s_max: float = Field(1e2, gt=0)
    n: Optional[int] = Field(None, ge=2)  # Laplace-domain mesh; default domain.n


class SpectrumOptions(_Strict):
    delay_M: Optional[int] = Field(None, ge=1)
    tol: float = Field(1e-10, ge=0)


class RunConfig(_Strict):
    domain: DomainConfig = DomainConfig()
    bc: BCConfig = BCConfig()
    kernel: KernelConfig = KernelConfig()
    time: TimeConfig = TimeConfig()
    initial: InitialConfig = InitialConfig()
    outputs: OutputsConfig = OutputsConfig()
    seed: int = 0
    sampler: SamplerOptions = SamplerOptions()
    measure_fit: MeasureFitOptions = MeasureFitOptions()
    scan: ScanOptions = ScanOptions()
    spectrum: SpectrumOptions = SpectrumOptions()

    @model_validator(mode="after")
    def _delay_alignment(self):
        kz = self.kernel
        has_ibc = "ibc" in (self.bc.left.kind, self.bc.right.kind)
        if has_ibc and kz.z_tau != 0 and kz.tau > 0 and self.time.dt is not None:
            try:
                delay_cells(kz.tau, self.time.dt)
            except ValueError as exc:
                raise ValueError(f"time.dt: {exc}") from None
        if has_ibc and kz.delayed_diffusive is not None and self.time.dt is not None:
            raise ValueError("kernel.delayed_diffusive: the delayed fractional kernel cannot be time-stepped")
        return self

    @property
    def has_ibc(self) -> bool:
        return "ibc" in (self.bc.left.kind, self.bc.right.kind)

    @property
    def ibc_ends(self) -> tuple[str, ...]:
        return tuple(s for s in ("left", "right") if getattr(self.bc, s).kind == "ibc")


_PATH_PREFIX = re.compile(r"^([a-z_]+\.[a-z_.]+): ")


def _format_errors(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        m = _PATH_PREFIX.match(msg)
        if m and not err["loc"]:
            path, msg = m.group(1), msg[m.end():]
        out.append(f"{path}: {msg}")
    return out


def parse_config(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<root>: not valid YAML ({exc})"]) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["<root>: expected a mapping of sections"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def serialize_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json", by_alias=True), sort_keys=False)


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def kernel_spec(cfg: RunConfig) -> KernelSpec:
    return cfg.kernel.spec()


def build_grid(cfg: RunConfig) -> Grid1D:
    return Grid1D(cfg.domain.L, cfg.domain.n)


def build_bc(cfg: RunConfig) -> BCSpec:
    def side(b: BoundaryConfig) -> BoundarySpec:
        return BoundarySpec(b.kind, b.amplitude, b.omega)

    return BCSpec(side(cfg.bc.left), side(cfg.bc.right))


def initial_data(cfg: RunConfig, grid: Grid1D):
    ic = cfg.initial
    if ic.kind == "zero":
        return np.zeros(grid.n + 1), np.zeros(grid.n)
    if ic.kind == "pulse":
        center = grid.L / 2 if ic.center is None else ic.center
        return pulse(grid, center, ic.width, ic.direction)
    return smooth_random(grid, np.random.default_rng(cfg.seed), ic.n_modes)


def build_simulator(cfg: RunConfig) -> WaveSimulator:
    grid = build_grid(cfg)
    u0, p0 = initial_data(cfg, grid)
    return WaveSimulator(grid, build_bc(cfg), kernel_spec(cfg), dt=cfg.time.dt,
                         k=cfg.kernel.k, u0=u0, p0=p0)


def generator_inputs(cfg: RunConfig):
    """(grid, bc, kernel, k, delay_M) for :func:`ibclab.spectrum.assemble_generator`."""
    return build_grid(cfg), build_bc(cfg), kernel_spec(cfg), cfg.kernel.k, cfg.spectrum.delay_M
