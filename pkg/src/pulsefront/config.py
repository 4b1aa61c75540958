"""Run configuration: a validated JSON document with every default filled in.

``parse_config(text)`` returns a ``RunConfig``; ``echo(config)`` is its JSON form
and ``parse_config(echo(c)) == c``.  Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import json
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import nonlinearity as nl
from .pde_core import DEFAULT_DXI, DEFAULT_M, Grid1D

COMMANDS = ("analyze", "front", "cauchy", "stability", "homogenize", "perturb", "verify-subsolution")


class ConfigError(ValueError):
    """Malformed, unknown or out-of-range configuration entry."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _open_unit(name):
    def check(v):
        if v is not None and not 0.0 < v < 1.0:
            raise ValueError(f"{name} out of (0,1)")
        return v
    return check


Period = Annotated[float, Field(gt=0.0, description="period T")]


class CubicSpec(_Strict):
    """Autonomous u (1 - u) (u - theta)."""
    family: Literal["cubic"] = "cubic"
    theta: float = 0.3
    period: Period = 1.0
    _theta = field_validator("theta")(_open_unit("theta"))


class LogisticSpec(_Strict):
    """Autonomous rate * u (1 - u); not bistable, useful for rejections and analysis."""
    family: Literal["logistic"] = "logistic"
    rate: float = 1.0
    period: Period = 1.0


class CombinationSpec(_Strict):
    """(a sin(2 pi t/T + phase)) u(1-u) + (1 - a sin(2 pi t/T + phase)) u(1-u)(u-theta)."""
    family: Literal["combination"] = "combination"
    theta: float = 0.3
    period: Period = 1.0
    amplitude: float = 1.0
    phase: float = 0.0
    _theta = field_validator("theta")(_open_unit("theta"))


class ProductSpec(_Strict):
    """m(t) g(u) with m = offset + amplitude sin(2 pi t/T + phase), g cubic or logistic."""
    family: Literal["product"] = "product"
    g: Literal["cubic", "logistic"] = "cubic"
    theta: float = 0.3
    rate: float = 1.0
    offset: float = 1.0
    amplitude: float = 0.5
    period: Period = 1.0
    phase: float = 0.0
    _theta = field_validator("theta")(_open_unit("theta"))


NonlinearitySpec = Annotated[Union[CubicSpec, LogisticSpec, CombinationSpec, ProductSpec],
                             Field(discriminator="family")]


class GridSpec(_Strict):
    M: float = Field(DEFAULT_M, gt=0.0)
    dxi: float = Field(DEFAULT_DXI, gt=0.0)

    @model_validator(mode="after")
    def _commensurate(self):
        if self.dxi >= self.M:
            raise ValueError("dxi must be smaller than M")
        n = round(self.M / self.dxi)
        if abs(n * self.dxi - self.M) > 1e-9 * self.M:
            raise ValueError("M must be a multiple of dxi")
        return self


class TimeSpec(_Strict):
    dt: float | None = Field(None, gt=0.0)


class AnalyzeSpec(_Strict):
    n_seeds: int = Field(201, ge=3)
    root_tol: float = Field(1e-10, gt=0.0)
    ode_tol: float = Field(1e-10, gt=0.0)
    margin: float = Field(1e-6, ge=0.0)
    substeps: int = Field(4096, ge=2)


class FrontSpec(_Strict):
    alpha_norm: float | None = None
    speed_tol: float = Field(1e-6, gt=0.0)
    c_bracket: tuple[float, float] | None = None
    _alpha = field_validator("alpha_norm")(_open_unit("alpha_norm"))

    @field_validator("c_bracket")
    @classmethod
    def _bracket(cls, v):
        if v is not None and not v[0] < v[1]:
            raise ValueError("c_bracket must be increasing")
        return v


class InitialSpec(_Strict):
    """Front-like initial data: (1 - tanh((xi - center)/width)) / 2, the sharp step
    1{xi < center}, or a quintic smoothed step of the given width."""
    shape: Literal["tanh", "step", "smoothstep"] = "tanh"
    center: float = 0.0
    width: float = Field(1.0, gt=0.0)


class CauchySpec(_Strict):
    speed: float = 0.0
    n_periods: int = Field(10, ge=1)
    initial: InitialSpec = InitialSpec()


class StabilitySpec(_Strict):
    n_periods: int = Field(40, ge=2)
    initial: InitialSpec = InitialSpec()


def _decreasing_positive(name):
    def check(v):
        if not v:
            raise ValueError(f"{name} must not be empty")
        if any(x <= 0 for x in v):
            raise ValueError(f"{name} entries must be positive")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError(f"{name} must be strictly decreasing")
        return v
    return check


class HomogenizeSpec(_Strict):
    T_list: tuple[float, ...] = (0.8, 0.4, 0.2, 0.1, 0.05)
    _check = field_validator("T_list")(_decreasing_positive("T_list"))


class PerturbSpec(_Strict):
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    n_alpha: int = Field(201, ge=3)
    envelope_tol: float = Field(0.1, ge=0.0)
    _check = field_validator("eps_list")(_decreasing_positive("eps_list"))


class SubsolutionSpec(_Strict):
    q0: float = Field(0.05, ge=0.0, le=0.1)
    horizon_periods: int = Field(10, ge=1)
    kind: Literal["sub", "super", "both"] = "both"
    slack: float = Field(5e-3, ge=0.0)
    order_test: bool = True


class RunConfig(_Strict):
    command: Literal[COMMANDS] | None = None  # type: ignore[valid-type]
    nonlinearity: NonlinearitySpec = CubicSpec()
    grid: GridSpec = GridSpec()
    time: TimeSpec = TimeSpec()
    analyze: AnalyzeSpec = AnalyzeSpec()
    front: FrontSpec = FrontSpec()
    cauchy: CauchySpec = CauchySpec()
    stability: StabilitySpec = StabilitySpec()
    homogenize: HomogenizeSpec = HomogenizeSpec()
    perturb: PerturbSpec = PerturbSpec()
    subsolution: SubsolutionSpec = SubsolutionSpec()
    workers: int = Field(1, ge=1)
    output_dir: str | None = None
    deterministic: Literal[True] = True


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"] if p not in ("cubic", "logistic", "combination", "product"))
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        parts.append(f"{loc or '<root>'}: {msg}")
    return "; ".join(parts)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc


def echo(config: RunConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def build_nonlinearity(spec) -> nl.TimePeriodicNonlinearity:
    if spec.family == "cubic":
        return nl.autonomous(nl.cubic(spec.theta), spec.period)
    if spec.family == "logistic":
        return nl.autonomous(nl.logistic(spec.rate), spec.period)
    if spec.family == "combination":
        return nl.combination_example(spec.theta, spec.period, spec.amplitude, spec.phase)
    g = nl.cubic(spec.theta) if spec.g == "cubic" else nl.logistic(spec.rate)
    m = nl.sine(spec.amplitude, spec.period, spec.phase, spec.offset)
    return nl.make_product(m, g)


def build_grid(spec: GridSpec) -> Grid1D:
    return Grid1D.from_spacing(spec.M, spec.dxi)
