from enum import Enum, IntEnum
from pathlib import Path
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from . import config


class Scheme(str, Enum):
    ppifem = "ppifem"
    galerkin = "galerkin"


class StudyMode(str, Enum):
    ppifem = "ppifem"
    galerkin = "galerkin"
    interpolation = "interpolation"


class SurfaceField(str, Enum):
    solution = "solution"
    error = "error"


class ElementClass(IntEnum):
    regular = 0
    one_interface = 1
    two_interface = 2
    triple_junction = 3


# Scheme schemas
class SchemeParams(BaseModel):
    epsilon: Literal[-1, 0, 1] = Field(default_factory=lambda: config.settings.epsilon)
    sigma0: float = Field(default_factory=lambda: config.settings.sigma0, gt=0)
    scheme: Scheme = Scheme.ppifem
    quad_order: Optional[int] = Field(None, ge=1, le=10)


# Result schemas
class ErrorReport(BaseModel):
    n: int
    linf: float = Field(ge=0)
    l2: float = Field(ge=0)
    h1: float = Field(ge=0)
    rate_linf: Optional[float] = None
    rate_l2: Optional[float] = None
    rate_h1: Optional[float] = None


# Run configuration
CONFIG_KEYS = (
    "example",
    "betas",
    "scheme",
    "epsilon",
    "sigma0",
    "n_start",
    "refinements",
    "quad_order",
    "full",
    "out_errors",
    "out_classification",
    "out_surface",
    "field",
    "surface_n",
    "basis_element",
    "basis_selector",
    "out_basis",
    "dump_system",
)


class RunConfig(BaseModel):
    example: Literal[1, 2] = 1
    betas: Tuple[float, float, float] = (10.0, 1.0, 100.0)
    scheme: StudyMode = StudyMode.ppifem
    epsilon: Literal[-1, 0, 1] = Field(default_factory=lambda: config.settings.epsilon)
    sigma0: float = Field(default_factory=lambda: config.settings.sigma0, gt=0)
    n_start: int = Field(16, ge=2)
    refinements: int = Field(5, ge=1)
    quad_order: Optional[int] = Field(None, ge=1, le=10)
    full: bool = False
    out_errors: Optional[Path] = None
    out_classification: Optional[Path] = None
    out_surface: Optional[Path] = None
    field: SurfaceField = SurfaceField.error
    surface_n: Optional[int] = Field(None, ge=2)
    basis_element: Optional[int] = Field(None, ge=0)
    basis_selector: str = "nodal:0"
    out_basis: Optional[Path] = None
    dump_system: Optional[Path] = None

    @field_validator("example", "epsilon", mode="before")
    @classmethod
    def parse_integer(cls, value):
        if isinstance(value, str) and value.strip().lstrip("+-").isdigit():
            return int(value)
        return value

    @field_validator("betas", mode="before")
    @classmethod
    def parse_betas(cls, value):
        if isinstance(value, str):
            value = [part for part in value.replace(" ", "").split(",") if part]
        return value

    @field_validator("betas")
    @classmethod
    def betas_positive(cls, value):
        if any(beta <= 0 for beta in value):
            raise ValueError("coefficients must be positive")
        return value

    @field_validator("basis_selector")
    @classmethod
    def selector_format(cls, value: str) -> str:
        kind, _, index = value.partition(":")
        if kind not in ("nodal", "flux") or not index.isdigit():
            raise ValueError("selector must look like nodal:i or flux:k")
        return value

    @model_validator(mode="after")
    def basis_needs_output(self):
        if self.basis_element is not None and self.out_basis is None:
            raise ValueError("basis_element requires out_basis")
        return self

    @property
    def n_list(self) -> list:
        count = self.refinements + (1 if self.full else 0)
        return [self.n_start * 2**k for k in range(count)]

    @property
    def scheme_params(self) -> SchemeParams:
        scheme = Scheme.galerkin if self.scheme == StudyMode.galerkin else Scheme.ppifem
        return SchemeParams(
            epsilon=self.epsilon, sigma0=self.sigma0, scheme=scheme, quad_order=self.quad_order
        )

    def to_config_text(self) -> str:
        """Serialize as flat key = value lines accepted by --config"""
        lines = []
        for key in CONFIG_KEYS:
            value = getattr(self, key)
            if value is None:
                continue
            if key == "betas":
                value = ",".join(repr(float(beta)) for beta in value)
            elif isinstance(value, Enum):
                value = value.value
            elif isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"
