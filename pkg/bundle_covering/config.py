"""
Run configuration.

A run is described by a ``RunConfig``: which subcommand, which maps, the
domain, the subdivision and the outputs. Config files are JSON documents; all
numbers in them are read as exact decimals (``parse_float=Decimal``) and kept
as strings until they are outward-rounded into intervals, so ``1.2`` always
means 12/10. Command-line flags override file values, file values override
environment defaults.

Example file::

    {
      "subcommand": "verify",
      "maps": [{"name": "cap"}, {"name": "cap", "params": {"linear_coeff": "16/5"}}],
      "mode": "sequence",
      "r_u": 1, "r_s": 1.2,
      "scheme": "4,100,50,50"
    }
"""

import json
import logging
import multiprocessing
import os
from decimal import Decimal
from fractions import Fraction
from typing import Annotated, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator

from .dynamics import BUILTINS
from .errors import ConfigError, ParameterError
from .geometry import SubdivisionScheme

logger = logging.getLogger(__name__)

JOBS_ENV = "BUNDLE_COVERING_JOBS"
LOG_LEVEL_ENV = "BUNDLE_COVERING_LOG_LEVEL"

SUBCOMMANDS = ("verify", "enclose", "degree", "nhim-k", "orbit", "images", "sweep")
MAP_SUBCOMMANDS = ("verify", "enclose", "orbit", "images")
CUSTOM_MAP = "custom"
ALIASES = {
    "verify": {"cap": "cap_homotopy", "toy": "toy_homotopy"},
    "enclose": {"cap": "cap_map", "toy": "toy_f1"},
    "orbit": {"cap": "cap_map", "toy": "toy_f1"},
    "images": {"cap": "cap_map", "toy": "toy_f1"},
}


def _exact_number(value):
    """Keep numbers as exact decimal strings; floats are refused because they are not exact decimals"""
    if isinstance(value, bool):
        raise ValueError(f"expected a number, got {value!r}")
    if isinstance(value, float):
        raise ValueError(f"give {value!r} as a string or exact decimal")
    if isinstance(value, (int, Decimal, Fraction)):
        return str(value)
    if isinstance(value, str):
        return value.strip()
    raise ValueError(f"expected a number, got {type(value).__name__}")


Number = Annotated[str, BeforeValidator(_exact_number)]


def _positive(text: str, name: str) -> str:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"{name} is not a number: {text!r}") from e
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {text}")
    return text


def default_jobs() -> int:
    raw = os.getenv(JOBS_ENV)
    if raw is None or not raw.strip():
        return multiprocessing.cpu_count()
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {raw!r}") from None


def resolve_map_name(name: str, subcommand: str) -> str:
    return ALIASES.get(subcommand, {}).get(name, name)


class ExpressionMapConfig(BaseModel):
    """A map or homotopy written in the expression language"""

    model_config = ConfigDict(extra="forbid")

    name: str = CUSTOM_MAP
    theta_out: Optional[str] = None
    x_out: Optional[str] = None
    y_out: Optional[str] = None
    h_theta: Optional[str] = None
    h_x: Optional[str] = None
    h_y: Optional[str] = None
    eta_lift: Optional[str] = None
    A_coeff: Optional[str] = None
    constants: Dict[str, Number] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _complete(self):
        map_fields = [self.theta_out, self.x_out, self.y_out]
        homotopy_fields = [self.h_theta, self.h_x, self.h_y]
        if any(map_fields) and not all(map_fields):
            raise ValueError("map needs all of theta_out, x_out, y_out")
        if any(homotopy_fields) and not all(homotopy_fields):
            raise ValueError("homotopy needs all of h_theta, h_x, h_y")
        if not any(map_fields) and not any(homotopy_fields):
            raise ValueError("map section defines neither theta_out/x_out/y_out nor h_theta/h_x/h_y")
        if any(homotopy_fields) and not self.eta_lift:
            raise ValueError("a homotopy needs eta_lift")
        return self

    @property
    def is_homotopy(self) -> bool:
        return self.h_theta is not None


class MapConfig(BaseModel):
    """A builtin (or the custom map) with its parameters"""

    model_config = ConfigDict(extra="forbid")

    name: str
    params: Dict[str, Number] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _from_name(cls, data):
        if isinstance(data, str):
            return {"name": data}
        return data


class EnclosureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    radius: Number = "2"
    disc: bool = True
    grid: Tuple[int, int, int] = (32, 16, 16)
    max_iterates: int = Field(3, ge=1)
    refine_steps: int = Field(2, ge=0)
    slice_theta: Optional[Number] = None
    survivors_only: bool = False

    @field_validator("radius")
    @classmethod
    def _radius(cls, v):
        return _positive(v, "radius")

    @field_validator("grid")
    @classmethod
    def _grid(cls, v):
        if any(n < 1 for n in v):
            raise ValueError(f"grid counts must be positive, got {v}")
        return v


class SamplingConfig(BaseModel):
    """Point clouds for plots: an orbit, images of D, the toy β sweep"""

    model_config = ConfigDict(extra="forbid")

    start: Tuple[Number, Number, Number] = ("4", "-0.46", "-0.92")
    n_points: int = Field(1000, ge=1)
    transient: int = Field(0, ge=0)
    iterates: int = Field(2, ge=1)
    density: Tuple[int, int, int] = (200, 20, 20)
    n_beta: int = Field(101, ge=2)
    sweep_points: int = Field(201, ge=1)
    sweep_transient: int = Field(200, ge=0)
    sweep_record: int = Field(50, ge=1)

    @field_validator("start")
    @classmethod
    def _start(cls, v):
        for text in v:
            try:
                Fraction(text)
            except (ValueError, ZeroDivisionError) as e:
                raise ValueError(f"start is not a point: {v!r}") from e
        return v

    @field_validator("density")
    @classmethod
    def _density(cls, v):
        if any(n < 1 for n in v):
            raise ValueError(f"density counts must be positive, got {v}")
        return v

    @property
    def start_point(self) -> Tuple[float, float, float]:
        return tuple(float(Fraction(text)) for text in self.start)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    subcommand: Literal["verify", "enclose", "degree", "nhim-k", "orbit", "images", "sweep"] = "verify"
    maps: List[MapConfig] = Field(default_factory=lambda: [MapConfig(name="cap")])
    params: Dict[str, Number] = Field(default_factory=dict)
    map: Optional[ExpressionMapConfig] = None
    mode: Literal["fiber", "full", "sequence"] = "full"
    r_u: Optional[Number] = "1"
    r_s: Number = "1.2"
    mobius_stable: bool = False
    scheme: str = "4,100,50,50"
    n_family: int = Field(10, ge=1)
    refine_depth: int = Field(10, ge=0)
    eta: Optional[str] = None
    a_coeff: Optional[str] = None
    degree_parts: int = Field(64, ge=1)
    C: Optional[Number] = None
    lam: Optional[Number] = Field(None, alias="lambda")
    enclosure: EnclosureConfig = Field(default_factory=EnclosureConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    jobs: int = Field(default_factory=default_jobs, ge=1)
    report: Optional[str] = None
    cells: Optional[str] = None
    out: Optional[str] = None
    debug: bool = False

    @field_validator("r_u")
    @classmethod
    def _r_u(cls, v):
        # "none": no unstable direction
        if v is None or v.lower() == "none":
            return None
        return _positive(v, "r_u")

    @field_validator("r_s")
    @classmethod
    def _r_s(cls, v):
        return _positive(v, "r_s")

    @field_validator("scheme")
    @classmethod
    def _scheme(cls, v):
        try:
            SubdivisionScheme.parse(v)
        except ParameterError as e:
            raise ValueError(str(e)) from e
        return v

    @model_validator(mode="after")
    def _maps_exist(self):
        if self.subcommand in MAP_SUBCOMMANDS:
            if not self.maps:
                raise ValueError("at least one map is required")
            for entry in self.maps:
                name = resolve_map_name(entry.name, self.subcommand)
                if name == CUSTOM_MAP:
                    if self.map is None:
                        raise ValueError("map 'custom' needs a 'map' section with expressions")
                elif name not in BUILTINS:
                    raise ValueError(
                        f"unknown map {entry.name!r} (builtins: {', '.join(sorted(BUILTINS))}, aliases: cap, toy, custom)"
                    )
            if self.mode != "sequence" and len(self.maps) > 1:
                raise ValueError(f"{len(self.maps)} maps given; use mode 'sequence' to verify several")
        if self.subcommand == "degree" and not self.eta and not self.maps:
            raise ValueError("degree needs an eta expression or a map")
        if self.subcommand == "nhim-k" and (self.C is None or self.lam is None):
            raise ValueError("nhim-k needs C and lambda")
        return self

    @property
    def subdivision(self) -> SubdivisionScheme:
        return SubdivisionScheme.parse(self.scheme, n_family=self.n_family)

    def member_params(self, entry: MapConfig) -> Dict[str, str]:
        """Run-wide params overridden by the member's own"""
        return {**self.params, **entry.params}

    def dump(self) -> Dict:
        return self.model_dump(mode="json", by_alias=True)


def load_config_file(path) -> Dict:
    """Raw config dict from a JSON file, numbers as Decimal"""
    try:
        with open(path) as f:
            data = json.load(f, parse_float=Decimal)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    logger.debug(f"Loaded config keys {sorted(data)} from {path}")
    return data


def build_config(file_data: Optional[Dict] = None, overrides: Optional[Dict] = None) -> RunConfig:
    """Merge file values with flag overrides (flags win) and validate"""
    data = dict(file_data or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in ("enclosure", "sampling"):
            merged = dict(data.get(key) or {})
            merged.update({k: v for k, v in value.items() if v is not None})
            value = merged
        elif key == "params":
            value = {**(data.get("params") or {}), **value}
        data[key] = value
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_describe(e)) from e


def _describe(error: ValidationError) -> str:
    messages = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "config"
        messages.append(f"{where}: {item['msg']}")
    return "invalid configuration: " + "; ".join(messages)
