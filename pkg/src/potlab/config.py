"""JSON configuration: schema validation and construction of model objects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from .axisym import AxisGridSpec
from .capacity import BoundarySet, CapacityConfig
from .errors import PotlabError
from .kernels import KernelSpec
from .model import Atom, BoundaryMeasure, Domain, RadialPowerDensity, TabulatedDensity, UniformBallDensity

SCHEMA_VERSION = 1
COMMANDS = ("eval", "capacity", "criteria", "solve", "verify")


class ConfigError(PotlabError, ValueError):
    """The configuration file is not valid JSON or does not match the schema."""


def load_schema() -> dict:
    text = resources.files("potlab").joinpath("schemas", f"config-v{SCHEMA_VERSION}.json").read_text()
    return json.loads(text)


def _field_path(err) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate(data: dict) -> dict:
    """Check ``data`` against the schema; every violation is listed with its field path."""
    validator = jsonschema.Draft7Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        msg = "; ".join(f"{_field_path(e)}: {e.message}" for e in errors)
        raise ConfigError(f"invalid config: {msg}")
    return data


def parse(text: str, source="<config>") -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: the top level must be an object")
    return validate(data)


def read(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse(text, str(path))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def domain_from(data: dict | None) -> Domain:
    data = data or {}
    return Domain(data.get("kind", "halfspace"), int(data.get("N", 3)))


def component_from(c: dict):
    kind = c["type"]
    if kind == "atom":
        return Atom(tuple(c["location"]), float(c["mass"]))
    if kind == "uniform":
        return UniformBallDensity(tuple(c["center"]), float(c["radius"]), float(c["coefficient"]))
    if kind == "power":
        return RadialPowerDensity(tuple(c["center"]), float(c["exponent"]), float(c["radius"]),
                                  float(c["coefficient"]))
    return TabulatedDensity(tuple(c["origin"]), float(c["spacing"]), np.asarray(c["values"], float))


def component_to(comp) -> dict:
    if isinstance(comp, Atom):
        return {"type": "atom", "location": list(comp.location), "mass": comp.mass}
    if isinstance(comp, UniformBallDensity):
        return {"type": "uniform", "center": list(comp.center), "radius": comp.radius,
                "coefficient": comp.coefficient}
    if isinstance(comp, RadialPowerDensity):
        return {"type": "power", "center": list(comp.center), "exponent": comp.exponent,
                "radius": comp.radius, "coefficient": comp.coefficient}
    return {"type": "tabulated", "origin": list(comp.origin), "spacing": comp.spacing,
            "values": comp.values.tolist()}


def measure_from(items, domain: Domain) -> BoundaryMeasure:
    return BoundaryMeasure.from_components(domain, [component_from(c) for c in items or []])


def measure_to(sigma: BoundaryMeasure) -> list:
    """Components of ``sigma`` (negative parts with flipped sign)."""
    out = [component_to(c) for c in sigma.positive]
    out += [component_to(c.scaled(-1.0)) for c in sigma.negative]
    return out


def kernel_from(data: dict | None, default: KernelSpec = KernelSpec()) -> KernelSpec:
    data = data or {}
    return KernelSpec(float(data.get("alpha", default.alpha)), float(data.get("beta", default.beta)),
                      float(data.get("alpha0", default.alpha0)), float(data.get("q", default.q)))


def grid_from(data: dict | None, default: AxisGridSpec = AxisGridSpec()) -> AxisGridSpec:
    data = data or {}
    return AxisGridSpec(float(data.get("L", default.L)), float(data.get("h", default.h)),
                        float(data.get("ratio", default.ratio)), int(data.get("levels", default.levels)),
                        int(data.get("gauss", default.gauss)))


def set_from(data: dict | None) -> BoundarySet:
    return BoundarySet.from_dict(data or {})


def capacity_config_from(data: dict | None) -> CapacityConfig:
    data = data or {}
    base = CapacityConfig()
    return CapacityConfig(n_res=int(data.get("n_res", base.n_res)), box=float(data.get("box", base.box)))


@dataclass
class RunConfig:
    """A validated configuration plus the command-line overrides."""

    command: str
    data: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    quick: bool = False

    @property
    def domain(self) -> Domain:
        return domain_from(self.data.get("domain"))

    @property
    def measure(self) -> BoundaryMeasure:
        return measure_from(self.data.get("measure"), self.domain)

    def section(self, name=None) -> dict:
        return dict(self.data.get(name or self.command, {}))
