"""YAML run configuration with a strict schema.

Errors carry the line and column of the offending node, so a typo in a
key or a bad value points straight at the source text.
"""

from __future__ import annotations

from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator


class ConfigError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeConfig(_Strict):
    dims: list[int] = Field(min_length=4, max_length=4)
    spacing: float = Field(1.0, gt=0)

    @field_validator("dims")
    @classmethod
    def _dims(cls, v):
        if min(v) < 4:
            raise ValueError("every dimension must be >= 4")
        return v


class HotParams(_Strict):
    magnitude: float = Field(0.3, ge=0)


class InstantonParams(_Strict):
    scale: Optional[float] = Field(None, gt=0)
    center: Optional[list[int]] = Field(None, min_length=4, max_length=4)
    anti: bool = False
    second_scale: Optional[float] = Field(None, gt=0)
    second_center: Optional[list[int]] = Field(None, min_length=4, max_length=4)


class FileParams(_Strict):
    path: str


class EmptyParams(_Strict):
    pass


_PARAMS = {"cold": EmptyParams, "hot": HotParams, "instanton": InstantonParams, "file": FileParams}


class InitialConfig(_Strict):
    kind: Literal["cold", "hot", "instanton", "file"]
    params: dict = Field(default_factory=dict)

    @model_validator(mode="after")
    def _params(self):
        self.params = _PARAMS[self.kind].model_validate(self.params).model_dump()
        return self


class FlowConfig(_Strict):
    alpha: float = Field(1.1, ge=1)
    dt: float = Field(0.01, gt=0)
    t_end: float = Field(1.0, gt=0)
    integrator: Literal["euler", "rk3"] = "rk3"
    adaptive: bool = True
    tol: float = Field(1e-12, gt=0)
    record_every: int = Field(1, ge=1)
    alphas: Optional[list[float]] = None
    critical_tol: float = Field(1e-6, gt=0)
    max_steps: int = Field(20000, ge=1)

    @model_validator(mode="after")
    def _order(self):
        if self.dt > self.t_end:
            raise ValueError("dt must not exceed t_end")
        if self.alphas is not None:
            if any(b >= a for a, b in zip(self.alphas, self.alphas[1:])):
                raise ValueError("alphas must be strictly decreasing")
            if any(a <= 1 for a in self.alphas):
                raise ValueError("alphas must be > 1")
        return self


class PhiConfig(_Strict):
    enabled: bool = False
    radii: list[float] = Field(default_factory=list)
    x0: Optional[list[int]] = Field(None, min_length=4, max_length=4)
    t0: Optional[float] = None
    cutoff_radius: Optional[float] = Field(None, gt=0)


class EpsilonConfig(_Strict):
    enabled: bool = False
    R: float = Field(2.0, gt=0)
    epsilon0: float = Field(11.0, gt=0)


class MonitorsConfig(_Strict):
    phi: PhiConfig = Field(default_factory=PhiConfig)
    epsilon: EpsilonConfig = Field(default_factory=EpsilonConfig)
    snapshots_every: int = Field(0, ge=0)


class OutputConfig(_Strict):
    trace_path: str = "trace.ndjson"
    snapshot_dir: str = "snapshots"
    table_path: str = "alpha_table.csv"
    report_path: str = "report.json"


class DeturckConfig(_Strict):
    kind: Literal["zero", "abelian", "nonabelian"] = "nonabelian"
    magnitude: float = Field(0.3, ge=0)
    alpha: float = Field(1.05, ge=1)
    dt: float = Field(1.0 / 32.0, gt=0)
    t_end: float = Field(1.0, gt=0)
    band: list[float] = Field(default_factory=lambda: [2.5, 6.0], min_length=2, max_length=2)


class RunConfig(_Strict):
    lattice: LatticeConfig
    initial: InitialConfig = Field(default_factory=lambda: InitialConfig(kind="cold"))
    flow: FlowConfig = Field(default_factory=FlowConfig)
    monitors: MonitorsConfig = Field(default_factory=MonitorsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    deturck: DeturckConfig = Field(default_factory=DeturckConfig)
    seed: int = 0


def _locate(node, loc):
    """Walk a composed YAML node along a pydantic error location."""
    best = node
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == key:
                    best, node = k, v
                    break
            else:
                return best
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            best = node
        else:
            return best
    return best


def parse_config(text, source="<config>"):
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"{source}: {exc.problem}", mark.line + 1, mark.column + 1) from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping", 1, 1)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        node = _locate(root, loc)
        mark = node.start_mark
        path = ".".join(str(p) for p in loc)
        raise ConfigError(f"{source}: {path}: {err['msg']}", mark.line + 1, mark.column + 1) from exc


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))
