"""
Run configuration: a small line-oriented file format plus pydantic schemas.

Format:

    # comment
    [model]
    beta_tilde = "clamp(1 + 0.5*sin(x), 0.6, 1.8)"
    sigma = ZERO
    beta_band = 0.01, 1.99

    [sim]
    dt = 0.000244140625

Strings may be quoted (required when they contain commas or #), numbers are
bare, comma-separated values form lists. Unknown sections or keys and
duplicate keys are errors.

Usage:
    from src.config import load_config

    cfg = load_config("data/sample/stable_like.cfg")
    model, sim = cfg.model_spec(), cfg.sim_config()
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union, get_origin

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.coeffexpr import ExprSyntaxError, check_range, parse_expr
from src.model import ModelSpec, ModelValidationError, SimulationConfig

# sample grid for the beta_tilde range check
BETA_GRID = (-10.0, 10.0, 2001)
_SECTION_RE = re.compile(r"^\[([A-Za-z_][A-Za-z0-9_-]*)\]$")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ConfigError(ValueError):
    """Malformed or invalid configuration, with the line and/or key at fault."""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.key = key


# ─── Schema ───────────────────────────────────────────────────────────────────


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, coerce_numbers_to_str=True)

    @model_validator(mode="before")
    @classmethod
    def _promote_scalars(cls, data: Any) -> Any:
        # "key = 1" is a one-element list where the schema wants a list
        if not isinstance(data, dict):
            return data
        promoted = dict(data)
        for name, info in cls.model_fields.items():
            if name in promoted and get_origin(info.annotation) is list and not isinstance(promoted[name], (list, tuple)):
                promoted[name] = [promoted[name]]
        return promoted


class ModelSection(_Section):
    jump: Literal["builtin", "custom"] = "builtin"
    beta_tilde: Optional[str] = None
    g: Optional[str] = None
    sigma: str = "ZERO"
    b: str = "0"
    beta_band: Tuple[float, float] = (0.01, 1.99)
    hypothesis: Literal["none", "case_a", "case_b"] = "none"
    x0: float = 0.0

    @field_validator("beta_tilde", "sigma", "b")
    @classmethod
    def _parses_in_x(cls, v: Optional[str]) -> Optional[str]:
        if v is None or v == "ZERO":
            return v
        parse_expr(v, ("x",))
        return v

    @field_validator("g")
    @classmethod
    def _parses_in_xz(cls, v: Optional[str]) -> Optional[str]:
        if v is not None:
            parse_expr(v, ("x", "z"))
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "ModelSection":
        if self.jump == "builtin" and self.beta_tilde is None:
            raise ValueError("builtin jump needs beta_tilde")
        if self.jump == "custom" and self.g is None:
            raise ValueError("custom jump needs g")
        if self.beta_tilde is not None:
            lo, hi, n = BETA_GRID
            if not check_range(parse_expr(self.beta_tilde), lo, hi, self.beta_band, n):
                raise ValueError(f"beta_tilde leaves beta_band {self.beta_band} on [{lo:g}, {hi:g}]")
        try:
            self.to_spec()
        except ModelValidationError as exc:
            raise ValueError(str(exc)) from exc
        return self

    def to_spec(self) -> ModelSpec:
        sigma = None if self.sigma == "ZERO" else self.sigma
        common = dict(sigma=sigma, b=self.b, beta_band=tuple(self.beta_band), hypothesis=self.hypothesis, x0=self.x0)
        if self.jump == "builtin":
            return ModelSpec.builtin(self.beta_tilde, **common)
        return ModelSpec.custom(self.g, beta_tilde=self.beta_tilde, **common)


class SimSection(_Section):
    dt: float = Field(2.0 ** -12, gt=0)
    z_min: float = Field(1e-4, gt=0, lt=1)
    horizon: float = Field(1.0, gt=0)
    quad_n: int = Field(64, ge=2)


class RunSection(_Section):
    master_seed: int = Field(0, ge=0, le=2 ** 64 - 1)
    output_dir: str = "out"
    threads: int = Field(1, ge=1)


class SimulateSection(_Section):
    n_paths: int = Field(1, ge=1)
    binary: bool = True


class PointsSection(_Section):
    deltas: List[float] = [1.0, 2.0, 4.0]
    j_max: int = Field(12, ge=6)
    covering_grid: int = Field(10_000, ge=1)
    delta_max: float = Field(16.0, gt=1)
    shepp_terms: int = Field(10_000, ge=1)


class HolderSection(_Section):
    n_times: int = Field(50, ge=1)
    j_min: int = Field(6, ge=1)
    j_max: int = Field(11, ge=2)
    h_cap: float = Field(1.5, gt=0)

    @model_validator(mode="after")
    def _levels(self) -> "HolderSection":
        if self.j_max <= self.j_min:
            raise ValueError("j_max must exceed j_min")
        return self


class SpectrumSection(_Section):
    mode: Literal["theory", "empirical"] = "theory"
    h_min: float = Field(0.0, ge=0)
    h_max: float = Field(1.0, gt=0)
    n_h: int = Field(101, ge=2)
    interval: Tuple[float, float] = (0.0, 1.0)
    point: Union[float, Literal["largest_jump"], None] = None
    j_max: int = Field(12, ge=6)
    bin_width: float = Field(0.05, gt=0)
    lm_window: int = Field(32, ge=2)

    @model_validator(mode="after")
    def _ranges(self) -> "SpectrumSection":
        if self.h_max <= self.h_min:
            raise ValueError("h_max must exceed h_min")
        if not self.interval[0] < self.interval[1]:
            raise ValueError("interval must be increasing")
        return self


class TangentSection(_Section):
    t0: float = Field(0.0, ge=0)
    alpha_seq: List[float] = [0.1, 0.03, 0.01, 0.003]
    n_paths: int = Field(1000, ge=1)
    eta: float = Field(0.1, gt=0)
    gamma: Optional[float] = None


class BandSection(_Section):
    delta: float = Field(2.0, gt=1)
    eps: float = Field(0.1, gt=0)
    ms: List[int] = [6, 8, 10]
    n_paths: int = Field(200, ge=1)


class GeneratorSection(_Section):
    f: str = "x*x"
    t_seq: List[float] = [0.01]
    n_paths: int = Field(10_000, ge=1)
    martingale_t: float = Field(1.0, gt=0)

    @field_validator("f")
    @classmethod
    def _parses(cls, v: str) -> str:
        parse_expr(v, ("x",))
        return v


class AdmissibleSection(_Section):
    x_lo: float = -2.0
    x_hi: float = 2.0
    n_x: int = Field(21, ge=2)
    slope_tol: float = Field(0.05, gt=0)
    eps: float = Field(0.05, gt=0)


class RunConfig(_Section):
    """Validated configuration for every subcommand."""
    model: ModelSection
    sim: SimSection = SimSection()
    run: RunSection = RunSection()
    simulate: SimulateSection = SimulateSection()
    points: PointsSection = PointsSection()
    holder: HolderSection = HolderSection()
    spectrum: SpectrumSection = SpectrumSection()
    tangent: TangentSection = TangentSection()
    band: BandSection = BandSection()
    generator: GeneratorSection = GeneratorSection()
    admissible: AdmissibleSection = AdmissibleSection()

    def model_spec(self) -> ModelSpec:
        return self.model.to_spec()

    def sim_config(self) -> SimulationConfig:
        return SimulationConfig(
            dt=self.sim.dt,
            z_min=self.sim.z_min,
            horizon=self.sim.horizon,
            seed=self.run.master_seed,
            quad_n=self.sim.quad_n,
        )

    def with_overrides(
        self,
        seed: Optional[int] = None,
        output_dir: Optional[str] = None,
        mode: Optional[str] = None,
        threads: Optional[int] = None,
    ) -> "RunConfig":
        """Apply command-line overrides, re-validating the result."""
        data = self.model_dump()
        if seed is not None:
            data["run"]["master_seed"] = seed
        if output_dir is not None:
            data["run"]["output_dir"] = output_dir
        if threads is not None:
            data["run"]["threads"] = threads
        if mode is not None:
            data["spectrum"]["mode"] = mode
        return _validate(data)


# ─── Text format ──────────────────────────────────────────────────────────────


def _split_outside_quotes(text: str, sep: str, line: int) -> List[str]:
    parts, buf, quoted = [], [], False
    for ch in text:
        if ch == '"':
            quoted = not quoted
        if ch == sep and not quoted:
            parts.append("".join(buf))
            buf = []
            continue
        buf.append(ch)
    if quoted:
        raise ConfigError("unterminated string", line=line)
    parts.append("".join(buf))
    return parts


def _scalar(token: str, line: int, key: str) -> Any:
    token = token.strip()
    if not token:
        raise ConfigError("empty value", line=line, key=key)
    if token.startswith('"'):
        if len(token) < 2 or not token.endswith('"') or '"' in token[1:-1]:
            raise ConfigError("malformed string", line=line, key=key)
        return token[1:-1]
    if token in ("true", "false"):
        return token == "true"
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def parse_config_text(text: str) -> Dict[str, Dict[str, Any]]:
    """Sections of raw typed values; raises ConfigError with the line number."""
    sections: Dict[str, Dict[str, Any]] = {}
    current: Optional[str] = None
    for number, raw in enumerate(text.splitlines(), 1):
        line = _split_outside_quotes(raw, "#", number)[0].strip()
        if not line:
            continue
        header = _SECTION_RE.match(line)
        if header:
            current = header.group(1)
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", line=number)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=number)
        key, value = (s.strip() for s in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError("invalid key", line=number, key=key)
        if current is None:
            raise ConfigError("key outside a section", line=number, key=key)
        if key in sections[current]:
            raise ConfigError("duplicate key", line=number, key=f"{current}.{key}")
        items = _split_outside_quotes(value, ",", number)
        values = [_scalar(item, number, key) for item in items]
        sections[current][key] = values if len(values) > 1 else values[0]
    return sections


def _validate(data: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = ".".join(str(p) for p in first["loc"]) or None
        raise ConfigError(first["msg"], key=key) from exc
    except (ExprSyntaxError, ModelValidationError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config_text(text: str) -> RunConfig:
    sections = parse_config_text(text)
    if "model" not in sections:
        raise ConfigError("missing [model] section")
    return _validate(sections)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return load_config_text(text)


def _format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return ", ".join(_format_value(item) for item in v)
    raise TypeError(f"cannot format {type(v).__name__}")


def dump_config(cfg: RunConfig) -> str:
    """Serialize to the text format; load_config_text(dump_config(c)) == c."""
    out = []
    for section, values in cfg.model_dump().items():
        out.append(f"[{section}]")
        for key, value in values.items():
            if value is None:
                continue
            out.append(f"{key} = {_format_value(value)}")
        out.append("")
    return "\n".join(out)
