"""
Model and simulation settings.

ModelSpec holds the coefficients of

    M_t = x0 + ∫ σ(M_s) dB_s + ∫ b(M_s) ds + ∫∫ G(M_{s−}, z) Ñ(ds, dz)

where G is either the built-in stable-like map G₀(x, z) = sign(z)|z|^{1/β̃(x)}
or a custom two-variable expression. The local index of the process at time
t is β(t) = β̃(M(t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np

from src.coeffexpr import Expr, Num, constant_value, eval_expr, is_constant, parse_expr

HYPOTHESES = ("none", "case_a", "case_b")
# |z| used to read off the index of a custom G without a declared β̃
_INDEX_Z = 1e-8


class ModelValidationError(ValueError):
    """Model coefficients violate the class or hypothesis requirements."""


class JumpKind(str, Enum):
    BUILTIN = "builtin"
    CUSTOM = "custom"


@dataclass(frozen=True)
class JumpSpec:
    kind: JumpKind
    beta_tilde: Optional[Expr] = None
    g: Optional[Expr] = None


def _as_expr(value: Union[str, Expr, float], variables=("x",)) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    return parse_expr(value, variables)


@dataclass(frozen=True)
class ModelSpec:
    """Coefficients, declared index band and hypothesis regime."""
    jump: JumpSpec
    sigma: Optional[Expr] = None        # None means σ ≡ 0
    b: Expr = Num(0.0)
    beta_band: Tuple[float, float] = (0.01, 1.99)
    hypothesis: str = "none"
    x0: float = 0.0

    def __post_init__(self):
        lo, hi = self.beta_band
        if not 0.0 < lo <= hi < 2.0:
            raise ModelValidationError(f"beta_band must satisfy 0 < lo <= hi < 2, got {self.beta_band}")
        if self.hypothesis not in HYPOTHESES:
            raise ModelValidationError(f"hypothesis must be one of {HYPOTHESES}, got {self.hypothesis!r}")
        if self.hypothesis == "case_a" and lo < 1.0:
            raise ModelValidationError("hypothesis case_a requires beta_band lo >= 1")
        if self.hypothesis == "case_b" and hi >= 1.0:
            raise ModelValidationError("hypothesis case_b requires beta_band hi < 1")
        if not math.isfinite(self.x0):
            raise ModelValidationError("x0 must be finite")
        if self.jump.kind is JumpKind.BUILTIN and self.jump.beta_tilde is None:
            raise ModelValidationError("builtin jump needs beta_tilde")
        if self.jump.kind is JumpKind.CUSTOM:
            if self.jump.g is None:
                raise ModelValidationError("custom jump needs g")
            if not self.jump.g.variables() <= {"x", "z"}:
                raise ModelValidationError("custom g may only use x and z")
        for name, e in (("sigma", self.sigma), ("b", self.b), ("beta_tilde", self.jump.beta_tilde)):
            if e is not None and not e.variables() <= {"x"}:
                raise ModelValidationError(f"{name} may only use x")

    # ─── Constructors ────────────────────────────────────────────────────────

    @classmethod
    def builtin(cls, beta_tilde, sigma=None, b="0", **kwargs) -> "ModelSpec":
        return cls(
            jump=JumpSpec(JumpKind.BUILTIN, beta_tilde=_as_expr(beta_tilde)),
            sigma=None if sigma is None else _as_expr(sigma),
            b=_as_expr(b),
            **kwargs,
        )

    @classmethod
    def custom(cls, g, beta_tilde=None, sigma=None, b="0", **kwargs) -> "ModelSpec":
        return cls(
            jump=JumpSpec(
                JumpKind.CUSTOM,
                beta_tilde=None if beta_tilde is None else _as_expr(beta_tilde),
                g=_as_expr(g, ("x", "z")),
            ),
            sigma=None if sigma is None else _as_expr(sigma),
            b=_as_expr(b),
            **kwargs,
        )

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    # ─── Structure ───────────────────────────────────────────────────────────

    @property
    def sigma_zero(self) -> bool:
        return self.sigma is None or (is_constant(self.sigma) and constant_value(self.sigma) == 0.0)

    @property
    def drift_zero(self) -> bool:
        return is_constant(self.b) and constant_value(self.b) == 0.0

    @property
    def jump_zero(self) -> bool:
        g = self.jump.g
        return self.jump.kind is JumpKind.CUSTOM and is_constant(g) and constant_value(g) == 0.0

    # ─── Evaluation (scalar or vectorized) ───────────────────────────────────

    def sigma_at(self, x):
        if self.sigma is None:
            return np.zeros_like(x) if np.ndim(x) else 0.0
        return eval_expr(self.sigma, x)

    def drift_at(self, x):
        return eval_expr(self.b, x)

    def beta(self, x):
        """β̃(x); for a custom G without declared β̃, read off its small-|z| slope."""
        if self.jump.beta_tilde is not None:
            return eval_expr(self.jump.beta_tilde, x)
        if self.jump_zero:
            # no jumps, no index
            return np.full(np.shape(x), np.nan) if np.ndim(x) else float("nan")
        z_small = np.full(np.shape(x), _INDEX_Z) if np.ndim(x) else _INDEX_Z
        size = np.abs(eval_expr(self.jump.g, x, z_small))
        with np.errstate(divide="ignore", invalid="ignore"):
            index = math.log(_INDEX_Z) / np.log(size)
        return float(index) if np.ndim(x) == 0 else index

    def jump_size(self, x, z):
        """G(x, z)."""
        if self.jump.kind is JumpKind.BUILTIN:
            exponent = 1.0 / eval_expr(self.jump.beta_tilde, x)
            return np.sign(z) * np.abs(z) ** exponent
        return eval_expr(self.jump.g, x, z)

    def describe(self) -> dict:
        return {
            "sigma": "ZERO" if self.sigma is None else self.sigma.format(),
            "b": self.b.format(),
            "jump": self.jump.kind.value,
            "beta_tilde": None if self.jump.beta_tilde is None else self.jump.beta_tilde.format(),
            "g": None if self.jump.g is None else self.jump.g.format(),
            "beta_band": list(self.beta_band),
            "hypothesis": self.hypothesis,
            "x0": self.x0,
        }


@dataclass(frozen=True)
class SimulationConfig:
    """Grid step, jump truncation, horizon, seed and quadrature size."""
    dt: float = 2.0 ** -12
    z_min: float = 1e-4
    horizon: float = 1.0
    seed: int = 0
    quad_n: int = 64

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not 0.0 < self.z_min < 1.0:
            raise ValueError(f"z_min must lie in (0, 1), got {self.z_min}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.quad_n < 2:
            raise ValueError(f"quad_n must be at least 2, got {self.quad_n}")

    def with_(self, **changes) -> "SimulationConfig":
        return replace(self, **changes)

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.horizon / self.dt - 1e-9))

    def uniform_nodes(self) -> np.ndarray:
        """0, dt, 2dt, … with the last node moved onto the horizon."""
        nodes = np.arange(self.n_steps + 1) * self.dt
        nodes[-1] = self.horizon
        return nodes
