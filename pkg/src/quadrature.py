"""
Integrals against the jump intensity π(dz) = dz/z².

Two flavours:
- quad_checked: adaptive QUADPACK (Gauss–Kronrod) for single values, with
  failures raised instead of warned.
- annulus_integral: fixed Gauss–Legendre nodes in s = log|z|, vectorized
  over many states x at once; used inside path loops.

With z = e^s the measure becomes dz/z² = ds/z, which turns the power-law
integrands of class 𝒢 into smooth exponentials in s.
"""

from __future__ import annotations

import warnings
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy import integrate


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to converge."""


class DivergentIntegralError(ArithmeticError):
    """The requested integral does not exist."""


def quad_checked(fn: Callable[[float], float], a: float, b: float, what: str,
                 limit: int = 200, tol: float = 1e-12) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        out = integrate.quad(fn, a, b, limit=limit, epsabs=tol, epsrel=tol, full_output=1)
    value, abserr = out[0], out[1]
    if not np.isfinite(value):
        raise QuadratureError(f"{what}: non-finite result")
    if len(out) > 3 and abserr > 1e-8 * max(1.0, abs(value)):
        raise QuadratureError(f"{what}: {out[3].splitlines()[0]} (error estimate {abserr:.3g})")
    return float(value)


@lru_cache(maxsize=32)
def log_gauss_nodes(z_lo: float, z_hi: float, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes z_i in (z_lo, z_hi) and weights with Σ w_i f(z_i) ≈ ∫ f(z) dz/z²."""
    if not 0.0 < z_lo < z_hi:
        raise ValueError(f"need 0 < z_lo < z_hi, got ({z_lo}, {z_hi})")
    s, w = np.polynomial.legendre.leggauss(n)
    a, b = np.log(z_lo), np.log(z_hi)
    half = 0.5 * (b - a)
    z = np.exp(a + half * (s + 1.0))
    weights = half * w / z
    z.setflags(write=False)
    weights.setflags(write=False)
    return z, weights


def annulus_integral(func: Callable, x, z_lo: float, z_hi: float, n: int):
    """
    ∫_{z_lo<|z|<z_hi} func(x, z) dz/z² for scalar or array x.

    func must accept broadcast arrays (x[..., None], z[None, :]).
    """
    if z_lo >= z_hi:
        return np.zeros_like(x, dtype=float) if np.ndim(x) else 0.0
    z, w = log_gauss_nodes(float(z_lo), float(z_hi), int(n))
    xs = np.asarray(x, dtype=float)[..., None]
    values = func(xs, z) + func(xs, -z)
    out = values @ w
    return float(out) if np.ndim(x) == 0 else out
