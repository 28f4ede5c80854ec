"""Polynomial fuel-rate metamodel.

The rate is a cubic in speed (cruise and idle) plus, while accelerating, a
quadratic in speed times the acceleration.  Braking and coasting only pay the
cruise term.  Coefficients live in named profiles, never in the formula.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .model import ConfigurationError, DomainError

__all__ = ["FuelCoefficients", "PROFILES", "fuel_profile", "fuel_rate", "fuel_used"]


@dataclass(frozen=True)
class FuelCoefficients:
    """Coefficients in litres per second (``q``) and litres per metre (``r``)."""

    q0: float
    q1: float
    q2: float
    q3: float
    r0: float
    r1: float
    r2: float


_ML = 1e-3
# Illustrative coefficients in the shape of the Kamal et al. metamodel, given
# in ml/s and converted to litres.
PROFILES: dict[str, FuelCoefficients] = {
    "kamal_illustrative": FuelCoefficients(
        q0=0.1569 * _ML,
        q1=2.450e-2 * _ML,
        q2=-7.415e-4 * _ML,
        q3=5.975e-5 * _ML,
        r0=0.07224 * _ML,
        r1=9.681e-2 * _ML,
        r2=1.075e-3 * _ML,
    ),
}


def fuel_profile(name: str, **overrides: float) -> FuelCoefficients:
    try:
        base = PROFILES[name]
    except KeyError:
        raise ConfigurationError(f"unknown fuel profile {name!r}; known: {sorted(PROFILES)}") from None
    known = {f.name for f in fields(FuelCoefficients)}
    unknown = set(overrides) - known
    if unknown:
        raise ConfigurationError(f"unknown fuel coefficients {sorted(unknown)}")
    return replace(base, **overrides)


def fuel_rate(v, u, coeffs: FuelCoefficients):
    """Fuel rate in litres per second; accepts scalars or arrays."""
    v = np.asarray(v, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(v < 0):
        raise DomainError("fuel rate is undefined for negative speed")
    c = coeffs
    cruise = c.q0 + v * (c.q1 + v * (c.q2 + v * c.q3))
    accel = np.where(u > 0, u * (c.r0 + v * (c.r1 + v * c.r2)), 0.0)
    rate = np.maximum(cruise + accel, 0.0)
    return float(rate) if rate.ndim == 0 else rate


def fuel_used(ts: np.ndarray, v: np.ndarray, u: np.ndarray, coeffs: FuelCoefficients) -> float:
    """Trapezoidal integral of the fuel rate over a sampled trace (litres)."""
    if len(ts) < 2:
        return 0.0
    return float(np.trapezoid(fuel_rate(v, u, coeffs), ts))
