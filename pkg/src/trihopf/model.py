"""Three-species food-chain vector field and its analytic Jacobian.

States are length-3 arrays ``(x, y, z)``: logistic prey, saturating
predator, saturating top predator.  Negative components are allowed (the
analysis uses both half-spaces in z); only the interaction denominators
``b1 + x`` and ``b2 + y`` are guarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

#: reject evaluation when an interaction denominator is this close to zero
DENOMINATOR_GUARD = 1e-12

PARAM_NAMES = ("a1", "a2", "b1", "b2", "d1", "d2", "k", "rho")


@dataclass(frozen=True)
class ModelParams:
    """The eight positive rate constants of the chain.

    ``a1, a2`` are uptake rates, ``b1, b2`` half-saturation constants,
    ``d1, d2`` death rates; ``k`` and ``rho`` set the prey's logistic
    growth.  All eight must be strictly positive.
    """

    a1: float
    a2: float
    b1: float
    b2: float
    d1: float
    d2: float
    k: float
    rho: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"parameter {name} must be positive and finite, got {value!r}")

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        missing = [name for name in PARAM_NAMES if name not in data]
        if missing:
            raise KeyError(f"missing model parameter(s): {', '.join(missing)}")
        return cls(**{name: float(data[name]) for name in PARAM_NAMES})


def _split_state(state):
    s = np.asarray(state, dtype=float)
    return s[..., 0], s[..., 1], s[..., 2]


def _split_state_any(state):
    s = np.asarray(state)
    return s[..., 0], s[..., 1], s[..., 2]


def _check_denominators(p: ModelParams, den1, den2):
    if np.any(np.abs(den1) < DENOMINATOR_GUARD) or np.any(np.abs(den2) < DENOMINATOR_GUARD):
        raise DomainError("interaction denominator b1+x or b2+y vanishes at the requested state")


def vector_field(p: ModelParams, state) -> np.ndarray:
    """Time derivative (dx, dy, dz) of the chain at ``state``.

    The third component is evaluated in the factored form ``z * (...)`` so
    the plane z = 0 is invariant bitwise.  Broadcasts over leading axes.
    """
    x, y, z = _split_state(state)
    den1 = p.b1 + x
    den2 = p.b2 + y
    _check_denominators(p, den1, den2)
    dx = x * (p.rho - x / p.k - p.a1 * y / den1)
    dy = y * (p.a1 * x / den1 - p.a2 * z / den2 - p.d1)
    dz = z * (p.a2 * y / den2 - p.d2)
    return np.stack((dx, dy, dz), axis=-1)


def jacobian(p: ModelParams, state) -> np.ndarray:
    """Analytic 3x3 Jacobian of :func:`vector_field` at ``state``.

    Broadcasts over leading axes, returning shape ``(..., 3, 3)``.
    """
    x, y, z = _split_state(state)
    den1 = p.b1 + x
    den2 = p.b2 + y
    _check_denominators(p, den1, den2)
    holl1 = p.a1 * x / den1            # predator uptake
    dholl1 = p.a1 * p.b1 / den1**2     # its x-derivative, times 1/y
    holl2 = p.a2 * y / den2
    dholl2 = p.a2 * p.b2 / den2**2

    j = np.zeros(np.broadcast(x, y, z).shape + (3, 3))
    j[..., 0, 0] = p.rho - 2.0 * x / p.k - y * dholl1
    j[..., 0, 1] = -holl1
    j[..., 1, 0] = y * dholl1
    j[..., 1, 1] = holl1 - z * dholl2 - p.d1
    j[..., 1, 2] = -holl2
    j[..., 2, 1] = z * dholl2
    j[..., 2, 2] = holl2 - p.d2
    return j


def shifted_vector_field(p: ModelParams, base, offset) -> np.ndarray:
    """Field increment ``f(base + offset) - f(base)``, evaluated stably.

    Every term is arranged as an explicit product of offset factors, so no
    large-minus-large cancellation occurs and ``offset = 0`` returns exactly
    zero.  When ``base`` is an equilibrium this is the translated vector
    field with the origin as an exact fixed point, which the slow-dynamics
    extraction relies on.  Broadcasts over leading axes of both arguments;
    complex dtypes pass through (the series extraction samples a complex
    circle of epsilon values), so ``p`` only needs the right attributes and
    may carry array-valued entries.
    """
    base = np.asarray(base)
    x0, y0, z0 = base[..., 0], base[..., 1], base[..., 2]
    X, Y, Z = _split_state_any(offset)
    den1_0 = p.b1 + x0
    den2_0 = p.b2 + y0
    den1 = den1_0 + X
    den2 = den2_0 + Y
    _check_denominators(p, den1, den2)

    # increment of a1*x*y/(b1+x)
    dphi = p.a1 * ((x0 * Y + y0 * X + X * Y) - x0 * y0 * X / den1_0) / den1
    # increment of a2*y*z/(b2+y)
    dpsi = p.a2 * ((y0 * Z + z0 * Y + Y * Z) - y0 * z0 * Y / den2_0) / den2

    dx = p.rho * X - (2.0 * x0 + X) * X / p.k - dphi
    dy = dphi - dpsi - p.d1 * Y
    dz = dpsi - p.d2 * Z
    return np.stack((dx, dy, dz), axis=-1)
