"""Spectrum at the planar equilibrium and the degenerate-Hopf constraints.

Five free rates (a1, a2, b1, b2, d1) plus two unfolding parameters (l, m)
and a small scale epsilon determine the remaining three rates: the real
part of the complex pair at the planar equilibrium is pinned to eps^2 * l,
the third eigenvalue to eps^2 * m, and the prey capacity to the value that
kills the first-order average of the slow dynamics.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConstraintViolationError, DomainError
from .model import ModelParams

SETUP_NAMES = ("a1", "a2", "b1", "b2", "d1", "l", "m", "epsilon")


@dataclass(frozen=True)
class P3Spectrum:
    """Closed-form eigenvalues at the planar equilibrium.

    ``lambda_plus/minus`` are the in-plane pair (complex when the
    discriminant is negative), ``mu`` the transverse growth rate.
    """

    lambda_plus: complex
    lambda_minus: complex
    mu: float
    discriminant: float


@dataclass(frozen=True)
class HopfSetup:
    """Free parameters of the degenerate-Hopf family.

    The derived rates ``k``, ``rho`` and ``d2`` are exposed as properties
    and recomputed from the stored fields, so replacing ``epsilon`` keeps
    everything consistent.  Requires a1 > d1 and a1*b1 > 2*b2*d1 (the open
    condition making the derived capacity positive).
    """

    a1: float
    a2: float
    b1: float
    b2: float
    d1: float
    l: float
    m: float
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2", "d1"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise ConstraintViolationError(f"{name} must be positive, got {value!r}")
        if self.a1 <= self.d1:
            raise ConstraintViolationError("a1 > d1 is required")
        if self.gap <= 0.0:
            raise ConstraintViolationError("a1*b1 - 2*b2*d1 > 0 is required")
        if not np.isfinite(self.l) or not np.isfinite(self.m):
            raise ConstraintViolationError("l and m must be finite")
        if not np.isfinite(self.epsilon) or self.epsilon < 0.0:
            raise ConstraintViolationError("epsilon must be nonnegative")

    @property
    def gap(self) -> float:
        """The open-condition combination a1*b1 - 2*b2*d1."""
        return self.a1 * self.b1 - 2.0 * self.b2 * self.d1

    @property
    def k(self) -> float:
        """Prey capacity scale cancelling the first-order average."""
        return 2.0 * self.a1 * self.b1**2 * self.d1 / ((self.a1 - self.d1) ** 2 * self.gap)

    @property
    def rho(self) -> float:
        """Prey growth rate pinning Re(lambda) to epsilon^2 * l."""
        a1, d1, k, l, e = self.a1, self.d1, self.k, self.l, self.epsilon
        return (2.0 * a1 * (a1 - d1) * k * l * e**2 + self.b1 * d1 * (a1 + d1)) / ((a1 - d1) * d1 * k)

    @property
    def E(self) -> float:
        """Quadratic-in-epsilon numerator correction of the derived d2."""
        a1, a2, b1, b2, d1 = self.a1, self.a2, self.b1, self.b2, self.d1
        k, l, m = self.k, self.l, self.m
        return (
            -b2 * k * m * d1**3
            + a1 * (-m * b1**2 - 2.0 * a2 * k * l * b1 + 2.0 * b2 * d1 * k * m) * d1
            + a1**2 * k * (2.0 * a2 * b1 * l - b2 * d1 * m)
        )

    @property
    def d2(self) -> float:
        """Top-predator decay rate pinning the transverse eigenvalue to epsilon^2 * m."""
        a1, a2, b1, b2, d1 = self.a1, self.a2, self.b1, self.b2, self.d1
        k, l, m, e = self.k, self.l, self.m, self.epsilon
        num = a1 * a2 * b1**2 * d1 + self.E * e**2 + 2.0 * a1 * b1 * (d1 - a1) * k * l * m * e**4
        # the epsilon^2 term is NOT multiplied by d1: solving the transverse
        # eigenvalue identity mu = eps^2*m gives d1*Q + 2*a1*b1*(a1-d1)*k*l*eps^2
        den = d1 * (
            b2 * k * a1**2
            + (b1**2 - 2.0 * b2 * d1 * k) * a1
            + b2 * d1**2 * k
        ) + 2.0 * a1 * b1 * (a1 - d1) * k * l * e**2
        if den == 0.0:
            raise ConstraintViolationError("derived d2 denominator vanishes")
        return num / den

    def at_epsilon(self, epsilon: float) -> "HopfSetup":
        return replace(self, epsilon=float(epsilon))

    def params(self, epsilon: float | None = None) -> ModelParams:
        """Full parameter set with the derived (d2, rho, k) at the given epsilon."""
        setup = self if epsilon is None else self.at_epsilon(epsilon)
        d2 = setup.d2
        rho = setup.rho
        if d2 <= 0.0 or rho <= 0.0:
            raise ConstraintViolationError("derived d2/rho not positive at this epsilon")
        return ModelParams(
            a1=setup.a1, a2=setup.a2, b1=setup.b1, b2=setup.b2,
            d1=setup.d1, d2=d2, k=setup.k, rho=rho,
        )

    def to_dict(self) -> dict:
        return {name: float(getattr(self, name)) for name in SETUP_NAMES}

    @classmethod
    def from_dict(cls, data: dict) -> "HopfSetup":
        missing = [n for n in ("a1", "a2", "b1", "b2", "d1", "l", "m") if n not in data]
        if missing:
            raise KeyError(f"missing setup parameter(s): {', '.join(missing)}")
        kwargs = {n: float(data[n]) for n in ("a1", "a2", "b1", "b2", "d1", "l", "m")}
        kwargs["epsilon"] = float(data.get("epsilon", 0.0))
        return cls(**kwargs)


def solve_constraints(setup: HopfSetup) -> ModelParams:
    """Materialize the constrained parameter set (d2, rho, k derived)."""
    return setup.params()


def spectrum_p3(p: ModelParams) -> P3Spectrum:
    """Closed-form eigenvalues at the planar equilibrium of ``p``.

    Raises :class:`DomainError` when a1 = d1 or when the transverse-rate
    denominator vanishes.
    """
    a1, a2, b1, b2, d1, d2, k, rho = p.a1, p.a2, p.b1, p.b2, p.d1, p.d2, p.k, p.rho
    da = a1 - d1
    if abs(da) <= 1e-12 * (a1 + d1):
        raise DomainError("spectrum undefined: a1 = d1")
    kr = k * rho

    num = -a1 * b1 * d1 - b1 * d1**2 + a1 * d1 * kr - d1**2 * kr
    den = 2.0 * a1 * da * k
    disc = d1 * (
        -4.0 * a1 * da**2 * k * (-b1 * d1 + da * kr)
        + d1 * (a1 * (b1 - kr) + d1 * (b1 + kr)) ** 2
    )
    root = cmath.sqrt(complex(disc))
    lam_p = (num + root) / den
    lam_m = (num - root) / den

    mu_den = b1**2 * d1 - b2 * da**2 * k + b1 * (d1 - a1) * kr
    mu_num = a2 * b1 * (b1 * d1 + (d1 - a1) * kr)
    scale = abs(b1**2 * d1) + abs(b2 * da**2 * k) + abs(b1 * da * kr)
    if abs(mu_den) <= 1e-14 * scale:
        raise DomainError("transverse eigenvalue denominator vanishes")
    mu = -d2 + mu_num / mu_den
    return P3Spectrum(lambda_plus=lam_p, lambda_minus=lam_m, mu=mu, discriminant=disc)


def constrained_eigenvalues(setup: HopfSetup) -> tuple[complex, complex, float]:
    """Eigenvalues of the constrained system in their reduced form.

    Returns (eps^2*l + i*beta, eps^2*l - i*beta, eps^2*m) where beta^2 =
    b1*d1/k - eps^2*l*(l*eps^2 - 2*a1 + 2*d1); the pair degenerates to a
    real pair if that quantity goes negative.
    """
    k, l, m, e = setup.k, setup.l, setup.m, setup.epsilon
    radicand = k * (e**2 * k * l * (l * e**2 - 2.0 * setup.a1 + 2.0 * setup.d1) - setup.b1 * setup.d1)
    root = cmath.sqrt(complex(radicand)) / k
    return (e**2 * l + root, e**2 * l - root, e**2 * m)
