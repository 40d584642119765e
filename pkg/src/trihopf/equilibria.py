"""Closed-form equilibria of the chain with existence gating and residuals.

Six candidate rest points: extinction, prey-only, prey+predator (the
bifurcating point, in the plane z = 0), predator+top-predator (x = 0),
and the two coexistence points given by the roots of a quadratic in x.
Non-existence is encoded in a flag with a reason, never an exception.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import ModelParams, vector_field

#: relative guard for "denominator nonzero" existence checks
DENOM_REL_TOL = 1e-10

LABELS = ("p1", "p2", "p3", "p4", "p5", "p6")


@dataclass(frozen=True)
class CoexistenceAux:
    """Intermediates of the coexistence quadratic (x-roots of p5/p6).

    ``A``/``D`` are the scaled root-sum combinations, ``B`` the scaled
    discriminant whose sign gates existence, ``C`` the combination entering
    the z-component numerators.
    """

    A: float
    B: float
    C: float
    D: float


@dataclass(frozen=True)
class Equilibrium:
    label: str
    state: np.ndarray | None
    exists: bool
    reason: str = ""
    residual: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "state": None if self.state is None else [float(v) for v in self.state],
            "exists": bool(self.exists),
            "reason": self.reason,
            "residual": None if np.isnan(self.residual) else float(self.residual),
        }


def coexistence_aux(p: ModelParams) -> CoexistenceAux:
    """Quadratic intermediates for the two coexistence equilibria.

    ``B`` is the discriminant in the form (a2-d2) * (a2*(b1+k*rho)^2 -
    d2*(b1^2 + 4*a1*b2*k + 2*b1*k*rho + k^2*rho^2)); p5/p6 are real iff
    B >= 0.
    """
    kr = p.k * p.rho
    A = -p.a2 * p.b1 + p.b1 * p.d2 + p.a2 * kr - p.d2 * kr
    B = (p.a2 - p.d2) * (
        p.a2 * (p.b1 + kr) ** 2
        - p.d2 * (p.b1**2 + 4.0 * p.a1 * p.b2 * p.k + 2.0 * p.b1 * kr + kr**2)
    )
    C = p.a1 * p.b1 + p.b1 * p.d1 - p.a1 * kr + p.d1 * kr
    D = p.a2 * p.b1 - p.b1 * p.d2 + p.a2 * kr - p.d2 * kr
    return CoexistenceAux(A=A, B=B, C=C, D=D)


def coexistence_discriminant(p: ModelParams) -> float:
    """Sign gate for p5/p6 existence (nonnegative means real roots)."""
    return coexistence_aux(p).B


def equilibrium_p3(p: ModelParams) -> np.ndarray:
    """The planar rest point (prey + predator, z = 0); requires a1 != d1."""
    da = p.a1 - p.d1
    if da == 0.0:
        raise DomainError("p3 undefined: a1 equals d1")
    x = p.b1 * p.d1 / da
    y = -p.b1 * (p.b1 * p.d1 + (p.d1 - p.a1) * p.k * p.rho) / (da**2 * p.k)
    return np.array([x, y, 0.0])


def _residual(p: ModelParams, state: np.ndarray) -> float:
    return float(np.max(np.abs(vector_field(p, state))))


def _made(p, label, state, reason="") -> Equilibrium:
    try:
        res = _residual(p, state)
    except DomainError:
        return Equilibrium(label, None, False, "state on an interaction singularity")
    return Equilibrium(label, state, True, reason, res)


def all_equilibria(p: ModelParams) -> list[Equilibrium]:
    """All six candidate equilibria with existence flags and residuals."""
    out = [
        _made(p, "p1", np.zeros(3)),
        _made(p, "p2", np.array([p.k * p.rho, 0.0, 0.0])),
    ]

    rel = DENOM_REL_TOL
    da1 = p.a1 - p.d1
    if abs(da1) <= rel * (p.a1 + p.d1):
        out.append(Equilibrium("p3", None, False, "a1 = d1 (denominator vanishes)"))
    else:
        out.append(_made(p, "p3", equilibrium_p3(p)))

    da2 = p.a2 - p.d2
    if abs(da2) <= rel * (p.a2 + p.d2):
        out.append(Equilibrium("p4", None, False, "a2 = d2 (denominator vanishes)"))
        for label in ("p5", "p6"):
            out.append(Equilibrium(label, None, False, "a2 = d2 (denominator vanishes)"))
        return out

    y4 = p.b2 * p.d2 / da2
    z4 = -p.b2 * p.d1 / da2
    out.append(_made(p, "p4", np.array([0.0, y4, z4])))

    aux = coexistence_aux(p)
    if aux.B < 0.0:
        for label in ("p5", "p6"):
            out.append(Equilibrium(label, None, False, "negative discriminant"))
        return out

    sqrt_b = np.sqrt(aux.B)
    for label, sign in (("p5", 1.0), ("p6", -1.0)):
        x = (aux.A + sign * sqrt_b) / (2.0 * da2)
        z_num = p.b2 * da1 * sqrt_b - sign * p.b2 * aux.C * da2
        z_den = da2 * (sqrt_b + sign * aux.D)
        scale = abs(p.b2 * da1 * sqrt_b) + abs(p.b2 * aux.C * da2) + 1e-300
        if abs(z_den) <= rel * scale:
            out.append(Equilibrium(label, None, False, "vanishing z denominator"))
            continue
        out.append(_made(p, label, np.array([x, y4, z_num / z_den])))
    return out
