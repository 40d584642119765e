"""Closed-form limit-cycle predictions, stability classes, half-spaces.

The candidate zeros of the averaged field have closed forms: a planar one
(r1, 0) and a symmetric pair (r2, +/-w2), each gated by the sign of a
radicand.  Every prediction is Newton-refined against the averaged field
before classification, so a transcription slip in the closed forms would
surface as a large refinement shift.

Stability is classified for the real-time orientation: the angle variable
of the normal form runs opposite to time (the leading angular rate is
negative), so the classification Jacobian is the NEGATIVE of the averaged
field's Jacobian.  A cycle is an attractor when both real parts are
negative, a repeller when both are positive, saddle-like otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .averaging import AveragedField, closed_f20, closed_f20_jacobian, find_zeros
from .errors import DegenerateJacobianError
from .hopf import HopfSetup
from .transform import CylState, inverse_map, normal_form_frame

#: real parts closer to zero than this scale fraction give "indeterminate"
STABILITY_MARGIN = 1e-8

ATTRACTOR = "attractor"
REPELLER = "repeller"
SADDLE_LIKE = "saddle-like"
INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class CyclePrediction:
    """One predicted small-amplitude cycle of the averaged analysis."""

    label: str                       # "planar", "pair+", "pair-"
    exists: bool
    radicands: dict
    failing_radicand: str | None = None
    r0: float = float("nan")
    w0: float = float("nan")
    refined: np.ndarray | None = None
    refinement_shift: float = float("nan")
    jacobian: np.ndarray | None = None       # flow-aligned 2x2
    eigenvalues: tuple | None = None
    stability: str | None = None
    half_space: str | None = None
    initial_condition: np.ndarray | None = None
    degree_nonzero: bool | None = None

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in np.ravel(a)]

        return {
            "label": self.label,
            "exists": bool(self.exists),
            "radicands": {k: float(v) for k, v in self.radicands.items()},
            "failing_radicand": self.failing_radicand,
            "r0": None if math.isnan(self.r0) else self.r0,
            "w0": None if math.isnan(self.w0) else self.w0,
            "refined": arr(self.refined),
            "refinement_shift": None if math.isnan(self.refinement_shift) else self.refinement_shift,
            "jacobian": arr(self.jacobian),
            "eigenvalues": None
            if self.eigenvalues is None
            else [[v.real, v.imag] for v in self.eigenvalues],
            "stability": self.stability,
            "half_space": self.half_space,
            "initial_condition": arr(self.initial_condition),
        }


def prediction_radicands(setup: HopfSetup) -> dict:
    """The three existence radicands of the closed-form zeros."""
    a1, a2, b1, b2, d1 = setup.a1, setup.a2, setup.b1, setup.b2, setup.d1
    l, m = setup.l, setup.m
    r1_rad = a1 * l / ((a1 - d1) * d1)
    denom_poly = 5.0 * b1 * a1**3 - 5.0 * b1 * d1 * a1**2 - 24.0 * a2 * b2 * d1**2
    r2_rad = (
        a1 * b1 * (a1**2 * b1 * (a1 - d1) * m - 4.0 * a2 * b2 * d1**2 * (l + m))
        / (a2 * b2 * d1 * denom_poly)
    )
    w2_rad = (24.0 * a2 * b2 * d1**2 * l - a1**2 * b1 * (a1 - d1) * m) / (
        a2 * b2 * (a1 - d1) ** 2 * d1 * (2.0 * b2 * d1 - a1 * b1) * (-denom_poly)
    )
    return {"R1": r1_rad, "R2": r2_rad, "W2": w2_rad}


def averaged_zero_field(setup: HopfSetup) -> AveragedField:
    """The averaged field whose zeros are the cycle candidates (F10 = 0)."""
    return AveragedField(
        f10=lambda z: np.zeros(2),
        f20=lambda z: closed_f20(setup, z[0], z[1]),
        jac=lambda z: closed_f20_jacobian(setup, z[0], z[1]),
    )


def flow_aligned_jacobian(setup: HopfSetup, r: float, w: float) -> np.ndarray:
    """Averaged-field Jacobian in the orientation that advances with time.

    The normal form's angle decreases along true trajectories, so real-time
    stability of the averaged dynamics is governed by the negated Jacobian.
    """
    return -closed_f20_jacobian(setup, r, w)


def _eigs_2x2(jac: np.ndarray) -> tuple[complex, complex]:
    """Eigenvalues by the explicit quadratic formula with a stable branch."""
    tr = jac[0, 0] + jac[1, 1]
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    disc = tr * tr - 4.0 * det
    if disc >= 0.0:
        root = math.sqrt(disc)
        # avoid cancellation: compute the large-magnitude root first
        lam1 = 0.5 * (tr + math.copysign(root, tr)) if tr != 0.0 else 0.5 * root
        lam2 = det / lam1 if lam1 != 0.0 else 0.5 * (tr - math.copysign(root, tr))
        return complex(lam1), complex(lam2)
    root = math.sqrt(-disc)
    return complex(0.5 * tr, 0.5 * root), complex(0.5 * tr, -0.5 * root)


def stability_of(setup: HopfSetup, r0: float, w0: float):
    """(eigenvalues, class) of the cycle associated with the zero (r0, w0).

    Eigenvalues are those of the flow-aligned Jacobian.  Raises
    :class:`DegenerateJacobianError` when the determinant is too small for
    the nonzero-index certificate, in which case stability transfer does
    not apply.
    """
    jac = flow_aligned_jacobian(setup, r0, w0)
    scale = float(np.prod(np.linalg.norm(jac, axis=1)))
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    if abs(det) < 1e-10 * max(scale, 1e-300):
        raise DegenerateJacobianError(
            "averaged-field Jacobian is numerically singular at the zero"
        )
    lam1, lam2 = _eigs_2x2(jac)
    margin = STABILITY_MARGIN * max(1.0, float(np.max(np.abs(jac))))
    if abs(lam1.real) <= margin or abs(lam2.real) <= margin:
        label = INDETERMINATE
    elif lam1.real > 0.0 and lam2.real > 0.0:
        label = REPELLER
    elif lam1.real < 0.0 and lam2.real < 0.0:
        label = ATTRACTOR
    else:
        label = SADDLE_LIKE
    return (lam1, lam2), label


def half_space_of(setup: HopfSetup, r0: float, w0: float, epsilon: float | None = None) -> str:
    """Which z half-space the cycle with averaged zero (r0, w0) lives in.

    The mapped start point has z = G*eps*w0 exactly (the basis matrix's
    third row vanishes except in the transverse column), so the sign is
    that of G*w0; G's sign is computed, never assumed equal to sign(w0).
    """
    if w0 == 0.0:
        return "z=0"
    frame = normal_form_frame(setup, epsilon)
    return "z>0" if frame.G * w0 > 0.0 else "z<0"


def prediction_initial_condition(
    setup: HopfSetup, r0: float, w0: float, epsilon: float | None = None
) -> np.ndarray:
    """Original-coordinates start point (eps*r0, 0, eps*w0) of the cycle."""
    return inverse_map(setup, CylState(r=r0, theta=0.0, w=w0), epsilon)


def predict_cycles(setup: HopfSetup, refine: bool = True) -> list[CyclePrediction]:
    """All closed-form cycle predictions, refined and classified.

    Non-existence (a nonpositive radicand) is reported per prediction with
    the failing radicand named, never raised.
    """
    a1, b1, d1 = setup.a1, setup.b1, setup.d1
    rad = prediction_radicands(setup)
    field = averaged_zero_field(setup) if refine else None

    candidates = []
    if rad["R1"] > 0.0:
        candidates.append(("planar", 2.0 * b1 * math.sqrt(rad["R1"]), 0.0, None))
    else:
        candidates.append(("planar", math.nan, math.nan, "R1"))
    if rad["R2"] > 0.0 and rad["W2"] > 0.0:
        r2 = (a1 * b1 / d1) * math.sqrt(rad["R2"])
        w2 = (a1**2 * b1**2 / math.sqrt(2.0)) * math.sqrt(rad["W2"])
        candidates.append(("pair+", r2, w2, None))
        candidates.append(("pair-", r2, -w2, None))
    else:
        failing = "R2" if rad["R2"] <= 0.0 else "W2"
        candidates.append(("pair+", math.nan, math.nan, failing))
        candidates.append(("pair-", math.nan, math.nan, failing))

    out = []
    for label, r0, w0, failing in candidates:
        if failing is not None:
            out.append(
                CyclePrediction(label=label, exists=False, radicands=rad, failing_radicand=failing)
            )
            continue
        refined = np.array([r0, w0])
        shift = 0.0
        degree = None
        if refine:
            zeros = find_zeros(field, [refined])
            if zeros:
                refined = zeros[0].z
                shift = float(np.linalg.norm(refined - np.array([r0, w0]))) / (
                    1.0 + float(np.hypot(r0, w0))
                )
                degree = zeros[0].degree_nonzero
        eigenvalues, stability = stability_of(setup, refined[0], refined[1])
        start = (
            prediction_initial_condition(setup, refined[0], refined[1])
            if setup.epsilon > 0.0
            else None
        )
        out.append(
            CyclePrediction(
                label=label,
                exists=True,
                radicands=rad,
                r0=r0,
                w0=w0,
                refined=refined,
                refinement_shift=shift,
                jacobian=flow_aligned_jacobian(setup, refined[0], refined[1]),
                eigenvalues=eigenvalues,
                stability=stability,
                half_space=half_space_of(setup, refined[0], refined[1]),
                initial_condition=start,
                degree_nonzero=degree,
            )
        )
    return out


def grid_scan_zeros(
    setup: HopfSetup,
    r_range=(0.1, 400.0),
    w_range=(-100.0, 100.0),
    n_r: int = 321,
    n_w: int = 161,
) -> list:
    """Brute-force sign-change scan of the averaged field, Newton-polished.

    Seeds every grid cell where both components change sign; returns the
    deduplicated converged zeros with r > 0.  Serves as the oracle that no
    zeros beyond the closed-form ones exist.
    """
    rr = np.linspace(r_range[0], r_range[1], n_r)
    ww = np.linspace(w_range[0], w_range[1], n_w)
    grid_r, grid_w = np.meshgrid(rr, ww, indexing="ij")
    f = closed_f20(setup, grid_r, grid_w)
    sign1 = np.sign(f[..., 0])
    sign2 = np.sign(f[..., 1])

    def straddles(s, i, j):
        cell = s[i : i + 2, j : j + 2]
        return cell.max() > 0.0 > cell.min()

    seeds = [
        (0.5 * (rr[i] + rr[i + 1]), 0.5 * (ww[j] + ww[j + 1]))
        for i in range(n_r - 1)
        for j in range(n_w - 1)
        if straddles(sign1, i, j) and straddles(sign2, i, j)
    ]
    zeros = find_zeros(averaged_zero_field(setup), seeds, dedup_tol=1e-6)
    return [z for z in zeros if z.z[0] > 0.0]
