"""Normal-form coordinate pipeline around the planar equilibrium.

Five composed exact maps: translate the equilibrium to the origin, change
basis so the linear part is in real Jordan form, pass to cylindrical
coordinates (U, V) = (R cos(theta), R sin(theta)), rescale (R, W) =
(eps*r, eps*w), and reparametrize time by the angle.  The slow dynamics
then expands as

    dr/dtheta = eps*F11(theta, r, w) + eps^2*F21(theta, r, w) + O(eps^3),
    dw/dtheta = eps*F12(theta, r, w) + eps^2*F22(theta, r, w) + O(eps^3),

and the coefficient functions are recovered numerically by polynomial
extrapolation in eps of the exact pipeline; those extracted values are the
authoritative coefficients.  Short closed-form transcriptions of F11, F12
and F22 are kept as an independent cross-check oracle.

Note the angle runs CLOCKWISE: the leading angular rate is
-sqrt(b1*d1*k)/k < 0, so theta decreases along true time.  Everything in
this module is expressed with theta as the independent variable; callers
that need real-time stability must account for the orientation.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .equilibria import equilibrium_p3
from .errors import (
    ConstraintViolationError,
    ExtractionError,
    ReparametrizationError,
    SingularTransformError,
)
from .hopf import HopfSetup
from .model import ModelParams, shifted_vector_field

#: reject the angle reparametrization when |d(theta)/dt| falls below this
ANGULAR_RATE_FLOOR = 1e-10

#: default radius of the complex epsilon circle used by the extraction
DEFAULT_EXTRACTION_STEP = 1e-2

#: sample count on the epsilon circle (alias error ~ (h/pole-radius)^nodes)
EXTRACTION_NODES = 24


@dataclass(frozen=True)
class CylState:
    """Rescaled cylindrical coordinates (r >= 0, theta in [0, 2pi), w)."""

    r: float
    theta: float
    w: float


@dataclass(frozen=True)
class NormalFormFrame:
    """Everything epsilon-specific the coordinate maps need.

    ``basis`` maps (U, V, W) column vectors to (X, Y, Z) offsets from the
    equilibrium ``p3``; its columns are the scaled real/imaginary parts of
    the oscillatory eigenvector and the transverse eigenvector.  ``F``/``k``
    is the rotation rate magnitude; ``G`` scales the transverse coordinate
    into z (its sign decides which half-space w > 0 maps to); ``H`` and
    ``I`` are the factors composing G.
    """

    setup: HopfSetup
    epsilon: float
    params: ModelParams
    p3: np.ndarray
    basis: np.ndarray
    basis_inv: np.ndarray
    F: float
    G: float
    H: float
    I: float

    @property
    def rotation_rate(self) -> float:
        """Leading angular rate d(theta)/dt = -F/k (negative: clockwise)."""
        return -self.F / self.setup.k


def normal_form_frame(setup: HopfSetup, epsilon: float | None = None) -> NormalFormFrame:
    """Build the change-of-variables frame at the given epsilon.

    The scale F is sqrt(k*(b1*d1 - eps^2*k*l*(l*eps^2 - 2*a1 + 2*d1))),
    which makes F/k exactly the imaginary part of the constrained
    eigenvalue pair and renders the linear block an exact real Jordan
    rotation block.
    """
    if epsilon is not None:
        setup = setup.at_epsilon(epsilon)
    e = setup.epsilon
    a1, a2, b1, b2, d1 = setup.a1, setup.a2, setup.b1, setup.b2, setup.d1
    k, l, m = setup.k, setup.l, setup.m

    params = setup.params()
    p3 = equilibrium_p3(params)

    radicand = k * (b1 * d1 - e**2 * k * l * (l * e**2 - 2.0 * a1 + 2.0 * d1))
    if radicand <= 0.0:
        raise ConstraintViolationError("oscillatory pair lost: rotation-rate radicand not positive")
    F = np.sqrt(radicand)
    H = (
        b2 * k * d1**3
        + a1 * (b1**2 - 2.0 * e**2 * k * l * b1 - 2.0 * b2 * d1 * k) * d1
        + a1**2 * k * (2.0 * b1 * l * e**2 + b2 * d1)
    )
    I = k * (m * (m - 2.0 * l) * e**2 + 2.0 * a1 * l - 2.0 * d1 * l) * e**2 + b1 * d1
    g_den = a1 * a2 * b1 * d1 * k * (2.0 * (a1 - d1) * k * l * e**2 + b1 * d1)
    if g_den == 0.0:
        raise SingularTransformError("transverse column scale G undefined")
    G = H * I / g_den

    basis = np.array([
        [-d1 * k / F, 0.0, 1.0],
        [-(e**2) * k * l / F, 1.0, e**2 * (2.0 * l - m) / d1],
        [0.0, 0.0, G],
    ])
    det = np.linalg.det(basis)
    scale = float(np.prod(np.linalg.norm(basis, axis=0)))
    if abs(det) < 1e-12 * scale:
        raise SingularTransformError(f"change-of-variables matrix is singular (det={det:.3e})")
    return NormalFormFrame(
        setup=setup, epsilon=e, params=params, p3=p3,
        basis=basis, basis_inv=np.linalg.inv(basis), F=float(F), G=float(G), H=float(H), I=float(I),
    )


def forward_map(setup: HopfSetup, state, epsilon: float | None = None) -> CylState:
    """Original coordinates -> rescaled cylindrical chart.

    Requires epsilon > 0 (the rescaling is undefined at 0).  At the
    equilibrium itself the angle is set to 0 by convention.
    """
    frame = normal_form_frame(setup, epsilon)
    if frame.epsilon <= 0.0:
        raise ConstraintViolationError("forward_map needs epsilon > 0 for the rescaling step")
    offset = np.asarray(state, dtype=float) - frame.p3
    u, v, w_raw = frame.basis_inv @ offset
    radius = np.hypot(u, v)
    theta = float(np.mod(np.arctan2(v, u), 2.0 * np.pi)) if radius > 0.0 else 0.0
    return CylState(r=float(radius / frame.epsilon), theta=theta, w=float(w_raw / frame.epsilon))


def inverse_map(setup: HopfSetup, cyl: CylState, epsilon: float | None = None) -> np.ndarray:
    """Rescaled cylindrical chart -> original coordinates (exact inverse)."""
    frame = normal_form_frame(setup, epsilon)
    if frame.epsilon <= 0.0:
        raise ConstraintViolationError("inverse_map needs epsilon > 0 for the rescaling step")
    big_r = frame.epsilon * cyl.r
    uvw = np.array([big_r * np.cos(cyl.theta), big_r * np.sin(cyl.theta), frame.epsilon * cyl.w])
    return frame.p3 + frame.basis @ uvw


def _chart_rates(frame: NormalFormFrame, theta, r, w):
    """(dr/dt, dtheta/dt, dw/dt) in the rescaled chart, broadcast over inputs."""
    e = frame.epsilon
    theta, r, w = np.broadcast_arrays(
        np.asarray(theta, dtype=float), np.asarray(r, dtype=float), np.asarray(w, dtype=float)
    )
    big_r = e * r
    u = big_r * np.cos(theta)
    v = big_r * np.sin(theta)
    uvw = np.stack((u, v, e * w), axis=-1)
    offset = uvw @ frame.basis.T
    vel = shifted_vector_field(frame.params, frame.p3, offset) @ frame.basis_inv.T
    du, dv, dw_raw = vel[..., 0], vel[..., 1], vel[..., 2]
    r2 = big_r**2
    with np.errstate(divide="ignore", invalid="ignore"):
        big_r_dot = (u * du + v * dv) / big_r
        theta_dot = (u * dv - v * du) / r2
    return big_r_dot / e, theta_dot, dw_raw / e


def theta_dynamics(setup: HopfSetup, theta, r, w, epsilon: float | None = None):
    """Exact (dr/dtheta, dw/dtheta) at the given chart point(s).

    Pushes the vector field through the coordinate maps (no series
    truncation) and divides the radial/axial rates by the angular rate.
    Broadcasts over array inputs.  Raises
    :class:`ReparametrizationError` when |dtheta/dt| < 1e-10 anywhere.
    """
    frame = normal_form_frame(setup, epsilon)
    if frame.epsilon <= 0.0:
        raise ConstraintViolationError("theta_dynamics needs epsilon > 0")
    r_dot, theta_dot, w_dot = _chart_rates(frame, theta, r, w)
    bad = ~np.isfinite(theta_dot) | (np.abs(theta_dot) < ANGULAR_RATE_FLOOR)
    if np.any(bad):
        raise ReparametrizationError("angular rate below 1e-10: time-to-angle change invalid")
    return r_dot / theta_dot, w_dot / theta_dot


@dataclass(frozen=True)
class SeriesCoefficients:
    """Point evaluations of the slow-dynamics expansion coefficients.

    ``f11``/``f21`` drive dr/dtheta at first/second order in eps,
    ``f12``/``f22`` drive dw/dtheta.  ``residual`` is the extraction
    consistency estimate (imaginary leakage of the circle quadrature,
    absolute; exactly zero coefficients are real for a real family).
    """

    f11: np.ndarray
    f21: np.ndarray
    f12: np.ndarray
    f22: np.ndarray
    residual: float


def _expansion_rates(setup: HopfSetup, eps, theta, r, w):
    """(dr/dtheta, dw/dtheta) of the exact pipeline with eps possibly complex.

    Rebuilds every eps-dependent ingredient (derived parameters,
    equilibrium, change-of-variables matrix) in the dtype of ``eps``; all
    of them are rational functions of eps, or the square root of one whose
    radicand stays near a positive value, so a small complex circle of eps
    values is analytic territory.

    ``eps`` has shape (n,); theta/r/w broadcast to a common shape S; the
    returned arrays have shape (n,) + S.
    """
    a1, a2, b1, b2 = setup.a1, setup.a2, setup.b1, setup.b2
    d1, k, l, m = setup.d1, setup.k, setup.l, setup.m

    theta, r, w = np.broadcast_arrays(
        np.asarray(theta, dtype=float), np.asarray(r, dtype=float), np.asarray(w, dtype=float)
    )
    eps = np.atleast_1d(np.asarray(eps))
    n = eps.shape[0]
    e = eps.reshape((n,) + (1,) * theta.ndim)

    rho = (2.0 * a1 * (a1 - d1) * k * l * e**2 + b1 * d1 * (a1 + d1)) / ((a1 - d1) * d1 * k)
    d2_num = a1 * a2 * b1**2 * d1 + setup.E * e**2 + 2.0 * a1 * b1 * (d1 - a1) * k * l * m * e**4
    d2_den = d1 * (
        b2 * k * a1**2 + (b1**2 - 2.0 * b2 * d1 * k) * a1 + b2 * d1**2 * k
    ) + 2.0 * a1 * b1 * (a1 - d1) * k * l * e**2
    params = SimpleNamespace(a1=a1, a2=a2, b1=b1, b2=b2, d1=d1, d2=d2_num / d2_den, k=k, rho=rho)

    x3 = b1 * d1 / (a1 - d1)
    y3 = -b1 * (b1 * d1 + (d1 - a1) * k * rho) / ((a1 - d1) ** 2 * k)
    p3 = np.stack(np.broadcast_arrays(x3 + 0.0 * y3, y3, 0.0 * y3), axis=-1)

    # eps-exact change-of-variables matrix, one per eps node
    ef = eps.astype(complex) if np.iscomplexobj(eps) else eps
    F = np.sqrt(k * (b1 * d1 - ef**2 * k * l * (l * ef**2 - 2.0 * a1 + 2.0 * d1)) + 0j)
    if not np.iscomplexobj(eps):
        F = F.real
    H = (
        b2 * k * d1**3
        + a1 * (b1**2 - 2.0 * ef**2 * k * l * b1 - 2.0 * b2 * d1 * k) * d1
        + a1**2 * k * (2.0 * b1 * l * ef**2 + b2 * d1)
    )
    Iv = k * (m * (m - 2.0 * l) * ef**2 + 2.0 * a1 * l - 2.0 * d1 * l) * ef**2 + b1 * d1
    G = H * Iv / (a1 * a2 * b1 * d1 * k * (2.0 * (a1 - d1) * k * l * ef**2 + b1 * d1))
    basis = np.zeros((n, 3, 3), dtype=F.dtype)
    basis[:, 0, 0] = -d1 * k / F
    basis[:, 0, 2] = 1.0
    basis[:, 1, 0] = -(ef**2) * k * l / F
    basis[:, 1, 1] = 1.0
    basis[:, 1, 2] = ef**2 * (2.0 * l - m) / d1
    basis[:, 2, 2] = G
    basis_inv = np.linalg.inv(basis)

    big_r = e * r
    u = big_r * np.cos(theta)
    v = big_r * np.sin(theta)
    uvw = np.stack((u, v, e * w), axis=-1)
    flat = uvw.reshape(n, -1, 3)
    offset = np.einsum("nmj,nij->nmi", flat, basis).reshape(uvw.shape)
    field = shifted_vector_field(params, p3, offset)
    vel = np.einsum("nmj,nij->nmi", field.reshape(n, -1, 3), basis_inv).reshape(uvw.shape)
    du, dv, dw_raw = vel[..., 0], vel[..., 1], vel[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        big_r_dot = (u * du + v * dv) / big_r
        theta_dot = (u * dv - v * du) / big_r**2
    if np.any(np.abs(theta_dot) < ANGULAR_RATE_FLOOR):
        raise ReparametrizationError("angular rate below 1e-10 during series extraction")
    return big_r_dot / (theta_dot * e), dw_raw / (theta_dot * e)


def _extract_once(setup: HopfSetup, theta, r, w, step: float, nodes: int):
    """One circle pass: (c1, c2, imaginary leakage) at radius ``step``."""
    phi = 2.0 * np.pi * np.arange(nodes) / nodes
    eps = step * np.exp(1j * phi)
    dr, dw = _expansion_rates(setup, eps, theta, r, w)
    samples = np.stack((dr, dw), axis=-1) / eps.reshape((nodes,) + (1,) * (dr.ndim - 1) + (1,))
    c1 = np.tensordot(np.ones(nodes) / nodes, samples, axes=(0, 0))
    c2 = np.tensordot(np.exp(-1j * phi) / nodes, samples, axes=(0, 0)) / step
    leak = float(max(np.max(np.abs(c1.imag)), np.max(np.abs(c2.imag))))
    return c1.real, c2.real, leak


def extract_series(
    setup: HopfSetup,
    theta,
    r,
    w,
    base_step: float = DEFAULT_EXTRACTION_STEP,
    nodes: int = EXTRACTION_NODES,
) -> SeriesCoefficients:
    """Recover the expansion coefficients at (theta, r, w) numerically.

    Polynomial extrapolation in eps done on a complex circle: the exact
    angle dynamics is sampled at eps = h*exp(i*phi_j), divided by eps, and
    the eps^0/eps^1 Fourier modes give the first- and second-order
    coefficients.  The circle keeps every sample at magnitude h (none of
    the roundoff amplification of collinear real nodes) and its alias
    error decays geometrically in the node count.

    The expansion's analyticity radius shrinks like r/w^2 where the
    angular rate loses dominance, so the radius is halved until two
    consecutive passes agree to 5e-7 of each coefficient's scale; the
    returned ``residual`` is that final disagreement.  Raises
    :class:`ExtractionError` when no radius in the halving budget settles.
    """
    step = base_step
    prev = None
    for _ in range(7):
        c1, c2, leak = _extract_once(setup, theta, r, w, step, nodes)
        if leak <= 1e-6 * max(1.0, float(np.max(np.abs(c1)))) and prev is not None:
            pc1, pc2 = prev
            diff = max(
                float(np.max(np.abs(c1 - pc1))) / max(1.0, float(np.max(np.abs(c1)))),
                float(np.max(np.abs(c2 - pc2))) / max(1.0, float(np.max(np.abs(c2)))),
            )
            if diff <= 5e-7:
                return SeriesCoefficients(
                    f11=c1[..., 0], f21=c2[..., 0], f12=c1[..., 1], f22=c2[..., 1],
                    residual=diff,
                )
        prev = (c1, c2)
        step *= 0.5
    raise ExtractionError(
        f"series extraction did not settle down to radius {step:.2e}: "
        "expansion coefficients inconsistent between consecutive radii"
    )


def _q_poly(a1, b1, b2, d1, k):
    # recurring quartic a1*b1^2 + b2*k*(a1-d1)^2
    return b2 * k * a1**2 + b1**2 * a1 - 2.0 * b2 * d1 * k * a1 + b2 * d1**2 * k


def _t0(setup: HopfSetup) -> float:
    """Leading angular rate (constant, negative)."""
    return -np.sqrt(setup.b1 * setup.d1 * setup.k) / setup.k


def _r1_term(setup: HopfSetup, theta, r, w):
    """Closed-form leading radial numerator (cross-check oracle)."""
    a1, a2, b1, b2, d1 = setup.a1, setup.a2, setup.b1, setup.b2, setup.d1
    k = setup.k
    root = np.sqrt(b1 * d1 * k)
    q = _q_poly(a1, b1, b2, d1, k)
    cos, sin = np.cos(theta), np.sin(theta)
    rw_coeff = (
        b2**2 * k**2 * a1**5
        + a2 * b1 * b2 * k**2 * a1**4
        - 3.0 * b2**2 * d1 * k**2 * a1**4
        + 2.0 * b1**2 * b2 * k * a1**4
        + b1**4 * a1**3
        + 2.0 * b2**2 * d1**2 * k**2 * a1**3
        - 3.0 * a2 * b1 * b2 * d1 * k**2 * a1**3
        - 2.0 * b1**2 * b2 * d1 * k * a1**3
        + 2.0 * b2**2 * d1**3 * k**2 * a1**2
        + 3.0 * a2 * b1 * b2 * d1**2 * k**2 * a1**2
        + b1**4 * d1 * a1**2
        - 2.0 * b1**2 * b2 * d1**2 * k * a1**2
        - 3.0 * b2**2 * d1**4 * k**2 * a1
        - a2 * b1 * b2 * d1**3 * k**2 * a1
        + 2.0 * b1**2 * b2 * d1**3 * k * a1
        + b2**2 * d1**5 * k**2
    )
    return (
        d1**2 * r**2 / (a1 * root) * cos**3
        - (a1 - d1) * r**2 / b1 * cos**2 * sin
        - 2.0 * d1 * w * r / (a1 * k) * cos**2
        + root * w**2 / (a1 * k**2) * cos
        + (a1 - d1) / (a1 * root * q**2) * rw_coeff * r * w * cos * sin
        + (a1 - d1) * d1 * (d1 - a1) * k * r**2 / (a1 * b1 * root) * cos * sin**2
        + b1 * (a1 - d1) ** 2 * r * w / q * sin**2
        - (a1 - d1) * w**2 / (a1 * k) * sin
    )


def _t1_term(setup: HopfSetup, theta, r, w):
    """Closed-form first angular-rate correction (cross-check oracle)."""
    a1, a2, b1, b2, d1 = setup.a1, setup.a2, setup.b1, setup.b2, setup.d1
    k = setup.k
    root = np.sqrt(b1 * d1 * k)
    q = _q_poly(a1, b1, b2, d1, k)
    cos, sin = np.cos(theta), np.sin(theta)
    lw_num = (a1 - d1) ** 2 * root * (
        b2**2 * k**2 * a1**4
        + a2 * b1 * b2 * k**2 * a1**3
        - 4.0 * b2**2 * d1 * k**2 * a1**3
        + 2.0 * b1**2 * b2 * k * a1**3
        + b1**4 * a1**2
        + 6.0 * b2**2 * d1**2 * k**2 * a1**2
        - 2.0 * a2 * b1 * b2 * d1 * k**2 * a1**2
        - 4.0 * b1**2 * b2 * d1 * k * a1**2
        - 4.0 * b2**2 * d1**3 * k**2 * a1
        + a2 * b1 * b2 * d1**2 * k**2 * a1
        + 2.0 * b1**2 * b2 * d1**2 * k * a1
        + b2**2 * d1**4 * k**2
    ) * w
    lw_den = a1 * b1 * d1 * k * q**2
    cs_w_num = (
        b1 * k * a1**3
        - 2.0 * b1 * d1 * k * a1**2
        + 2.0 * b2 * d1 * k * a1**2
        + 2.0 * b1**2 * d1 * a1
        + b1 * d1**2 * k * a1
        - 4.0 * b2 * d1**2 * k * a1
        + 2.0 * b2 * d1**3 * k
    ) * w
    return (
        -(a1 - d1) * d1 * r / (a1 * b1) * cos**3
        - 2.0 * (d1 - a1) * root * w / (a1 * b1 * k) * cos**2
        - root * (k * a1**2 - 2.0 * d1 * k * a1 + b1 * d1 + d1**2 * k) * r / (a1 * b1**2 * k) * cos**2 * sin
        - (a1 - d1) * w**2 / (a1 * k * r) * cos
        + cs_w_num / (a1 * k * q) * cos * sin
        + (a1 - d1) ** 2 * r / (a1 * b1) * cos * sin**2
        - lw_num / lw_den * sin**2
        - root * w**2 / (a1 * k**2 * r) * sin
    )


def _w1_term(setup: HopfSetup, theta, r, w):
    """Closed-form leading axial numerator, proportional to r*w*sin(theta).

    This is w times the y-derivative of the transverse growth rate times
    the leading y-offset r*sin(theta): a2*b2/(b2+y3)^2 * r*w*sin(theta)
    with b2+y3 = Q/((a1-d1)^2*k).
    """
    a1, a2, b2, d1 = setup.a1, setup.a2, setup.b2, setup.d1
    q = _q_poly(a1, setup.b1, b2, d1, setup.k)
    return a2 * b2 * (a1 - d1) ** 4 * setup.k**2 * r * w / q**2 * np.sin(theta)


def _w2_term(setup: HopfSetup, theta, r, w):
    """Closed-form second axial numerator (cross-check oracle).

    m*w from the pinned transverse eigenvalue plus the second y-derivative
    term -a2*b2/(b2+y3)^3 * r^2*w*sin^2(theta).
    """
    a1, a2, b2, d1 = setup.a1, setup.a2, setup.b2, setup.d1
    q = _q_poly(a1, setup.b1, b2, d1, setup.k)
    return (
        setup.m * w
        - a2 * b2 * (a1 - d1) ** 6 * setup.k**3 * r**2 * w / q**3 * np.sin(theta) ** 2
    )


def reference_f11(setup: HopfSetup, theta, r, w):
    """Transcribed closed form of the leading radial coefficient."""
    return _r1_term(setup, theta, r, w) / _t0(setup)


def reference_f12(setup: HopfSetup, theta, r, w):
    """Transcribed closed form of the leading axial coefficient."""
    return _w1_term(setup, theta, r, w) / _t0(setup)


def reference_f22(setup: HopfSetup, theta, r, w):
    """Transcribed closed form of the second-order axial coefficient."""
    t0 = _t0(setup)
    return (
        _w2_term(setup, theta, r, w) * t0 - _w1_term(setup, theta, r, w) * _t1_term(setup, theta, r, w)
    ) / t0**2


def series_grid_csv(setup: HopfSetup, path, r_values, w_values, n_theta: int = 8) -> None:
    """Dump extracted coefficient grids to CSV for debugging."""
    thetas = np.linspace(0.0, 2.0 * np.pi, n_theta, endpoint=False)
    with open(path, "w") as fh:
        fh.write("theta,r,w,f11,f21,f12,f22\n")
        for r in r_values:
            for w in w_values:
                coeffs = extract_series(setup, thetas, r, w)
                for i, th in enumerate(thetas):
                    fh.write(
                        f"{th},{r},{w},{coeffs.f11[i]!r},{coeffs.f21[i]!r},"
                        f"{coeffs.f12[i]!r},{coeffs.f22[i]!r}\n"
                    )
