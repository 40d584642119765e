"""Second-order averaging engine and the model-specific averaged field.

The generic engine takes a T-periodic system in standard form

    dz/dt = eps*F1(t, z) + eps^2*F2(t, z) + O(eps^3),

computes the first and second averaged functions by composite quadrature,

    F10(z) = (1/T) * int_0^T F1(s, z) ds,
    F20(z) = (1/T) * int_0^T [ D_z F1(s, z) . int_0^s F1(t, z) dt + F2(s, z) ] ds,

and finds zeros of F10 + eps*F20 by damped Newton iteration with a
nonzero-Jacobian certificate on each zero.

The model-specific part supplies the food-chain system in standard form
(built on the series extraction of :mod:`trihopf.transform`) and the short
closed forms of its averaged field, which the quadrature result must
reproduce; that equivalence is the central correctness check of the whole
package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstraintViolationError, QuadratureError
from .hopf import HopfSetup
from .transform import DEFAULT_EXTRACTION_STEP, extract_series

#: default finite-difference step for d(F1)/dz of the food-chain system;
#: its F1 is polynomial of low degree in z, so a large step costs no
#: truncation error while dividing the extraction noise down
FOOD_CHAIN_DF_STEP = 0.1


@dataclass
class PeriodicSystem:
    """T-periodic system in averaging standard form.

    ``f1``/``f2`` map (t: (m,), z: (dim,)) to (m, dim) arrays; ``df1``
    maps to (m, dim, dim) with [..., i, j] = dF1_i/dz_j, or is None to
    request central finite differences with step ``fd_step``.
    """

    dim: int
    period: float
    f1: Callable
    f2: Callable | None = None
    df1: Callable | None = None
    fd_step: float = 1e-6

    def eval_f1(self, t, z):
        return np.asarray(self.f1(t, z), dtype=float)

    def eval_f2(self, t, z):
        if self.f2 is None:
            return np.zeros((len(t), self.dim))
        return np.asarray(self.f2(t, z), dtype=float)

    def eval_df1(self, t, z):
        if self.df1 is not None:
            return np.asarray(self.df1(t, z), dtype=float)
        z = np.asarray(z, dtype=float)
        cols = []
        for i in range(self.dim):
            step = np.zeros(self.dim)
            step[i] = self.fd_step
            cols.append((self.eval_f1(t, z + step) - self.eval_f1(t, z - step)) / (2 * self.fd_step))
        return np.stack(cols, axis=-1)


def _simpson(values: np.ndarray, dx: float) -> np.ndarray:
    """Composite Simpson along axis 0 (even panel count required)."""
    n = values.shape[0] - 1
    if n % 2:
        raise ValueError("Simpson rule needs an even number of panels")
    return dx / 3.0 * (
        values[0] + values[-1] + 4.0 * values[1:-1:2].sum(axis=0) + 2.0 * values[2:-2:2].sum(axis=0)
    )


def _cumulative_simpson(values: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative integral along axis 0 on a uniform grid.

    Even-index nodes accumulate composite Simpson panels; odd-index nodes
    add the 3-point Newton-Cotes half-panel (5f_{j-1} + 8f_j - f_{j+1})/12.
    """
    out = np.zeros_like(values)
    pair = dx / 3.0 * (values[:-2:2] + 4.0 * values[1:-1:2] + values[2::2])
    out[2::2] = np.cumsum(pair, axis=0)
    half = dx / 12.0 * (5.0 * values[:-2:2] + 8.0 * values[1:-1:2] - values[2::2])
    out[1::2] = out[0:-2:2] + half
    return out


def _converging_average(evaluate, rel_tol, min_panels, max_doublings):
    panels = min_panels
    previous = None
    for _ in range(max_doublings + 1):
        current = evaluate(panels)
        if previous is not None:
            if np.max(np.abs(current - previous)) < rel_tol * (1.0 + np.max(np.abs(current))):
                return current
        previous = current
        panels *= 2
    raise QuadratureError(
        f"period average did not converge after {max_doublings} panel doublings"
    )


def average_first(
    sys: PeriodicSystem, z, *, rel_tol: float = 1e-10, min_panels: int = 256, max_doublings: int = 4
) -> np.ndarray:
    """First averaged function F10(z) by composite Simpson with doubling."""
    z = np.asarray(z, dtype=float)

    def evaluate(panels):
        t = np.linspace(0.0, sys.period, panels + 1)
        return _simpson(sys.eval_f1(t, z), t[1] - t[0]) / sys.period

    return _converging_average(evaluate, rel_tol, min_panels, max_doublings)


def average_second(
    sys: PeriodicSystem, z, *, rel_tol: float = 1e-10, min_panels: int = 256, max_doublings: int = 4
) -> np.ndarray:
    """Second averaged function F20(z); inner integral on the same grid."""
    z = np.asarray(z, dtype=float)

    def evaluate(panels):
        t = np.linspace(0.0, sys.period, panels + 1)
        dx = t[1] - t[0]
        f1 = sys.eval_f1(t, z)
        inner = _cumulative_simpson(f1, dx)
        df1 = sys.eval_df1(t, z)
        integrand = np.einsum("mij,mj->mi", df1, inner) + sys.eval_f2(t, z)
        return _simpson(integrand, dx) / sys.period

    return _converging_average(evaluate, rel_tol, min_panels, max_doublings)


@dataclass
class AveragedField:
    """Averaged field F10 + weight*F20 with its Jacobian.

    ``jac`` is the analytic Jacobian of the combined field when available;
    otherwise central differences with a relative step are used.
    """

    f10: Callable
    f20: Callable
    weight: float = 1.0
    jac: Callable | None = None
    fd_step: float = 1e-6

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.asarray(self.f10(z), dtype=float) + self.weight * np.asarray(
            self.f20(z), dtype=float
        )

    def jacobian_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(z), dtype=float)
        n = z.size
        cols = []
        for i in range(n):
            step = np.zeros(n)
            step[i] = self.fd_step * max(1.0, abs(z[i]))
            cols.append((self(z + step) - self(z - step)) / (2 * step[i]))
        return np.stack(cols, axis=-1)


@dataclass
class AveragedZero:
    """A converged zero of the averaged field with its certificate."""

    z: np.ndarray
    residual: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    degree_nonzero: bool
    seed: np.ndarray
    converged: bool = True


def find_zeros(
    field: AveragedField,
    seeds,
    *,
    residual_tol: float | None = None,
    max_iter: int = 50,
    dedup_tol: float = 1e-6,
) -> list[AveragedZero]:
    """Damped Newton from every seed; converged zeros are deduplicated.

    A zero's ``degree_nonzero`` flag certifies |det J| > 1e-8 * scale
    (scale = product of row norms), the sufficient condition for a nonzero
    topological index.  Seeds that fail to converge are dropped silently;
    callers that care can compare input and output counts.
    """
    seeds = [np.atleast_1d(np.asarray(s, dtype=float)) for s in seeds]
    if not seeds:
        return []
    if residual_tol is None:
        scale = max(1.0, max(float(np.max(np.abs(field(s)))) for s in seeds))
        residual_tol = 1e-12 * scale

    zeros: list[AveragedZero] = []
    for seed in seeds:
        z = seed.copy()
        fz = field(z)
        ok = False
        for _ in range(max_iter):
            if np.max(np.abs(fz)) <= residual_tol:
                ok = True
                break
            jac = field.jacobian_at(z)
            try:
                step = np.linalg.solve(jac, -fz)
            except np.linalg.LinAlgError:
                break
            lam = 1.0
            base = np.max(np.abs(fz))
            for _ in range(20):
                cand = z + lam * step
                fc = field(cand)
                if np.max(np.abs(fc)) < base:
                    z, fz = cand, fc
                    break
                lam *= 0.5
            else:
                break
        if not ok:
            continue
        if any(np.linalg.norm(z - found.z) < dedup_tol for found in zeros):
            continue
        jac = field.jacobian_at(z)
        row_scale = float(np.prod(np.linalg.norm(jac, axis=1)))
        zeros.append(
            AveragedZero(
                z=z,
                residual=float(np.max(np.abs(fz))),
                jacobian=jac,
                eigenvalues=np.linalg.eigvals(jac),
                degree_nonzero=bool(abs(np.linalg.det(jac)) > 1e-8 * max(row_scale, 1e-300)),
                seed=seed,
            )
        )
    return zeros


def food_chain_system(
    setup: HopfSetup,
    base_step: float = DEFAULT_EXTRACTION_STEP,
    df_step: float = FOOD_CHAIN_DF_STEP,
) -> PeriodicSystem:
    """The transformed chain as a 2-pi-periodic system in (r, w).

    F1/F2 are the numerically extracted expansion coefficients of the exact
    coordinate pipeline; dF1/dz uses wide central differences (F1 is
    polynomial in (r, w), so the step costs nothing and suppresses the
    extraction noise).
    """

    def f1(t, z):
        co = extract_series(setup, t, z[0], z[1], base_step=base_step)
        return np.stack((co.f11, co.f12), axis=-1)

    def f2(t, z):
        co = extract_series(setup, t, z[0], z[1], base_step=base_step)
        return np.stack((co.f21, co.f22), axis=-1)

    def df1(t, z):
        r, w = float(z[0]), float(z[1])
        if r <= 0.0:
            raise ConstraintViolationError("slow dynamics needs r > 0")
        hr = min(df_step, 0.5 * r)  # stay clear of the r = 0 chart singularity
        dr_col = (f1(t, (r + hr, w)) - f1(t, (r - hr, w))) / (2.0 * hr)
        dw_col = (f1(t, (r, w + df_step)) - f1(t, (r, w - df_step))) / (2.0 * df_step)
        return np.stack((dr_col, dw_col), axis=-1)

    return PeriodicSystem(dim=2, period=2.0 * np.pi, f1=f1, f2=f2, df1=df1)


def _field_pieces(setup: HopfSetup):
    a1, a2, b1, b2, d1 = setup.a1, setup.a2, setup.b1, setup.b2, setup.d1
    gap = setup.gap
    if gap <= 0.0:
        raise ConstraintViolationError("closed averaged field needs a1*b1 - 2*b2*d1 > 0")
    n_root = np.sqrt(a1 * b1 / ((a1 - d1) ** 2 * gap))
    k1 = n_root / (2.0 * np.sqrt(2.0) * a1**4 * b1**4 * d1)
    alpha = 2.0 * (a1 - d1) ** 2 * gap * (b1 * a1**3 - b1 * d1 * a1**2 - 4.0 * a2 * b2 * d1**2)
    beta = a1**3 * b1**2 * d1 * 4.0 * a1 * setup.l * b1**2
    gamma = a1**3 * b1**2 * d1**2 * (a1 - d1)
    k2 = -np.sqrt(2.0) / (a1**5 * b1**5) * (a1 - d1) ** 2 * gap * n_root**3
    mu = a1**4 * setup.m * b1**4
    nu = 6.0 * a1 * a2 * b2 * d1**3 * b1
    xi = 2.0 * a2 * b2 * (a1 - d1) ** 2 * d1 * gap
    return k1, alpha, beta, gamma, k2, mu, nu, xi


def closed_f20(setup: HopfSetup, r, w) -> np.ndarray:
    """Closed-form second averaged field of the chain, stacked over (..., 2).

    Radial component: k1*r*(alpha*w^2 - beta - gamma*r^2); axial component:
    k2*w*(mu - nu*r^2 - xi*w^2).  Even in w in the first slot, odd in the
    second.
    """
    k1, alpha, beta, gamma, k2, mu, nu, xi = _field_pieces(setup)
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    f201 = k1 * r * (alpha * w**2 - beta + gamma * r**2)
    f202 = k2 * w * (mu - nu * r**2 - xi * w**2)
    return np.stack(np.broadcast_arrays(f201, f202), axis=-1)


def closed_f20_jacobian(setup: HopfSetup, r, w) -> np.ndarray:
    """Analytic 2x2 Jacobian of :func:`closed_f20` at (r, w)."""
    k1, alpha, beta, gamma, k2, mu, nu, xi = _field_pieces(setup)
    r = float(r)
    w = float(w)
    return np.array(
        [
            [k1 * (alpha * w**2 - beta + 3.0 * gamma * r**2), 2.0 * k1 * alpha * r * w],
            [-2.0 * k2 * nu * r * w, k2 * (mu - nu * r**2 - 3.0 * xi * w**2)],
        ]
    )


def closed_f10(a1, a2, b1, b2, d1, k, r, w) -> np.ndarray:
    """Closed-form first averaged field for an arbitrary capacity scale k.

    Identically zero exactly when k takes its degeneracy value
    2*a1*b1^2*d1/((a1-d1)^2*(a1*b1-2*b2*d1)); the numerator factors as
    k*(a1-d1)^2*(a1*b1-2*b2*d1) - 2*a1*b1^2*d1.
    """
    n_coeff = k * (a1 - d1) ** 2 * (a1 * b1 - 2.0 * b2 * d1) - 2.0 * a1 * b1**2 * d1
    p_coeff = a1 * (b2 * k * a1**2 + b1**2 * a1 - 2.0 * b2 * d1 * k * a1 + b2 * d1**2 * k)
    w = np.asarray(w, dtype=float)
    r = np.asarray(r, dtype=float)
    return np.stack(np.broadcast_arrays(0.0 * r, -n_coeff * w / p_coeff), axis=-1)


def averaged_field_csv(setup: HopfSetup, path, r_values, w_values) -> None:
    """Dump the closed averaged field on a grid to CSV (r, w, f201, f202)."""
    with open(path, "w") as fh:
        fh.write("r,w,f201,f202\n")
        for r in r_values:
            for w in w_values:
                f = closed_f20(setup, r, w)
                fh.write(f"{float(r)!r},{float(w)!r},{f[0]!r},{f[1]!r}\n")
