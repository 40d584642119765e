"""Direct ODE verification: integration, return maps, Floquet multipliers.

Locates the periodic orbits predicted by the averaged analysis by Newton
iteration on a Poincare section (the section passes through the predicted
point with normal along the flow, maximizing transversality) and measures
their stability through the monodromy matrix of the variational equations.

The transverse multipliers here sit within O(eps^2) of 1, so the section
fixed point is solved with the variational-equation Jacobian rather than
plain return-map iteration (whose contraction rate would be uselessly
close to 1), and integrator tolerances default tight.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp

from .cycles import CyclePrediction, prediction_initial_condition
from .equilibria import equilibrium_p3
from .errors import IntegrationError, NoReturnError, NonConvergenceError, TrivialMultiplierError
from .hopf import HopfSetup
from .model import ModelParams, jacobian, vector_field
from .transform import normal_form_frame

#: default epsilon scan for cycle verification
DEFAULT_EPSILON_SCAN = (0.05, 0.02, 0.01)


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf
    max_steps: int = 1_000_000
    method: str = "DOP853"

    def __post_init__(self):
        if not (0.0 < self.rtol < 1.0 and 0.0 < self.atol < 1.0):
            raise ValueError("tolerances must lie in (0, 1)")


DEFAULT_CONFIG = IntegratorConfig()


@dataclass
class Trajectory:
    """Integration output with dense evaluation."""

    t: np.ndarray
    y: np.ndarray              # (n, 3)
    dense: object = None       # scipy OdeSolution
    t_events: list | None = None
    y_events: list | None = None

    def __call__(self, t):
        if self.dense is None:
            raise ValueError("trajectory was computed without dense output")
        return np.asarray(self.dense(t)).T

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,x,y,z\n")
            for ti, yi in zip(self.t, self.y):
                fh.write(f"{ti!r},{yi[0]!r},{yi[1]!r},{yi[2]!r}\n")


def _solve(rhs, s0, t_span, cfg: IntegratorConfig, events=None, dense=True, t_eval=None):
    """Adaptive embedded Runge-Kutta run with the package's error policy."""
    sol = solve_ivp(
        rhs,
        t_span,
        np.asarray(s0, dtype=float),
        method=cfg.method,
        rtol=cfg.rtol,
        atol=cfg.atol,
        max_step=cfg.max_step,
        dense_output=dense,
        events=events,
        t_eval=t_eval,
    )
    if sol.status == -1:
        raise IntegrationError(f"integration failed: {sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("integration produced non-finite state")
    if sol.t.size > cfg.max_steps:
        raise IntegrationError("step budget exceeded")
    return sol


def integrate(
    p: ModelParams, s0, t_span, cfg: IntegratorConfig = DEFAULT_CONFIG, t_eval=None
) -> Trajectory:
    """Integrate the chain from ``s0`` over ``t_span`` with dense output."""
    sol = _solve(lambda t, y: vector_field(p, y), s0, t_span, cfg, t_eval=t_eval)
    return Trajectory(t=sol.t, y=sol.y.T, dense=sol.sol)


@dataclass
class MonodromyResult:
    matrix: np.ndarray
    multipliers: np.ndarray          # sorted: trivial first
    trivial_index: int
    trace_integral: float            # integral of trace(J) over one period
    transverse_integral: float       # integral of the z-divergence dz'/dz


def monodromy(
    p: ModelParams, cycle_point, period: float, cfg: IntegratorConfig = DEFAULT_CONFIG
) -> MonodromyResult:
    """Fundamental matrix of the variational equations over one period.

    Eigenvalues are the Floquet multipliers.  The trivial multiplier is
    identified by eigenvector alignment with the flow direction and must
    lie within 1e-4 of 1, otherwise :class:`TrivialMultiplierError`
    signals that the input was not a periodic point.  Two Liouville-type
    path integrals ride along for cross-checks.
    """
    x0 = np.asarray(cycle_point, dtype=float)

    def rhs(t, state):
        x = state[:3]
        mat = state[3:12].reshape(3, 3)
        jac = jacobian(p, x)
        dx = vector_field(p, x)
        dmat = jac @ mat
        dtrace = np.trace(jac)
        dtransverse = p.a2 * x[1] / (p.b2 + x[1]) - p.d2
        return np.concatenate((dx, dmat.ravel(), [dtrace, dtransverse]))

    state0 = np.concatenate((x0, np.eye(3).ravel(), [0.0, 0.0]))
    sol = _solve(rhs, state0, (0.0, float(period)), cfg, dense=False)
    end = sol.y[:, -1]
    mat = end[3:12].reshape(3, 3)
    eigvals, eigvecs = np.linalg.eig(mat)

    flow = vector_field(p, x0)
    flow = flow / np.linalg.norm(flow)
    alignment = [abs(np.vdot(eigvecs[:, i] / np.linalg.norm(eigvecs[:, i]), flow)) for i in range(3)]
    trivial = int(np.argmax(alignment))
    if abs(eigvals[trivial] - 1.0) > 1e-4:
        raise TrivialMultiplierError(
            f"no unit multiplier along the flow (closest: {eigvals[trivial]:.6g}); "
            "the reference point is not on a periodic orbit"
        )
    order = [trivial] + [i for i in range(3) if i != trivial]
    return MonodromyResult(
        matrix=mat,
        multipliers=eigvals[order],
        trivial_index=0,
        trace_integral=float(end[12]),
        transverse_integral=float(end[13]),
    )


@dataclass
class PoincareRecord:
    """Converged return-map fixed point for one epsilon."""

    epsilon: float
    prediction: np.ndarray           # predicted start point in (x, y, z)
    section_point: np.ndarray        # converged cycle point on the section
    period: float
    multipliers: np.ndarray          # trivial first
    prediction_distance: float
    prediction_distance_xy: float    # same, ignoring the weakly-determined z
    residual: float                  # final |P(s) - s|
    iterations: int
    z_range: tuple                   # (min z, max z) over one period
    half_space: str

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "prediction": [float(v) for v in self.prediction],
            "section_point": [float(v) for v in self.section_point],
            "period": self.period,
            "multipliers": [[v.real, v.imag] for v in self.multipliers],
            "prediction_distance": self.prediction_distance,
            "prediction_distance_xy": self.prediction_distance_xy,
            "residual": self.residual,
            "iterations": self.iterations,
            "z_range": [self.z_range[0], self.z_range[1]],
            "half_space": self.half_space,
        }


def _section_basis(normal):
    """Two orthonormal vectors spanning the section plane."""
    pick = np.eye(3)[np.argmin(np.abs(normal))]
    e1 = np.cross(normal, pick)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    return e1, e2


def _return_state(p, anchor, normal, x0, t_guess, cfg, box_scale, with_variational):
    """Integrate to the next same-orientation section crossing.

    Returns (crossing state, return time, monodromy over the return) where
    the last entry is None unless requested.  Event location runs on a
    short eventless leg first so the start point itself does not trigger.
    """

    def section(t, state):
        return float(normal @ (state[:3] - anchor))

    section.terminal = True
    section.direction = 1.0

    def escape(t, state):
        return float(box_scale - np.max(np.abs(state[:3])))

    escape.terminal = True
    escape.direction = -1.0

    if with_variational:
        def rhs(t, state):
            x = state[:3]
            mat = state[3:12].reshape(3, 3)
            return np.concatenate((vector_field(p, x), (jacobian(p, x) @ mat).ravel()))

        state0 = np.concatenate((x0, np.eye(3).ravel()))
    else:
        def rhs(t, state):
            return vector_field(p, state)

        state0 = np.asarray(x0, dtype=float)

    lead = 0.5 * t_guess
    sol1 = _solve(rhs, state0, (0.0, lead), cfg, dense=False, events=(escape,))
    if sol1.t_events[0].size:
        raise NoReturnError("trajectory left the bounding box before returning to the section")
    sol2 = _solve(rhs, sol1.y[:, -1], (lead, lead + 8.0 * t_guess), cfg, events=(section, escape))
    if sol2.t_events[1].size:
        raise NoReturnError("trajectory left the bounding box before returning to the section")
    if not sol2.t_events[0].size:
        raise NoReturnError("no section return within eight nominal periods")
    t_ret = float(sol2.t_events[0][0])
    state_ret = sol2.y_events[0][0]
    mono = state_ret[3:12].reshape(3, 3) if with_variational else None
    return state_ret[:3], t_ret, mono


def locate_cycle(
    p: ModelParams,
    x_guess,
    t_guess: float,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
    *,
    box_scale: float | None = None,
    tol: float = 1e-11,
    max_iter: int = 30,
    max_step_norm: float | None = None,
):
    """Newton-solve the section return map for a nearby periodic orbit.

    The section passes through ``x_guess`` with normal along the flow
    there.  ``max_step_norm`` trust-caps the Newton update, keeping the
    iterate out of neighbouring orbits' basins when the section map is
    nearly tangent to identity.  Returns (cycle point, period, iterations,
    final residual).
    """
    x_anchor = np.asarray(x_guess, dtype=float)
    f0 = vector_field(p, x_anchor)
    norm_f0 = np.linalg.norm(f0)
    if norm_f0 == 0.0:
        raise NoReturnError("flow vanishes at the section anchor (equilibrium, not a cycle)")
    normal = f0 / norm_f0
    e1, e2 = _section_basis(normal)
    basis = np.stack((e1, e2), axis=1)  # 3x2

    if box_scale is None:
        box_scale = 10.0 * (1.0 + float(np.max(np.abs(x_anchor))))

    def residual_at(s_vec):
        x0 = x_anchor + basis @ s_vec
        x_ret, t_ret, mono = _return_state(
            p, x_anchor, normal, x0, t_guess, cfg, box_scale, with_variational=True
        )
        return basis.T @ (x_ret - x0), x0, x_ret, t_ret, mono

    s = np.zeros(2)
    g, x0, x_ret, t_ret, mono = residual_at(s)
    residual = float(np.max(np.abs(g)))
    for iteration in range(1, max_iter + 1):
        if residual <= tol * (1.0 + float(np.max(np.abs(x_anchor)))):
            if x_anchor[2] == 0.0 and abs(x0[2]) <= 1e-6 * (1.0 + float(np.max(np.abs(x0)))):
                # anchor sits exactly in the invariant plane: the in-plane
                # cycle's section point does too, so drop the Newton dust
                x0 = x0.copy()
                x0[2] = 0.0
            return x0, t_ret, iteration, residual
        # section-map Jacobian: project the monodromy, removing the
        # along-flow component regenerated by the varying return time
        f_ret = vector_field(p, x_ret)
        proj = np.eye(3) - np.outer(f_ret, normal) / float(normal @ f_ret)
        dp_mat = basis.T @ (proj @ mono @ basis)
        try:
            step = np.linalg.solve(dp_mat - np.eye(2), -g)
        except np.linalg.LinAlgError as exc:
            raise NonConvergenceError("singular section-map Jacobian") from exc
        if max_step_norm is not None:
            norm = float(np.linalg.norm(step))
            if norm > max_step_norm:
                step *= max_step_norm / norm
        # damped update: the weak Floquet direction makes the solve nearly
        # singular, so a full step can tunnel into another orbit's basin
        lam = 1.0
        for _ in range(12):
            g_new, x0_new, xr_new, t_new, mono_new = residual_at(s + lam * step)
            if np.max(np.abs(g_new)) < residual:
                break
            lam *= 0.5
        else:
            raise NonConvergenceError("section Newton stalled (no descent step found)")
        s = s + lam * step
        g, x0, x_ret, t_ret, mono = g_new, x0_new, xr_new, t_new, mono_new
        residual = float(np.max(np.abs(g)))
    raise NonConvergenceError(
        f"section Newton did not converge in {max_iter} iterations (residual {residual:.3e})"
    )


def poincare_verify(
    setup: HopfSetup,
    prediction: CyclePrediction,
    epsilons=None,
    cfg: IntegratorConfig = DEFAULT_CONFIG,
) -> list[PoincareRecord]:
    """Locate the predicted cycle at each epsilon and measure its stability.

    For every epsilon in the scan (default ``DEFAULT_EPSILON_SCAN``) the
    predicted initial condition is refined to a genuine return-map fixed
    point, then the monodromy spectrum, period and half-space data are
    recorded.
    """
    if not prediction.exists:
        raise ValueError(f"prediction {prediction.label} does not exist (no cycle to verify)")
    if epsilons is None:
        epsilons = DEFAULT_EPSILON_SCAN
    if any(eps <= 0.0 for eps in epsilons):
        raise ValueError("epsilon must be positive (the rescaled chart is undefined at 0)")

    # continuation: work from the largest epsilon down, warm-starting each
    # search from the previous correction scaled by (eps/eps_prev)^2, so the
    # Newton iterate never wanders into a neighbouring orbit's basin
    order = sorted(range(len(epsilons)), key=lambda i: -epsilons[i])
    records: list = [None] * len(epsilons)
    carried = None  # (eps, x_star - x_pred) from the previous scan point
    for idx in order:
        eps = float(epsilons[idx])
        eps_setup = setup.at_epsilon(eps)
        params = eps_setup.params()
        frame = normal_form_frame(eps_setup)
        x_pred = prediction_initial_condition(eps_setup, prediction.refined[0], prediction.refined[1])
        if x_pred[0] <= 0.0 or x_pred[1] <= 0.0:
            # x = 0 and (y = 0, z = 0) are invariant, so no orbit around the
            # interior equilibrium can reach the predicted point
            raise NoReturnError(
                f"predicted start point {x_pred} leaves the positive-(x, y) region: "
                f"epsilon={eps} is outside the small-amplitude regime for this setup"
            )
        x_guess = x_pred
        if carried is not None:
            eps_prev, offset_prev = carried
            x_guess = x_pred + offset_prev * (eps / eps_prev) ** 2
        t_linear = 2.0 * np.pi / abs(frame.rotation_rate)
        box = 10.0 * (1.0 + float(np.max(np.abs(equilibrium_p3(params)))))
        w0 = float(prediction.refined[1])
        cap = 0.3 * abs(frame.G * eps * w0) if w0 != 0.0 else None
        x_star, period, iterations, residual = locate_cycle(
            params, x_guess, t_linear, cfg, box_scale=box, max_step_norm=cap
        )
        carried = (eps, x_star - x_pred)
        mono = monodromy(params, x_star, period, cfg)
        traj = integrate(params, x_star, (0.0, period), cfg)
        sample = traj(np.linspace(0.0, period, 800))
        z_min, z_max = float(np.min(sample[:, 2])), float(np.max(sample[:, 2]))
        if z_min == 0.0 and z_max == 0.0:
            half = "z=0"
        elif z_min > 0.0:
            half = "z>0"
        elif z_max < 0.0:
            half = "z<0"
        else:
            half = "crosses z=0"

        # guard against the section Newton tunneling onto a different orbit
        if w0 == 0.0:
            if half != "z=0":
                raise NonConvergenceError("planar prediction converged off the invariant plane")
        else:
            z_expected = frame.G * eps * w0
            z_mean = 0.5 * (z_min + z_max)
            if not (0.2 <= z_mean / z_expected <= 5.0):
                raise NonConvergenceError(
                    f"located orbit has z ~ {z_mean:.3g}, expected ~ {z_expected:.3g}: "
                    "converged to a different orbit"
                )
        records[idx] = PoincareRecord(
            epsilon=eps,
            prediction=x_pred,
            section_point=x_star,
            period=period,
            multipliers=mono.multipliers,
            prediction_distance=float(np.linalg.norm(x_star - x_pred)),
            prediction_distance_xy=float(np.linalg.norm((x_star - x_pred)[:2])),
            residual=residual,
            iterations=iterations,
            z_range=(z_min, z_max),
            half_space=half,
        )
    return records


def convergence_order(epsilons, distances) -> float:
    """Least-squares slope of log(distance) against log(epsilon)."""
    eps = np.asarray(epsilons, dtype=float)
    dist = np.asarray(distances, dtype=float)
    mask = dist > 0.0
    if mask.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(eps[mask]), np.log(dist[mask]), 1)[0])
