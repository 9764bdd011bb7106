"""Discrete Dynamic Movement Primitives.

Each dimension follows the critically damped transformation system

    tau * v' = alpha_y * (beta_y * (g - y) - v) + f(x)
    tau * y' = v

driven by the decaying phase ``x(t) = exp(-alpha_x * t / tau)``. The forcing
term is a normalized mixture of Gaussian bases scaled by ``x * (g_demo - y0)``
where the amplitude is frozen at its training value, so a live goal only
enters through the spring term.

Cartesian segments are handled as six scalar DMPs sharing one phase: three
position axes and three axis-angle coordinates of the orientation relative
to the segment's first sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .se3 import Pose, quat_from_rotvec, quat_multiply, quat_conjugate, quat_to_rotvec

AMPLITUDE_FLOOR = 1e-6
SINGULAR_TOL = 1e-14
ACTIVATION_FLOOR = 1e-10
# Max rotation from the chart origin before axis-angle coordinates are refused.
CHART_LIMIT = math.pi - 0.1


class TooShort(ValueError):
    """Demonstration has fewer than three samples."""


class DegenerateAmplitude(ValueError):
    """``|g - y0|`` is below the amplitude floor in strict mode."""


class SingularBasisWarning(UserWarning):
    """A basis received (almost) no weighted data during LWR; its weight is zeroed."""


class ChartError(ValueError):
    """An orientation is too far from the chart origin for axis-angle coordinates."""


@dataclass(frozen=True)
class DmpConfig:
    alpha_y: float = 25.0
    beta_y: float | None = None
    alpha_x: float = 1.0
    n_bases: int = 50
    dt: float = 0.05
    tau: float = 1.0

    def __post_init__(self):
        if self.beta_y is None:
            object.__setattr__(self, "beta_y", self.alpha_y / 4.0)
        if self.alpha_y <= 0 or self.beta_y <= 0 or self.alpha_x <= 0:
            raise ValueError("alpha_y, beta_y and alpha_x must be positive")
        if self.n_bases < 2:
            raise ValueError("need at least two basis functions")
        if self.dt <= 0 or self.tau <= 0:
            raise ValueError("dt and tau must be positive")


@dataclass(frozen=True)
class BasisLayout:
    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        h = np.asarray(self.widths, dtype=float)
        if c.shape != h.shape or c.ndim != 1:
            raise ValueError("centers and widths must be 1-D and the same length")
        if np.any(h <= 0):
            raise ValueError("widths must be positive")
        if np.any(np.diff(c) >= 0):
            raise ValueError("centers must be strictly decreasing")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "widths", h)

    @property
    def n_bases(self):
        return len(self.centers)


@dataclass(frozen=True)
class DmpParams:
    config: DmpConfig
    layout: BasisLayout
    weights: np.ndarray  # (K, D)
    y0: np.ndarray
    g_demo: np.ndarray
    duration: float
    n_steps: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if self.n_steps < 3:
            raise TooShort(f"need at least 3 samples, got {self.n_steps}")
        if abs(self.duration - (self.n_steps - 1) * self.config.dt) > 1e-9:
            raise ValueError("duration must equal (n_steps - 1) * dt")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float))
        object.__setattr__(self, "g_demo", np.asarray(self.g_demo, dtype=float))

    @property
    def n_dims(self):
        return self.weights.shape[1]

    def to_dict(self):
        """Plain-data form: config scalars, centers, widths, weights, y0, g_demo, duration."""
        c = self.config
        return {
            "config": {
                "alpha_y": c.alpha_y,
                "beta_y": c.beta_y,
                "alpha_x": c.alpha_x,
                "n_bases": c.n_bases,
                "dt": c.dt,
                "tau": c.tau,
            },
            "centers": self.layout.centers.tolist(),
            "widths": self.layout.widths.tolist(),
            "weights": self.weights.tolist(),
            "y0": self.y0.tolist(),
            "g_demo": self.g_demo.tolist(),
            "duration": self.duration,
            "n_steps": self.n_steps,
        }

    @classmethod
    def from_dict(cls, d):
        layout = BasisLayout(np.array(d["centers"]), np.array(d["widths"]))
        return cls(
            DmpConfig(**d["config"]),
            layout,
            np.array(d["weights"]).reshape(layout.n_bases, -1),
            np.array(d["y0"]),
            np.array(d["g_demo"]),
            d["duration"],
            d["n_steps"],
        )


@dataclass(frozen=True)
class RolloutState:
    y: np.ndarray
    y_dot: np.ndarray
    x: float = 1.0
    step_index: int = 0
    forcing: np.ndarray = field(default=None, compare=False)


def canonical_value(config, t):
    """Phase at time ``t``: ``exp(-alpha_x * t / tau)``."""
    return math.exp(-config.alpha_x * t / config.tau)


def make_layout(config, duration, width_scale=0.5):
    """Centers at equally spaced times over the movement.

    Widths follow the local center spacing, ``h_i = 1 / (width_scale * dc_i)**2``,
    so every basis covers a similar slice of time. The last basis reuses the
    previous spacing.
    """
    k = config.n_bases
    times = np.linspace(0.0, duration, k)
    centers = np.exp(-config.alpha_x * times / config.tau)
    spacing = -np.diff(centers)
    spacing = np.append(spacing, spacing[-1])
    widths = 1.0 / (width_scale * spacing) ** 2
    return BasisLayout(centers, widths)


def basis_activations(layout, x):
    """Gaussian activations ``exp(-h_i (x - c_i)^2)``; works on scalars or arrays of phases."""
    x = np.asarray(x, dtype=float)
    return np.exp(-layout.widths * (x[..., None] - layout.centers) ** 2)


def forcing_term(params, x, g, y0, dim, strict=False):
    """Forcing for one dimension at phase ``x`` with amplitude ``g - y0``."""
    amp = g - y0
    if strict and abs(amp) < AMPLITUDE_FLOOR:
        raise DegenerateAmplitude(f"|g - y0| = {abs(amp):.3g} below floor on dim {dim}")
    if amp == 0.0:
        return 0.0
    psi = basis_activations(params.layout, x)
    return float(psi @ params.weights[:, dim] / psi.sum() * x * amp)


def _derivatives(y, dt):
    p = len(y)
    yd = np.gradient(y, dt, edge_order=2)
    ydd = np.empty(p)
    # written on first differences so a constant signal gives exact zeros
    d = np.diff(y)
    ydd[1:-1] = (d[1:] - d[:-1]) / dt**2
    if p >= 4:
        # 2y0 - 5y1 + 4y2 - y3 and its mirror image
        ydd[0] = (3.0 * d[1] - 2.0 * d[0] - d[2]) / dt**2
        ydd[-1] = (2.0 * d[-1] - 3.0 * d[-2] + d[-3]) / dt**2
    else:
        ydd[0] = ydd[-1] = ydd[1]
    return yd, ydd


def invert_demo(demo, config, g, y0=None):
    """Target forcing ``f_d`` that makes the transformation system follow ``demo``.

    Derivatives are central differences with second-order one-sided stencils
    at both ends. ``y0`` is accepted for signature symmetry; it does not
    enter the inversion.
    """
    y = np.asarray(demo, dtype=float)
    if y.ndim != 1 or len(y) < 3:
        raise TooShort(f"need at least 3 samples, got {len(y)}")
    yd, ydd = _derivatives(y, config.dt)
    tau = config.tau
    return tau**2 * ydd - config.alpha_y * (config.beta_y * (g - y) - tau * yd)


def train_lwr(f_d, phases, layout, g, y0):
    """Per-basis weighted least squares for the forcing weights.

    Each weight minimizes ``sum_t psi_i(t) (f_d(t) - w_i * xi_t)^2`` with
    ``xi_t = x(t) (g - y0)``, giving ``w_i = sum psi xi f_d / sum psi xi^2``.
    Bases whose denominator falls below ``1e-14`` get a zero weight and a
    :class:`SingularBasisWarning`.
    """
    f_d = np.asarray(f_d, dtype=float)
    x = np.asarray(phases, dtype=float)
    k = layout.n_bases
    if abs(g - y0) < AMPLITUDE_FLOOR:
        return np.zeros(k)
    xi = x * (g - y0)
    psi = basis_activations(layout, x)  # (P, K)
    num = psi.T @ (xi * f_d)
    den = psi.T @ (xi * xi)
    w = np.zeros(k)
    ok = den >= SINGULAR_TOL
    w[ok] = num[ok] / den[ok]
    if not np.all(ok):
        warnings.warn(
            f"bases {np.flatnonzero(~ok).tolist()} carry no data; weights set to 0",
            SingularBasisWarning,
            stacklevel=2,
        )
    return w


def orientation_chart(origin_q, q):
    """Axis-angle coordinates of ``q`` relative to ``origin_q``; raises :class:`ChartError` past the limit."""
    rel = quat_multiply(quat_conjugate(origin_q), q)
    r = quat_to_rotvec(rel)
    if np.linalg.norm(r) > CHART_LIMIT:
        raise ChartError(f"rotation of {np.linalg.norm(r):.3f} rad exceeds chart limit")
    return r


def chart_to_pose(origin_q, vec6):
    return Pose(vec6[:3], quat_multiply(origin_q, quat_from_rotvec(vec6[3:])))


def poses_to_vectors(poses, origin_q=None):
    """Stack poses into ``(P, 6)`` arrays of position and chart coordinates."""
    if origin_q is None:
        origin_q = poses[0].orientation
    out = np.empty((len(poses), 6))
    for i, p in enumerate(poses):
        out[i, :3] = p.position
        out[i, 3:] = orientation_chart(origin_q, p.orientation)
    return out


def fit_trajectory(y, config):
    """Fit one DMP per column of a ``(P, D)`` array sharing one phase."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    p, d = y.shape
    if p < 3:
        raise TooShort(f"need at least 3 samples, got {p}")
    duration = (p - 1) * config.dt
    layout = make_layout(config, duration)
    phases = np.exp(-config.alpha_x * np.arange(p) * config.dt / config.tau)
    weights = np.zeros((config.n_bases, d))
    y0 = y[0].copy()
    g = y[-1].copy()
    for j in range(d):
        f_d = invert_demo(y[:, j], config, g[j], y0[j])
        weights[:, j] = train_lwr(f_d, phases, layout, g[j], y0[j])
    return DmpParams(config, layout, weights, y0, g, duration, p)


def fit_segment(segment, config=None):
    """Fit a 6-D Cartesian DMP to a sequence of :class:`Pose`.

    Orientation is encoded as axis-angle relative to the first pose, so
    ``y0`` has zero orientation coordinates. Segments rotating further than
    ``pi - 0.1`` rad from their start raise :class:`ChartError`.
    """
    config = config or DmpConfig()
    if len(segment) < 3:
        raise TooShort(f"need at least 3 samples, got {len(segment)}")
    return fit_trajectory(poses_to_vectors(segment), config)


def initial_state(start):
    start = np.atleast_1d(np.asarray(start, dtype=float))
    return RolloutState(start.copy(), np.zeros_like(start), 1.0, 0)


def rollout_step(params, state, g_now):
    """Advance one semi-implicit Euler step towards ``g_now``.

    The forcing amplitude stays at ``g_demo - y0`` regardless of ``g_now``.
    """
    if state.step_index >= params.n_steps - 1:
        raise ValueError("rollout already at its final step")
    cfg = params.config
    x = state.x
    psi = basis_activations(params.layout, x)
    amp = params.g_demo - params.y0
    f = (psi @ params.weights) / psi.sum() * x * amp
    f = np.where(amp == 0.0, 0.0, f)
    z = cfg.tau * state.y_dot
    zdot = (cfg.alpha_y * (cfg.beta_y * (np.asarray(g_now, dtype=float) - state.y) - z) + f) / cfg.tau
    z = z + zdot * cfg.dt
    y_dot = z / cfg.tau
    y = state.y + y_dot * cfg.dt
    k = state.step_index + 1
    return RolloutState(y, y_dot, canonical_value(cfg, k * cfg.dt), k, f)


def rollout(params, start, goal_provider):
    """Integrate a full fixed-length rollout.

    Args:
        params: fitted parameters.
        start: initial D-vector.
        goal_provider: callable ``step -> D-vector`` or a constant D-vector.
            The goal read at step ``k`` drives the transition into step ``k``.

    Returns:
        ``(P, D)`` array whose first row is ``start``.
    """
    if not callable(goal_provider):
        const = np.asarray(goal_provider, dtype=float)
        goal_provider = lambda _k: const  # noqa: E731
    state = initial_state(start)
    out = np.empty((params.n_steps, len(state.y)))
    out[0] = state.y
    for k in range(1, params.n_steps):
        state = rollout_step(params, state, goal_provider(k))
        out[k] = state.y
    return out


def rollout_poses(params, start_pose, goal_provider):
    """Cartesian rollout returning ``P`` poses.

    ``goal_provider`` yields goal :class:`Pose` objects; they are mapped into
    the chart anchored at ``start_pose``'s orientation.
    """
    origin = start_pose.orientation
    start = np.concatenate([start_pose.position, np.zeros(3)])
    if isinstance(goal_provider, Pose):
        fixed = goal_provider
        goal_provider = lambda _k: fixed  # noqa: E731

    def vec_goal(k):
        g = goal_provider(k)
        return np.concatenate([g.position, orientation_chart(origin, g.orientation)])

    traj = rollout(params, start, vec_goal)
    return [chart_to_pose(origin, row) for row in traj]
