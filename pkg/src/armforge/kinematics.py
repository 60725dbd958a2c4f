"""Serial-chain kinematics: FK, Jacobians, gravity statics and IK.

The inverse-kinematics solver is damped least squares with error-proportional
damping and per-step joint-limit clamping, run from multiple start poses. It
is the inner loop of every design evaluation, so the hot path keeps to small
preallocated numpy operations.

Torque here means gravity statics only: the torque each joint must hold to
keep a pose at zero velocity, with an optional point payload at the tip.
A chain whose joint axes are all parallel to gravity needs exactly zero
torque, and the implementation preserves that exactness in floating point
(the orientation tables are integer matrices, and rotating a frame about its
own y column leaves that column untouched).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .design import KinematicModel

GRAVITY = 9.81  # m/s^2, along world -z

JointState = np.ndarray


@dataclass(frozen=True)
class Pose:
    position: np.ndarray
    orientation: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Frames:
    """World-frame kinematics of every joint at one pose."""

    rotations: np.ndarray  # (n, 3, 3), frame after the joint's own rotation
    origins: np.ndarray  # (n, 3), joint origins
    axes: np.ndarray  # (n, 3), world rotation axes
    link_coms: np.ndarray  # (n, 3), world link centers of mass
    tip: np.ndarray  # (3,)

    def tip_pose(self) -> Pose:
        return Pose(position=self.tip.copy(), orientation=self.rotations[-1].copy())


@dataclass(frozen=True)
class IkOptions:
    tol: float = 1e-4  # meters
    rot_tol: float = 1e-2  # radians
    max_iter: int = 200  # per restart
    restarts: int = 10
    damping_bias: float = 1e-3
    error_clamp: float = 0.1  # meters (and radians for the rotation block)
    orientation_weight: float = 0.5
    payload: float = 0.0  # kg at the tip
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "tol": self.tol,
            "rot_tol": self.rot_tol,
            "max_iter": self.max_iter,
            "restarts": self.restarts,
            "damping_bias": self.damping_bias,
            "error_clamp": self.error_clamp,
            "orientation_weight": self.orientation_weight,
            "payload": self.payload,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "IkOptions":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown IK option(s): {sorted(unknown)}")
        return cls(**doc)


@dataclass(frozen=True)
class IkResult:
    angles: np.ndarray
    achieved: Pose
    position_error: float
    orientation_error: Optional[float]
    torque: np.ndarray
    converged: bool
    iterations: int


_Y_AXIS = np.array([0.0, 1.0, 0.0])


class _Stacked:
    """Model data rearranged for tight FK loops."""

    __slots__ = ("n", "rotations", "offsets", "coms", "masses", "tip_local", "lower", "upper", "plain_y")

    def __init__(self, model: KinematicModel):
        n = model.n_joint
        self.n = n
        self.rotations = np.stack([j.rotation for j in model.joints])
        self.offsets = np.stack([j.offset for j in model.joints])
        self.coms = np.stack([l.com for l in model.links])
        self.masses = np.array([l.mass for l in model.links])
        last = model.links[-1]
        self.tip_local = last.direction * last.length
        self.lower = np.array([j.lower for j in model.joints])
        self.upper = np.array([j.upper for j in model.joints])
        self.plain_y = all(
            j.axis[0] == 0.0 and j.axis[1] == 1.0 and j.axis[2] == 0.0 for j in model.joints
        )
        if not self.plain_y:
            self.axes_local = np.stack([j.axis for j in model.joints])


def _axis_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about an arbitrary unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = axis
    cc = 1.0 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def _axis_rotation_batch(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Rodrigues rotations about one fixed axis for a vector of angles."""
    c = np.cos(angles)
    s = np.sin(angles)
    x, y, z = axis
    cc = 1.0 - c
    out = np.empty((len(angles), 3, 3))
    out[:, 0, 0] = c + x * x * cc
    out[:, 0, 1] = x * y * cc - z * s
    out[:, 0, 2] = x * z * cc + y * s
    out[:, 1, 0] = y * x * cc + z * s
    out[:, 1, 1] = c + y * y * cc
    out[:, 1, 2] = y * z * cc - x * s
    out[:, 2, 0] = z * x * cc - y * s
    out[:, 2, 1] = z * y * cc + x * s
    out[:, 2, 2] = c + z * z * cc
    return out


def _polar_orthonormalize(rot: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(rot)
    return u @ vt


def _fk(stacked: _Stacked, theta: np.ndarray):
    """Post-rotation world frames and origins for every joint."""
    n = stacked.n
    rot_w = np.empty((n, 3, 3))
    pos_w = np.empty((n, 3))
    rot = np.eye(3)
    pos = np.zeros(3)
    for i in range(n):
        pos = pos + rot @ stacked.offsets[i]
        rot = rot @ stacked.rotations[i]
        if stacked.plain_y:
            c = math.cos(theta[i])
            s = math.sin(theta[i])
            # Right-multiplying by a y rotation mixes columns 0 and 2 and
            # leaves column 1 bit-exact, which keeps yaw axes exactly +-z.
            nxt = np.empty((3, 3))
            nxt[:, 0] = rot[:, 0] * c - rot[:, 2] * s
            nxt[:, 1] = rot[:, 1]
            nxt[:, 2] = rot[:, 0] * s + rot[:, 2] * c
            rot = nxt
        else:
            rot = rot @ _axis_rotation(stacked.axes_local[i], theta[i])
        if (i + 1) % 100 == 0:
            rot = _polar_orthonormalize(rot)
        rot_w[i] = rot
        pos_w[i] = pos
    return rot_w, pos_w


def _fk_batch(stacked: _Stacked, theta: np.ndarray):
    """World axes, joint origins, tips and final rotations for a batch of poses.

    Vectorizes over the leading axis of theta; every trajectory sees exactly
    the same elementwise arithmetic as the single-pose path, including the
    bit-exact middle column under the pure-y fast path.
    """
    batch, n = theta.shape
    rot = np.zeros((batch, 3, 3))
    rot[:] = np.eye(3)
    pos = np.zeros((batch, 3))
    axes = np.empty((batch, n, 3))
    origins = np.empty((batch, n, 3))
    for i in range(n):
        pos = pos + rot @ stacked.offsets[i]
        rot = rot @ stacked.rotations[i]
        if stacked.plain_y:
            c = np.cos(theta[:, i])[:, None]
            s = np.sin(theta[:, i])[:, None]
            nxt = np.empty_like(rot)
            nxt[:, :, 0] = rot[:, :, 0] * c - rot[:, :, 2] * s
            nxt[:, :, 1] = rot[:, :, 1]
            nxt[:, :, 2] = rot[:, :, 0] * s + rot[:, :, 2] * c
            rot = nxt
            axes[:, i] = rot[:, :, 1]
        else:
            rot = rot @ _axis_rotation_batch(stacked.axes_local[i], theta[:, i])
            axes[:, i] = rot @ stacked.axes_local[i]
        if (i + 1) % 100 == 0:
            u, _, vt = np.linalg.svd(rot)
            rot = u @ vt
        origins[:, i] = pos
    tip = pos + rot @ stacked.tip_local
    return axes, origins, tip, rot


def _check_theta(model: KinematicModel, theta) -> np.ndarray:
    arr = np.asarray(theta, dtype=float)
    if arr.shape != (model.n_joint,):
        raise ValueError(f"expected {model.n_joint} joint angles, got shape {arr.shape}")
    return arr


def forward_kinematics(model: KinematicModel, theta: JointState) -> Frames:
    arr = _check_theta(model, theta)
    stacked = _Stacked(model)
    rot_w, pos_w = _fk(stacked, arr)
    if stacked.plain_y:
        axes = rot_w[:, :, 1].copy()
    else:
        axes = np.einsum("nij,nj->ni", rot_w, stacked.axes_local)
    coms = pos_w + np.einsum("nij,nj->ni", rot_w, stacked.coms)
    tip = pos_w[-1] + rot_w[-1] @ stacked.tip_local
    return Frames(rotations=rot_w, origins=pos_w, axes=axes, link_coms=coms, tip=tip)


def jacobian(model: KinematicModel, theta: JointState, point: np.ndarray | None = None) -> np.ndarray:
    """6 x n geometric Jacobian at `point` (default: the tip).

    Rows 0..2 are linear velocity, rows 3..5 angular. Column j is
    (axis_j x (point - origin_j), axis_j).
    """
    frames = forward_kinematics(model, theta)
    p = frames.tip if point is None else np.asarray(point, dtype=float)
    lin = np.cross(frames.axes, p[None, :] - frames.origins)
    return np.vstack([lin.T, frames.axes.T])


def gravity_torque(model: KinematicModel, theta: JointState, payload: float = 0.0) -> np.ndarray:
    """Static joint torques holding `theta` against gravity.

    tau_j = axis_j . sum over links at or beyond j of (com_k - origin_j) x m_k g,
    plus the payload term at the tip. Links before joint j load the structure,
    not the joint.
    """
    if payload < 0.0:
        raise ValueError("payload mass must be non-negative")
    arr = _check_theta(model, theta)
    frames = forward_kinematics(model, theta)
    return _torque_from_frames(
        frames.axes, frames.origins, frames.link_coms, frames.tip,
        np.array([l.mass for l in model.links]), payload,
    )


def _torque_from_frames(axes, origins, coms, tip, masses, payload) -> np.ndarray:
    n = len(masses)
    g_vec = np.array([0.0, 0.0, -GRAVITY])
    # Suffix sums let every joint see the links at or beyond it in one pass.
    moments = np.cross(coms, masses[:, None] * g_vec)  # com_k x m_k g
    tau = np.empty(n)
    moment_suffix = np.zeros(3)
    mass_suffix = 0.0
    if payload > 0.0:
        moment_suffix = np.cross(tip, payload * g_vec)
        mass_suffix = payload
    for j in range(n - 1, -1, -1):
        moment_suffix = moment_suffix + moments[j]
        mass_suffix = mass_suffix + masses[j]
        total = moment_suffix - np.cross(origins[j], mass_suffix * g_vec)
        tau[j] = axes[j] @ total
    return tau


def _rotation_log(rot: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix."""
    trace = float(np.trace(rot))
    cos_angle = max(-1.0, min(1.0, (trace - 1.0) / 2.0))
    angle = math.acos(cos_angle)
    if angle < 1e-12:
        return np.zeros(3)
    if angle > math.pi - 1e-6:
        # Near pi the off-diagonal formula degenerates; recover the axis
        # from the dominant diagonal entry instead.
        diag = np.diag(rot)
        k = int(np.argmax(diag))
        axis = np.sqrt(np.maximum(0.0, (diag + 1.0) / 2.0))
        axis[(k + 1) % 3] *= np.sign(rot[k, (k + 1) % 3] + rot[(k + 1) % 3, k])
        axis[(k + 2) % 3] *= np.sign(rot[k, (k + 2) % 3] + rot[(k + 2) % 3, k])
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            return np.zeros(3)
        return axis / norm * angle
    vec = np.array([rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]])
    return vec * (angle / (2.0 * math.sin(angle)))


_STALL_LIMIT = 12


def solve_ik(model: KinematicModel, target: Pose, opts: IkOptions = IkOptions()) -> IkResult:
    """Damped-least-squares IK with restarts.

    Each iteration solves (J^T W J + (e^T W e + bias) I) dtheta = J^T W e and
    clamps the angles to the joint limits. The first restart starts from the
    zero pose, the rest from uniform random poses drawn from the option seed,
    so results are reproducible. Position-only targets use the linear Jacobian
    rows; a target orientation adds the rotation-log error at reduced weight.
    A restart stops once its cost stagnates (no relative improvement for
    several iterations), which keeps unreachable targets cheap. Never raises
    on hard targets: the best attempt is returned with converged=False.

    All restarts iterate as one vectorized batch; the reported result is the
    one a sequential scan of the restarts would produce (the first converged
    restart, else the best-cost attempt, earliest restart winning ties), and
    `iterations` counts only the restarts that scan would have run.
    """
    target_pos = np.asarray(target.position, dtype=float)
    if not np.all(np.isfinite(target_pos)):
        raise ValueError("target position must be finite")
    want_rot = target.orientation is not None
    target_rot = np.asarray(target.orientation, dtype=float) if want_rot else None

    stacked = _Stacked(model)
    n = stacked.n
    rng = np.random.default_rng(opts.seed)
    w_rot = opts.orientation_weight
    restarts = max(1, opts.restarts)

    theta = np.zeros((restarts, n))
    if restarts > 1:
        theta[1:] = rng.uniform(stacked.lower, stacked.upper, size=(restarts - 1, n))
    theta[0] = np.clip(theta[0], stacked.lower, stacked.upper)

    active = np.ones(restarts, dtype=bool)
    iters = np.zeros(restarts, dtype=int)
    stall = np.zeros(restarts, dtype=int)
    restart_best = np.full(restarts, math.inf)
    best_cost = np.full(restarts, math.inf)
    best_theta = theta.copy()
    best_rot_err = np.full(restarts, math.nan)
    converged = np.zeros(restarts, dtype=bool)
    rot_weights = np.array([1.0, 1.0, 1.0, w_rot, w_rot, w_rot])

    for _ in range(opts.max_iter):
        axes, origins, tip, last_rot = _fk_batch(stacked, theta)
        err_pos = target_pos[None, :] - tip
        pos_err = np.linalg.norm(err_pos, axis=1)
        if want_rot:
            err_rot = np.zeros((restarts, 3))
            rot_err = np.zeros(restarts)
            for r in np.flatnonzero(active):
                vec = _rotation_log(target_rot @ last_rot[r].T)
                err_rot[r] = vec
                rot_err[r] = np.linalg.norm(vec)
            cost = pos_err + w_rot * rot_err
        else:
            cost = pos_err
        iters[active] += 1

        improved = active & (cost < best_cost)
        best_cost = np.where(improved, cost, best_cost)
        best_theta[improved] = theta[improved]
        if want_rot:
            best_rot_err = np.where(improved, rot_err, best_rot_err)

        hit = pos_err < opts.tol
        if want_rot:
            hit &= rot_err < opts.rot_tol
        converged |= active & hit
        active &= ~hit

        # Relative stagnation cutoff: unreachable targets improve only
        # asymptotically, and multiplying avoids inf-inf on the first pass.
        better = cost < restart_best * (1.0 - 1e-6) - 1e-12
        stall = np.where(better, 0, stall + 1)
        restart_best = np.where(better, cost, restart_best)
        active &= stall < _STALL_LIMIT

        if converged.any():
            first = int(np.flatnonzero(converged).min())
            if not active[:first].any():
                break
        if not active.any():
            break

        # Clamp the error so far-away targets cannot destabilize the step.
        scale = np.where(pos_err > opts.error_clamp, opts.error_clamp / np.maximum(pos_err, 1e-300), 1.0)
        err_p = err_pos * scale[:, None]
        lin = np.cross(axes, tip[:, None, :] - origins)  # (restarts, n, 3) = J^T rows

        if want_rot:
            rscale = np.where(rot_err > opts.error_clamp, opts.error_clamp / np.maximum(rot_err, 1e-300), 1.0)
            err_r = err_rot * rscale[:, None]
            jt = np.concatenate([lin, axes], axis=2)  # (restarts, n, 6)
            jw = jt * rot_weights[None, None, :]
            err = np.concatenate([err_p, err_r], axis=1)
            damping = np.einsum("ri,ri->r", err, err * rot_weights[None, :]) + opts.damping_bias
        else:
            jt = lin
            jw = jt
            err = err_p
            damping = np.einsum("ri,ri->r", err, err) + opts.damping_bias

        normal = jw @ jt.transpose(0, 2, 1)
        rhs = (jw @ err[:, :, None])[:, :, 0]
        normal[:, np.arange(n), np.arange(n)] += damping[:, None]
        try:
            step = np.linalg.solve(normal, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            break
        new_theta = np.clip(theta + step, stacked.lower, stacked.upper)
        theta = np.where(active[:, None], new_theta, theta)
        active &= np.abs(step).max(axis=1) >= 1e-12

    # Reproduce the sequential-restart outcome: the first converged restart
    # wins outright; otherwise the globally best cost (earliest on ties).
    if converged.any():
        pick = int(np.flatnonzero(converged).min())
        total_iters = int(iters[: pick + 1].sum())
    else:
        pick = int(np.argmin(best_cost))
        total_iters = int(iters.sum())
    picked_theta = best_theta[pick]
    picked_rot_err = float(best_rot_err[pick]) if want_rot else None

    frames = forward_kinematics(model, picked_theta)
    achieved = Pose(
        position=frames.tip,
        orientation=frames.rotations[-1].copy() if want_rot else None,
    )
    torque = _torque_from_frames(
        frames.axes, frames.origins, frames.link_coms, frames.tip,
        stacked.masses, opts.payload,
    )
    return IkResult(
        angles=picked_theta,
        achieved=achieved,
        position_error=float(np.linalg.norm(target_pos - frames.tip)),
        orientation_error=picked_rot_err,
        torque=torque,
        converged=bool(converged.any()),
        iterations=total_iters,
    )
