"""Objective evaluation: summed tip error and summed torque over a target set.

A target set is a YAML document:

    label: tabletop
    payload: 0.0                  # optional, kg held at the tip
    base_range:                   # optional, bounds for the base offset
      x: [-1.0, 1.0]
      y: [-1.0, 1.0]
      z: [-1.0, 0.0]
    targets:
      - position: [0.5, 0.0, 0.5]
      - position: [0.3, 0.4, 0.5]
        orientation: [1.0, 0.0, 0.0, 0.0]   # optional unit quaternion (w x y z)

Axes omitted from base_range default to [-1, 1]. The two objectives are
e_x, the sum of Euclidean tip errors over all targets at the IK solutions,
and e_tau, the sum of joint-torque norms at those same solutions. IK
failures are not special-cased: a target the arm cannot reach contributes
its residual distance to e_x and the best-effort pose's torque to e_tau.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from .design import KinematicModel
from .kinematics import IkOptions, Pose, solve_ik

PENALTY = 1.0e3


class TargetParseError(ValueError):
    """A target document violates the schema; the message names the field."""


@dataclass(frozen=True)
class TargetSet:
    label: str
    targets: tuple  # of Pose
    base_range: Optional[tuple[tuple[float, float], ...]]
    payload: float = 0.0

    @property
    def count(self) -> int:
        return len(self.targets)

    def positions(self) -> np.ndarray:
        return np.stack([t.position for t in self.targets])

    def to_dict(self) -> dict:
        entries = []
        for t in self.targets:
            entry: dict = {"position": [float(v) for v in t.position]}
            if t.orientation is not None:
                entry["orientation"] = [float(v) for v in _quat_from_matrix(t.orientation)]
            entries.append(entry)
        doc: dict = {"label": self.label, "payload": self.payload}
        if self.base_range is not None:
            doc["base_range"] = {
                "x": list(self.base_range[0]),
                "y": list(self.base_range[1]),
                "z": list(self.base_range[2]),
            }
        doc["targets"] = entries
        return doc


@dataclass(frozen=True)
class TargetResult:
    position_error: float
    torque_norm: float
    converged: bool
    angles: tuple


@dataclass(frozen=True)
class ObjectiveVector:
    e_x: float
    e_tau: float
    feasible: bool
    per_target: tuple

    def as_pair(self) -> tuple[float, float]:
        return (self.e_x, self.e_tau)


def _matrix_from_quat(q: Sequence[float]) -> np.ndarray:
    w, x, y, z = (float(v) for v in q)
    norm = (w * w + x * x + y * y + z * z) ** 0.5
    if abs(norm - 1.0) > 1e-6:
        raise TargetParseError(f"orientation quaternion must be unit length, norm={norm:.6f}")
    w, x, y, z = w / norm, x / norm, y / norm, z / norm
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def _quat_from_matrix(rot: np.ndarray) -> tuple[float, float, float, float]:
    t = float(np.trace(rot))
    if t > 0:
        s = (t + 1.0) ** 0.5 * 2.0
        return (s / 4.0, (rot[2, 1] - rot[1, 2]) / s, (rot[0, 2] - rot[2, 0]) / s, (rot[1, 0] - rot[0, 1]) / s)
    i = int(np.argmax(np.diag(rot)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = (1.0 + rot[i, i] - rot[j, j] - rot[k, k]) ** 0.5 * 2.0
    q = [0.0, 0.0, 0.0, 0.0]
    q[0] = (rot[k, j] - rot[j, k]) / s
    q[1 + i] = s / 4.0
    q[1 + j] = (rot[j, i] + rot[i, j]) / s
    q[1 + k] = (rot[k, i] + rot[i, k]) / s
    return tuple(q)


def load_targets(source: str | Path | dict) -> TargetSet:
    """Parse a target-set document from a path, YAML text or mapping."""
    if isinstance(source, dict):
        doc = source
        where = "<dict>"
    else:
        where = str(source)
        if isinstance(source, str) and "\n" in source:
            doc = yaml.safe_load(source)
            where = "<string>"
        else:
            with open(source, "r", encoding="utf-8") as fh:
                try:
                    doc = yaml.safe_load(fh)
                except yaml.YAMLError as exc:
                    raise TargetParseError(f"{where}: {exc}") from exc
    if not isinstance(doc, dict):
        raise TargetParseError(f"{where}: target file must hold a mapping")

    raw_targets = doc.get("targets")
    if not raw_targets:
        raise TargetParseError(f"{where}: field 'targets' must list at least one target")
    poses = []
    for i, entry in enumerate(raw_targets):
        field = f"targets[{i}]"
        if not isinstance(entry, dict) or "position" not in entry:
            raise TargetParseError(f"{where}: {field} needs a 'position'")
        pos = entry["position"]
        if len(pos) != 3:
            raise TargetParseError(f"{where}: {field}.position needs three values")
        position = np.asarray([float(v) for v in pos])
        if not np.all(np.isfinite(position)):
            raise TargetParseError(f"{where}: {field}.position must be finite")
        orientation = None
        if entry.get("orientation") is not None:
            quat = entry["orientation"]
            if len(quat) != 4:
                raise TargetParseError(f"{where}: {field}.orientation needs four values (w x y z)")
            orientation = _matrix_from_quat(quat)
        poses.append(Pose(position=position, orientation=orientation))

    raw_range = doc.get("base_range")
    if raw_range is None:
        base_range = None
    elif isinstance(raw_range, dict):
        pairs = []
        for axis in ("x", "y", "z"):
            pair = raw_range.get(axis, (-1.0, 1.0))
            if len(pair) != 2 or float(pair[0]) > float(pair[1]):
                raise TargetParseError(f"{where}: base_range.{axis} must be an ordered pair")
            pairs.append((float(pair[0]), float(pair[1])))
        base_range = tuple(pairs)
    else:
        raise TargetParseError(f"{where}: base_range must map axes to [lo, hi] pairs")

    payload = float(doc.get("payload", 0.0))
    if payload < 0:
        raise TargetParseError(f"{where}: payload must be non-negative")
    label = str(doc.get("label", Path(where).stem if where not in ("<dict>", "<string>") else "targets"))
    return TargetSet(label=label, targets=tuple(poses), base_range=base_range, payload=payload)


def evaluate(model: KinematicModel, targets: TargetSet, ik_opts: IkOptions = IkOptions()) -> ObjectiveVector:
    """Solve IK for every target and accumulate the two objectives.

    The same option seed is used for every target, which makes the result
    invariant under permutations of the target list.
    """
    if ik_opts.payload != targets.payload:
        ik_opts = IkOptions(**{**ik_opts.to_dict(), "payload": targets.payload})
    e_x = 0.0
    e_tau = 0.0
    per_target = []
    for pose in targets.targets:
        result = solve_ik(model, pose, ik_opts)
        torque_norm = float(np.linalg.norm(result.torque))
        e_x += result.position_error
        e_tau += torque_norm
        per_target.append(
            TargetResult(
                position_error=result.position_error,
                torque_norm=torque_norm,
                converged=result.converged,
                angles=tuple(float(v) for v in result.angles),
            )
        )
    return ObjectiveVector(e_x=e_x, e_tau=e_tau, feasible=True, per_target=tuple(per_target))


def penalize(targets: TargetSet, report) -> ObjectiveVector:
    """Objectives for a design that failed validation.

    The values depend only on the target set, so every infeasible design in
    a campaign lands on the same point, comfortably dominated by any
    feasible trial.
    """
    if report.feasible:
        raise ValueError("penalize applies to infeasible validation reports only")
    base = float(sum(np.linalg.norm(t.position) for t in targets.targets))
    return ObjectiveVector(e_x=base + PENALTY, e_tau=PENALTY, feasible=False, per_target=())
