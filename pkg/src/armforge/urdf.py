"""URDF serialization of kinematic models, and the matching loader.

The writer emits a flat serial chain: a base link (carrying the base-column
box when the base offset is nonzero), then alternating revolute joints and
box links. Output is deterministic text with 2-space indentation so files
can be compared byte for byte.

Floats are written with repr(), which round-trips exactly, and the fixed
joint rotations are written as roll/pitch/yaw whose matrices are snapped
back to exact integer entries on load. A model exported and re-loaded
therefore reproduces forward kinematics bit for bit, not just within
tolerance.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np

from .design import BaseLink, JointSpec, KinematicModel, LinkSpec


class UrdfError(ValueError):
    """Raised when a document cannot be interpreted as a serial-arm URDF."""


def _fmt(x: float) -> str:
    return repr(float(x))


def _vec(v) -> str:
    return " ".join(_fmt(x) for x in v)


def matrix_from_rpy(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def rpy_from_matrix(rot: np.ndarray) -> tuple[float, float, float]:
    """Inverse of matrix_from_rpy (fixed-axis XYZ convention)."""
    sp = -float(rot[2, 0])
    sp = max(-1.0, min(1.0, sp))
    cp = math.hypot(float(rot[0, 0]), float(rot[1, 0]))
    pitch = math.atan2(sp, cp)
    if cp > 1e-9:
        roll = math.atan2(float(rot[2, 1]), float(rot[2, 2]))
        yaw = math.atan2(float(rot[1, 0]), float(rot[0, 0]))
    elif sp > 0.0:
        roll = math.atan2(float(rot[0, 1]), float(rot[0, 2]))
        yaw = 0.0
    else:
        roll = math.atan2(-float(rot[0, 1]), float(rot[1, 1]))
        yaw = 0.0
    return roll, pitch, yaw


def _snap_rotation(rot: np.ndarray) -> np.ndarray:
    """Return the exact integer matrix when `rot` is within 1e-9 of one."""
    snapped = np.rint(rot)
    if np.max(np.abs(rot - snapped)) < 1e-9:
        if np.array_equal(snapped @ snapped.T, np.eye(3)) and round(np.linalg.det(snapped)) == 1:
            return snapped
    return rot


def _box_inertia(mass: float, size) -> tuple[float, float, float]:
    sx, sy, sz = (float(s) for s in size)
    return (
        mass / 12.0 * (sy * sy + sz * sz),
        mass / 12.0 * (sx * sx + sz * sz),
        mass / 12.0 * (sx * sx + sy * sy),
    )


def _append_box_link(parent: ET.Element, name: str, size, com, rpy, mass: float) -> None:
    link = ET.SubElement(parent, "link", name=name)
    rpy_str = _vec(rpy)
    com_str = _vec(com)
    size_str = _vec(size)
    for tag in ("visual", "collision"):
        section = ET.SubElement(link, tag)
        ET.SubElement(section, "origin", xyz=com_str, rpy=rpy_str)
        geom = ET.SubElement(section, "geometry")
        ET.SubElement(geom, "box", size=size_str)
    inertial = ET.SubElement(link, "inertial")
    ET.SubElement(inertial, "origin", xyz=com_str, rpy=rpy_str)
    ET.SubElement(inertial, "mass", value=_fmt(mass))
    ixx, iyy, izz = _box_inertia(mass, size)
    ET.SubElement(
        inertial,
        "inertia",
        ixx=_fmt(ixx), ixy=_fmt(0.0), ixz=_fmt(0.0),
        iyy=_fmt(iyy), iyz=_fmt(0.0), izz=_fmt(izz),
    )


def export_urdf(model: KinematicModel, name: str = "arm") -> str:
    """Serialize the model to URDF text (UTF-8, 2-space indent, stable order)."""
    robot = ET.Element("robot", name=name)
    if model.base is not None:
        _append_box_link(
            robot, "base",
            size=model.base.size,
            com=model.base.com,
            rpy=rpy_from_matrix(model.base.rotation),
            mass=model.base.mass,
        )
    else:
        ET.SubElement(robot, "link", name="base")

    parent_name = "base"
    for i, (joint, link) in enumerate(zip(model.joints, model.links), start=1):
        child_name = f"link_{i}"
        elem = ET.SubElement(robot, "joint", name=f"joint_{i}", type="revolute")
        ET.SubElement(elem, "origin", xyz=_vec(joint.offset), rpy=_vec(rpy_from_matrix(joint.rotation)))
        ET.SubElement(elem, "parent", link=parent_name)
        ET.SubElement(elem, "child", link=child_name)
        ET.SubElement(elem, "axis", xyz=_vec(joint.axis))
        ET.SubElement(
            elem, "limit",
            lower=_fmt(joint.lower), upper=_fmt(joint.upper),
            effort=_fmt(1000.0), velocity=_fmt(math.pi),
        )
        _append_box_link(
            robot, child_name,
            size=link.size, com=link.com, rpy=(0.0, 0.0, 0.0), mass=link.mass,
        )
        parent_name = child_name

    tree = ET.ElementTree(robot)
    ET.indent(tree, space="  ")
    body = ET.tostring(robot, encoding="unicode")
    return '<?xml version="1.0" encoding="utf-8"?>\n' + body + "\n"


def _parse_floats(elem: ET.Element, attr: str, count: int, what: str, default=None) -> np.ndarray:
    raw = elem.get(attr)
    if raw is None:
        if default is not None:
            return np.asarray(default, dtype=float)
        raise UrdfError(f"{what}: missing attribute {attr!r}")
    try:
        values = [float(tok) for tok in raw.split()]
    except ValueError as exc:
        raise UrdfError(f"{what}: bad float in {attr!r}: {raw!r}") from exc
    if len(values) != count:
        raise UrdfError(f"{what}: {attr!r} needs {count} values, got {len(values)}")
    return np.asarray(values)


def _parse_box_link(elem: ET.Element, name: str):
    """Extract (size, com, rpy, mass) from a link's box visual and inertial."""
    visual = elem.find("visual")
    if visual is None:
        return None
    geom = visual.find("geometry/box")
    if geom is None:
        raise UrdfError(f"link {name!r}: only box geometry is supported")
    size = _parse_floats(geom, "size", 3, f"link {name!r} box")
    origin = visual.find("origin")
    if origin is None:
        com = np.zeros(3)
        rpy = np.zeros(3)
    else:
        com = _parse_floats(origin, "xyz", 3, f"link {name!r} origin", default=(0, 0, 0))
        rpy = _parse_floats(origin, "rpy", 3, f"link {name!r} origin", default=(0, 0, 0))
    inertial = elem.find("inertial")
    if inertial is None:
        raise UrdfError(f"link {name!r}: missing inertial block")
    mass_elem = inertial.find("mass")
    if mass_elem is None:
        raise UrdfError(f"link {name!r}: missing inertial mass")
    mass = float(_parse_floats(mass_elem, "value", 1, f"link {name!r} mass")[0])
    return size, com, rpy, mass


def load_urdf(source: str | Path) -> KinematicModel:
    """Rebuild a kinematic model from URDF text or a file path.

    Supports the serial shape this package writes: a chain of revolute
    joints with box links. Fixed joints along the chain are folded into the
    next revolute joint's placement. Raises UrdfError naming the offending
    element for anything else.
    """
    text = source if isinstance(source, str) and source.lstrip().startswith("<") else None
    if text is None:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        robot = ET.fromstring(text)
    except ET.ParseError as exc:
        raise UrdfError(f"not valid XML: {exc}") from exc
    if robot.tag != "robot":
        raise UrdfError(f"root element is {robot.tag!r}, expected 'robot'")
    name = robot.get("name", "arm")

    links = {elem.get("name"): elem for elem in robot.findall("link")}
    if None in links:
        raise UrdfError("link: missing attribute 'name'")
    joints_by_parent: dict[str, ET.Element] = {}
    children = set()
    for elem in robot.findall("joint"):
        parent = elem.find("parent")
        child = elem.find("child")
        if parent is None or child is None:
            raise UrdfError(f"joint {elem.get('name')!r}: missing parent or child")
        joints_by_parent[parent.get("link")] = elem
        children.add(child.get("link"))

    roots = [n for n in links if n not in children]
    if len(roots) != 1:
        raise UrdfError(f"expected one root link, found {roots!r}")

    joint_specs: list[JointSpec] = []
    link_specs: list[LinkSpec] = []
    pending_rot = np.eye(3)
    pending_off = np.zeros(3)
    current = roots[0]
    while current in joints_by_parent:
        elem = joints_by_parent[current]
        jname = elem.get("name", "?")
        jtype = elem.get("type")
        origin = elem.find("origin")
        xyz = _parse_floats(origin, "xyz", 3, f"joint {jname!r} origin", default=(0, 0, 0)) if origin is not None else np.zeros(3)
        rpy = _parse_floats(origin, "rpy", 3, f"joint {jname!r} origin", default=(0, 0, 0)) if origin is not None else np.zeros(3)
        rot = _snap_rotation(matrix_from_rpy(*rpy))
        child_name = elem.find("child").get("link")
        if jtype == "fixed":
            pending_off = pending_off + pending_rot @ xyz
            pending_rot = pending_rot @ rot
            current = child_name
            continue
        if jtype != "revolute":
            raise UrdfError(f"joint {jname!r}: unsupported type {jtype!r}")
        axis_elem = elem.find("axis")
        axis = (
            _parse_floats(axis_elem, "xyz", 3, f"joint {jname!r} axis")
            if axis_elem is not None
            else np.array([0.0, 1.0, 0.0])
        )
        norm = float(np.linalg.norm(axis))
        if norm < 1e-12:
            raise UrdfError(f"joint {jname!r}: zero-length axis")
        if abs(norm - 1.0) > 1e-12:
            axis = axis / norm
        limit = elem.find("limit")
        if limit is None:
            raise UrdfError(f"joint {jname!r}: missing limit element")
        lower = float(_parse_floats(limit, "lower", 1, f"joint {jname!r} limit")[0])
        upper = float(_parse_floats(limit, "upper", 1, f"joint {jname!r} limit")[0])
        if lower > upper:
            raise UrdfError(f"joint {jname!r}: limit lower exceeds upper")

        if child_name not in links:
            raise UrdfError(f"joint {jname!r}: child link {child_name!r} not defined")
        box = _parse_box_link(links[child_name], child_name)
        if box is None:
            raise UrdfError(f"link {child_name!r}: missing box geometry")
        size, com, box_rpy, mass = box
        if float(np.max(np.abs(box_rpy))) > 1e-12:
            raise UrdfError(f"link {child_name!r}: rotated link boxes are not supported")
        com_norm = float(np.linalg.norm(com))
        if com_norm < 1e-12:
            raise UrdfError(f"link {child_name!r}: box center at the joint origin")
        axis_idx = int(np.argmax(np.abs(com)))
        direction = np.zeros(3)
        direction[axis_idx] = 1.0 if com[axis_idx] > 0 else -1.0
        length = float(size[axis_idx])

        joint_specs.append(
            JointSpec(
                offset=pending_off + pending_rot @ xyz,
                rotation=pending_rot @ rot,
                axis=axis,
                lower=lower,
                upper=upper,
            )
        )
        link_specs.append(
            LinkSpec(length=length, direction=direction, size=size, mass=mass, com=com)
        )
        pending_rot = np.eye(3)
        pending_off = np.zeros(3)
        current = child_name

    if not joint_specs:
        raise UrdfError("no revolute joints found")

    base = None
    root_box = _parse_box_link(links[roots[0]], roots[0])
    if root_box is not None:
        size, com, rpy, mass = root_box
        rotation = matrix_from_rpy(*rpy)
        direction = rotation @ np.array([0.0, 0.0, 1.0])
        base = BaseLink(
            length=float(size[2]),
            direction=direction,
            rotation=rotation,
            size=size,
            mass=mass,
            com=com,
        )

    return KinematicModel(joints=tuple(joint_specs), links=tuple(link_specs), base=base, name=name)
