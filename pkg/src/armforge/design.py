"""Design space for serial modular robot arms.

A robot design is a short genotype: a base offset plus one gene per joint.
In the "general" configuration a gene is (orientation index, link direction
index, link length); in the "module" configuration a gene is a single index
into a 26-row connection-pattern table shipped as package data. This module
samples genotypes, validates the zero-pose non-overlap constraint with
oriented bounding boxes, and decodes genotypes into kinematic models.

Conventions:
    * Every joint rotates about its local +y axis. The orientation table
      re-maps that axis in the parent frame, so the 12 discrete orientations
      cover rotation axes along world x, y and z with four 90 degree spins
      each. Index layout: axis block (x=0..3, y=4..7, z=8..11), spin within
      block. Index 4 is the identity.
    * Link i is a box extending from Joint i's origin along direction d_i for
      length l_i. The base column (origin to the first joint) is link 0.
    * Joint i+1 sits at the far end of link i.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import yaml

ORIENTATION_COUNT = 12
DIRECTION_COUNT = 6
MODULE_PATTERN_COUNT = 26

GENERAL = "general"
MODULE = "module"
_KIND_ALIASES = {"general": GENERAL, "module": MODULE, "actuator_module": MODULE}

# Penetration deeper than this makes a design infeasible; shallower contact
# (touching faces, kissing corners) is tolerated.
OVERLAP_TOLERANCE = 1.0e-3

_IDENTITY3 = np.eye(3, dtype=int)
_ROT90 = {
    "x": np.array([[1, 0, 0], [0, 0, -1], [0, 1, 0]], dtype=int),
    "y": np.array([[0, 0, 1], [0, 1, 0], [-1, 0, 0]], dtype=int),
    "z": np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], dtype=int),
}
# Base rotations mapping the local +y joint axis onto each world axis.
_AXIS_BASE = {
    "x": np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 1]], dtype=int),  # Rz(-90)
    "y": _IDENTITY3,
    "z": _ROT90["x"],  # Rx(+90) maps +y to +z
}
_AXIS_ORDER = ("x", "y", "z")


class MalformedGenotypeError(ValueError):
    """A genotype index points outside its table or the gene list is wrong."""


def _spin(axis: str, quarter_turns: int) -> np.ndarray:
    out = _IDENTITY3
    for _ in range(quarter_turns % 4):
        out = _ROT90[axis] @ out
    return out


def enumerate_orientations(kind: str = GENERAL) -> list[np.ndarray]:
    """Return the 12 discrete joint orientation matrices, exact and ordered.

    All entries are -1, 0 or 1, so compositions of these matrices are exact
    in floating point. Raises ValueError for non-general kinds; the module
    configuration carries orientations inside its connection table instead.
    """
    if _KIND_ALIASES.get(kind, kind) != GENERAL:
        raise ValueError(f"orientation table applies to the general kind, not {kind!r}")
    table = []
    for axis in _AXIS_ORDER:
        base = _AXIS_BASE[axis]
        for k in range(4):
            table.append((_spin(axis, k) @ base).astype(float))
    return table


_ORIENTATIONS = None


def _orientation(index: int) -> np.ndarray:
    global _ORIENTATIONS
    if _ORIENTATIONS is None:
        _ORIENTATIONS = enumerate_orientations()
    return _ORIENTATIONS[index]


LINK_DIRECTIONS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)


@dataclass(frozen=True)
class JointGene:
    orientation: int
    direction: int
    length: float


@dataclass(frozen=True)
class ModuleGene:
    connection: int


@dataclass(frozen=True)
class Genotype:
    """One sampled design: base offset plus one gene per joint."""

    base_offset: tuple[float, float, float]
    genes: tuple


@dataclass(frozen=True)
class ModuleRow:
    """One connection pattern: fixed rotation, offset direction and length."""

    index: int
    name: str
    rotation: np.ndarray
    direction: np.ndarray
    length: float


def _data_path(name: str) -> Path:
    return Path(str(resources.files("armforge").joinpath("data", name)))


_MODULE_TABLE_CACHE: dict[str, list[ModuleRow]] = {}


def load_module_table(path: str | Path | None = None) -> list[ModuleRow]:
    """Load the connection-pattern table (26 rows by default).

    The table is data, not code: each row holds an exact integer rotation
    matrix, an offset direction and an offset length in meters. A custom
    table may be supplied to model a different module family.
    """
    resolved = Path(path) if path is not None else _data_path("module_connections.yaml")
    key = str(resolved)
    if key in _MODULE_TABLE_CACHE:
        return _MODULE_TABLE_CACHE[key]
    with open(resolved, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    rows = []
    for i, entry in enumerate(doc["patterns"]):
        rotation = np.array(entry["rotation"], dtype=float)
        if rotation.shape != (3, 3):
            raise ValueError(f"pattern {i}: rotation must be 3x3")
        direction = np.array(entry["direction"], dtype=float)
        norm = float(np.linalg.norm(direction))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"pattern {i}: direction must be unit length")
        rows.append(
            ModuleRow(
                index=i,
                name=str(entry.get("name", f"pattern_{i}")),
                rotation=rotation,
                direction=direction,
                length=float(entry["length"]),
            )
        )
    _MODULE_TABLE_CACHE[key] = rows
    return rows


@dataclass(frozen=True)
class SearchSpace:
    """Campaign-fixed description of what genotypes may contain."""

    kind: str = GENERAL
    n_joint: int = 3
    link_length_range: tuple[float, float] = (0.1, 0.6)
    base_range: tuple[tuple[float, float], ...] = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))
    joint_limit: float = math.pi / 2
    link_cross_section: float = 0.15
    link_density: float = 1000.0
    module_dims: tuple[float, float, float] = (0.07, 0.07, 0.115)
    module_table_path: str | None = None

    def __post_init__(self):
        if self.kind not in (GENERAL, MODULE):
            raise ValueError(f"unknown config kind {self.kind!r}")
        if self.n_joint < 1:
            raise ValueError("n_joint must be at least 1")
        lo, hi = self.link_length_range
        if not (0.0 < lo <= hi):
            raise ValueError("link_length_range must be a positive interval")
        if self.joint_limit <= 0.0:
            raise ValueError("joint_limit must be positive")
        if len(self.base_range) != 3 or any(r[0] > r[1] for r in self.base_range):
            raise ValueError("base_range needs three ordered intervals")

    # -- table access -------------------------------------------------------

    def module_table(self) -> list[ModuleRow]:
        return load_module_table(self.module_table_path)

    def with_n_joint(self, n: int) -> "SearchSpace":
        return replace(self, n_joint=n)

    def with_base_range(self, base_range) -> "SearchSpace":
        return replace(self, base_range=tuple(tuple(map(float, r)) for r in base_range))

    # -- flat parameter views (used by the sampler and the CSV log) ---------

    def continuous_dims(self) -> list[tuple[str, float, float]]:
        dims = [
            ("a_x", *self.base_range[0]),
            ("a_y", *self.base_range[1]),
            ("a_z", *self.base_range[2]),
        ]
        if self.kind == GENERAL:
            lo, hi = self.link_length_range
            dims += [(f"j{i + 1}_length", lo, hi) for i in range(self.n_joint)]
        return dims

    def categorical_dims(self) -> list[tuple[str, int]]:
        dims = []
        for i in range(self.n_joint):
            if self.kind == GENERAL:
                dims.append((f"j{i + 1}_orientation", ORIENTATION_COUNT))
                dims.append((f"j{i + 1}_direction", DIRECTION_COUNT))
            else:
                dims.append((f"j{i + 1}_connection", len(self.module_table())))
        return dims

    def column_names(self) -> list[str]:
        """Genotype field names in their natural (per joint) order."""
        names = ["a_x", "a_y", "a_z"]
        for i in range(self.n_joint):
            if self.kind == GENERAL:
                names += [f"j{i + 1}_orientation", f"j{i + 1}_direction", f"j{i + 1}_length"]
            else:
                names.append(f"j{i + 1}_connection")
        return names

    def flatten(self, g: Genotype) -> tuple[np.ndarray, np.ndarray]:
        cont = list(g.base_offset)
        cat: list[int] = []
        for gene in g.genes:
            if self.kind == GENERAL:
                cont.append(gene.length)
                cat += [gene.orientation, gene.direction]
            else:
                cat.append(gene.connection)
        return np.asarray(cont, dtype=float), np.asarray(cat, dtype=int)

    def unflatten(self, cont: Sequence[float], cat: Sequence[int]) -> Genotype:
        base = (float(cont[0]), float(cont[1]), float(cont[2]))
        genes = []
        if self.kind == GENERAL:
            for i in range(self.n_joint):
                genes.append(
                    JointGene(
                        orientation=int(cat[2 * i]),
                        direction=int(cat[2 * i + 1]),
                        length=float(cont[3 + i]),
                    )
                )
        else:
            for i in range(self.n_joint):
                genes.append(ModuleGene(connection=int(cat[i])))
        return Genotype(base_offset=base, genes=tuple(genes))

    def row_values(self, g: Genotype) -> list:
        """Genotype values matching column_names(), for the trial log."""
        values: list = list(g.base_offset)
        for gene in g.genes:
            if self.kind == GENERAL:
                values += [gene.orientation, gene.direction, gene.length]
            else:
                values.append(gene.connection)
        return values

    def sample(self, rng: np.random.Generator) -> Genotype:
        return sample_genotype(self, rng)

    def validate(self, g: Genotype) -> bool:
        return validate_genotype(self, g).feasible

    # -- (de)serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_joint": self.n_joint,
            "link_length_range": list(self.link_length_range),
            "base_range": [list(r) for r in self.base_range],
            "joint_limit": self.joint_limit,
            "link_cross_section": self.link_cross_section,
            "link_density": self.link_density,
            "module_dims": list(self.module_dims),
            "module_table_path": self.module_table_path,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchSpace":
        doc = dict(doc)
        raw_kind = doc.get("config_kind", doc.get("kind", GENERAL))
        kind = _KIND_ALIASES.get(raw_kind)
        if kind is None:
            raise ValueError(f"unknown config kind {raw_kind!r}")
        kwargs: dict = {"kind": kind}
        if "n_joint" in doc:
            kwargs["n_joint"] = int(doc["n_joint"])
        if "link_length_range" in doc:
            lo, hi = doc["link_length_range"]
            kwargs["link_length_range"] = (float(lo), float(hi))
        base_range = doc.get("base_range")
        if base_range is None:
            if kind == MODULE:
                kwargs["base_range"] = ((-1.0, 0.0), (-1.0, 1.0), (-1.0, 0.0))
        else:
            kwargs["base_range"] = _parse_base_range(base_range)
        if "joint_limit" in doc:
            kwargs["joint_limit"] = float(doc["joint_limit"])
        elif "joint_limit_deg" in doc:
            kwargs["joint_limit"] = math.radians(float(doc["joint_limit_deg"]))
        for src, dst in (
            ("link_cross_section", "link_cross_section"),
            ("cross_section", "link_cross_section"),
            ("link_density", "link_density"),
            ("density", "link_density"),
        ):
            if src in doc:
                kwargs[dst] = float(doc[src])
        if "module_dims" in doc:
            kwargs["module_dims"] = tuple(float(v) for v in doc["module_dims"])
        if doc.get("module_table") or doc.get("module_table_path"):
            kwargs["module_table_path"] = str(doc.get("module_table") or doc["module_table_path"])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "SearchSpace":
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        if not isinstance(doc, dict):
            raise ValueError(f"{path}: search-space file must hold a mapping")
        space = cls.from_dict(doc)
        if space.module_table_path is not None:
            resolved = Path(path).parent / space.module_table_path
            if resolved.exists():
                space = replace(space, module_table_path=str(resolved))
        return space


def _parse_base_range(raw) -> tuple[tuple[float, float], ...]:
    if isinstance(raw, dict):
        out = []
        for axis in ("x", "y", "z"):
            lo, hi = raw.get(axis, (-1.0, 1.0))
            out.append((float(lo), float(hi)))
        return tuple(out)
    ranges = [tuple(float(v) for v in r) for r in raw]
    if len(ranges) != 3:
        raise ValueError("base_range needs entries for x, y and z")
    return tuple(ranges)


def sample_genotype(space: SearchSpace, rng: np.random.Generator) -> Genotype:
    """Draw a genotype uniformly over the space. Deterministic given rng state."""
    base = tuple(float(rng.uniform(lo, hi)) for lo, hi in space.base_range)
    genes = []
    if space.kind == GENERAL:
        lo, hi = space.link_length_range
        for _ in range(space.n_joint):
            genes.append(
                JointGene(
                    orientation=int(rng.integers(ORIENTATION_COUNT)),
                    direction=int(rng.integers(DIRECTION_COUNT)),
                    length=float(rng.uniform(lo, hi)),
                )
            )
    else:
        n_patterns = len(space.module_table())
        for _ in range(space.n_joint):
            genes.append(ModuleGene(connection=int(rng.integers(n_patterns))))
    return Genotype(base_offset=base, genes=tuple(genes))


# ---------------------------------------------------------------------------
# Decoded kinematic model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JointSpec:
    """Fixed placement of one revolute joint relative to its parent frame."""

    offset: np.ndarray  # translation from the parent joint frame, post rotation
    rotation: np.ndarray  # fixed 3x3 rotation applied before the joint angle
    axis: np.ndarray  # local rotation axis (unit)
    lower: float
    upper: float


@dataclass(frozen=True)
class LinkSpec:
    """Axis-aligned box in its joint's frame, extending along `direction`."""

    length: float
    direction: np.ndarray  # unit vector in the joint frame
    size: np.ndarray  # full box dims in the joint frame
    mass: float
    com: np.ndarray  # box center in the joint frame


@dataclass(frozen=True)
class BaseLink:
    """The fixed column from the world origin to the first joint."""

    length: float
    direction: np.ndarray  # unit, world frame
    rotation: np.ndarray  # world orientation of the box (z column = direction)
    size: np.ndarray  # full dims in the box frame (z = length)
    mass: float
    com: np.ndarray  # world frame


@dataclass(frozen=True)
class KinematicModel:
    joints: tuple
    links: tuple
    base: BaseLink | None
    name: str = "arm"

    @property
    def n_joint(self) -> int:
        return len(self.joints)

    @property
    def total_reach(self) -> float:
        return float(sum(link.length for link in self.links))


_LOCAL_Y = np.array([0.0, 1.0, 0.0])


def _frame_for_direction(direction: np.ndarray) -> np.ndarray:
    """Orthonormal basis whose z column equals `direction` (unit)."""
    z = direction
    helper = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = np.cross(helper, z)
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _link_box_size(direction: np.ndarray, length: float, cross: tuple[float, float]) -> np.ndarray:
    """Full box dims for a link along an axis-aligned direction."""
    axis = int(np.argmax(np.abs(direction)))
    size = np.empty(3)
    lateral = iter(cross)
    for k in range(3):
        size[k] = length if k == axis else next(lateral)
    return size


def _make_base(space: SearchSpace, a: np.ndarray) -> BaseLink | None:
    length = float(np.linalg.norm(a))
    if length < 1e-9:
        return None
    direction = a / length
    rotation = _frame_for_direction(direction)
    if space.kind == GENERAL:
        s = space.link_cross_section
        lateral = (s, s)
    else:
        lateral = (space.module_dims[0], space.module_dims[1])
    size = np.array([lateral[0], lateral[1], length])
    mass = space.link_density * lateral[0] * lateral[1] * length
    return BaseLink(
        length=length,
        direction=direction,
        rotation=rotation,
        size=size,
        mass=mass,
        com=a / 2.0,
    )


def decode(space: SearchSpace, g: Genotype) -> KinematicModel:
    """Decode a genotype into a kinematic model.

    Joint i's frame is the parent frame translated by the previous link
    vector and rotated by the gene's fixed orientation; the base offset
    plays the role of link 0. Link masses follow solid-box volume times
    density, with the center of mass at the box center.
    """
    if len(g.genes) != space.n_joint:
        raise MalformedGenotypeError(
            f"genotype has {len(g.genes)} genes, space expects {space.n_joint}"
        )
    a = np.asarray(g.base_offset, dtype=float)
    joints = []
    links = []
    prev_step = a
    limit = space.joint_limit
    if space.kind == GENERAL:
        lateral = (space.link_cross_section, space.link_cross_section)
        for gene in g.genes:
            if not (0 <= gene.orientation < ORIENTATION_COUNT):
                raise MalformedGenotypeError(f"orientation index {gene.orientation} out of range")
            if not (0 <= gene.direction < DIRECTION_COUNT):
                raise MalformedGenotypeError(f"direction index {gene.direction} out of range")
            rotation = _orientation(gene.orientation)
            direction = LINK_DIRECTIONS[gene.direction]
            length = float(gene.length)
            joints.append(
                JointSpec(
                    offset=prev_step,
                    rotation=rotation,
                    axis=_LOCAL_Y.copy(),
                    lower=-limit,
                    upper=limit,
                )
            )
            links.append(_make_link(direction, length, lateral, space.link_density))
            prev_step = direction * length
    else:
        table = space.module_table()
        lateral = (space.module_dims[0], space.module_dims[1])
        for gene in g.genes:
            if not (0 <= gene.connection < len(table)):
                raise MalformedGenotypeError(f"connection index {gene.connection} out of range")
            row = table[gene.connection]
            joints.append(
                JointSpec(
                    offset=prev_step,
                    rotation=row.rotation.copy(),
                    axis=_LOCAL_Y.copy(),
                    lower=-limit,
                    upper=limit,
                )
            )
            links.append(_make_link(row.direction, row.length, lateral, space.link_density))
            prev_step = row.direction * row.length
    return KinematicModel(
        joints=tuple(joints),
        links=tuple(links),
        base=_make_base(space, a),
    )


def _make_link(direction, length, lateral, density) -> LinkSpec:
    size = _link_box_size(direction, length, lateral)
    mass = density * float(size[0] * size[1] * size[2])
    return LinkSpec(
        length=length,
        direction=np.asarray(direction, dtype=float),
        size=size,
        mass=mass,
        com=np.asarray(direction, dtype=float) * (length / 2.0),
    )


# ---------------------------------------------------------------------------
# Zero-pose overlap validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Obb:
    center: np.ndarray
    rotation: np.ndarray  # columns are the box axes
    half: np.ndarray


@dataclass(frozen=True)
class Violation:
    kind: str  # "overlap" or "out_of_range"
    pair: tuple
    depth: float


@dataclass(frozen=True)
class ValidationReport:
    feasible: bool
    violations: tuple

    @classmethod
    def from_violations(cls, violations: Iterable[Violation]) -> "ValidationReport":
        vs = tuple(violations)
        return cls(feasible=not vs, violations=vs)


def obb_penetration(a: Obb, b: Obb) -> float:
    """Exact minimum-translation depth between two boxes (negative margin if apart).

    Separating-axis test over the 15 candidate axes (3 + 3 face normals and
    9 edge cross products). For boxes the minimum translation distance is
    attained on one of these axes, so a positive return value is the exact
    penetration depth and a non-positive value is the largest separation
    found along any axis.
    """
    axes = [a.rotation[:, k] for k in range(3)] + [b.rotation[:, k] for k in range(3)]
    for i in range(3):
        for j in range(3):
            cross = np.cross(a.rotation[:, i], b.rotation[:, j])
            norm = np.linalg.norm(cross)
            if norm > 1e-9:
                axes.append(cross / norm)
    d = b.center - a.center
    depth = math.inf
    for axis in axes:
        ra = float(np.abs(axis @ a.rotation) @ a.half)
        rb = float(np.abs(axis @ b.rotation) @ b.half)
        overlap = ra + rb - abs(float(axis @ d))
        if overlap < depth:
            depth = overlap
    return depth


def zero_pose_obbs(model: KinematicModel) -> list[tuple[int, Obb]]:
    """World-frame boxes at the zero pose, labeled 0 (base) then 1..n (links)."""
    out: list[tuple[int, Obb]] = []
    if model.base is not None:
        out.append(
            (0, Obb(center=model.base.com, rotation=model.base.rotation, half=model.base.size / 2))
        )
    rot = np.eye(3)
    pos = np.zeros(3)
    for i, (joint, link) in enumerate(zip(model.joints, model.links), start=1):
        pos = pos + rot @ joint.offset
        rot = rot @ joint.rotation
        out.append((i, Obb(center=pos + rot @ link.com, rotation=rot, half=link.size / 2)))
    return out


def _support_extent(parent: Obb, parent_dir: np.ndarray, parent_len: float, u: np.ndarray) -> float:
    """How far the parent box extends past its far face center along u."""
    reach = float(np.abs(u @ parent.rotation) @ parent.half)
    return reach - (parent_len / 2.0) * float(parent_dir @ u)


def _trimmed(child: Obb, child_dir: np.ndarray, trim: float) -> Obb:
    """Shrink the child box away from its proximal end by `trim` meters."""
    return Obb(
        center=child.center + child_dir * (trim / 2.0),
        rotation=child.rotation,
        half=child.half - np.abs(child.rotation.T @ child_dir) * (trim / 2.0),
    )


def validate_genotype(space: SearchSpace, g: Genotype) -> ValidationReport:
    """Check ranges and the zero-pose non-overlap constraint.

    Adjacent links inevitably meet at their shared joint, so each adjacent
    pair is tested with the child box trimmed back by the parent's lateral
    half size (capped) plus a 1 mm clearance; anything still penetrating
    deeper than 1 mm is a real fold-back or graze. Non-adjacent pairs,
    including the base column, are tested untrimmed.
    """
    violations: list[Violation] = []

    axis_names = ("a_x", "a_y", "a_z")
    for axis, (value, (lo, hi)) in enumerate(zip(g.base_offset, space.base_range)):
        if value < lo or value > hi:
            overshoot = max(lo - value, value - hi)
            violations.append(Violation("out_of_range", (axis_names[axis],), overshoot))

    structurally_ok = len(g.genes) == space.n_joint
    if space.kind == GENERAL:
        lo, hi = space.link_length_range
        for i, gene in enumerate(g.genes, start=1):
            if not (0 <= gene.orientation < ORIENTATION_COUNT):
                violations.append(Violation("out_of_range", (i,), float(gene.orientation)))
                structurally_ok = False
            if not (0 <= gene.direction < DIRECTION_COUNT):
                violations.append(Violation("out_of_range", (i,), float(gene.direction)))
                structurally_ok = False
            if gene.length < lo or gene.length > hi:
                violations.append(
                    Violation("out_of_range", (i,), max(lo - gene.length, gene.length - hi))
                )
    else:
        n_rows = len(space.module_table())
        for i, gene in enumerate(g.genes, start=1):
            if not (0 <= gene.connection < n_rows):
                violations.append(Violation("out_of_range", (i,), float(gene.connection)))
                structurally_ok = False

    if not structurally_ok:
        return ValidationReport.from_violations(violations)

    model = decode(space, g)
    boxes = zero_pose_obbs(model)
    labels = [label for label, _ in boxes]
    obbs = {label: obb for label, obb in boxes}

    # World-frame link directions and lengths at the zero pose, keyed like obbs.
    dirs: dict[int, np.ndarray] = {}
    lens: dict[int, float] = {}
    if model.base is not None:
        dirs[0] = model.base.direction
        lens[0] = model.base.length
    rot = np.eye(3)
    for i, (joint, link) in enumerate(zip(model.joints, model.links), start=1):
        rot = rot @ joint.rotation
        dirs[i] = rot @ link.direction
        lens[i] = link.length

    for ia in range(len(labels)):
        for ib in range(ia + 1, len(labels)):
            la, lb = labels[ia], labels[ib]
            parent, child = obbs[la], obbs[lb]
            if lb - la == 1:
                u = dirs[lb]
                extent = _support_extent(parent, dirs[la], lens[la], u)
                lateral = [
                    parent.half[k]
                    for k in range(3)
                    if abs(float(parent.rotation[:, k] @ dirs[la])) < 0.9
                ]
                cap = max(lateral) if lateral else float(np.max(parent.half))
                trim = min(max(extent, 0.0), cap) + 1e-3
                if trim >= lens[lb]:
                    depth = min(lens[la], lens[lb])
                else:
                    depth = obb_penetration(parent, _trimmed(child, u, trim))
            else:
                depth = obb_penetration(parent, child)
            if depth > OVERLAP_TOLERANCE:
                violations.append(Violation("overlap", (la, lb), float(depth)))

    return ValidationReport.from_violations(violations)
