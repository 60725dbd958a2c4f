"""Target parsing and objective accumulation tests."""

import math

import numpy as np
import pytest

from armforge.design import Genotype, JointGene, SearchSpace, decode, validate_genotype
from armforge.evaluation import (
    PENALTY,
    TargetParseError,
    evaluate,
    load_targets,
    penalize,
)
from armforge.kinematics import IkOptions

PITCH = 4


def _planar_doc(n=2):
    points = [[0.3, 0.1, 0.0], [0.2, -0.2, 0.0], [0.35, 0.0, 0.0]][:n]
    return {"label": "bench", "targets": [{"position": p} for p in points]}


def _two_joint_model():
    # Yaw at the base, then a z-block orientation: relative to the tilted yaw
    # frame that second axis ends up horizontal, so gravity loads it.
    space = SearchSpace(kind="general", n_joint=2)
    g = Genotype(
        base_offset=(0.0, 0.0, 0.0),
        genes=(
            JointGene(orientation=8, direction=0, length=0.3),
            JointGene(orientation=8, direction=0, length=0.3),
        ),
    )
    return decode(space, g)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def test_load_targets_from_mapping():
    ts = load_targets(_planar_doc())
    assert ts.label == "bench"
    assert ts.count == 2
    assert ts.payload == 0.0
    assert ts.base_range is None
    np.testing.assert_array_equal(ts.positions()[0], [0.3, 0.1, 0.0])


def test_load_targets_from_yaml_text_and_file(tmp_path):
    text = """
label: spots
payload: 0.5
base_range:
  x: [-0.2, 0.2]
  z: [0.0, 0.0]
targets:
  - position: [0.4, 0.0, 0.3]
  - position: [0.1, 0.2, 0.5]
    orientation: [1.0, 0.0, 0.0, 0.0]
"""
    from_text = load_targets(text)
    path = tmp_path / "spots.yaml"
    path.write_text(text, encoding="utf-8")
    from_file = load_targets(path)
    for ts in (from_text, from_file):
        assert ts.label == "spots"
        assert ts.payload == 0.5
        # omitted y axis falls back to [-1, 1]
        assert ts.base_range == ((-0.2, 0.2), (-1.0, 1.0), (0.0, 0.0))
        assert ts.targets[1].orientation is not None
        np.testing.assert_allclose(ts.targets[1].orientation, np.eye(3), atol=1e-12)


def test_label_defaults_to_the_file_stem(tmp_path):
    path = tmp_path / "corner_points.yaml"
    path.write_text("targets:\n  - position: [0.1, 0.2, 0.3]\n", encoding="utf-8")
    assert load_targets(path).label == "corner_points"


def test_to_dict_round_trips():
    quat = [math.cos(0.3), 0.0, math.sin(0.3), 0.0]
    doc = {
        "label": "oriented",
        "payload": 1.25,
        "base_range": {"x": [-0.5, 0.5], "y": [-0.1, 0.1], "z": [0.0, 0.2]},
        "targets": [
            {"position": [0.3, 0.0, 0.4], "orientation": quat},
            {"position": [0.2, 0.2, 0.2]},
        ],
    }
    first = load_targets(doc)
    second = load_targets(first.to_dict())
    assert second.label == first.label
    assert second.payload == first.payload
    assert second.base_range == first.base_range
    np.testing.assert_array_equal(second.positions(), first.positions())
    np.testing.assert_allclose(second.targets[0].orientation, first.targets[0].orientation, atol=1e-12)
    assert second.targets[1].orientation is None


@pytest.mark.parametrize(
    "quat",
    [
        (1.0, 0.0, 0.0, 0.0),
        (0.0, 1.0, 0.0, 0.0),
        (0.0, 0.0, 1.0, 0.0),
        (0.0, 0.0, 0.0, 1.0),
        (0.5, 0.5, 0.5, 0.5),
    ],
)
def test_quaternion_round_trip_covers_all_branches(quat):
    doc = {"targets": [{"position": [0.1, 0.1, 0.1], "orientation": list(quat)}]}
    first = load_targets(doc)
    again = load_targets(load_targets(first.to_dict()).to_dict())
    np.testing.assert_allclose(again.targets[0].orientation, first.targets[0].orientation, atol=1e-12)


@pytest.mark.parametrize(
    "doc, message",
    [
        ({}, "at least one target"),
        ({"targets": []}, "at least one target"),
        ({"targets": [{"pos": [1, 2, 3]}]}, "needs a 'position'"),
        ({"targets": [{"position": [1, 2]}]}, "three values"),
        ({"targets": [{"position": [1.0, float("nan"), 0.0]}]}, "finite"),
        ({"targets": [{"position": [1, 2, 3], "orientation": [1, 0, 0]}]}, "four values"),
        ({"targets": [{"position": [1, 2, 3], "orientation": [2.0, 0, 0, 0]}]}, "unit length"),
        ({"targets": [{"position": [1, 2, 3]}], "base_range": {"x": [1.0, -1.0]}}, "ordered pair"),
        ({"targets": [{"position": [1, 2, 3]}], "base_range": [0, 1]}, "map axes"),
        ({"targets": [{"position": [1, 2, 3]}], "payload": -2.0}, "non-negative"),
    ],
)
def test_schema_violations_name_the_field(doc, message):
    with pytest.raises(TargetParseError, match=message):
        load_targets(doc)


def test_non_mapping_document_is_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("- just\n- a\n- list\n", encoding="utf-8")
    with pytest.raises(TargetParseError, match="mapping"):
        load_targets(path)


# ---------------------------------------------------------------------------
# Objective accumulation
# ---------------------------------------------------------------------------


def test_duplicate_targets_double_both_objectives():
    model = _two_joint_model()
    point = {"position": [0.3, 0.2, 0.3]}
    one = evaluate(model, load_targets({"targets": [point]}))
    two = evaluate(model, load_targets({"targets": [point, point]}))
    assert two.e_x == 2.0 * one.e_x
    assert two.e_tau == 2.0 * one.e_tau
    assert len(two.per_target) == 2
    assert two.per_target[0] == two.per_target[1]


def test_target_order_does_not_change_the_result():
    model = _two_joint_model()
    doc = _planar_doc(3)
    forward = evaluate(model, load_targets(doc))
    doc["targets"] = list(reversed(doc["targets"]))
    backward = evaluate(model, load_targets(doc))
    assert sorted(forward.per_target, key=lambda r: r.position_error) == sorted(
        backward.per_target, key=lambda r: r.position_error
    )
    assert math.isclose(forward.e_x, backward.e_x, rel_tol=1e-12, abs_tol=1e-15)
    assert math.isclose(forward.e_tau, backward.e_tau, rel_tol=1e-12, abs_tol=1e-15)


def test_target_set_payload_is_authoritative():
    model = _two_joint_model()
    point = {"position": [0.3, 0.1, 0.2]}
    loaded = evaluate(model, load_targets({"payload": 2.0, "targets": [point]}))
    unloaded = evaluate(model, load_targets({"targets": [point]}))
    # More hanging mass means more static torque on this gravity-loaded arm,
    # while the solver's angles (position-only IK) stay the same.
    assert loaded.e_tau > unloaded.e_tau
    assert loaded.per_target[0].angles == unloaded.per_target[0].angles
    # A payload in the solver options is overruled by the target set, which
    # owns the task description.
    overruled = evaluate(model, load_targets({"targets": [point]}), IkOptions(payload=2.0))
    assert overruled.e_tau == unloaded.e_tau


def test_unreachable_targets_still_produce_finite_objectives():
    model = _two_joint_model()
    result = evaluate(model, load_targets({"targets": [{"position": [5.0, 0.0, 0.0]}]}))
    assert result.feasible
    assert not result.per_target[0].converged
    # Residual distance: roughly the 5 m offset minus the arm's 0.6 m span.
    assert 3.5 < result.e_x < 5.0
    assert math.isfinite(result.e_tau)


def test_evaluate_is_deterministic():
    model = _two_joint_model()
    ts = load_targets(_planar_doc(3))
    a = evaluate(model, ts)
    b = evaluate(model, ts)
    assert a == b


# ---------------------------------------------------------------------------
# Penalty for invalid designs
# ---------------------------------------------------------------------------


def _infeasible_report():
    space = SearchSpace(kind="general", n_joint=2)
    g = Genotype(
        base_offset=(0.0, 0.0, 0.0),
        genes=(
            JointGene(orientation=4, direction=0, length=0.4),
            JointGene(orientation=4, direction=1, length=0.4),
        ),
    )
    report = validate_genotype(space, g)
    assert not report.feasible
    return report


def test_penalty_depends_only_on_the_target_set():
    ts = load_targets(_planar_doc(2))
    result = penalize(ts, _infeasible_report())
    expected_e_x = sum(float(np.linalg.norm(p)) for p in ts.positions()) + PENALTY
    assert result.e_x == expected_e_x
    assert result.e_tau == PENALTY
    assert not result.feasible
    assert result.per_target == ()


def test_penalize_rejects_feasible_reports():
    space = SearchSpace(kind="general", n_joint=1)
    report = validate_genotype(
        space,
        Genotype(base_offset=(0.0, 0.0, 0.0), genes=(JointGene(orientation=4, direction=0, length=0.4),)),
    )
    assert report.feasible
    with pytest.raises(ValueError, match="infeasible"):
        penalize(load_targets(_planar_doc(1)), report)
