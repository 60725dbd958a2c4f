"""Release gates for the whole pipeline, one test per numbered criterion.

These run the real components at full scale (hundreds of IK solves, full
2000-trial campaigns), so the module takes far longer than the unit tests.
Each test prints one PASS line with its measured numbers; run pytest with
-s to see them on success.
"""

import json
import math
import statistics
import time
from pathlib import Path

import numpy as np
import pytest

from armforge.campaign import CampaignConfig, run_optimize, run_sweep
from armforge.design import Genotype, JointGene, SearchSpace, decode, sample_genotype
from armforge.evaluation import evaluate, load_targets
from armforge.kinematics import (
    GRAVITY,
    IkOptions,
    Pose,
    forward_kinematics,
    gravity_torque,
    solve_ik,
)
from armforge.optimizer import hypervolume, make_sampler, nondominated_sort, tell
from armforge.reporting import render_report
from armforge.urdf import export_urdf, load_urdf

REPO = Path(__file__).resolve().parent.parent
TABLETOP = REPO / "targets" / "tabletop.yaml"
SCATTER = REPO / "targets" / "scatter.yaml"


def _verdict(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num:02d} failed: {detail}"


def _random_model(rng, n_joint, kind="general"):
    space = SearchSpace(kind=kind, n_joint=n_joint)
    return space, decode(space, sample_genotype(space, rng))


def _yaw_chain(rng, n_joint):
    # First gene from the z orientation block points the axis straight up;
    # y-block genes afterwards inherit that exact vertical axis.
    space = SearchSpace(kind="general", n_joint=n_joint)
    genes = [JointGene(orientation=8 + int(rng.integers(4)), direction=int(rng.integers(6)), length=float(rng.uniform(0.1, 0.6)))]
    for _ in range(n_joint - 1):
        genes.append(JointGene(orientation=4 + int(rng.integers(4)), direction=int(rng.integers(6)), length=float(rng.uniform(0.1, 0.6))))
    base = tuple(float(v) for v in rng.uniform(-0.5, 0.5, size=3))
    return decode(space, Genotype(base_offset=base, genes=tuple(genes)))


def _random_pose(rng, model):
    lowers = np.array([j.lower for j in model.joints])
    uppers = np.array([j.upper for j in model.joints])
    return rng.uniform(lowers, uppers)


def _potential(model, theta, payload):
    frames = forward_kinematics(model, theta)
    masses = np.array([l.mass for l in model.links])
    u = float(masses @ frames.link_coms[:, 2]) * GRAVITY
    return u + payload * GRAVITY * float(frames.tip[2])


# ---------------------------------------------------------------------------
# 1-4: kinematics and statics
# ---------------------------------------------------------------------------


def test_criterion_01_torque_matches_potential_gradient():
    rng = np.random.default_rng(101)
    start = time.monotonic()
    step = 1e-6
    worst = 0.0
    for case in range(50):
        kind = "module" if case % 5 == 4 else "general"
        _, model = _random_model(rng, n_joint=1 + case % 4, kind=kind)
        payload = float(rng.uniform(0.0, 3.0)) if case % 3 == 0 else 0.0
        for _ in range(10):
            theta = _random_pose(rng, model)
            tau = gravity_torque(model, theta, payload=payload)
            fd = np.zeros(len(theta))
            for j in range(len(theta)):
                hi = theta.copy()
                lo = theta.copy()
                hi[j] += step
                lo[j] -= step
                fd[j] = -(_potential(model, hi, payload) - _potential(model, lo, payload)) / (2 * step)
            err = float(np.max(np.abs(fd - tau))) / max(1.0, float(np.max(np.abs(tau))))
            worst = max(worst, err)
    elapsed = time.monotonic() - start
    _verdict(1, worst < 1e-6 and elapsed < 10.0, f"max rel err {worst:.3e}, {elapsed:.1f}s")


def test_criterion_02_vertical_axis_chains_carry_exactly_zero_torque():
    rng = np.random.default_rng(202)
    worst = 0.0
    for case in range(100):
        model = _yaw_chain(rng, n_joint=2 + case % 4)
        payload = 2.5 if case % 2 else 0.0
        tau = gravity_torque(model, _random_pose(rng, model), payload=payload)
        worst = max(worst, float(np.max(np.abs(tau))))
    _verdict(2, worst == 0.0, f"max |tau| {worst!r}")


def test_criterion_03_cantilever_torque_oracle():
    space = SearchSpace(kind="general", n_joint=1)
    model = decode(
        space,
        Genotype(base_offset=(0.0, 0.0, 0.0), genes=(JointGene(orientation=4, direction=0, length=0.4),)),
    )
    assert model.links[0].mass == 9.0
    tau = gravity_torque(model, np.zeros(1))
    err = abs(abs(float(tau[0])) - 17.658)
    _verdict(3, err <= 1e-9, f"|tau| {float(abs(tau[0]))!r}, err {err:.2e}")


def test_criterion_04_ik_recovers_reachable_targets():
    rng = np.random.default_rng(404)
    start = time.monotonic()
    hits = 0
    total = 500
    for case in range(total):
        _, model = _random_model(rng, n_joint=2 + case % 3)
        target = forward_kinematics(model, _random_pose(rng, model)).tip
        result = solve_ik(model, Pose(position=target), IkOptions(seed=case, restarts=10))
        hits += result.position_error < 1e-4
    elapsed = time.monotonic() - start
    rate = hits / total
    _verdict(4, rate >= 0.95 and elapsed < 60.0, f"{hits}/{total} converged, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 5-6: ranking and hypervolume
# ---------------------------------------------------------------------------


def _oracle_ranks(points):
    pts = [tuple(map(float, p)) for p in points]

    def dom(a, b):
        return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])

    ranks = [-1] * len(pts)
    remaining = set(range(len(pts)))
    level = 0
    while remaining:
        layer = [i for i in remaining if not any(dom(pts[j], pts[i]) for j in remaining if j != i)]
        for i in layer:
            ranks[i] = level
        remaining -= set(layer)
        level += 1
    return ranks


def test_criterion_05_sort_and_archive_match_the_brute_force_oracle():
    from armforge.evaluation import ObjectiveVector

    mismatches = 0
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        pts = rng.uniform(0.0, 1.0, size=(200, 2))
        pts[7] = pts[53]  # force one duplicate pair
        expected = _oracle_ranks(pts)
        if nondominated_sort(pts).tolist() != expected:
            mismatches += 1
            continue
        state = make_sampler(seed=seed, n_startup=10_000)
        for x, y in pts:
            tell(state, None, ObjectiveVector(e_x=float(x), e_tau=float(y), feasible=True, per_target=()))
        got_ranks = [t.rank for t in state.trials]
        front_ids = sorted(i for i, r in enumerate(expected) if r == 0)
        if got_ranks != expected or sorted(t.id for t in state.archive.trials) != front_ids:
            mismatches += 1
    _verdict(5, mismatches == 0, f"{mismatches} mismatching seeds of 20")


def test_criterion_06_hypervolume_exact_vs_monte_carlo():
    exact_one = hypervolume([(0.0, 0.0)], (1.0, 1.0))
    exact_three = hypervolume([(0.0, 1.0), (1.0, 0.0)], (2.0, 2.0))
    hand_ok = exact_one == 1.0 and exact_three == 3.0

    rng = np.random.default_rng(606)
    n_samples = 1_000_000
    failures = 0
    worst_z = 0.0
    for _ in range(50):
        pts = rng.uniform(0.0, 1.0, size=(int(rng.integers(2, 20)), 2))
        ref = (1.1, 1.2)
        exact = hypervolume(pts, ref)
        samples = rng.uniform((0.0, 0.0), ref, size=(n_samples, 2))
        covered = np.zeros(n_samples, dtype=bool)
        for p in pts:
            covered |= (samples[:, 0] >= p[0]) & (samples[:, 1] >= p[1])
        box = ref[0] * ref[1]
        p_hat = float(covered.mean())
        sigma = box * math.sqrt(max(p_hat * (1.0 - p_hat), 1e-12) / n_samples)
        z = abs(p_hat * box - exact) / sigma
        worst_z = max(worst_z, z)
        failures += z >= 3.0
    _verdict(6, hand_ok and failures == 0, f"hand cases {'ok' if hand_ok else 'BAD'}, worst z {worst_z:.2f}, {failures} beyond 3 sigma")


# ---------------------------------------------------------------------------
# 9-10: determinism and URDF round trip (small campaign shared by both)
# ---------------------------------------------------------------------------


def _small_campaign_doc(out: Path) -> dict:
    return {
        "space": {"kind": "general"},
        "targets": str(TABLETOP),
        "n_joints": [2],
        "trials": 80,
        "seed": 11,
        "out": str(out),
    }


@pytest.fixture(scope="module")
def small_campaign(tmp_path_factory):
    out = tmp_path_factory.mktemp("accept") / "run_a"
    run_optimize(CampaignConfig.from_dict(_small_campaign_doc(out)))
    render_report(out)
    return out


def test_criterion_09_reruns_are_byte_identical(small_campaign, tmp_path):
    out_b = tmp_path / "run_b"
    run_optimize(CampaignConfig.from_dict(_small_campaign_doc(out_b)))
    render_report(out_b)
    rel_paths = sorted(p.relative_to(small_campaign) for p in small_campaign.rglob("*") if p.is_file())
    rel_paths_b = sorted(p.relative_to(out_b) for p in out_b.rglob("*") if p.is_file())
    same_tree = rel_paths == rel_paths_b
    differing = [
        str(rel)
        for rel in rel_paths
        if (small_campaign / rel).read_bytes() != (out_b / rel).read_bytes()
    ] if same_tree else ["<different file sets>"]
    n_svg = sum(1 for rel in rel_paths if rel.suffix == ".svg")
    _verdict(9, same_tree and not differing, f"{len(rel_paths)} files ({n_svg} SVGs), differing: {differing}")


def test_criterion_10_urdf_round_trip_and_logged_objectives(small_campaign):
    rng = np.random.default_rng(1010)
    worst_fk = 0.0
    for case in range(20):
        kind = "module" if case % 4 == 3 else "general"
        _, model = _random_model(rng, n_joint=2 + case % 3, kind=kind)
        loaded = load_urdf(export_urdf(model))
        for _ in range(100):
            theta = _random_pose(rng, model)
            a = forward_kinematics(model, theta).tip
            b = forward_kinematics(loaded, theta).tip
            worst_fk = max(worst_fk, float(np.max(np.abs(a - b))))

    pareto = json.loads((small_campaign / "n2" / "pareto.json").read_text())
    targets = load_targets(pareto["targets"])
    base_ik = IkOptions.from_dict(pareto["ik"])
    worst_obj = 0.0
    for entry in pareto["front"]:
        model = load_urdf(small_campaign / "n2" / entry["urdf"])
        from dataclasses import replace

        result = evaluate(model, targets, replace(base_ik, seed=entry["seed"]))
        worst_obj = max(worst_obj, abs(result.e_x - entry["e_x"]), abs(result.e_tau - entry["e_tau"]))
    _verdict(
        10,
        worst_fk <= 1e-9 and worst_obj <= 1e-9,
        f"fk err {worst_fk:.2e} over 20 models x 100 poses, objective err {worst_obj:.2e} over {len(pareto['front'])} designs",
    )


# ---------------------------------------------------------------------------
# 7-8: full campaign behavior (slow: full budgets, 10 seeds each)
# ---------------------------------------------------------------------------


def _sweep_config(targets_path: Path, n_joint: int, seed: int, sampler: str = "tpe") -> CampaignConfig:
    return CampaignConfig.from_dict(
        {
            "space": {"kind": "general"},
            "targets": str(targets_path),
            "n_joints": [n_joint],
            "trials": 2000,
            "seed": seed,
            "sampler": sampler,
            "out": "unused",
        },
        base_dir=REPO,
    )


def _best_feasible_e_x(state) -> float:
    return min(t.objectives.e_x for t in state.trials if t.objectives.feasible)


def test_criterion_07_planar_fixture_yields_zero_torque_designs():
    seeds = range(10)
    scara_hits = 0
    tpe_hv = []
    random_hv = []
    slowest = 0.0
    for seed in seeds:
        start = time.monotonic()
        result = run_sweep(_sweep_config(TABLETOP, 4, seed, "tpe"), 4)
        slowest = max(slowest, time.monotonic() - start)
        front = result.front.trials
        scara_hits += any(t.objectives.e_tau < 1e-6 and t.objectives.e_x < 0.05 for t in front)
        tpe_hv.append(result.front.hypervolume())
    for seed in seeds:
        result = run_sweep(_sweep_config(TABLETOP, 4, seed, "random"), 4)
        random_hv.append(result.front.hypervolume())
    tpe_median = statistics.median(tpe_hv)
    random_median = statistics.median(random_hv)
    ok = scara_hits >= 8 and tpe_median > random_median and slowest < 900.0
    _verdict(
        7,
        ok,
        f"zero-torque hits {scara_hits}/10, hv median {tpe_median:.2f} vs random {random_median:.2f}, slowest seed {slowest:.0f}s",
    )


def test_criterion_08_two_joints_cannot_match_three_on_scattered_targets():
    ratios = []
    for seed in range(10):
        best2 = _best_feasible_e_x(run_sweep(_sweep_config(SCATTER, 2, seed), 2).state)
        best3 = _best_feasible_e_x(run_sweep(_sweep_config(SCATTER, 3, seed), 3).state)
        ratios.append(best2 / best3)
    median_ratio = statistics.median(ratios)
    _verdict(8, median_ratio >= 5.0, f"median best-e_x ratio n2/n3 = {median_ratio:.1f}")
