"""Render campaign figures (SVG) next to the campaign's CSV/JSON outputs.

All figures are written through an in-memory buffer with a fixed hash salt
and no creation date, so re-rendering the same campaign produces
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .campaign import genotype_from_dict  # noqa: E402
from .design import SearchSpace, decode  # noqa: E402
from .fsio import write_bytes  # noqa: E402
from .kinematics import forward_kinematics  # noqa: E402

_RC = {
    "svg.hashsalt": "armforge",
    "svg.fonttype": "none",
    "figure.figsize": (6.0, 4.5),
    "figure.dpi": 100,
    "font.size": 9,
}


class IncompleteCampaignError(RuntimeError):
    """The campaign directory is missing files the report needs."""


def _save(fig, path: Path) -> Path:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    return write_bytes(path, buffer.getvalue())


def _read_trials(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _scatter_figure(rows: list[dict], front: list[dict], title: str):
    fig, ax = plt.subplots()
    feasible = [(float(r["e_x"]), float(r["e_tau"])) for r in rows if r["feasible"] == "true"]
    infeasible = [(float(r["e_x"]), float(r["e_tau"])) for r in rows if r["feasible"] != "true"]
    if feasible:
        pts = np.array(feasible)
        ax.scatter(pts[:, 0], pts[:, 1], s=12, c="#7f8c9b", label="feasible trials")
    if infeasible:
        pts = np.array(infeasible)
        ax.scatter(pts[:, 0], pts[:, 1], s=12, marker="x", c="#c9a227", label="penalized")
    if front:
        pts = np.array([(e["e_x"], e["e_tau"]) for e in front])
        ax.plot(pts[:, 0], pts[:, 1], "o-", ms=5, c="#b3392e", label="Pareto front", drawstyle="steps-post")
    ax.set_xscale("symlog", linthresh=1e-6)
    ax.set_yscale("symlog", linthresh=1e-9)
    ax.set_xlabel("tip error sum e_x [m]")
    ax.set_ylabel("torque norm sum e_tau [N m]")
    ax.set_title(title)
    ax.legend(loc="best")
    ax.grid(True, which="major", alpha=0.3)
    fig.tight_layout()
    return fig


def _front_figure(front: list[dict], title: str):
    fig, ax = plt.subplots()
    pts = np.array([(e["e_x"], e["e_tau"]) for e in front])
    ax.plot(pts[:, 0], pts[:, 1], "o-", c="#b3392e", drawstyle="steps-post")
    for entry in front:
        ax.annotate(
            f"t{entry['trial']}",
            (entry["e_x"], entry["e_tau"]),
            textcoords="offset points",
            xytext=(4, 4),
            fontsize=7,
        )
    ax.set_xlabel("tip error sum e_x [m]")
    ax.set_ylabel("torque norm sum e_tau [N m]")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _hypervolume_figure(path: Path, title: str):
    rows = _read_trials(path)
    xs = [int(r["trial"]) for r in rows]
    ys = [float(r["hypervolume"]) for r in rows]
    fig, ax = plt.subplots()
    ax.plot(xs, ys, c="#2e6db3")
    ax.set_xlabel("trial")
    ax.set_ylabel("archive hypervolume")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return fig


def _skeleton_figure(space: SearchSpace, entry: dict, targets: list[dict], title: str):
    genotype = genotype_from_dict(entry["genotype"])
    model = decode(space, genotype)
    fig = plt.figure(figsize=(5.5, 5.0))
    ax = fig.add_subplot(projection="3d")
    palette = ["#2e6db3", "#b3392e", "#3a9e4e", "#c9a227", "#7b4fa6", "#3aa6a6"]
    all_pts = [np.zeros(3)]
    for k, per_target in enumerate(entry["per_target"]):
        theta = np.array(per_target["angles"], dtype=float)
        frames = forward_kinematics(model, theta)
        chain = np.vstack([np.zeros(3), frames.origins, frames.tip])
        color = palette[k % len(palette)]
        ax.plot(chain[:, 0], chain[:, 1], chain[:, 2], "-o", ms=3, lw=1.5, c=color, alpha=0.85)
        all_pts.append(frames.tip)
        all_pts.extend(frames.origins)
    tpos = np.array([t["position"] for t in targets])
    ax.scatter(tpos[:, 0], tpos[:, 1], tpos[:, 2], marker="*", s=80, c="#222222", label="targets")
    all_pts.extend(tpos)
    pts = np.array(all_pts)
    center = (pts.max(axis=0) + pts.min(axis=0)) / 2.0
    half = max(float((pts.max(axis=0) - pts.min(axis=0)).max()) / 2.0, 0.1)
    ax.set_xlim(center[0] - half, center[0] + half)
    ax.set_ylim(center[1] - half, center[1] + half)
    ax.set_zlim(center[2] - half, center[2] + half)
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.set_title(title)
    fig.tight_layout()
    return fig


def render_sweep(sweep_dir: Path) -> list[Path]:
    trials_csv = sweep_dir / "trials.csv"
    pareto_json = sweep_dir / "pareto.json"
    hv_csv = sweep_dir / "hypervolume.csv"
    for required in (trials_csv, pareto_json, hv_csv):
        if not required.exists():
            raise IncompleteCampaignError(f"missing {required}")
    pareto = json.loads(pareto_json.read_text())
    rows = _read_trials(trials_csv)
    front = pareto["front"]
    space = SearchSpace.from_dict(pareto["space"])
    n_joint = pareto["n_joint"]
    plots = sweep_dir / "plots"
    written = []

    with matplotlib.rc_context(_RC):
        fig = _scatter_figure(rows, front, f"{n_joint}-joint trials")
        written.append(_save(fig, plots / "scatter.svg"))
        if front:
            fig = _front_figure(front, f"{n_joint}-joint Pareto front")
            written.append(_save(fig, plots / "front.svg"))
        fig = _hypervolume_figure(hv_csv, f"{n_joint}-joint archive hypervolume")
        written.append(_save(fig, plots / "hypervolume.svg"))
        for entry in front:
            name = f"skeleton_t{entry['trial']:05d}.svg"
            fig = _skeleton_figure(
                space, entry, pareto["targets"]["targets"], f"trial {entry['trial']} poses"
            )
            written.append(_save(fig, plots / name))
    return written


def render_report(campaign_dir: Path | str) -> list[Path]:
    """Render every sweep's figures; raises IncompleteCampaignError if files are missing."""
    campaign_dir = Path(campaign_dir)
    manifest = campaign_dir / "campaign.json"
    if not manifest.exists():
        raise IncompleteCampaignError(f"missing {manifest}")
    config = json.loads(manifest.read_text())
    written = []
    for n_joint in config["n_joints"]:
        written.extend(render_sweep(campaign_dir / f"n{n_joint}"))
    return written
