"""Campaign orchestration: sweep joint counts, run the optimizer, write outputs.

A campaign directory looks like

    out/
      campaign.json          resolved configuration echo
      n3/
        trials.csv           one row per trial, written once at the end
        pareto.json          front genotypes with per-target details
        hypervolume.csv      archive hypervolume after every trial
        urdf/design_t00012.urdf
        plots/               filled in by the report command

Determinism contract: every random draw is derived from the campaign seed,
the joint count and the trial id, so reruns of the same configuration are
byte-identical and sweep order never matters.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import optimizer
from .design import Genotype, SearchSpace, decode, validate_genotype
from .evaluation import ObjectiveVector, TargetSet, evaluate, load_targets, penalize
from .fsio import write_text
from .kinematics import IkOptions
from .urdf import export_urdf

DEFAULT_TRIALS = 200


class ConfigError(ValueError):
    """Raised when a campaign configuration file cannot be used."""


@dataclass
class CampaignConfig:
    space: dict
    targets: TargetSet
    n_joints: tuple[int, ...]
    trials: int
    seed: int
    sampler: str
    jobs: int
    ik: IkOptions
    out: Path

    @staticmethod
    def from_file(path: Path | str) -> "CampaignConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return CampaignConfig.from_dict(raw, base_dir=path.parent)

    @staticmethod
    def from_dict(raw: dict, base_dir: Path | str = ".") -> "CampaignConfig":
        base_dir = Path(base_dir)
        known = {"space", "targets", "n_joints", "trials", "seed", "sampler", "jobs", "ik", "out"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        space_dict = raw.get("space")
        if not isinstance(space_dict, dict):
            raise ConfigError("config needs a 'space' mapping")
        space_dict = dict(space_dict)
        table = space_dict.get("module_table")
        if isinstance(table, str) and not Path(table).is_absolute():
            space_dict["module_table"] = str(base_dir / table)
        try:
            base_space = SearchSpace.from_dict(space_dict)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad 'space' section: {exc}")

        targets_raw = raw.get("targets")
        if targets_raw is None:
            raise ConfigError("config needs a 'targets' entry (path or mapping)")
        try:
            if isinstance(targets_raw, dict):
                targets = load_targets(targets_raw)
            else:
                targets_path = Path(targets_raw)
                if not targets_path.is_absolute():
                    targets_path = base_dir / targets_path
                targets = load_targets(targets_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"bad 'targets' section: {exc}")

        n_joints_raw = raw.get("n_joints", base_space.n_joint)
        if isinstance(n_joints_raw, int):
            n_joints = (n_joints_raw,)
        else:
            try:
                n_joints = tuple(int(n) for n in n_joints_raw)
            except (TypeError, ValueError):
                raise ConfigError("'n_joints' must be an integer or a list of integers")
        if not n_joints or any(n < 1 for n in n_joints) or len(set(n_joints)) != len(n_joints):
            raise ConfigError("'n_joints' must list distinct positive integers")

        trials = raw.get("trials", DEFAULT_TRIALS)
        if not isinstance(trials, int) or trials < 1:
            raise ConfigError("'trials' must be a positive integer")
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("'seed' must be a non-negative integer")
        sampler = raw.get("sampler", "tpe")
        if sampler not in ("tpe", "random"):
            raise ConfigError("'sampler' must be 'tpe' or 'random'")
        jobs = raw.get("jobs", 1)
        if not isinstance(jobs, int) or jobs < 1:
            raise ConfigError("'jobs' must be a positive integer")

        ik_raw = raw.get("ik", {})
        if not isinstance(ik_raw, dict):
            raise ConfigError("'ik' must be a mapping of solver options")
        try:
            ik = IkOptions.from_dict(ik_raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad 'ik' section: {exc}")

        out = Path(raw.get("out", "campaign_out"))
        if not out.is_absolute():
            out = base_dir / out
        return CampaignConfig(
            space=space_dict,
            targets=targets,
            n_joints=n_joints,
            trials=trials,
            seed=seed,
            sampler=sampler,
            jobs=jobs,
            ik=ik,
            out=out,
        )

    def with_overrides(
        self,
        seed: Optional[int] = None,
        trials: Optional[int] = None,
        out: Optional[Path | str] = None,
        jobs: Optional[int] = None,
        sampler: Optional[str] = None,
    ) -> "CampaignConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if trials is not None:
            cfg = replace(cfg, trials=trials)
        if out is not None:
            cfg = replace(cfg, out=Path(out))
        if jobs is not None:
            cfg = replace(cfg, jobs=jobs)
        if sampler is not None:
            cfg = replace(cfg, sampler=sampler)
        return cfg


def space_for_joint_count(config: CampaignConfig, n_joint: int) -> SearchSpace:
    """Resolve the per-sweep search space; target base bounds win."""
    space = SearchSpace.from_dict(config.space).with_n_joint(n_joint)
    if config.targets.base_range is not None:
        space = space.with_base_range(config.targets.base_range)
    return space


def trial_seed(campaign_seed: int, n_joint: int, trial_id: int) -> int:
    """Stable per-evaluation seed, independent of sweep order and batching."""
    return int(np.random.SeedSequence([campaign_seed, n_joint, trial_id]).generate_state(1)[0])


def evaluate_genotype(
    space: SearchSpace, genotype: Genotype, targets: TargetSet, ik: IkOptions
) -> ObjectiveVector:
    """Validate, decode and evaluate one genotype (penalizing invalid ones)."""
    report = validate_genotype(space, genotype)
    if not report.feasible:
        return penalize(targets, report)
    model = decode(space, genotype)
    return evaluate(model, targets, ik)


@dataclass
class SweepResult:
    n_joint: int
    state: optimizer.SamplerState
    space: SearchSpace
    hv_curve: list[float]

    @property
    def front(self) -> optimizer.ParetoArchive:
        return optimizer.pareto_front(self.state)


def run_sweep(config: CampaignConfig, n_joint: int) -> SweepResult:
    """Optimize one joint count for config.trials evaluations."""
    space = space_for_joint_count(config, n_joint)
    state = optimizer.make_sampler(
        seed=[config.seed, n_joint], strategy=config.sampler
    )
    snapshots: list[np.ndarray] = []

    def _run_one(genotype: Genotype, tid: int) -> tuple[ObjectiveVector, int]:
        seed = trial_seed(config.seed, n_joint, tid)
        ik = replace(config.ik, seed=seed)
        return evaluate_genotype(space, genotype, config.targets, ik), seed

    done = 0
    if config.jobs == 1:
        while done < config.trials:
            genotype = optimizer.ask(state, space)
            objectives, seed = _run_one(genotype, done)
            optimizer.tell(state, genotype, objectives, seed=seed)
            snapshots.append(state.archive.points())
            done += 1
    else:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            while done < config.trials:
                batch_n = min(config.jobs, config.trials - done)
                pending: list[Genotype] = []
                for _ in range(batch_n):
                    pending.append(optimizer.ask(state, space, pending=pending))
                futures = [
                    pool.submit(_run_one, genotype, done + i)
                    for i, genotype in enumerate(pending)
                ]
                for genotype, future in zip(pending, futures):
                    objectives, seed = future.result()
                    optimizer.tell(state, genotype, objectives, seed=seed)
                    snapshots.append(state.archive.points())
                done += batch_n

    optimizer.freeze_reference(state)
    ref = state.archive.reference
    hv_curve: list[float] = []
    for points in snapshots:
        if ref is None or len(points) == 0:
            hv_curve.append(0.0)
            continue
        below = (points[:, 0] < ref[0]) & (points[:, 1] < ref[1])
        hv_curve.append(optimizer.hypervolume(points[below], ref) if below.any() else 0.0)
    return SweepResult(n_joint=n_joint, state=state, space=space, hv_curve=hv_curve)


# ---------------------------------------------------------------------------
# Output files
# ---------------------------------------------------------------------------


def _fmt_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_trials_csv(path: Path, space: SearchSpace, state: optimizer.SamplerState) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["id", "seed"] + space.column_names() + ["e_x", "e_tau", "feasible", "rank"])
    for trial in state.trials:
        obj = trial.objectives
        row = [str(trial.id), str(trial.seed)]
        row += [_fmt_value(v) for v in space.row_values(trial.params)]
        row += [repr(float(obj.e_x)), repr(float(obj.e_tau))]
        row += ["true" if obj.feasible else "false", str(trial.rank)]
        writer.writerow(row)
    write_text(path, buffer.getvalue())


def write_hypervolume_csv(path: Path, hv_curve: list[float]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["trial", "hypervolume"])
    for tid, hv in enumerate(hv_curve):
        writer.writerow([str(tid), repr(float(hv))])
    write_text(path, buffer.getvalue())


def genotype_to_dict(genotype: Genotype) -> dict:
    genes = []
    for gene in genotype.genes:
        if hasattr(gene, "connection"):
            genes.append({"connection": int(gene.connection)})
        else:
            genes.append(
                {
                    "orientation": int(gene.orientation),
                    "direction": int(gene.direction),
                    "length": float(gene.length),
                }
            )
    return {"base_offset": [float(v) for v in genotype.base_offset], "genes": genes}


def genotype_from_dict(data: dict) -> Genotype:
    from .design import JointGene, ModuleGene

    try:
        offset = tuple(float(v) for v in data["base_offset"])
        genes = []
        for gene in data["genes"]:
            if "connection" in gene:
                genes.append(ModuleGene(connection=int(gene["connection"])))
            else:
                genes.append(
                    JointGene(
                        orientation=int(gene["orientation"]),
                        direction=int(gene["direction"]),
                        length=float(gene["length"]),
                    )
                )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed genotype dictionary: {exc}")
    if len(offset) != 3:
        raise ValueError("genotype base_offset must have three components")
    return Genotype(base_offset=offset, genes=tuple(genes))


def write_pareto_json(
    path: Path, config: CampaignConfig, result: SweepResult, urdf_names: dict[int, str]
) -> None:
    front = result.front
    entries = []
    for trial in front.trials:
        obj = trial.objectives
        per_target = [
            {
                "position_error": float(r.position_error),
                "torque_norm": float(r.torque_norm),
                "converged": bool(r.converged),
                "angles": [float(a) for a in r.angles],
            }
            for r in obj.per_target
        ]
        entries.append(
            {
                "trial": trial.id,
                "seed": trial.seed,
                "e_x": float(obj.e_x),
                "e_tau": float(obj.e_tau),
                "genotype": genotype_to_dict(trial.params),
                "per_target": per_target,
                "urdf": urdf_names[trial.id],
            }
        )
    ref = front.reference
    payload = {
        "n_joint": result.n_joint,
        "seed": config.seed,
        "sampler": config.sampler,
        "trials": config.trials,
        "space": result.space.to_dict(),
        "targets": config.targets.to_dict(),
        "ik": config.ik.to_dict(),
        "hypervolume_ref": [float(ref[0]), float(ref[1])] if ref is not None else None,
        "hypervolume": front.hypervolume(),
        "front": entries,
    }
    write_text(path, json.dumps(payload, indent=2) + "\n")


def write_sweep_outputs(config: CampaignConfig, result: SweepResult) -> Path:
    sweep_dir = config.out / f"n{result.n_joint}"
    urdf_dir = sweep_dir / "urdf"
    urdf_names: dict[int, str] = {}
    for trial in result.front.trials:
        model = decode(result.space, trial.params)
        name = f"design_t{trial.id:05d}"
        xml = export_urdf(model, name=name)
        write_text(urdf_dir / f"{name}.urdf", xml)
        urdf_names[trial.id] = f"urdf/{name}.urdf"
    write_trials_csv(sweep_dir / "trials.csv", result.space, result.state)
    write_hypervolume_csv(sweep_dir / "hypervolume.csv", result.hv_curve)
    write_pareto_json(sweep_dir / "pareto.json", config, result, urdf_names)
    return sweep_dir


def write_campaign_manifest(config: CampaignConfig) -> None:
    payload = {
        "n_joints": list(config.n_joints),
        "trials": config.trials,
        "seed": config.seed,
        "sampler": config.sampler,
        "jobs": config.jobs,
        "space": SearchSpace.from_dict(config.space).to_dict(),
        "targets": config.targets.to_dict(),
        "ik": config.ik.to_dict(),
    }
    write_text(config.out / "campaign.json", json.dumps(payload, indent=2) + "\n")


def run_optimize(config: CampaignConfig) -> dict[int, dict]:
    """Run every sweep and write the campaign directory; returns a summary."""
    summary: dict[int, dict] = {}
    write_campaign_manifest(config)
    for n_joint in config.n_joints:
        result = run_sweep(config, n_joint)
        sweep_dir = write_sweep_outputs(config, result)
        front = result.front
        best_ex = min((t.objectives.e_x for t in front.trials), default=None)
        best_tau = min((t.objectives.e_tau for t in front.trials), default=None)
        summary[n_joint] = {
            "dir": str(sweep_dir),
            "trials": len(result.state.trials),
            "feasible": result.state.feasible_count(),
            "front_size": len(front.trials),
            "hypervolume": front.hypervolume(),
            "best_e_x": best_ex,
            "best_e_tau": best_tau,
        }
    return summary
