"""Command line interface.

Subcommands:
    optimize     run an optimization campaign from a YAML config
    evaluate     score an exported URDF model against a target set
    export-urdf  write the URDF for a stored or ad-hoc genotype
    report       render SVG figures into an existing campaign directory

Exit codes: 0 success, 2 bad input or configuration, 3 report on an
incomplete campaign directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .campaign import CampaignConfig, ConfigError, genotype_from_dict, run_optimize
from .design import MalformedGenotypeError, SearchSpace, decode
from .evaluation import TargetParseError, evaluate, load_targets
from .fsio import write_text
from .kinematics import IkOptions
from .reporting import IncompleteCampaignError, render_report
from .urdf import UrdfError, export_urdf, load_urdf


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="armforge",
        description="Design-space optimization for serial robot arms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run an optimization campaign")
    p_opt.add_argument("--config", required=True, type=Path, help="campaign YAML file")
    p_opt.add_argument("--seed", type=int, default=None, help="override the campaign seed")
    p_opt.add_argument("--trials", type=int, default=None, help="override the trial budget")
    p_opt.add_argument("--out", type=Path, default=None, help="override the output directory")
    p_opt.add_argument("--jobs", type=int, default=None, help="parallel evaluation workers")
    p_opt.add_argument(
        "--sampler", choices=("tpe", "random"), default=None, help="override the sampler strategy"
    )
    p_opt.add_argument("--json", action="store_true", help="print a JSON summary")

    p_eval = sub.add_parser("evaluate", help="score a URDF model against targets")
    p_eval.add_argument("--model", required=True, type=Path, help="URDF file to load")
    p_eval.add_argument("--targets", required=True, type=Path, help="target-set YAML file")
    p_eval.add_argument("--ik-seed", type=int, default=0, help="seed for IK restarts")
    p_eval.add_argument("--restarts", type=int, default=None, help="IK restart count")
    p_eval.add_argument("--max-iter", type=int, default=None, help="IK iterations per restart")
    p_eval.add_argument("--json", action="store_true", help="print a JSON result")

    p_urdf = sub.add_parser("export-urdf", help="write a URDF for a genotype")
    p_urdf.add_argument("--campaign", type=Path, help="campaign directory holding pareto.json")
    p_urdf.add_argument("--n-joint", type=int, help="sweep to read from the campaign")
    p_urdf.add_argument("--trial", type=int, help="trial id of the front member to export")
    p_urdf.add_argument("--space", type=Path, help="search-space YAML (with --genotype)")
    p_urdf.add_argument("--genotype", type=Path, help="genotype JSON file (with --space)")
    p_urdf.add_argument("--out", type=Path, default=None, help="output file (default stdout)")

    p_rep = sub.add_parser("report", help="render figures for a finished campaign")
    p_rep.add_argument("--campaign", required=True, type=Path, help="campaign directory")
    p_rep.add_argument("--json", action="store_true", help="print the written paths as JSON")
    return parser


def _cmd_optimize(args) -> int:
    config = CampaignConfig.from_file(args.config).with_overrides(
        seed=args.seed, trials=args.trials, out=args.out, jobs=args.jobs, sampler=args.sampler
    )
    summary = run_optimize(config)
    for n_joint, info in summary.items():
        if info["front_size"] == 0:
            print(f"warning: sweep n={n_joint} found no feasible design", file=sys.stderr)
    if args.json:
        print(json.dumps({str(k): v for k, v in summary.items()}, indent=2))
    else:
        for n_joint, info in summary.items():
            line = (
                f"n={n_joint}: {info['trials']} trials, {info['feasible']} feasible, "
                f"front {info['front_size']}, hypervolume {info['hypervolume']:.6g}"
            )
            if info["best_e_x"] is not None:
                line += f", best e_x {info['best_e_x']:.6g}, best e_tau {info['best_e_tau']:.6g}"
            print(line)
            print(f"  outputs: {info['dir']}")
    return 0


def _cmd_evaluate(args) -> int:
    model = load_urdf(args.model)
    targets = load_targets(args.targets)
    ik = IkOptions(seed=args.ik_seed)
    if args.restarts is not None:
        ik = replace(ik, restarts=args.restarts)
    if args.max_iter is not None:
        ik = replace(ik, max_iter=args.max_iter)
    result = evaluate(model, targets, ik)
    if args.json:
        payload = {
            "label": targets.label,
            "e_x": result.e_x,
            "e_tau": result.e_tau,
            "per_target": [
                {
                    "position_error": r.position_error,
                    "torque_norm": r.torque_norm,
                    "converged": r.converged,
                }
                for r in result.per_target
            ],
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"targets: {targets.label} ({targets.count})")
        print(f"e_x = {result.e_x!r}")
        print(f"e_tau = {result.e_tau!r}")
        for i, r in enumerate(result.per_target):
            state = "converged" if r.converged else "best effort"
            print(f"  target {i}: error {r.position_error:.3e} m, torque {r.torque_norm:.3e} N m, {state}")
    return 0


def _cmd_export_urdf(args) -> int:
    from_campaign = args.campaign is not None
    from_files = args.space is not None or args.genotype is not None
    if from_campaign == from_files:
        raise ValueError("use either --campaign/--n-joint/--trial or --space/--genotype")
    if from_campaign:
        if args.n_joint is None or args.trial is None:
            raise ValueError("--campaign needs --n-joint and --trial")
        pareto_path = args.campaign / f"n{args.n_joint}" / "pareto.json"
        if not pareto_path.exists():
            raise ValueError(f"no pareto front at {pareto_path}")
        pareto = json.loads(pareto_path.read_text())
        entry = next((e for e in pareto["front"] if e["trial"] == args.trial), None)
        if entry is None:
            ids = [e["trial"] for e in pareto["front"]]
            raise ValueError(f"trial {args.trial} is not on the front (front trials: {ids})")
        space = SearchSpace.from_dict(pareto["space"])
        genotype = genotype_from_dict(entry["genotype"])
        name = f"design_t{args.trial:05d}"
    else:
        if args.space is None or args.genotype is None:
            raise ValueError("--space and --genotype must be given together")
        space = SearchSpace.from_file(args.space)
        genotype = genotype_from_dict(json.loads(args.genotype.read_text()))
        name = args.genotype.stem
    model = decode(space, genotype)
    xml = export_urdf(model, name=name)
    if args.out is None:
        sys.stdout.write(xml)
    else:
        write_text(args.out, xml)
        print(f"wrote {args.out}")
    return 0


def _cmd_report(args) -> int:
    written = render_report(args.campaign)
    if args.json:
        print(json.dumps([str(p) for p in written], indent=2))
    else:
        for path in written:
            print(f"wrote {path}")
    return 0


_COMMANDS = {
    "optimize": _cmd_optimize,
    "evaluate": _cmd_evaluate,
    "export-urdf": _cmd_export_urdf,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except IncompleteCampaignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (
        ConfigError,
        TargetParseError,
        UrdfError,
        MalformedGenotypeError,
        ValueError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
