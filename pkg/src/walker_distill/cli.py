"""Command-line entry points for every pipeline stage and the matrix runner."""

import argparse
import asyncio
import logging
import sys
from pathlib import Path

from .amp.artifact import PolicyArtifact
from .amp.scripted import ScriptedGaitPolicy
from .amp.trainer import train
from .config import configure_logging, settings
from .dataset.collect import collect_to_file
from .diffusion.trainer import train_dp
from .errors import WalkerDistillError
from .evaluation.harness import evaluate
from .evaluation.policies import ScriptedPolicy, load_policy
from .evaluation.schemas import EvalProtocol
from .motion import generate_reference_clips
from .randomization.schemas import RangeProfile, SetupId
from .randomization.setups import TargetKind, build_setup
from .runner.matrix import run_matrix
from .runner.registry import RunRegistry
from .runner.report import audit, write_report
from .runner.stages import SCRIPTED_EXPERT_HASH
from .schemas import RunConfig, load_run_config

logger = logging.getLogger(__name__)

SCRIPTED = "scripted"


def _config(args: argparse.Namespace) -> RunConfig:
    return load_run_config(args.config, getattr(args, "overrides", None))


def cmd_train_rl(args: argparse.Namespace) -> int:
    cfg = _config(args)
    artifact = train(
        cfg.amp,
        args.seed,
        randomization=build_setup(SetupId.ALL, omega_range=cfg.omega_range,
                                  terrain_params=cfg.terrain),
        library=generate_reference_clips(cfg.gait, cfg.robot),
        base_model=cfg.robot,
        sim_config=cfg.sim,
        limits=cfg.limits,
        out_dir=args.out,
    )
    logger.info(f"Expert {artifact.content_hash()[:12]} written to {args.out}")
    return 0


def cmd_collect(args: argparse.Namespace) -> int:
    cfg = _config(args)
    library = generate_reference_clips(cfg.gait, cfg.robot)
    if args.expert == SCRIPTED:
        expert, expert_hash = ScriptedGaitPolicy(library, cfg.robot), SCRIPTED_EXPERT_HASH
    else:
        expert = PolicyArtifact.load(args.expert)
        expert_hash = expert.content_hash()
    setup = build_setup(args.setup, RangeProfile.TRAINING, cfg.omega_range, cfg.terrain)
    path, manifest = collect_to_file(
        expert,
        setup,
        args.size,
        args.seed,
        args.out,
        expert_hash,
        library=library,
        base_model=cfg.robot,
        sim_config=cfg.sim,
        limits=cfg.limits,
        num_envs=cfg.dataset.num_envs,
        shards=cfg.dataset.shards,
        episode_steps=cfg.amp.episode_steps,
    )
    logger.info(f"{manifest.count} transitions ({manifest.episodes} episodes) written to {path}")
    return 0


def cmd_train_dp(args: argparse.Namespace) -> int:
    cfg = _config(args)
    artifact = train_dp(args.dataset, cfg.diffusion, args.seed, cfg.dp_train, out_dir=args.out)
    logger.info(
        f"Diffusion policy written to {args.out} "
        f"(best validation loss {artifact.metadata.get('best_loss')})"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = _config(args)
    library = generate_reference_clips(cfg.gait, cfg.robot)
    if args.policy == SCRIPTED:
        policy = ScriptedPolicy.from_gait(ScriptedGaitPolicy(library, cfg.robot))
    else:
        policy = load_policy(args.policy)
    protocol = EvalProtocol(
        target=args.target,
        episodes=args.episodes,
        episode_steps=cfg.evaluation.episode_steps,
        control_rate_hz=cfg.sim.control_rate_hz,
        command=cfg.evaluation.command,
        seeds=list(range(args.seeds)),
        record_trajectories=args.trajectories,
    )
    out = Path(args.out) if args.out else None
    report = evaluate(
        policy,
        protocol,
        library=library,
        base_model=cfg.robot,
        sim_config=cfg.sim,
        limits=cfg.limits,
        trajectory_dir=out.parent if out is not None else None,
    )
    text = report.to_text()
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        logger.info(f"Report written to {out}")
    return 0


def cmd_matrix(args: argparse.Namespace) -> int:
    cfg = _config(args)
    registry = asyncio.run(run_matrix(cfg, workers=args.workers))
    logger.info(f"Run {cfg.run_id} registry at {registry.path}")
    records = asyncio.run(registry.latest(cfg.run_id))
    write_report(records, registry.path.parent / "report", config_hash=cfg.config_hash())
    return 0


async def _run_ids(registry: RunRegistry) -> list[str]:
    if not registry.path.exists():
        raise WalkerDistillError(f"No registry at {registry.path}")
    return await registry.run_ids()


def cmd_report(args: argparse.Namespace) -> int:
    registry = RunRegistry(args.registry)
    out_root = Path(args.out) if args.out else registry.path.parent / "report"
    for run_id in asyncio.run(_run_ids(registry)):
        records = asyncio.run(registry.latest(run_id))
        written = write_report(records, out_root / run_id, config_hash=run_id,
                               plots=not args.no_plots)
        for path in written:
            if path.suffix == ".txt":
                sys.stdout.write(path.read_text())
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    registry = RunRegistry(args.registry)
    ok = True
    for run_id in asyncio.run(_run_ids(registry)):
        result = asyncio.run(audit(registry, run_id))
        for mismatch in result.mismatches:
            logger.error(f"{run_id}: {mismatch}")
        ok = ok and result.ok
        print(f"{run_id}: {result.checked} evaluations checked, "
              f"{'ok' if result.ok else f'{len(result.mismatches)} mismatches'}")
    return 0 if ok else 1


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run(
        "walker_distill.main:app",
        host=args.host or settings.host,
        port=args.port or settings.port,
        log_level=settings.log_level.lower(),
    )
    return 0


def _add_config(p: argparse.ArgumentParser, required: bool = False) -> None:
    p.add_argument("--config", required=required, help="YAML run config")
    p.add_argument("overrides", nargs="*", help="dotlist overrides, e.g. dp_train.epochs=5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walker-distill",
        description="Expert-to-diffusion-policy distillation for a planar biped",
    )
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-rl", help="train the AMP expert")
    _add_config(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train_rl)

    p = sub.add_parser("collect", help="roll out an expert into a transition dataset")
    _add_config(p)
    p.add_argument("--expert", required=True, help=f"expert checkpoint, or '{SCRIPTED}'")
    p.add_argument("--setup", required=True, choices=[s.value for s in SetupId])
    p.add_argument("--size", type=int, required=True, help="number of transitions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset file")
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train-dp", help="train a diffusion policy on a dataset")
    _add_config(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.set_defaults(func=cmd_train_dp)

    p = sub.add_parser("eval", help="evaluate a policy under a fixed protocol")
    _add_config(p)
    p.add_argument("--policy", required=True,
                   help="checkpoint directory, or a built-in kind (scripted, zero)")
    p.add_argument("--target", required=True, choices=[t.value for t in TargetKind])
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seeds", type=int, default=3, help="evaluation seeds 0..n-1")
    p.add_argument("--trajectories", action="store_true", help="store per-seed npz dumps")
    p.add_argument("--out", help="report file; stdout when omitted")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("matrix", help="run the full experiment grid")
    _add_config(p, required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("report", help="write result tables and plots from a registry")
    p.add_argument("--registry", required=True, help="run directory or registry file")
    p.add_argument("--out", help="report directory")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("audit", help="recompute every table cell from raw episode metrics")
    p.add_argument("--registry", required=True, help="run directory or registry file")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("serve", help="start the matrix job service")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except WalkerDistillError as e:
        logger.error(f"{args.command} failed: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
