"""Stage tasks and the executor that runs them in-process."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from ..amp.artifact import EXPERT_KIND, PolicyArtifact
from ..amp.scripted import ScriptedGaitPolicy
from ..amp.trainer import train
from ..checkpoint import file_sha256, read_manifest
from ..dataset.collect import collect_to_file
from ..diffusion.trainer import train_dp
from ..errors import ConfigurationError
from ..evaluation.base import PolicyRegistry
from ..evaluation.harness import evaluate
from ..evaluation.policies import ExpertPolicy, ScriptedPolicy
from ..evaluation.schemas import EpisodeOutcome, EvalProtocol
from ..motion import MotionLibrary, generate_reference_clips
from ..progress import board
from ..randomization.schemas import RangeProfile, SetupId
from ..randomization.setups import build_setup
from ..schemas import ExpertSource, RunConfig
from .registry import StageKind

logger = logging.getLogger(__name__)

SCRIPTED_EXPERT_HASH = "scripted-reference-gait"


@dataclass
class StageTask:
    stage: StageKind
    key: str
    seed: int
    out: Path
    params: dict[str, Any] = field(default_factory=dict)
    deps: list[str] = field(default_factory=list)


@dataclass
class StageResult:
    outputs: dict[str, Any]
    episodes: list[EpisodeOutcome] = field(default_factory=list)


class StageExecutor(Protocol):
    def run(self, task: StageTask, upstream: dict[str, dict[str, Any]]) -> StageResult: ...


class LocalExecutor:
    """Runs every stage kind in the current process."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._library: MotionLibrary | None = None

    @property
    def library(self) -> MotionLibrary:
        if self._library is None:
            self._library = generate_reference_clips(self.config.gait, self.config.robot)
        return self._library

    def run(self, task: StageTask, upstream: dict[str, dict[str, Any]]) -> StageResult:
        handler = {
            StageKind.EXPERT: self.expert,
            StageKind.COLLECT: self.collect,
            StageKind.TRAIN_DP: self.train_dp,
            StageKind.EVALUATE: self.evaluate,
            StageKind.EXPERT_EVAL: self.evaluate,
        }[task.stage]
        tracker = board.tracker(task.key)
        try:
            return handler(task, upstream, tracker)
        finally:
            board.discard(task.key)

    def expert(self, task: StageTask, upstream, tracker) -> StageResult:
        cfg = self.config
        if cfg.expert.source == ExpertSource.SCRIPTED:
            return StageResult({"kind": "scripted", "hash": SCRIPTED_EXPERT_HASH})
        if cfg.expert.checkpoint is not None:
            manifest = read_manifest(cfg.expert.checkpoint)
            if manifest.get("kind") != EXPERT_KIND:
                raise ConfigurationError(f"{cfg.expert.checkpoint} is not an expert checkpoint")
            artifact = PolicyArtifact.load(cfg.expert.checkpoint)
            return StageResult(
                {"kind": EXPERT_KIND, "path": str(cfg.expert.checkpoint),
                 "hash": artifact.content_hash()}
            )
        artifact = train(
            cfg.amp,
            task.seed,
            randomization=build_setup(SetupId.ALL, omega_range=cfg.omega_range,
                                      terrain_params=cfg.terrain),
            library=self.library,
            base_model=cfg.robot,
            sim_config=cfg.sim,
            limits=cfg.limits,
            out_dir=task.out,
            progress=tracker,
        )
        return StageResult(
            {"kind": EXPERT_KIND, "path": str(task.out), "hash": artifact.content_hash(),
             "step_count": artifact.step_count}
        )

    def _expert_actor(self, expert_out: dict[str, Any]):
        if expert_out["kind"] == "scripted":
            return ScriptedGaitPolicy(self.library, self.config.robot)
        return PolicyArtifact.load(expert_out["path"])

    def collect(self, task: StageTask, upstream, tracker) -> StageResult:
        cfg = self.config
        expert_out = upstream[task.deps[0]]
        setup = build_setup(
            task.params["setup"], RangeProfile.TRAINING, cfg.omega_range, cfg.terrain
        )
        path = task.out / "transitions.ldds"
        path, manifest = collect_to_file(
            self._expert_actor(expert_out),
            setup,
            task.params["size"],
            task.seed,
            path,
            expert_out["hash"],
            library=self.library,
            base_model=cfg.robot,
            sim_config=cfg.sim,
            limits=cfg.limits,
            num_envs=cfg.dataset.num_envs,
            shards=cfg.dataset.shards,
            episode_steps=cfg.amp.episode_steps,
            progress=tracker,
        )
        return StageResult(
            {"path": str(path), "sha256": file_sha256(path), "count": manifest.count,
             "episodes": manifest.episodes}
        )

    def train_dp(self, task: StageTask, upstream, tracker) -> StageResult:
        dataset_out = upstream[task.deps[0]]
        artifact = train_dp(
            dataset_out["path"],
            self.config.diffusion,
            task.seed,
            self.config.dp_train,
            out_dir=task.out,
            progress=tracker,
        )
        return StageResult(
            {"path": str(task.out), "best_loss": artifact.metadata.get("best_loss")}
        )

    def evaluate(self, task: StageTask, upstream, tracker) -> StageResult:
        cfg = self.config
        policy_out = upstream[task.deps[0]]
        if policy_out.get("kind") == "scripted":
            policy = ScriptedPolicy.from_gait(ScriptedGaitPolicy(self.library, cfg.robot))
        elif task.stage == StageKind.EXPERT_EVAL:
            policy = ExpertPolicy(policy_out["path"])
            policy.load()
        else:
            policy = PolicyRegistry.load_policy(policy_out["path"])
        protocol = EvalProtocol(
            target=task.params["target"],
            episodes=cfg.evaluation.episodes,
            episode_steps=cfg.evaluation.episode_steps,
            control_rate_hz=cfg.sim.control_rate_hz,
            command=cfg.evaluation.command,
            seeds=list(cfg.evaluation.seeds),
            record_trajectories=cfg.evaluation.record_trajectories,
        )
        report = evaluate(
            policy,
            protocol,
            library=self.library,
            base_model=cfg.robot,
            sim_config=cfg.sim,
            limits=cfg.limits,
            trajectory_dir=task.out,
            progress=tracker,
        )
        task.out.mkdir(parents=True, exist_ok=True)
        (task.out / "report.txt").write_text(report.to_text())
        episodes = [e for s in report.per_seed for e in s.episodes]
        per_seed = [
            s.model_dump(mode="json", exclude={"episodes"}) for s in report.per_seed
        ]
        return StageResult(
            {"mean": report.mean, "std": report.std, "per_seed": per_seed,
             "report": str(task.out / "report.txt")},
            episodes,
        )
