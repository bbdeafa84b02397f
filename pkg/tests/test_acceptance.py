"""End-to-end runs at desk scale. Deselected by default; run with ``pytest -m slow``."""

import asyncio
import json
from pathlib import Path

import pytest

from walker_distill.amp import AMPConfig, train
from walker_distill.dataset import collect_to_file
from walker_distill.diffusion import DiffusionConfig, train_dp
from walker_distill.evaluation import DiffusionPolicy, EvalProtocol, ExpertPolicy, evaluate
from walker_distill.randomization import SetupId, build_setup
from walker_distill.runner import (
    RunRegistry,
    StageKind,
    StageStatus,
    audit,
    run_matrix,
    write_report,
)
from walker_distill.schemas import load_run_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def expert(tmp_path_factory, library):
    return train(AMPConfig(), seed=0, library=library,
                 out_dir=tmp_path_factory.mktemp("expert"))


@pytest.fixture(scope="module")
def fixed_protocol() -> EvalProtocol:
    return EvalProtocol(target="fixed", episodes=100)


def test_expert_walks_on_the_fixed_target(expert, library, fixed_protocol):
    report = evaluate(ExpertPolicy.from_artifact(expert), fixed_protocol, library=library)
    assert report.mean["success_rate"] >= 0.9
    assert report.mean["tracking_error"] <= 0.3


def test_distilled_policy_keeps_up_with_the_expert(expert, library, fixed_protocol, tmp_path):
    actor = ExpertPolicy.from_artifact(expert)
    path, manifest = collect_to_file(
        actor, build_setup(SetupId.ALL), 200_000, 0, tmp_path / "all_200k.ldds",
        expert.content_hash(), library=library,
    )
    assert manifest.count == 200_000

    dp = train_dp(path, DiffusionConfig(), seed=0, out_dir=tmp_path / "dp")
    expert_report = evaluate(actor, fixed_protocol, library=library)
    dp_report = evaluate(DiffusionPolicy.from_artifact(dp), fixed_protocol, library=library)

    assert dp_report.mean["success_rate"] >= 0.8
    gap = dp_report.mean["tracking_error"] - expert_report.mean["tracking_error"]
    assert abs(gap) <= 0.15


def test_smoke_matrix_produces_normalized_report(tmp_path):
    config = load_run_config(CONFIGS / "smoke.yaml", extra={"output_root": str(tmp_path)})
    assert len(config.setups) == 2

    registry = asyncio.run(run_matrix(config, workers=2))
    records = asyncio.run(registry.latest(config.run_id))
    assert all(r.status == StageStatus.COMPLETED for r in records)
    evaluations = [r for r in records if r.stage == StageKind.EVALUATE]
    targets = [t.value for t in config.evaluation.targets]
    assert len(evaluations) == len(config.setups) * len(config.dp_seeds) * len(targets)

    out = tmp_path / "report"
    written = write_report(records, out, config_hash=config.config_hash())
    for target in targets:
        assert out / f"normalized_{target}.png" in written
        assert (out / f"normalized_{target}.png").stat().st_size > 0
        series = json.loads((out / f"normalized_{target}.json").read_text())["series"]
        size = config.dataset.resolved_sizes()[0]
        assert set(series["success_rate"]) == {f"{s.value}/{size}" for s in config.setups}
        for metric in ("tracking_error", "smoothness"):
            assert all(0.0 <= v <= 1.0 for v in series[metric].values())
        assert "expert" in (out / f"results_{target}.txt").read_text()

    result = asyncio.run(audit(RunRegistry(registry.path.parent), config.run_id))
    expert_evals = [r for r in records if r.stage == StageKind.EXPERT_EVAL]
    assert len(expert_evals) == len(targets)
    assert result.ok and result.checked == len(evaluations) + len(expert_evals)
