import asyncio

import pytest

from walker_distill.dataset.schemas import DatasetConfig
from walker_distill.errors import ConfigurationError
from walker_distill.evaluation import METRICS, EpisodeOutcome, mean_std, summarize_seed
from walker_distill.randomization import SetupId
from walker_distill.runner import (
    RunRecord,
    RunRegistry,
    StageKind,
    StageResult,
    StageStatus,
    aggregate,
    audit,
    format_cell,
    format_table,
    normalize_metrics,
    plan_matrix,
    run_matrix,
    run_root,
    write_report,
)
from walker_distill.runner.report import MISSING, Cell
from walker_distill.schemas import ExpertStageConfig, RunConfig, load_run_config
from walker_distill.seeding import derive_seed


class FakeExecutor:
    """Records stage keys; evaluations return metrics derived from the DP seed."""

    def __init__(self, fail: tuple[str, ...] = ()):
        self.fail = set(fail)
        self.calls: list[str] = []

    def run(self, task, upstream) -> StageResult:
        self.calls.append(task.key)
        if task.key in self.fail:
            raise RuntimeError(f"{task.key} exploded")
        if task.stage not in (StageKind.EVALUATE, StageKind.EXPERT_EVAL):
            return StageResult({"stage": task.stage.value})
        offset = 0.1 * task.params.get("dp_seed", 0)
        episodes = [
            EpisodeOutcome(seed=0, episode=i, survived=i != 2, steps=500 if i != 2 else 40,
                           tracking_error=0.2 + offset + 0.01 * i, smoothness=1.0 + i)
            for i in range(3)
        ]
        per_seed = [summarize_seed(0, episodes).model_dump(mode="json", exclude={"episodes"})]
        mean = {m: mean_std([s[m] for s in per_seed])[0] for m in METRICS}
        std = {m: mean_std([s[m] for s in per_seed])[1] for m in METRICS}
        return StageResult({"mean": mean, "std": std, "per_seed": per_seed}, episodes)


def small_config(tmp_path, **kwargs) -> RunConfig:
    base = {
        "output_root": str(tmp_path / "runs"),
        "setups": [SetupId.NONE],
        "dataset": DatasetConfig(sizes=[1000]),
        "dp_seeds": [0],
        "expert": ExpertStageConfig(evaluate=False),
    }
    return RunConfig(**{**base, **kwargs})


def run(config: RunConfig, executor: FakeExecutor) -> RunRegistry:
    return asyncio.run(run_matrix(config, executor=executor, workers=2))


def latest(registry: RunRegistry, run_id: str) -> dict[str, RunRecord]:
    return {r.key: r for r in asyncio.run(registry.latest(run_id))}


# --- configuration ----------------------------------------------------------


def test_run_id_ignores_key_order_and_output_root(tmp_path):
    a = load_run_config(extra={"master_seed": 3, "dp_seeds": [0, 1]})
    b = load_run_config(extra={"dp_seeds": [0, 1], "master_seed": 3,
                               "output_root": str(tmp_path)})
    assert a.run_id == b.run_id
    assert load_run_config(overrides=["master_seed=4"]).run_id != a.run_id


def test_yaml_config_with_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("setups: [none, all]\ndp_train:\n  epochs: 3\n")
    cfg = load_run_config(path, ["dp_train.epochs=5"])
    assert cfg.setups == [SetupId.NONE, SetupId.ALL]
    assert cfg.dp_train.epochs == 5


def test_derived_seeds_depend_only_on_their_key_path():
    assert derive_seed(0, "train_dp", "all", 1000, 0) == derive_seed(0, "train_dp", "all", 1000, 0)
    assert derive_seed(0, "a") != derive_seed(1, "a")
    assert derive_seed(0, "a", 1) != derive_seed(0, "a1")
    assert 0 <= derive_seed(123, "x") < 2**31 - 1


@pytest.mark.parametrize(
    "extra",
    [{"setups": ["none", "none"]}, {"setups": ["sideways"]}, {"dp_seeds": [1, 1]}],
)
def test_invalid_run_config(extra):
    with pytest.raises(ConfigurationError):
        load_run_config(extra=extra)


# --- planning and execution -------------------------------------------------


def test_full_grid_stage_counts():
    tasks = plan_matrix(RunConfig(expert=ExpertStageConfig(evaluate=False)))
    counts = {kind: sum(t.stage == kind for t in tasks) for kind in StageKind}
    assert counts[StageKind.EXPERT] == 1
    assert counts[StageKind.COLLECT] == 24
    assert counts[StageKind.TRAIN_DP] == 72
    assert counts[StageKind.EVALUATE] == 144
    assert len(plan_matrix(RunConfig())) == 241 + 2


def test_plan_lists_parents_first(tmp_path):
    seen: set[str] = set()
    for task in plan_matrix(RunConfig(output_root=str(tmp_path))):
        assert all(d in seen for d in task.deps)
        seen.add(task.key)
    assert run_root(RunConfig(output_root=str(tmp_path))).parent == tmp_path


def test_degenerate_grid(tmp_path):
    cfg = small_config(tmp_path)
    executor = FakeExecutor()
    registry = run(cfg, executor)
    records = latest(registry, cfg.run_id)
    assert len(records) == 1 + 1 + 1 + 2
    assert all(r.status == StageStatus.COMPLETED for r in records.values())
    assert executor.calls[0] == "expert"

    with_expert = small_config(tmp_path, expert=ExpertStageConfig(evaluate=True))
    records = latest(run(with_expert, FakeExecutor()), with_expert.run_id)
    assert len(records) == 1 + 2 + 1 + 1 + 2


def test_rerun_is_a_no_op(tmp_path):
    cfg = small_config(tmp_path)
    registry = run(cfg, FakeExecutor())
    before = len(asyncio.run(registry.entries()))
    again = FakeExecutor()
    run(cfg, again)
    assert again.calls == []
    assert len(asyncio.run(registry.entries())) == before


def test_changed_section_changes_only_downstream_hashes(tmp_path):
    cfg = small_config(tmp_path)
    changed = cfg.model_copy(update={"dp_train": cfg.dp_train.model_copy(update={"epochs": 7})})
    before = latest(run(cfg, FakeExecutor()), cfg.run_id)
    after = latest(run(changed, FakeExecutor()), changed.run_id)
    assert changed.run_id != cfg.run_id
    for key, record in before.items():
        same = after[key].input_hash == record.input_hash
        assert same == (record.stage in (StageKind.EXPERT, StageKind.COLLECT))


def test_failure_blocks_dependents_only(tmp_path):
    cfg = small_config(tmp_path, setups=[SetupId.NONE, SetupId.ALL])
    registry = run(cfg, FakeExecutor(fail=("collect/none/1000",)))
    records = latest(registry, cfg.run_id)
    assert records["collect/none/1000"].status == StageStatus.FAILED
    assert "exploded" in records["collect/none/1000"].error
    assert records["train_dp/none/1000/seed0"].status == StageStatus.BLOCKED
    assert records["evaluate/none/1000/seed0/fixed"].status == StageStatus.BLOCKED
    assert records["train_dp/all/1000/seed0"].status == StageStatus.COMPLETED
    assert records["evaluate/all/1000/seed0/randomized"].status == StageStatus.COMPLETED

    # a later run retries the failed branch
    retry = FakeExecutor()
    run(cfg, retry)
    assert set(retry.calls) == {
        "collect/none/1000", "train_dp/none/1000/seed0",
        "evaluate/none/1000/seed0/fixed", "evaluate/none/1000/seed0/randomized",
    }


# --- aggregation and reports ------------------------------------------------


def eval_record(setup: str, size: int, seed: int, success: float, tracking: float = 0.3,
                target: str = "fixed") -> RunRecord:
    return RunRecord(
        "run", StageKind.EVALUATE, f"evaluate/{setup}/{size}/seed{seed}/{target}", "h",
        StageStatus.COMPLETED,
        {"setup": setup, "size": size, "dp_seed": seed, "target": target},
        {"mean": {"success_rate": success, "tracking_error": tracking, "smoothness": 2.0}},
    )


def test_cell_examples():
    table = aggregate([eval_record("none", 1000, s, 1.0) for s in range(3)])["fixed"]
    assert format_cell(table.cell("success_rate", 1000, "none")) == "1.0 ± 0.0"

    table = aggregate([eval_record("none", 1000, s, v) for s, v in enumerate([0.9, 1.0, 0.8])])
    cell = table["fixed"].cell("success_rate", 1000, "none")
    assert cell.mean == pytest.approx(0.9)
    assert cell.std == pytest.approx(0.0816, abs=1e-4)
    assert cell.values == [0.9, 1.0, 0.8]


def test_empty_registry_gives_empty_tables(tmp_path):
    assert aggregate([]) == {}
    assert write_report([], tmp_path / "report") == []


def test_missing_cells_are_absent_not_zero():
    records = [
        eval_record("none", 1000, 0, 1.0),
        eval_record("all", 1000, 0, 0.5),
        eval_record("none", 2000, 0, 0.7),
    ]
    table = aggregate(records)["fixed"]
    assert table.setups == ["none", "all"]
    assert table.sizes == [1000, 2000]
    assert table.cell("success_rate", 2000, "all") is None
    assert MISSING in format_table(table)
    assert format_cell(None) == MISSING


def test_blocked_and_failed_records_are_ignored():
    blocked = eval_record("none", 1000, 1, 0.0)
    blocked.status = StageStatus.BLOCKED
    table = aggregate([eval_record("none", 1000, 0, 1.0), blocked])["fixed"]
    assert table.cell("success_rate", 1000, "none").values == [1.0]


def test_normalized_series_invert_lower_is_better():
    records = [
        eval_record("none", 1000, 0, 0.4, tracking=0.2),
        eval_record("all", 1000, 0, 0.9, tracking=0.4),
    ]
    series = normalize_metrics(aggregate(records)["fixed"])
    assert series["success_rate"] == {"all/1000": 0.9, "none/1000": 0.4}
    assert series["tracking_error"] == {"all/1000": 0.0, "none/1000": 1.0}
    # constant smoothness collapses to 1.0
    assert set(series["smoothness"].values()) == {1.0}


def test_expert_column():
    expert = RunRecord(
        "run", StageKind.EXPERT_EVAL, "expert_eval/fixed", "h", StageStatus.COMPLETED,
        {"target": "fixed"},
        {"per_seed": [{"seed": 0, "success_rate": 1.0, "tracking_error": 0.1,
                       "smoothness": 3.0}]},
    )
    table = aggregate([eval_record("none", 1000, 0, 0.8), expert])["fixed"]
    assert table.expert["success_rate"].mean == 1.0
    assert "expert" in format_table(table).splitlines()[1]


def test_write_report(tmp_path):
    records = [eval_record("none", 1000, s, 1.0, target=t)
               for s in range(2) for t in ("fixed", "randomized")]
    written = write_report(records, tmp_path / "report", config_hash="abc", plots=False)
    names = sorted(p.name for p in written)
    assert names == [
        "normalized_fixed.json", "normalized_randomized.json",
        "results_fixed.json", "results_fixed.txt",
        "results_randomized.json", "results_randomized.txt",
    ]
    text = (tmp_path / "report" / "results_fixed.txt").read_text()
    assert text.startswith("config abc\n")


def test_write_report_plots(tmp_path):
    pytest.importorskip("matplotlib")
    written = write_report([eval_record("none", 1000, 0, 1.0)], tmp_path / "report")
    png = [p for p in written if p.suffix == ".png"]
    assert len(png) == 1 and png[0].stat().st_size > 0


def test_cell_of_single_value():
    assert Cell.of([0.5]).std == 0.0


# --- audit ------------------------------------------------------------------


def test_audit_accepts_consistent_registry(tmp_path):
    cfg = small_config(tmp_path)
    registry = run(cfg, FakeExecutor())
    result = asyncio.run(audit(registry, cfg.run_id))
    assert result.ok
    assert result.checked == 2


def test_audit_flags_tampered_summary(tmp_path):
    cfg = small_config(tmp_path)
    registry = run(cfg, FakeExecutor())
    record = latest(registry, cfg.run_id)["evaluate/none/1000/seed0/fixed"]
    episodes = asyncio.run(registry.episode_metrics(record.seq))
    tampered = RunRecord(
        record.run_id, record.stage, record.key, record.input_hash, record.status,
        record.params,
        {**record.outputs, "mean": {**record.outputs["mean"], "success_rate": 1.0}},
    )
    asyncio.run(registry.append(tampered, episodes))
    result = asyncio.run(audit(registry, cfg.run_id))
    assert not result.ok
    assert any("seed mean" in m for m in result.mismatches)
