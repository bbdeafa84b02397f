from walker_distill.cli import build_parser, main


def test_parser_knows_every_stage():
    parser = build_parser()
    args = parser.parse_args(["collect", "--expert", "scripted", "--setup", "all", "--size", "10",
                              "--out", "x.ldds", "dataset.num_envs=2"])
    assert args.command == "collect"
    assert args.overrides == ["dataset.num_envs=2"]
    assert parser.parse_args(["eval", "--policy", "zero", "--target", "fixed"]).seeds == 3


def test_eval_writes_one_record_per_seed(tmp_path):
    out = tmp_path / "report.txt"
    code = main(["eval", "--policy", "zero", "--target", "fixed", "--episodes", "1",
                 "--seeds", "2", "--out", str(out)])
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("policy=zero target=fixed seed=1")


def test_missing_registry_is_a_clean_error(tmp_path):
    assert main(["audit", "--registry", str(tmp_path / "nowhere")]) == 2
