import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from milkit.cli import CLIConfig, apply_overrides, load_config, parse_overrides
from milkit.cli.commands import cmd_inspect, cmd_train
from milkit.datasets import SyntheticSpec, generate, save_dataset
from milkit.exceptions import ConfigError, DivergenceError
from milkit.main import app
from milkit.models import ModelConfig, build_model, save_checkpoint
from milkit.training import RunConfig

runner = CliRunner()

TOY = ["--dataset.n_bags=30", "--dataset.mean_bag_size=8", "--dataset.witness_rate=0.25", "--dataset.feature_dim=4"]
SMALL_MODEL = ["--model.embed_dim=8", "--model.attention_width=4"]


def files_of(root: Path):
    return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def data_dir(tmp_path):
    result = runner.invoke(app, ["datagen", "--output", str(tmp_path / "data"), *TOY])
    assert result.exit_code == 0, result.output
    return tmp_path / "data"


@pytest.fixture
def trained(tmp_path, data_dir):
    run = tmp_path / "run"
    result = runner.invoke(
        app, ["train", "--output", str(run), f"--dataset.path={data_dir}", "--run.epochs=3", *SMALL_MODEL]
    )
    assert result.exit_code == 0, result.output
    return run


def test_parse_overrides():
    overrides = parse_overrides(["--run.epochs=5", "--dataset.kind", "distractor", "--run.learning_rate=1e-3"])
    assert overrides == {"run.epochs": 5, "dataset.kind": "distractor", "run.learning_rate": 1e-3}
    with pytest.raises(ConfigError, match="unexpected argument"):
        parse_overrides(["epochs=5"])
    with pytest.raises(ConfigError, match="has no value"):
        parse_overrides(["--run.epochs"])


def test_apply_overrides_rejects_unknown_sections():
    assert apply_overrides({"run": {"epochs": 1}}, {"run.seed": 3}) == {"run": {"epochs": 1, "seed": 3}}
    with pytest.raises(ConfigError, match="unknown config key 'trainer.epochs'"):
        apply_overrides({}, {"trainer.epochs": 3})


def test_load_config_defaults_and_seed(tmp_path):
    config = load_config(seed=9, output=str(tmp_path))
    assert isinstance(config.dataset, SyntheticSpec)
    assert config.dataset.seed == 9 and config.run.seed == 9
    assert config.run.epochs == 50
    assert config.model == {"model_name": "ABMIL"}
    assert config.benchmark.k == 5
    assert config.output_dir == str(tmp_path)


def test_config_file_with_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"dataset": {"path": "somewhere"}, "run": {"epochs": 7}}))
    config = load_config(path, {"run.epochs": 2, "model.model_name": "MaxPoolMIL"})
    assert config.dataset == "somewhere"
    assert config.run.epochs == 2
    assert config.model_config(in_dim=3).model_name == "MaxPoolMIL"


def test_partial_model_section_keeps_default_model_name(tmp_path):
    config = load_config(overrides={"model.embed_dim": 8})
    model = config.model_config(in_dim=4)
    assert model.model_name == "ABMIL"
    assert model.embed_dim == 8
    assert model.attention_width == 32

    path = tmp_path / "config.json"
    path.write_text(json.dumps({"model": {"gated": True}}))
    assert load_config(path).model_config(in_dim=4).model_name == "ABMIL"


@pytest.mark.parametrize("document, key", [
    ({"dataset": {"colour": "red"}}, "dataset.colour"),
    ({"run": {"lr": 1}}, "run.lr"),
    ({"trainer": {}}, "trainer"),
    ({"benchmark": {"folds": 2}}, "benchmark.folds"),
    ({"model": {"depth": 2}}, "model.depth"),
])
def test_unknown_config_keys(tmp_path, document, key):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document))
    result = runner.invoke(app, ["datagen", "--config", str(path), "--output", str(tmp_path / "out")])
    assert result.exit_code == 2
    assert f"unknown config key '{key}'" in result.output


def test_datagen_writes_manifest(tmp_path):
    result = runner.invoke(app, ["datagen", "--output", str(tmp_path), "--dataset.n_bags=20"])
    assert result.exit_code == 0, result.output
    assert "n_bags=20" in result.output
    manifest = pd.read_csv(tmp_path / "manifest.csv")
    assert len(manifest) == 20


def test_datagen_is_reproducible(tmp_path):
    for name in ("a", "b"):
        result = runner.invoke(app, ["datagen", "--output", str(tmp_path / name), "--seed", "3", *TOY])
        assert result.exit_code == 0, result.output
    assert files_of(tmp_path / "a") == files_of(tmp_path / "b")


def test_datagen_infeasible_spec(tmp_path):
    result = runner.invoke(app, ["datagen", "--output", str(tmp_path), "--dataset.witness_rate=0.01"])
    assert result.exit_code == 2
    assert "infeasible witness configuration" in result.output


def test_train_writes_run_directory(trained):
    report = json.loads((trained / "report.json").read_text())
    assert len(report["history"]) == 3
    assert set(report["metrics"]) >= {"acc", "auroc", "f1", "loss"}
    assert report["environment"]["seed"] == 0
    assert "started_at" not in json.dumps(report)
    assert (trained / "report.timing.json").is_file()
    assert (trained / "splits.json").is_file()
    assert (trained / "checkpoint" / "model.json").is_file()


def test_train_defaults_to_fifty_epochs(tmp_path, data_dir):
    result = runner.invoke(app, ["train", "--output", str(tmp_path / "run"), f"--dataset.path={data_dir}", *SMALL_MODEL])
    assert result.exit_code == 0, result.output
    assert len(json.loads((tmp_path / "run" / "report.json").read_text())["history"]) == 50


def test_train_report_is_byte_identical_on_rerun(trained, data_dir):
    first = (trained / "report.json").read_bytes()
    result = runner.invoke(
        app, ["train", "--output", str(trained), f"--dataset.path={data_dir}", "--run.epochs=3", *SMALL_MODEL]
    )
    assert result.exit_code == 0, result.output
    assert (trained / "report.json").read_bytes() == first


def test_resume_reproduces_stored_metrics(trained):
    stored = json.loads((trained / "report.json").read_text())["metrics"]
    metrics = cmd_train(load_config(output=str(trained)), resume=True)
    for name in ("acc", "auroc", "f1", "loss"):
        assert getattr(metrics, name) == pytest.approx(stored[name], abs=1e-6)

    result = runner.invoke(app, ["train", "--resume", "--output", str(trained)])
    assert result.exit_code == 0, result.output
    assert "evaluation only" in result.output


def test_resume_uses_the_recorded_run_settings(trained):
    stored = json.loads((trained / "report.json").read_text())["metrics"]
    current = CLIConfig(output_dir=str(trained), run=RunConfig(batch_size=7, device="no-such-device"))
    metrics = cmd_train(current, resume=True)
    assert metrics.auroc == pytest.approx(stored["auroc"], abs=1e-6)


def test_eval_matches_training_report(trained, data_dir):
    stored = json.loads((trained / "report.json").read_text())["metrics"]
    result = runner.invoke(app, ["eval", str(trained / "checkpoint"), str(data_dir), "--split", "val"])
    assert result.exit_code == 0, result.output
    assert "AUROC" in result.output

    evaluated = json.loads((trained / "eval.json").read_text())["metrics"]
    for name in ("acc", "auroc", "f1", "loss"):
        assert evaluated[name] == pytest.approx(stored[name], abs=1e-6)


def test_train_missing_dataset(tmp_path):
    result = runner.invoke(app, ["train", "--output", str(tmp_path), f"--dataset.path={tmp_path / 'nowhere'}"])
    assert result.exit_code == 2
    assert "dataset not found" in result.output


def test_eval_dimension_mismatch(tmp_path, trained):
    wide = tmp_path / "wide"
    result = runner.invoke(app, ["datagen", "--output", str(wide), *TOY, "--dataset.feature_dim=6"])
    assert result.exit_code == 0, result.output

    result = runner.invoke(app, ["eval", str(trained / "checkpoint"), str(wide)])
    assert result.exit_code == 2
    assert "6" in result.output and "4" in result.output


def test_eval_single_class_data(tmp_path, trained):
    negatives = [bag for bag in generate(SyntheticSpec(n_bags=20, mean_bag_size=8, witness_rate=0.25,
                                                       feature_dim=4)) if bag.label == 0]
    save_dataset(negatives, tmp_path / "negatives")
    result = runner.invoke(app, ["eval", str(trained / "checkpoint"), str(tmp_path / "negatives")])
    assert result.exit_code == 2
    assert "AUROC requires both classes" in result.output


def test_eval_corrupted_checkpoint(trained, data_dir):
    target = trained / "checkpoint" / "classifier.weight.milt"
    target.write_bytes(b"XXXX" + target.read_bytes()[4:])
    result = runner.invoke(app, ["eval", str(trained / "checkpoint"), str(data_dir)])
    assert result.exit_code == 2
    assert "unrecognized array file" in result.output


def test_divergence_exits_with_code_3(tmp_path, monkeypatch):
    def diverge(*args, **kwargs):
        raise DivergenceError(epoch=0, step=4, loss=float("nan"))

    monkeypatch.setattr("milkit.cli.commands.train", diverge)
    result = runner.invoke(app, ["train", "--output", str(tmp_path), *TOY])
    assert result.exit_code == 3
    assert "divergence detected at epoch 0, step 4" in result.output


def test_benchmark(tmp_path):
    config = tmp_path / "bench.json"
    config.write_text(json.dumps({
        "dataset": {"n_bags": 30, "mean_bag_size": 8, "witness_rate": 0.25, "feature_dim": 4},
        "models": [{"model_name": "ABMIL", "embed_dim": 8}, {"model_name": "MaxPoolMIL", "embed_dim": 8}],
        "run": {"epochs": 1},
        "benchmark": {"k": 2},
    }))
    for name in ("a", "b"):
        result = runner.invoke(app, ["benchmark", "--config", str(config), "--output", str(tmp_path / name)])
        assert result.exit_code == 0, result.output

    table = pd.read_csv(tmp_path / "a" / "benchmark.csv")
    assert table.shape == (2, 7)
    assert (tmp_path / "a" / "benchmark.csv").read_bytes() == (tmp_path / "b" / "benchmark.csv").read_bytes()
    assert json.loads((tmp_path / "a" / "splits.json").read_text())["k"] == 2

    report = json.loads((tmp_path / "a" / "benchmark.json").read_text())
    for row in table.itertuples():
        per_split = [split[row.model]["test"]["acc"] for split in report["splits"]]
        assert row.acc_mean == pytest.approx(np.mean(per_split), abs=1e-6)


def test_inspect_dataset_and_checkpoint(trained, data_dir):
    result = runner.invoke(app, ["inspect", str(data_dir)])
    assert result.exit_code == 0, result.output
    assert "n_bags: 30" in result.output
    assert "data_dim: 4" in result.output

    result = runner.invoke(app, ["inspect", str(trained / "checkpoint")])
    assert result.exit_code == 0, result.output
    assert "ABMIL" in result.output and "parameters" in result.output
    assert "in_shape: (4,)" in result.output and "instance scores: attention" in result.output


def test_inspect_checkpoint_summary_fields(tmp_path):
    model = build_model(ModelConfig(model_name="MaxPoolMIL", in_dim=3, embed_dim=4))
    save_checkpoint(model, tmp_path / "checkpoint")
    summary = cmd_inspect(str(tmp_path / "checkpoint"))
    assert summary["in_shape"] == [3]
    assert summary["instance_scores"] == "instance_logits"
    assert summary["config"]["model_name"] == "MaxPoolMIL"


def test_inspect_unknown_path(tmp_path):
    result = runner.invoke(app, ["inspect", str(tmp_path)])
    assert result.exit_code == 2
