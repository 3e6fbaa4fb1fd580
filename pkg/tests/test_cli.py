import json

import pytest
from typer.testing import CliRunner

from msr.main import app
from msr.reasoning.dataset import load
from msr.version import VERSION_TEXT

runner = CliRunner()


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "msr.json"
    path.write_text(json.dumps({"sim2real": {"alignment": {"steps": 50}}}), encoding="utf-8")
    return str(path)


def test_version():
    for args in (["version"], ["v"], ["--version"]):
        result = runner.invoke(app, args)
        assert result.exit_code == 0
        assert VERSION_TEXT in result.output


def test_gen_is_byte_identical(tmp_path):
    outputs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        result = runner.invoke(app, ["gen", "--out", str(path), "--n", "30", "--seed", "9"])
        assert result.exit_code == 0, result.output
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    dataset = load(tmp_path / "a.json")
    assert dataset.counts() == {"visual": 30, "auditory": 30, "tactile": 30}
    assert dataset.meta["seed"] == 9


def test_gen_uses_env_seed(tmp_path, monkeypatch):
    monkeypatch.setenv("MSR_SEED", "123")
    path = tmp_path / "data.json"
    assert runner.invoke(app, ["gen", "--out", str(path), "--n", "5"]).exit_code == 0
    assert load(path).meta["seed"] == 123


def test_gen_rejects_bad_count(tmp_path):
    result = runner.invoke(app, ["gen", "--out", str(tmp_path / "d.json"), "--n", "0"])
    assert result.exit_code == 1
    assert "n_per_modality" in result.output


def test_run_and_report(tmp_path, config_file):
    data = tmp_path / "data.json"
    assert runner.invoke(app, ["gen", "--out", str(data), "--n", "40", "--seed", "5"]).exit_code == 0

    produced = []
    for workers in ("1", "4"):
        out = tmp_path / f"out{workers}"
        result = runner.invoke(app, ["run", "--dataset", str(data), "--config", config_file, "--seed", "5",
                                     "--out", str(out), "--workers", workers])
        assert result.exit_code == 0, result.output
        produced.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert produced[0] == produced[1]

    out = tmp_path / "out1"
    before = (out / "report.md").read_text(encoding="utf-8")
    result = runner.invoke(app, ["report", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "report.md").read_text(encoding="utf-8") == before

    result = runner.invoke(app, ["report", "--out", str(out), "--band", "1.01"])
    assert result.exit_code == 0
    assert "*" in (out / "report.md").read_text(encoding="utf-8")


def test_run_single_modality_generated_on_the_fly(tmp_path, config_file):
    out = tmp_path / "out"
    result = runner.invoke(app, ["run", "--config", config_file, "--n", "30", "--modality", "auditory",
                                 "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert sorted(p.name for p in out.iterdir()) == ["report.md", "report_auditory.csv", "trace.jsonl"]


def test_run_missing_dataset(tmp_path):
    result = runner.invoke(app, ["run", "--dataset", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
    assert result.exit_code == 1


def test_run_bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"scenario": {"kk": 1}}), encoding="utf-8")
    result = runner.invoke(app, ["run", "--config", str(path), "--n", "10", "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "scenario.kk" in result.output


def test_report_errors(tmp_path):
    assert runner.invoke(app, ["report", "--out", str(tmp_path)]).exit_code == 1
    (tmp_path / "report_visual.csv").write_text("step,precision\n", encoding="utf-8")
    result = runner.invoke(app, ["report", "--out", str(tmp_path)])
    assert result.exit_code == 1
    assert "line 1" in result.output


def test_settings_init_and_show(tmp_path):
    path = tmp_path / "msr.json"
    result = runner.invoke(app, ["settings", "init", str(path)])
    assert result.exit_code == 0, result.output
    assert json.loads(path.read_text(encoding="utf-8"))["scenario"]["k"] == 4

    result = runner.invoke(app, ["settings", "init", str(path)], input="n\n")
    assert result.exit_code == 1

    result = runner.invoke(app, ["cfg", "show", "--config", str(path)])
    assert result.exit_code == 0
    assert "relevance_threshold" in result.output
