import json
from dataclasses import replace

import numpy as np
import pytest

import msr.utils.PipelineRunner as pipeline
from msr.reasoning.dataset import Dataset, GeneratorConfig, Modality, generate
from msr.reasoning.evaluation import STEPS, metrics, parse_csv
from msr.utils.MsrConfig import RunConfig, load_run_config
from msr.utils.PipelineRunner import (
    MARKDOWN_FILE,
    TRACE_FILE,
    PipelineRunner,
    csv_name,
    label_outcome,
    polarity,
    write_outputs,
)
from msr.utils.errors import ConfigError

SEED = 42


@pytest.fixture(scope="module")
def dataset():
    return generate(GeneratorConfig(n_per_modality=60, seed=SEED))


def small_config(**run) -> RunConfig:
    return RunConfig.from_dict({"sim2real": {"alignment": {"steps": 50}}, "run": run})


def test_polarity():
    assert [polarity(c) for c in range(4)] == [False, True, False, True]


@pytest.mark.parametrize("predicted, actual, expected", [
    (1, 1, (True, True)),
    (2, 2, (False, False)),
    (0, 1, (False, True)),
    (3, 0, (True, False)),
    (3, 1, (False, True)),
    (0, 2, (True, False)),
])
def test_label_outcome_scores_exact_match(predicted, actual, expected):
    assert label_outcome(predicted, actual) == expected


def test_confusion_totals(dataset):
    result = PipelineRunner(small_config(), dataset, SEED).run()
    assert [run.modality for run in result.runs] == [Modality.VISUAL, Modality.AUDITORY, Modality.TACTILE]
    for run in result.runs:
        survivors = run.summary["survivors"]
        assert run.confusions[1].total == 60
        assert 0 < survivors <= 60
        for step in STEPS[1:]:
            assert run.confusions[step].total == survivors
        assert len(run.episodes) == survivors


def test_trace_episode_fields(dataset):
    run = PipelineRunner(small_config(modalities=["visual"]), dataset, SEED).run().runs[0]
    episode = run.episodes[0]
    assert episode["type"] == "episode"
    assert episode["command"]["record_id"] == episode["record_id"]
    assert episode["feedback"]["matched"] == (episode["feedback"]["outcome"] == 1.0)
    assert len(episode["evidence"]) == 4
    assert sorted(episode["subtasks"]) == ["move_down", "move_left", "move_right", "move_up"]
    assert 0.0 <= run.alignment["baseline_heldout_accuracy"] <= 1.0


def test_outputs_do_not_depend_on_worker_count(dataset, tmp_path):
    contents = []
    for workers in (1, 4):
        out = tmp_path / f"w{workers}"
        config = small_config().with_overrides(workers=workers, out_dir=str(out))
        paths = write_outputs(PipelineRunner(config, dataset, SEED).run(), out)
        contents.append({p.name: p.read_bytes() for p in paths})
    assert contents[0] == contents[1]
    assert set(contents[0]) == {TRACE_FILE, MARKDOWN_FILE, "report_visual.csv", "report_auditory.csv",
                                "report_tactile.csv"}


def test_written_reports_parse_back(dataset, tmp_path):
    result = PipelineRunner(small_config(modalities=["tactile"]), dataset, SEED).run()
    write_outputs(result, tmp_path)
    parsed = parse_csv((tmp_path / csv_name(Modality.TACTILE)).read_text(encoding="utf-8"))
    assert sorted(parsed) == list(STEPS)
    lines = (tmp_path / TRACE_FILE).read_text(encoding="utf-8").splitlines()
    kinds = [json.loads(line)["type"] for line in lines]
    assert kinds[0] == "meta"
    assert kinds[1] == "alignment"
    assert kinds[-1] == "summary"
    meta = json.loads(lines[0])
    assert "workers" not in meta["config"]["run"]


def test_template_size_must_match_actions(dataset):
    config = RunConfig.from_dict({"decision": {"templates": {"respond": [
        {"id": "a", "weights": [1, 0, 0, 0]},
        {"id": "b", "weights": [0, 1, 0, 0]},
    ]}}})
    with pytest.raises(ConfigError):
        PipelineRunner(config, dataset, SEED)


def test_missing_modality_is_rejected():
    partial = generate(GeneratorConfig(n_per_modality=10, seed=1, modalities=("visual",)))
    with pytest.raises(ConfigError) as info:
        PipelineRunner(load_run_config(), partial, SEED)
    assert info.value.field == "run.modalities"


@pytest.fixture(scope="module")
def full_run():
    dataset = generate(GeneratorConfig(n_per_modality=10_000, seed=SEED))
    return PipelineRunner(load_run_config(), dataset, SEED).run()


@pytest.mark.slow
def test_default_run_stays_in_metric_band(full_run):
    for name, table in full_run.tables().items():
        for step, values in table.items():
            for value in values.values():
                assert value is not None
                assert 0.85 <= value <= 0.97, (name, step, values)


@pytest.mark.slow
def test_modality_ordering(full_run):
    tables = full_run.tables()
    mean = {name: np.mean([table[step].accuracy for step in STEPS]) for name, table in tables.items()}
    assert mean["visual"] - mean["auditory"] >= 0.005
    assert mean["auditory"] - mean["tactile"] >= 0.005


@pytest.mark.slow
def test_action_accuracy_tracks_label_noise():
    dataset = generate(GeneratorConfig(n_per_modality=10_000, seed=SEED))
    config = RunConfig.from_dict({"ingest": {"tau": 0.0}, "scenario": {"k": 32}})
    result = PipelineRunner(config, dataset, SEED).run()
    for run in result.runs:
        p = dataset.config.label_noise[run.modality.value]
        accuracy = run.metrics_table()[7].accuracy
        assert 1 - p - 0.01 <= accuracy <= 1 - p + 0.01


def test_retrieval_score_follows_memory_labels():
    config = small_config(modalities=["visual"])
    visual = generate(GeneratorConfig(n_per_modality=300, seed=SEED, modalities=("visual",)))
    swapped = {0: 3, 1: 2, 2: 1, 3: 0}
    permuted = Dataset(records=tuple(replace(r, mem_label=swapped[r.mem_label]) for r in visual.records),
                       meta=visual.meta)

    true_run = PipelineRunner(config, visual, SEED).run().runs[0]
    permuted_run = PipelineRunner(config, permuted, SEED).run().runs[0]
    assert metrics(true_run.confusions[4]).accuracy >= 0.7
    assert metrics(permuted_run.confusions[4]).accuracy <= 0.2
    assert [e["retrieved_label"] for e in true_run.episodes] == \
        [e["retrieved_label"] for e in permuted_run.episodes]


def test_features_go_through_fusion(dataset, monkeypatch):
    calls = []
    original = pipeline.fuse

    def recording_fuse(per_modality):
        per_modality = list(per_modality)
        calls.append([tag for tag, _ in per_modality])
        return original(per_modality)

    monkeypatch.setattr(pipeline, "fuse", recording_fuse)
    config = RunConfig.from_dict({"sim2real": {"alignment": {"steps": 50}}, "memory": {"prime_records": 20},
                                  "run": {"modalities": ["auditory"]}})
    run = PipelineRunner(config, dataset, SEED).run().runs[0]
    assert len(calls) == run.summary["survivors"] + 20
    assert all(tags == [Modality.AUDITORY] for tags in calls)


def test_alignment_line_reports_train_accuracy(dataset):
    alignment = PipelineRunner(small_config(modalities=["visual"]), dataset, SEED).run().runs[0].alignment
    for key in ("baseline_train_accuracy", "adapted_train_accuracy"):
        assert 0.0 <= alignment[key] <= 1.0
