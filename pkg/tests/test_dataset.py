import json

import pytest

from msr.reasoning.dataset import (
    SCHEMA_VERSION,
    Dataset,
    calibration_records,
    GeneratorConfig,
    Modality,
    draw_scene,
    dumps,
    flip_fractions,
    generate,
    load,
    loads,
    nearest_cluster_labels,
    paired_class,
    save,
)
from msr.utils.errors import ConfigError, DatasetParseError

NO_NOISE = {"visual": 0.0, "auditory": 0.0, "tactile": 0.0}


def small(**overrides) -> GeneratorConfig:
    values = {"n_per_modality": 50, "seed": 7}
    values.update(overrides)
    return GeneratorConfig(**values)


def test_generate_counts_and_ids():
    dataset = generate(small())
    assert len(dataset.records) == 150
    assert dataset.counts() == {"visual": 50, "auditory": 50, "tactile": 50}
    assert [r.id for r in dataset.records] == list(range(150))
    assert dataset.meta["schema_version"] == SCHEMA_VERSION
    assert all(len(r.features) == 8 for r in dataset.records)


def test_generate_is_deterministic():
    assert dumps(generate(small())) == dumps(generate(small()))
    assert dumps(generate(small())) != dumps(generate(small(seed=8)))


def test_trust_stays_inside_unit_interval():
    dataset = generate(small(n_per_modality=300))
    assert all(0.0 < r.trust < 1.0 for r in dataset.records)


def test_nearest_cluster_oracle_matches_labels_without_noise():
    config = small(n_per_modality=200, label_noise=NO_NOISE)
    dataset = generate(config)
    for record in dataset.records:
        assert nearest_cluster_labels(config, record) == (record.valid, record.relevant, record.action)
        assert record.mem_label == record.action


def test_modalities_share_latent_scene():
    config = small(label_noise=NO_NOISE)
    dataset = generate(config)
    visual = dataset.for_modality(Modality.VISUAL)
    tactile = dataset.for_modality(Modality.TACTILE)
    for a, b in zip(visual, tactile):
        assert (a.valid, a.relevant, a.action, a.trust) == (b.valid, b.relevant, b.action, b.trust)
        assert a.features != b.features


def test_flip_fraction_follows_noise_rate():
    dataset = generate(GeneratorConfig(n_per_modality=4000, seed=3))
    for modality, rate in (("visual", 0.09), ("auditory", 0.11), ("tactile", 0.12)):
        fractions = flip_fractions(dataset, Modality(modality))
        for flag in ("valid", "relevant", "action", "mem_label"):
            assert fractions[flag] == pytest.approx(rate, abs=0.02)


def test_label_flips_are_nested_across_modalities():
    dataset = generate(small(n_per_modality=1000))
    config = dataset.config
    visual = dataset.for_modality(Modality.VISUAL)
    tactile = dataset.for_modality(Modality.TACTILE)
    for position, (v, t) in enumerate(zip(visual, tactile)):
        scene = draw_scene(config, position)
        if v.action != scene.action:
            assert t.action == v.action == paired_class(scene.action)


def test_paired_class_swaps_axis_partners():
    assert [paired_class(c) for c in range(4)] == [1, 0, 3, 2]


@pytest.mark.parametrize("field, value", [
    ("n_per_modality", 0),
    ("n_actions", 3),
    ("feature_dim", 4),
    ("separation", 0.0),
])
def test_invalid_generator_config(field, value):
    with pytest.raises(ConfigError) as info:
        small(**{field: value}).validate()
    assert info.value.field == field


def test_noise_rate_must_be_below_half():
    with pytest.raises(ConfigError):
        small(label_noise={"visual": 0.5, "auditory": 0.1, "tactile": 0.1}).validate()


def test_save_and_load(tmp_path):
    dataset = generate(small())
    path = tmp_path / "nested" / "data.json"
    save(dataset, path)
    loaded = load(path)
    assert isinstance(loaded, Dataset)
    assert loaded.records == dataset.records
    assert dumps(loaded) == path.read_text(encoding="utf-8")


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load(tmp_path / "absent.json")


def _payload():
    return json.loads(dumps(generate(small(n_per_modality=3))))


def test_schema_mismatch_is_rejected():
    payload = _payload()
    payload["meta"]["schema_version"] = SCHEMA_VERSION + 1
    with pytest.raises(DatasetParseError, match="schema"):
        loads(json.dumps(payload))


def test_missing_field_names_record_and_field():
    payload = _payload()
    del payload["records"][4]["trust"]
    with pytest.raises(DatasetParseError) as info:
        loads(json.dumps(payload))
    assert info.value.record_index == 4
    assert info.value.field == "trust"


def test_out_of_range_trust_is_rejected():
    payload = _payload()
    payload["records"][0]["trust"] = 1.5
    with pytest.raises(DatasetParseError) as info:
        loads(json.dumps(payload))
    assert info.value.field == "trust"


def test_duplicate_id_is_rejected():
    payload = _payload()
    payload["records"][2]["id"] = payload["records"][1]["id"]
    with pytest.raises(DatasetParseError):
        loads(json.dumps(payload))


def test_malformed_json_is_a_parse_error():
    with pytest.raises(DatasetParseError):
        loads("{not json")


@pytest.mark.parametrize("counts", [[2, 2, 2], "visual", {"visual": "2"}, {"visual": True}, {"visual": -1}])
def test_malformed_meta_counts_are_a_parse_error(counts):
    payload = _payload()
    payload["meta"]["counts"] = counts
    with pytest.raises(DatasetParseError) as info:
        loads(json.dumps(payload))
    assert info.value.field == "meta.counts"


def test_full_size_file_loads_and_is_revalidated(tmp_path):
    dataset = generate(GeneratorConfig(n_per_modality=10_000, seed=3, modalities=("visual",)))
    path = tmp_path / "data.json"
    save(dataset, path)
    loaded = load(path)
    assert loaded.counts() == {"visual": 10_000}
    assert loaded.records == dataset.records

    payload = json.loads(path.read_text(encoding="utf-8"))
    payload["records"][9_999]["mem_label"] = 4
    with pytest.raises(DatasetParseError) as info:
        loads(json.dumps(payload))
    assert info.value.record_index == 9_999
    assert info.value.field == "mem_label"


def test_calibration_records_never_repeat_scored_records():
    config = small()
    scored = {r.features for r in generate(config).for_modality(Modality.VISUAL)}
    calibration = calibration_records(config, Modality.VISUAL, 50)
    assert len(calibration) == 50
    assert all(r.modality is Modality.VISUAL for r in calibration)
    assert not scored & {r.features for r in calibration}
    assert calibration == calibration_records(config, "visual", 50)
    assert {r.mem_label for r in calibration} <= set(range(config.n_actions))


def test_calibration_size_is_validated():
    with pytest.raises(ConfigError) as info:
        calibration_records(small(), Modality.TACTILE, 0)
    assert info.value.field == "memory.prime_records"
