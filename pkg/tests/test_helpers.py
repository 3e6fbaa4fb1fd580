import pytest

from msr.utils.helpers import DEFAULT_SEED, format_metric, resolve_seed, round_half_away
from msr.utils.seeding import derive_seed, rng_for


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("MSR_SEED", "7")
    assert resolve_seed(1, 2) == 1
    assert resolve_seed(None, 2) == 2
    assert resolve_seed(None, None) == 7
    monkeypatch.delenv("MSR_SEED")
    assert resolve_seed(None, None) == DEFAULT_SEED


def test_bad_env_seed(monkeypatch):
    monkeypatch.setenv("MSR_SEED", "abc")
    with pytest.raises(ValueError):
        resolve_seed(None, None)


@pytest.mark.parametrize("value, expected", [
    (0.5488, 0.55),
    (0.125, 0.13),
    (-0.125, -0.13),
    (2.675, 2.68),
])
def test_round_half_away(value, expected):
    assert round_half_away(value, 2) == expected


def test_format_metric():
    assert format_metric(None) == "n/a"
    assert format_metric(0.9) == "0.900"
    assert format_metric(0.8885) == "0.889"


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(42, "visual", 3) == derive_seed(42, "visual", 3)
    assert derive_seed(42, "visual", 3) != derive_seed(42, "visual", 4)
    assert derive_seed(42, "visual", 3) != derive_seed(43, "visual", 3)
    assert rng_for(1, "scene", 0).random() == rng_for(1, "scene", 0).random()
