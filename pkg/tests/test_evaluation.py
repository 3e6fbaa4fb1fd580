import pytest

from msr.reasoning.evaluation import (
    STEPS,
    Metrics,
    StepConfusion,
    metrics,
    parse_csv,
    record_outcome,
    render_csv,
    render_markdown,
)
from msr.utils.errors import EmptyConfusionError, IncompleteRunError, ReportParseError


def full_table(value: float = 0.9) -> dict[int, Metrics]:
    return {step: Metrics(value, value, value, value, value) for step in STEPS}


def test_record_outcome_counts_every_cell():
    conf = StepConfusion(1)
    for predicted, actual in [(True, True), (True, False), (False, True), (False, False), (True, True)]:
        record_outcome(conf, predicted, actual)
    assert (conf.tp, conf.fp, conf.fn, conf.tn) == (2, 1, 1, 1)
    assert conf.total == 5


def test_metrics_from_counts():
    m = metrics(StepConfusion(2, tp=90, tn=90, fp=10, fn=10))
    assert m.precision == pytest.approx(0.9)
    assert m.recall == pytest.approx(0.9)
    assert m.f1 == pytest.approx(0.9)
    assert m.specificity == pytest.approx(0.9)
    assert m.accuracy == pytest.approx(0.9)


def test_undefined_metrics_are_none():
    m = metrics(StepConfusion(3, tn=5, fn=0))
    assert m.precision is None
    assert m.recall is None
    assert m.f1 is None
    assert m.specificity == 1.0
    assert m.accuracy == 1.0


def test_f1_undefined_without_true_positives():
    m = metrics(StepConfusion(3, tn=5, fp=1, fn=2))
    assert m.precision == 0.0
    assert m.recall == 0.0
    assert m.f1 is None


def test_empty_confusion():
    with pytest.raises(EmptyConfusionError):
        metrics(StepConfusion(4))


def test_merge():
    merged = StepConfusion(5, tp=1, fn=2).merge(StepConfusion(5, tn=3, fp=4))
    assert merged.to_json() == {"step": 5, "tp": 1, "tn": 3, "fp": 4, "fn": 2}
    with pytest.raises(ValueError):
        StepConfusion(5).merge(StepConfusion(6))


def test_render_csv_layout():
    table = full_table()
    table[7] = Metrics(None, 0.5, None, 0.12345, 1.0)
    lines = render_csv(table, "visual").splitlines()
    assert lines[0] == "step,precision,recall,f1,specificity,accuracy"
    assert lines[1] == "1,0.900,0.900,0.900,0.900,0.900"
    assert lines[7] == "7,n/a,0.500,n/a,0.123,1.000"


def test_render_csv_needs_all_steps():
    table = full_table()
    del table[6]
    with pytest.raises(IncompleteRunError, match="6"):
        render_csv(table, "tactile")


def test_parse_csv_reads_rendered_report():
    table = full_table()
    table[2] = Metrics(None, 0.25, None, 0.5, 0.75)
    parsed = parse_csv(render_csv(table))
    assert parsed[1] == Metrics(0.9, 0.9, 0.9, 0.9, 0.9)
    assert parsed[2] == Metrics(None, 0.25, None, 0.5, 0.75)


@pytest.mark.parametrize("text, line", [
    ("", 1),
    ("step,precision\n", 1),
    ("step,precision,recall,f1,specificity,accuracy\n1,0.1,0.2\n", 2),
    ("step,precision,recall,f1,specificity,accuracy\nx,0.1,0.2,0.3,0.4,0.5\n", 2),
    ("step,precision,recall,f1,specificity,accuracy\n9,0.1,0.2,0.3,0.4,0.5\n", 2),
    ("step,precision,recall,f1,specificity,accuracy\n1,0.1,0.2,0.3,0.4,0.5\n1,0.1,0.2,0.3,0.4,0.5\n", 3),
    ("step,precision,recall,f1,specificity,accuracy\n1,0.1,abc,0.3,0.4,0.5\n", 2),
    ("step,precision,recall,f1,specificity,accuracy\n1,0.1,1.2,0.3,0.4,0.5\n", 2),
])
def test_parse_csv_errors_carry_line(text, line):
    with pytest.raises(ReportParseError) as info:
        parse_csv(text)
    assert info.value.line == line


def test_render_markdown_tables():
    markdown, flagged = render_markdown({"visual": full_table(), "auditory": full_table(0.8)})
    lines = markdown.splitlines()
    assert lines[0] == "## Visual performance metrics"
    assert lines[2] == "| Step | Precision | Recall | F1-score | Specificity | Accuracy |"
    assert lines[4] == "| Step 1 | 0.900 | 0.900 | 0.900 | 0.900 | 0.900 |"
    assert "## Auditory performance metrics" in lines
    assert flagged == 0


def test_render_markdown_flags_cells_below_band():
    table = full_table()
    table[3] = Metrics(0.8, 0.9, None, 0.9, 0.9)
    markdown, flagged = render_markdown({"tactile": table}, band=0.85)
    assert flagged == 1
    assert "| Step 3 | 0.800* | 0.900 | n/a | 0.900 | 0.900 |" in markdown
    assert "Cells below 0.85 are marked with `*`: 1." in markdown


def test_f1_is_harmonic_mean_of_precision_and_recall():
    for tp, fp, fn in [(3, 1, 7), (50, 5, 2), (1, 0, 0), (7, 9, 11)]:
        m = metrics(StepConfusion(5, tp=tp, tn=4, fp=fp, fn=fn))
        harmonic = 2 * m.precision * m.recall / (m.precision + m.recall)
        assert abs(m.f1 - harmonic) <= 1e-12
