"""
Оценка: матрица ошибок по шагам конвейера, пять метрик и отчеты CSV/Markdown.

Шаги 1..7 соответствуют модулям: фильтр доверия, выбор top-k, релевантность,
поиск в LTM, выбор решения, уточненная политика, итоговая команда.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, fields
from typing import Mapping, Optional

from msr.utils.errors import EmptyConfusionError, IncompleteRunError, ReportParseError
from msr.utils.helpers import format_metric

STEPS = tuple(range(1, 8))
METRIC_NAMES = ("precision", "recall", "f1", "specificity", "accuracy")
CSV_HEADER = ("step",) + METRIC_NAMES
MARKDOWN_COLUMNS = ("Precision", "Recall", "F1-score", "Specificity", "Accuracy")
UNDEFINED = "n/a"

STEP_TITLES = {
    1: "trust filter",
    2: "top-k selection",
    3: "relevance",
    4: "LTM retrieval",
    5: "decision",
    6: "refined policy",
    7: "action command",
}


@dataclass
class StepConfusion:
    step: int
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def merge(self, other: "StepConfusion") -> "StepConfusion":
        if other.step != self.step:
            raise ValueError(f"cannot merge step {other.step} into step {self.step}")
        return StepConfusion(self.step, self.tp + other.tp, self.tn + other.tn,
                             self.fp + other.fp, self.fn + other.fn)

    def to_json(self) -> dict:
        return {"step": self.step, "tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class Metrics:
    """None: метрика не определена (нулевой знаменатель)."""
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    specificity: Optional[float]
    accuracy: Optional[float]

    def values(self) -> tuple[Optional[float], ...]:
        return tuple(getattr(self, f.name) for f in fields(self))


def record_outcome(conf: StepConfusion, predicted: bool, actual: bool) -> None:
    if predicted and actual:
        conf.tp += 1
    elif predicted:
        conf.fp += 1
    elif actual:
        conf.fn += 1
    else:
        conf.tn += 1


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def metrics(conf: StepConfusion) -> Metrics:
    if conf.total == 0:
        raise EmptyConfusionError(f"step {conf.step} has no scored records")
    precision = _ratio(conf.tp, conf.tp + conf.fp)
    recall = _ratio(conf.tp, conf.tp + conf.fn)
    f1 = None
    # P + R = 0 ровно тогда, когда TP = 0
    if precision is not None and recall is not None and conf.tp > 0:
        f1 = 2 * conf.tp / (2 * conf.tp + conf.fp + conf.fn)
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        specificity=_ratio(conf.tn, conf.tn + conf.fp),
        accuracy=(conf.tp + conf.tn) / conf.total,
    )


def _complete(per_step: Mapping[int, Metrics], modality: str) -> None:
    missing = [step for step in STEPS if step not in per_step]
    if missing:
        raise IncompleteRunError(f"{modality}: missing step(s) {', '.join(map(str, missing))}")


def render_csv(per_step: Mapping[int, Metrics], modality: str = "") -> str:
    _complete(per_step, modality)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for step in STEPS:
        writer.writerow([step, *(format_metric(v) for v in per_step[step].values())])
    return buffer.getvalue()


def _parse_cell(cell: str, line: int, column: str) -> Optional[float]:
    cell = cell.strip()
    if cell == UNDEFINED:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise ReportParseError(f"column '{column}': not a number: {cell!r}", line=line) from None
    if not 0.0 <= value <= 1.0:
        raise ReportParseError(f"column '{column}': {value} outside [0, 1]", line=line)
    return value


def parse_csv(text: str) -> dict[int, Metrics]:
    """Обратный разбор render_csv. Ошибки несут номер строки (с 1)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ReportParseError("empty report", line=1)
    if tuple(c.strip() for c in rows[0]) != CSV_HEADER:
        raise ReportParseError(f"expected header {','.join(CSV_HEADER)}", line=1)
    per_step: dict[int, Metrics] = {}
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ReportParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", line=line)
        try:
            step = int(row[0])
        except ValueError:
            raise ReportParseError(f"bad step id {row[0]!r}", line=line) from None
        if step not in STEPS:
            raise ReportParseError(f"step {step} outside 1..7", line=line)
        if step in per_step:
            raise ReportParseError(f"duplicate step {step}", line=line)
        values = [_parse_cell(cell, line, name) for cell, name in zip(row[1:], METRIC_NAMES)]
        per_step[step] = Metrics(*values)
    return per_step


def _markdown_cell(value: Optional[float], band: Optional[float]) -> tuple[str, bool]:
    text = format_metric(value)
    flagged = band is not None and value is not None and float(text) < band
    return (f"{text}*" if flagged else text), flagged


def render_markdown(tables: Mapping[str, Mapping[int, Metrics]], band: Optional[float] = None) -> tuple[str, int]:
    """
    Одна таблица на модальность, строки Step 1..Step 7.
    Возвращает (markdown, число ячеек ниже band).
    """
    lines: list[str] = []
    flagged_total = 0
    for modality, per_step in tables.items():
        _complete(per_step, modality)
        lines.append(f"## {modality.capitalize()} performance metrics")
        lines.append("")
        lines.append("| Step | " + " | ".join(MARKDOWN_COLUMNS) + " |")
        lines.append("|" + "---|" * (len(MARKDOWN_COLUMNS) + 1))
        for step in STEPS:
            cells = []
            for value in per_step[step].values():
                text, flagged = _markdown_cell(value, band)
                flagged_total += flagged
                cells.append(text)
            lines.append(f"| Step {step} | " + " | ".join(cells) + " |")
        lines.append("")
    if band is not None:
        lines.append(f"Cells below {band:g} are marked with `*`: {flagged_total}.")
        lines.append("")
    return "\n".join(lines), flagged_total
