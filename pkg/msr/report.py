from pathlib import Path
from typing import Optional

import typer

from msr.reasoning.dataset import MODALITY_ORDER
from msr.reasoning.evaluation import parse_csv, render_markdown
from msr.utils.errors import MsrError, ReportParseError
from msr.utils.helpers import console, exit_with_error, table_print
from msr.utils.logger import msr_logger
from msr.utils.PipelineRunner import MARKDOWN_FILE, csv_name

app = typer.Typer()


@app.command(name="rep", hidden=True)
@app.command(name="report")
def report(
    out: str = typer.Option("out", "--out", help="Каталог с report_<modality>.csv"),
    band: Optional[float] = typer.Option(None, "--band", help="Отметить ячейки ниже порога знаком *"),
):
    """Собирает report.md из CSV-отчетов прогона, по таблице на модальность."""
    directory = Path(out)
    tables = {}
    try:
        for modality in MODALITY_ORDER:
            path = directory / csv_name(modality)
            if not path.exists():
                continue
            try:
                tables[modality.value] = parse_csv(path.read_text(encoding="utf-8"))
            except ReportParseError as exc:
                exit_with_error(f"{path}: {exc}")
        if not tables:
            raise FileNotFoundError(f"В каталоге {directory} нет файлов report_<modality>.csv")
        markdown, flagged = render_markdown(tables, band)
        target = directory / MARKDOWN_FILE
        target.write_text(markdown, encoding="utf-8", newline="\n")
    except (MsrError, OSError, ValueError) as exc:
        exit_with_error(exc)

    console.print(markdown, markup=False, highlight=False)
    if band is not None and flagged:
        table_print("WARNING", f"Ячеек ниже {band:g}: {flagged}")
    msr_logger.info(f"report: {target}, band={band}, ниже порога {flagged}")
    table_print("SUCCESS", f"Записано: {target}")
