from dataclasses import replace
from typing import List, Optional

import typer
from rich.table import Table

from msr.reasoning.dataset import generate, load
from msr.reasoning.evaluation import MARKDOWN_COLUMNS, STEPS
from msr.utils.errors import MsrError
from msr.utils.helpers import console, exit_with_error, format_metric, resolve_seed, table_print
from msr.utils.logger import msr_logger
from msr.utils.MsrConfig import load_run_config
from msr.utils.PipelineRunner import PipelineRunner, write_outputs

app = typer.Typer()


@app.command(name="r", hidden=True)
@app.command(name="run")
def run(
    dataset: Optional[str] = typer.Option(
        None, "--dataset", help="JSON-файл датасета (иначе dataset.path из конфига или генерация на лету)"),
    config: Optional[str] = typer.Option(None, "--config", help="JSON-файл конфигурации запуска"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Мастер-сид (иначе run.seed, MSR_SEED, 42)"),
    out: Optional[str] = typer.Option(None, "--out", help="Каталог для trace.jsonl и отчетов"),
    n: Optional[int] = typer.Option(None, "--n", help="Записей на модальность при генерации на лету"),
    modality: Optional[List[str]] = typer.Option(None, "--modality", help="Модальность (можно повторять)"),
    workers: Optional[int] = typer.Option(None, "--workers", help="Потоков для чистой фазы конвейера"),
):
    """
    Прогоняет семь шагов конвейера по каждой записи и пишет trace.jsonl,
    report_<modality>.csv и report.md.
    """
    try:
        run_config = load_run_config(config).with_overrides(workers=workers, modalities=modality, out_dir=out)
        master_seed = resolve_seed(seed, run_config.run.seed)
        path = dataset if dataset is not None else run_config.dataset.path
        if path is not None:
            if n is not None:
                table_print("WARNING", f"--n игнорируется: датасет читается из {path}")
            data = load(path)
        else:
            generator = run_config.dataset.generator
            data = generate(replace(generator, seed=master_seed,
                                    n_per_modality=generator.n_per_modality if n is None else n))
        runner = PipelineRunner(run_config, data, master_seed, show_progress=True)
        result = runner.run()
        written = write_outputs(result, run_config.run.out_dir)
    except (MsrError, OSError, ValueError) as exc:
        exit_with_error(exc)

    tables = result.tables()
    for name, per_step in tables.items():
        table = Table(title=f"{name.capitalize()} performance metrics")
        table.add_column("Step")
        for column in MARKDOWN_COLUMNS:
            table.add_column(column, justify="right")
        for step in STEPS:
            table.add_row(f"Step {step}", *(format_metric(v) for v in per_step[step].values()))
        console.print(table)
    for run_result in result.runs:
        table_print("INFO", f"{run_result.modality.value}: discriminator held-out accuracy "
                            f"{run_result.alignment['baseline_heldout_accuracy']:.3f} (frozen encoder) -> "
                            f"{run_result.alignment['adapted_heldout_accuracy']:.3f} (adapted)")
    msr_logger.info(f"run: seed={master_seed}, файлы {[str(p) for p in written]}")
    table_print("SUCCESS", f"Записано: {', '.join(str(p) for p in written)}")
