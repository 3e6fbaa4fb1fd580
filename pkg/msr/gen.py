from dataclasses import replace
from typing import Optional

import typer
from rich.table import Table

from msr.reasoning.dataset import FLIP_FLAGS, flip_fractions, generate, iter_modalities, save
from msr.utils.errors import MsrError
from msr.utils.helpers import console, exit_with_error, resolve_seed, table_print
from msr.utils.logger import msr_logger
from msr.utils.MsrConfig import load_run_config

app = typer.Typer()


@app.command(name="g", hidden=True)
@app.command(name="gen")
def gen(
    out: str = typer.Option("data.json", "--out", help="Путь к JSON-файлу датасета"),
    n: Optional[int] = typer.Option(None, "--n", help="Записей на модальность"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Мастер-сид (иначе run.seed, MSR_SEED, 42)"),
    config: Optional[str] = typer.Option(None, "--config", help="JSON-файл конфигурации запуска"),
):
    """
    Генерирует синтетический датасет: одна латентная сцена на индекс,
    наблюдения visual, auditory и tactile с собственным шумом меток.
    """
    try:
        run_config = load_run_config(config)
        master_seed = resolve_seed(seed, run_config.run.seed)
        generator = run_config.dataset.generator
        generator = replace(generator, seed=master_seed,
                            n_per_modality=generator.n_per_modality if n is None else n)
        dataset = generate(generator)
        save(dataset, out)
    except (MsrError, OSError, ValueError) as exc:
        exit_with_error(exc)

    table = Table(title=f"Датасет {out} (seed={master_seed})")
    table.add_column("modality")
    table.add_column("records", justify="right")
    for flag in FLIP_FLAGS:
        table.add_column(f"flipped {flag}", justify="right")
    counts = dataset.counts()
    for modality in iter_modalities(dataset):
        fractions = flip_fractions(dataset, modality)
        table.add_row(modality.value, str(counts[modality.value]),
                      *(f"{fractions[flag]:.3f}" for flag in FLIP_FLAGS))
    console.print(table)
    msr_logger.info(f"gen: {out}, {len(dataset.records)} записей")
    table_print("SUCCESS", f"Записано {len(dataset.records)} записей в {out}")
