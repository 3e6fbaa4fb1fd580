from __future__ import annotations

import json
from typing import Optional

import typer

from msr.utils.errors import MsrError
from msr.utils.helpers import console, exit_with_error, resolve_seed, table_print
from msr.utils.MsrConfig import MsrConfig, load_run_config

app = typer.Typer()


@app.command(name="show")
def show_settings(
    config: Optional[str] = typer.Option(None, "--config", help="JSON-файл конфигурации запуска"),
):
    """Показать действующую конфигурацию: умолчания, слитые с файлом --config."""
    try:
        run_config = load_run_config(config)
        seed = resolve_seed(None, run_config.run.seed)
    except (MsrError, OSError, ValueError) as exc:
        exit_with_error(exc)
    console.print_json(json.dumps(run_config.raw, ensure_ascii=False))
    table_print("INFO", f"seed: {seed}")


@app.command(name="init")
def init_settings(
    path: str = typer.Argument("msr.json", help="Куда записать конфигурацию"),
    force: bool = typer.Option(False, "--force", help="Перезаписать без вопроса"),
):
    """Записать файл конфигурации со значениями по умолчанию."""
    try:
        created = MsrConfig(path).create(force=force)
    except OSError as exc:
        exit_with_error(exc)
    if not created:
        raise typer.Exit(code=1)
