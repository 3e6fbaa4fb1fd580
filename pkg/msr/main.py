import os
import pathlib
import platform
from typing import Optional

import typer
from dotenv import load_dotenv

from msr.gen import app as gen_app
from msr.report import app as report_app
from msr.run import app as run_app
from msr.settings import app as settings_app
from msr.version import VERSION_TEXT, app as version_app

BASE_DIR = pathlib.Path(__file__).parent
env_path = BASE_DIR / ".env"
APP_NAME = "msr"

if not env_path.exists():
    # Если не нашли .env в BASE_DIR, ищем в профиле пользователя
    if platform.system() == "Windows":
        appdata = os.getenv("APPDATA")
        user_env_path = pathlib.Path(appdata) / APP_NAME / ".env" if appdata else None
    else:
        # Linux и macOS
        home = pathlib.Path.home()
        user_env_path = home / ".config" / APP_NAME / ".env"

    if user_env_path:
        env_path = user_env_path

if env_path.exists():
    load_dotenv(dotenv_path=env_path)


app = typer.Typer(help="Детерминированный движок многосценарного рассуждения: gen → run → report.")


def _version_callback(value: bool):
    if value:
        print(VERSION_TEXT)
        raise typer.Exit()


@app.callback()
def main(
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-V",
        callback=_version_callback,
        is_eager=True,
        help="Показать версию CLI",
    )
):
    pass


app.add_typer(version_app)
app.add_typer(gen_app)
app.add_typer(run_app)
app.add_typer(report_app)
app.add_typer(settings_app, name="settings")
app.add_typer(settings_app, name="cfg", hidden=True)


if __name__ == "__main__":
    app()
