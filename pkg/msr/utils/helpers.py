import math
import os
from typing import Optional

import typer
from rich.console import Console
from termcolor import colored

from msr.utils.logger import msr_logger

console = Console()

DEFAULT_SEED = 42


def table_print(status: str, message: str):
    colors = {
        "INFO": "cyan",
        "WARNING": "yellow",
        "SUCCESS": "green",
        "ERROR": "red",
        "INPUT": "white"
    }
    status_width = 10  # можно увеличить если статус длинный
    status_str = f"{status:<{status_width}}"
    if status == "INPUT":
        return input(f"{colored(status_str, colors.get(status, 'white'))}  {message}")
    else:
        return print(
            f"{colored(status_str, colors.get(status, 'white'))}  {message}"
        )


def resolve_seed(flag_seed: Optional[int], config_seed: Optional[int] = None) -> int:
    """
    Порядок: флаг --seed, затем run.seed из конфига, затем MSR_SEED, затем 42.
    """
    if flag_seed is not None:
        return int(flag_seed)
    if config_seed is not None:
        return int(config_seed)
    env_seed = os.environ.get("MSR_SEED")
    if env_seed:
        try:
            return int(env_seed)
        except ValueError as exc:
            raise ValueError(f"MSR_SEED должен быть целым числом, получено: {env_seed!r}") from exc
    return DEFAULT_SEED


def round_half_away(value: float, digits: int = 2) -> float:
    """Округление «от нуля» по значению, умноженному на 10**digits."""
    scale = 10 ** digits
    scaled = value * scale
    # repr-шум вроде 54.88119999999 не должен решать исход округления
    scaled = round(scaled, 9)
    return math.copysign(math.floor(abs(scaled) + 0.5), scaled) / scale


def format_metric(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    return f"{round_half_away(value, 3):.3f}"


def exit_with_error(exc: BaseException | str, code: int = 1):
    """Сообщение об ошибке в консоль и лог, выход из CLI с ненулевым кодом."""
    message = str(exc)
    msr_logger.error(message)
    table_print("ERROR", message)
    raise typer.Exit(code=code)
