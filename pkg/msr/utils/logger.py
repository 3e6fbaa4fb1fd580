import logging
import os
import pathlib
import platform


def _log_candidates() -> list[pathlib.Path]:
    override = os.getenv("MSR_LOG_FILE")
    if override:
        return [pathlib.Path(override)]
    if platform.system() == "Windows":
        appdata = os.getenv("APPDATA")
        candidates = []
        if appdata:
            candidates.append(pathlib.Path(appdata) / "msr" / "msr.log")
        candidates.append(pathlib.Path("msr.log"))
        return candidates
    # Linux и macOS
    home = pathlib.Path.home()
    return [
        home / ".config" / "msr" / "msr.log",
        pathlib.Path("msr.log"),
    ]


for log_candidate in _log_candidates():
    try:
        log_candidate.parent.mkdir(parents=True, exist_ok=True)
        with open(log_candidate, "a", encoding="utf-8"):
            pass
        msr_log = log_candidate
        break
    except OSError:
        continue
else:
    msr_log = None


logging_kwargs = {
    "format": "[%(asctime)s] [%(levelname)s] %(message)s",
    "datefmt": "%m.%d.%Y %H:%M",
    "level": logging.INFO,
}
if msr_log is not None:
    logging_kwargs["filename"] = str(msr_log)
    logging_kwargs["encoding"] = "utf-8"

logging.basicConfig(**logging_kwargs)

msr_logger = logging.getLogger('msr_logger')
