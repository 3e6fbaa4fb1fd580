from typing import Optional


class MsrError(Exception):
    """Базовая ошибка msr. CLI ловит ее и завершает работу с кодом 1."""


class ConfigError(MsrError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DatasetParseError(MsrError, ValueError):
    def __init__(self, message: str, record_index: Optional[int] = None, field: Optional[str] = None):
        self.record_index = record_index
        self.field = field
        where = []
        if record_index is not None:
            where.append(f"record {record_index}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class ShapeError(MsrError, ValueError):
    pass


class DegenerateModalityError(MsrError, ValueError):
    pass


class EmptyInputError(MsrError, ValueError):
    pass


class InvalidInputError(MsrError, ValueError):
    pass


class InvalidEntryError(MsrError, ValueError):
    pass


class EmptyMemoryError(MsrError, LookupError):
    pass


class TaskLookupError(MsrError, LookupError):
    pass


class CycleError(MsrError, ValueError):
    pass


class EmptyConfusionError(MsrError, ValueError):
    pass


class IncompleteRunError(MsrError, ValueError):
    pass


class ReportParseError(MsrError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)
