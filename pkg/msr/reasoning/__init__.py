"""Модули конвейера: ingest → scenario → attention → memory → decision → sim2real → executor."""
