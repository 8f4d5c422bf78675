"""Run configuration: documented defaults, config-file parsing, env lookup.

The config file is plain ``key = value`` text (``#`` starts a comment).
Keys mirror the CLI flag names with underscores, e.g.::

    window_len = 7
    xi = 0.68
    beta = 1e-5
    fallback_policy = keep-top-1

``SVIB_CONFIG`` may point at a config file; an explicit ``--config`` flag
wins over the environment, and any CLI flag wins over the file.
"""

import os
from dataclasses import dataclass

from .validation import ValidationError

ENV_VAR = "SVIB_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    """Defaults shared across commands."""

    window_len: int = 7
    stride: int | None = None  # None means stride = window_len
    block: int = 4
    xi: float = 0.68
    beta: float = 1e-5
    seed: int = 0
    fallback_policy: str = "keep-top-1"
    separator: str = " "
    threads: int = 1


DEFAULTS = RunConfig()


def load_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValidationError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def find_config(explicit_path=None) -> dict[str, str]:
    """Load the explicit config file, else the one named by SVIB_CONFIG, else {}."""
    path = explicit_path or os.environ.get(ENV_VAR)
    if not path:
        return {}
    if not os.path.exists(path):
        raise ValidationError(f"config file {path!r} does not exist")
    return load_config_file(path)


class Settings:
    """Flag-over-file-over-default resolution for one parsed command."""

    def __init__(self, args, file_values: dict[str, str]):
        self._args = args
        self._file = file_values

    def get(self, key: str, default, cast=None):
        flag = getattr(self._args, key, None)
        if flag is not None:
            return flag
        if key in self._file:
            raw = self._file[key]
            if cast is None:
                return raw
            if cast is bool:
                return raw.lower() in ("1", "true", "yes", "on")
            try:
                return cast(raw)
            except ValueError as exc:
                raise ValidationError(f"config key {key}={raw!r}: {exc}") from exc
        return default
