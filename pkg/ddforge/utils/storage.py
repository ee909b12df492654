"""Helpers for writing run outputs and their metadata sidecars."""

from __future__ import annotations

import json
import os
import platform
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from .. import __version__


def resolve_output_path(file_path: str | os.PathLike[str], base: str | os.PathLike[str] | None = None) -> Path:
    """Return an absolute path for ``file_path``, anchored at ``base`` when relative."""

    candidate = Path(file_path).expanduser()
    if not candidate.is_absolute():
        anchor = Path(base).expanduser() if base else Path.cwd()
        candidate = anchor / candidate
    return candidate.resolve(strict=False)


def ensure_parent_dir(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_text_atomic(path: str | os.PathLike[str], text: str) -> Path:
    """Write ``text`` to ``path`` through a temporary file and ``os.replace``.

    Readers never observe a partially written file, which matters for the
    transform cache when several runs share one path.
    """

    target = ensure_parent_dir(resolve_output_path(path))
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
    return target


def metadata_path(output: str | os.PathLike[str]) -> Path:
    target = resolve_output_path(output)
    return target.with_name(target.name + ".meta.json")


def write_metadata(output: str | os.PathLike[str], command: str, extra: Mapping[str, Any] | None = None) -> Path:
    """Write the timestamped sidecar for ``output``.

    Timestamps and host details live only here so the primary output stays
    byte-identical between runs with identical inputs.
    """

    payload: dict[str, Any] = {
        "command": command,
        "version": __version__,
        "written_at": datetime.now(timezone.utc).isoformat(),
        "python": platform.python_version(),
        "host": platform.node(),
    }
    if extra:
        payload.update(extra)
    return write_text_atomic(metadata_path(output), json.dumps(payload, indent=2, sort_keys=True) + "\n")
