"""Line-oriented key=value manifests (clip corpora, checkpoints, run logs)."""

from __future__ import annotations

from pathlib import Path

from ..errors import FormatError


def write_manifest(path: str | Path, entries: dict[str, str]) -> None:
    lines = [f"{k}={v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: str | Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    offset = 0
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            if "=" not in stripped:
                raise FormatError(f"{path}: line without '=': {line!r}", offset)
            key, value = stripped.split("=", 1)
            entries[key.strip()] = value.strip()
        offset += len(line) + 1
    return entries
