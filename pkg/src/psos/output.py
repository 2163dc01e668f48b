"""Run directories: one writer per run, files buffered then written with a manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__

SEED_STATUSES = ("done", "censored", "failed")


def _plain(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    """Stable pretty JSON used for every emitted JSON file."""
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False, default=_plain) + "\n"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunWriter:
    """Collects a run's outputs and writes them, plus ``manifest.json``, into ``base/<hash prefix>``.

    Nothing touches the disk before :meth:`finish`, so a failed run leaves no
    partial directory behind.  Timestamps are recorded only when requested,
    keeping default outputs byte-identical across reruns.
    """

    def __init__(self, base: str | Path, cfg_hash: str, kind: str, timestamps: bool = False):
        self.dir = Path(base) / cfg_hash[:12]
        self.cfg_hash = cfg_hash
        self.kind = kind
        self.timestamps = timestamps
        self.started = _now() if timestamps else None
        self.files: dict[str, bytes] = {}
        self.seeds: list[dict] = []

    def add_json(self, name: str, obj) -> None:
        self.files[name] = dumps(obj).encode("utf-8")

    def add_jsonl(self, name: str, rows) -> None:
        text = "".join(json.dumps(r, sort_keys=True, separators=(",", ":"), default=_plain) + "\n" for r in rows)
        self.files[name] = text.encode("utf-8")

    def add_csv(self, name: str, header: list[str], rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else v for v in r])
        self.files[name] = buf.getvalue().encode("utf-8")

    def seed_status(self, key: str, status: str) -> None:
        if status not in SEED_STATUSES:
            raise ValueError(f"unknown seed status {status!r}")
        self.seeds.append({"key": key, "status": status})

    def manifest(self) -> dict:
        files = [{"name": n, "sha256": hashlib.sha256(b).hexdigest(), "bytes": len(b)}
                 for n, b in sorted(self.files.items())]
        return {"config_hash": self.cfg_hash, "artifact_version": __version__, "kind": self.kind,
                "started": self.started, "finished": _now() if self.timestamps else None,
                "seeds": self.seeds, "files": files}

    def finish(self) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, data in sorted(self.files.items()):
            (self.dir / name).write_bytes(data)
        (self.dir / "manifest.json").write_bytes(dumps(self.manifest()).encode("utf-8"))
        return self.dir
