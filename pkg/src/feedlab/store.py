"""Append-only JSON Lines persistence with in-memory mirrors.

Every stream is a list of plain dicts kept in memory; when the store has a
root directory each record is also appended to ``<root>/<stream>.jsonl``.
Reopening a directory replays those files into the same in-memory state.
Per-participant event logs live under ``events/<participant_id>.jsonl``.
"""
from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path
from typing import Iterable, Optional

STREAMS = (
    "participants", "assignments", "prompts", "responses", "feeds", "post_scores",
    "inventory", "scheduler", "demotion", "surveys", "screening",
)
_SAFE_ID = re.compile(r"^[A-Za-z0-9_.\-]+$")


def canonical(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class Store:
    def __init__(self, root: Optional[os.PathLike | str] = None):
        self.root = Path(root) if root is not None else None
        self.streams: dict[str, list[dict]] = {name: [] for name in STREAMS}
        self.events: dict[str, list[dict]] = {}
        self._handles: dict[str, object] = {}
        self._lock = threading.Lock()
        if self.root is not None:
            (self.root / "events").mkdir(parents=True, exist_ok=True)

    @classmethod
    def open(cls, root: os.PathLike | str) -> "Store":
        """Replay every log under ``root`` into a fresh store that keeps appending there."""
        store = cls(root)
        for name in STREAMS:
            store.streams[name] = list(_read(_repair(store.root / f"{name}.jsonl")))
        for path in sorted((store.root / "events").glob("*.jsonl")):
            store.events[path.stem] = list(_read(_repair(path)))
        return store

    def _path(self, key: str) -> Path:
        assert self.root is not None
        return self.root / f"{key}.jsonl"

    def _write(self, key: str, lines: Iterable[str]) -> None:
        if self.root is None:
            return
        fh = self._handles.get(key)
        if fh is None:
            fh = self._handles[key] = open(self._path(key), "a", encoding="utf-8", newline="\n")
        fh.write("".join(line + "\n" for line in lines))

    def append(self, stream: str, record: dict) -> None:
        with self._lock:
            self.streams[stream].append(record)
            if self.root is not None:
                self._write(stream, [canonical(record)])

    def append_events(self, participant_id: str, records: list[dict]) -> None:
        if not _SAFE_ID.match(participant_id):
            raise ValueError(f"participant id {participant_id!r} is not filesystem-safe")
        with self._lock:
            self.events.setdefault(participant_id, []).extend(records)
            if self.root is not None:
                self._write(f"events/{participant_id}", [canonical(r) for r in records])

    def flush(self) -> None:
        with self._lock:
            for fh in self._handles.values():
                fh.flush()

    def close(self) -> None:
        with self._lock:
            for fh in self._handles.values():
                fh.close()
            self._handles.clear()

    def write_json(self, name: str, obj) -> None:
        """Atomically replace ``<root>/<name>`` with ``obj`` as JSON."""
        if self.root is None:
            return
        text = json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
        tmp = self.root / (name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, self.root / name)

    def read_json(self, name: str, default=None):
        if self.root is None or not (self.root / name).exists():
            return default
        return json.loads((self.root / name).read_text(encoding="utf-8"))

    def sizes(self) -> dict[str, int]:
        """Byte length of every log file (after a flush), keyed by path relative to root."""
        self.flush()
        if self.root is None:
            return {}
        return {str(p.relative_to(self.root)): p.stat().st_size for p in sorted(self.root.rglob("*.jsonl"))}

    @staticmethod
    def truncate(root: os.PathLike | str, sizes: dict[str, int]) -> None:
        """Roll logs back to a recorded checkpoint; logs created after it are removed."""
        root = Path(root)
        for p in sorted(root.rglob("*.jsonl")):
            key = str(p.relative_to(root))
            if key not in sizes:
                p.unlink()
            elif p.stat().st_size > sizes[key]:
                with open(p, "r+b") as fh:
                    fh.truncate(sizes[key])

    def all_events(self) -> list[dict]:
        return [e for pid in sorted(self.events) for e in self.events[pid]]

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _repair(path: Path) -> Path:
    """Cut a torn trailing line so later appends start on a fresh line."""
    if path.exists():
        data = path.read_bytes()
        if data and not data.endswith(b"\n"):
            path.write_bytes(data[:data.rfind(b"\n") + 1])
    return path


def _read(path: Path) -> Iterable[dict]:
    if not path.exists():
        return
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError:
            # a torn final write from a crash is dropped; anything earlier is corruption
            if any(rest.strip() for rest in lines[i + 1:]):
                raise
