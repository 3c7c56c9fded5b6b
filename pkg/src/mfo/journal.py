"""Append-only JSONL event log with per-line CRC-32, plus on-disk checkpoint blobs.

Each line is ``{"crc32": <int>, "payload": {...}}`` where the CRC covers the
canonical JSON of the payload (sorted keys, no whitespace). On resume the log
is replayed: re-emitted events are compared to the logged ones instead of being
written, and only events past the end of the log reach the file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import zlib
from pathlib import Path

logger = logging.getLogger(__name__)

LOG_NAME = "records.jsonl"
CHECKPOINT_DIR = "checkpoints"


class JournalError(RuntimeError):
    """The log is corrupt or disagrees with the run being replayed."""


def canonical(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def encode_line(payload):
    text = canonical(payload)
    return json.dumps({"crc32": zlib.crc32(text.encode()), "payload": payload},
                      sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"


def read_log(path):
    """Parse and verify a log. An unterminated final line (torn write) is dropped."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    torn = lines.pop()
    if torn:
        logger.warning("dropping unterminated final log line")
    for lineno, line in enumerate(lines, 1):
        try:
            entry = json.loads(line)
            payload = entry["payload"]
            crc = entry["crc32"]
        except (ValueError, KeyError, TypeError):
            raise JournalError(f"{path}:{lineno}: unreadable event line") from None
        if zlib.crc32(canonical(payload).encode()) != crc:
            raise JournalError(f"{path}:{lineno}: checksum mismatch")
        events.append(payload)
    return events


def atomic_write(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


class Journal:
    """Event sink bound to an output directory.

    ``replay`` holds events from a previous run (already truncated to the last
    barrier); they are consumed in order by :meth:`emit` and :meth:`take_unit`.
    """

    def __init__(self, directory, replay=()):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        (self.directory / CHECKPOINT_DIR).mkdir(exist_ok=True)
        self.path = self.directory / LOG_NAME
        self._pending = list(replay)
        self._seq = 0
        if self._pending:
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.writelines(encode_line(e) for e in self._pending)
        else:
            self.path.write_text("")
        self._fh = open(self.path, "a", encoding="utf-8")

    @property
    def replaying(self):
        return bool(self._pending)

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def emit(self, event_type, **payload):
        event = {"seq": self._seq, "type": event_type, **payload}
        event = json.loads(canonical(event))
        self._seq += 1
        if self._pending:
            logged = self._pending.pop(0)
            if logged != event:
                raise JournalError(
                    f"replay mismatch at seq {event['seq']}: log has {logged.get('type')!r} "
                    f"{canonical(logged)[:200]}, run produced {canonical(event)[:200]}")
            return event
        self._fh.write(encode_line(event))
        return event

    def flush(self):
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def unit_done(self, unit):
        return any(e["type"] == "barrier" and e.get("unit") == unit for e in self._pending)

    def take_unit(self, unit):
        """Pop the logged events of a finished unit, through its barrier."""
        out = []
        while self._pending:
            event = self._pending.pop(0)
            if event["seq"] != self._seq:
                raise JournalError(f"log sequence gap at {event['seq']} (expected {self._seq})")
            self._seq += 1
            if event.get("unit") != unit:
                raise JournalError(f"event {event['seq']} belongs to {event.get('unit')!r}, not {unit!r}")
            out.append(event)
            if event["type"] == "barrier":
                return out
        raise JournalError(f"log ends inside unit {unit!r}")

    def save_checkpoint(self, name, blob):
        path = self.directory / CHECKPOINT_DIR / name
        atomic_write(path, blob)
        return {"file": name, "sha256": hashlib.sha256(blob).hexdigest()}

    def load_checkpoint(self, ref):
        path = self.directory / CHECKPOINT_DIR / ref["file"]
        try:
            blob = path.read_bytes()
        except FileNotFoundError:
            raise JournalError(f"checkpoint {ref['file']} missing") from None
        if hashlib.sha256(blob).hexdigest() != ref["sha256"]:
            raise JournalError(f"checkpoint {ref['file']} does not match the log")
        return blob


def truncate_to_barrier(events):
    """Drop everything after the last barrier (the partially finished unit)."""
    last = -1
    for i, event in enumerate(events):
        if event["type"] in ("barrier", "rep_end", "experiment_end", "experiment", "rep_start"):
            last = i
    return events[:last + 1]
