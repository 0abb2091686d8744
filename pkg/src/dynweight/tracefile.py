"""JSON-lines trace files: one record per line, several runs per file.

A file may hold several traces back to back; each starts at its ``Init``
record. Key order inside a record is fixed, so identical runs give
identical bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .checkers import TraceError
from .sim import Trace


def dump_record(r: dict) -> str:
    return json.dumps(r, separators=(",", ":"), ensure_ascii=True)


def dumps(traces: Iterable[Trace]) -> str:
    return "".join(dump_record(r) + "\n" for t in traces for r in t.records)


def loads(text: str) -> list[Trace]:
    traces: list[Trace] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            r = json.loads(line)
        except json.JSONDecodeError as e:
            raise TraceError(f"line {lineno}: not JSON ({e})") from None
        if not isinstance(r, dict) or "kind" not in r:
            raise TraceError(f"line {lineno}: not a trace record")
        if r["kind"] == "Verdict":
            continue
        if r["kind"] == "Init":
            traces.append(Trace([]))
        elif not traces:
            raise TraceError(f"line {lineno}: record before the first Init")
        traces[-1].records.append(r)
    return traces


def write_traces(path, traces: Iterable[Trace]) -> None:
    Path(path).write_text(dumps(traces))


def read_traces(path) -> list[Trace]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise TraceError(f"cannot read {path}: {e.strerror}") from None
    return loads(text)
