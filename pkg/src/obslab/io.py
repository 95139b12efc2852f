"""File formats: weight stacks, decision records, run outputs.

Weight-stack files (``.wstk``) carry an ASCII header (layer count, init
flag, shapes) followed by raw little-endian float64 payloads in row-major
order, one per layer, then one per init layer when the snapshot is present.
Decision records are line-delimited JSON objects with ``state``, ``logits``
and ``action`` fields.

Run outputs are written deterministically: records as canonical JSON lines
(sorted keys, fixed separators), summaries as CSV, and a JSON manifest
echoing the configuration. Identical inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import IngestionError
from .measures import DecisionRecord, WeightStack

__all__ = [
    "save_weight_stack",
    "load_weight_stack",
    "save_decision_records",
    "load_decision_records",
    "write_records",
    "write_summary_csv",
    "write_manifest",
]

_STACK_MAGIC = "obslab-stack 1"


def save_weight_stack(stack: WeightStack, path) -> None:
    path = Path(path)
    lines = [_STACK_MAGIC, f"layers {stack.depth} init {1 if stack.init else 0}"]
    lines += [f"{w.shape[0]} {w.shape[1]}" for w in stack.layers]
    header = ("\n".join(lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        for w in stack.layers:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
        if stack.init:
            for w in stack.init:
                fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def _read_header_line(fh, path, what: str) -> str:
    raw = fh.readline(4096)
    if not raw.endswith(b"\n"):
        raise IngestionError(f"{path}: truncated header while reading {what}")
    return raw[:-1].decode("ascii", errors="replace")


def load_weight_stack(path) -> WeightStack:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"weight stack file not found: {path}")
    with open(path, "rb") as fh:
        magic = _read_header_line(fh, path, "magic")
        if magic != _STACK_MAGIC:
            raise IngestionError(f"{path}: bad magic line {magic!r}")
        decl = _read_header_line(fh, path, "layer declaration").split()
        if len(decl) != 4 or decl[0] != "layers" or decl[2] != "init":
            raise IngestionError(f"{path}: bad layer declaration {' '.join(decl)!r}")
        try:
            depth = int(decl[1])
            has_init = int(decl[3])
        except ValueError as exc:
            raise IngestionError(f"{path}: non-integer layer declaration") from exc
        if depth < 1 or has_init not in (0, 1):
            raise IngestionError(f"{path}: invalid layer count or init flag")
        shapes = []
        for i in range(depth):
            parts = _read_header_line(fh, path, f"shape of layer {i}").split()
            try:
                rows, cols = int(parts[0]), int(parts[1])
            except (IndexError, ValueError) as exc:
                raise IngestionError(f"{path}: bad shape line for layer {i}") from exc
            if rows < 1 or cols < 1:
                raise IngestionError(f"{path}: non-positive shape for layer {i}")
            shapes.append((rows, cols))

        def read_block(rows: int, cols: int, what: str) -> np.ndarray:
            nbytes = rows * cols * 8
            buf = fh.read(nbytes)
            if len(buf) != nbytes:
                raise IngestionError(f"{path}: truncated payload for {what}")
            return np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy()

        layers = tuple(read_block(r, c, f"layer {i}") for i, (r, c) in enumerate(shapes))
        init = None
        if has_init:
            init = tuple(read_block(r, c, f"init {i}") for i, (r, c) in enumerate(shapes))
        if fh.read(1):
            raise IngestionError(f"{path}: trailing bytes after declared payload")
    try:
        return WeightStack(layers=layers, init=init)
    except ValueError as exc:
        raise IngestionError(f"{path}: {exc}") from exc


def save_decision_records(records: Sequence[DecisionRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(
                {"state": rec.state.tolist(), "logits": rec.logits.tolist(),
                 "action": int(rec.action)},
                sort_keys=True, separators=(",", ":")) + "\n")


def load_decision_records(path) -> list[DecisionRecord]:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"decision records file not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestionError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise IngestionError(f"{path}:{lineno}: expected an object")
            missing = {"state", "logits", "action"} - set(obj)
            if missing:
                raise IngestionError(f"{path}:{lineno}: missing fields {sorted(missing)}")
            extra = set(obj) - {"state", "logits", "action"}
            if extra:
                raise IngestionError(f"{path}:{lineno}: unknown fields {sorted(extra)}")
            try:
                records.append(DecisionRecord(
                    state=np.asarray(obj["state"], dtype=np.float64),
                    logits=np.asarray(obj["logits"], dtype=np.float64),
                    action=int(obj["action"]),
                ))
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from exc
    if not records:
        raise IngestionError(f"{path}: no decision records found")
    return records


def _json_safe(value):
    """Replace non-finite floats with None so records stay valid JSON."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, (np.floating,)):
        v = float(value)
        return v if math.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def write_records(records: Iterable[Mapping], path) -> None:
    """One canonical JSON object per line; non-finite numbers become null."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(_json_safe(dict(rec)), sort_keys=True,
                                separators=(",", ":")) + "\n")


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return value


def write_summary_csv(rows: Sequence[Mapping], fieldnames: Sequence[str], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in fieldnames})


def write_manifest(payload: Mapping, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_safe(dict(payload)), fh, sort_keys=True, indent=2)
        fh.write("\n")
