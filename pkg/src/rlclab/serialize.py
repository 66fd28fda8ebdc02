"""Checkpoint JSON helpers shared by the model families."""

from __future__ import annotations

import json

CHECKPOINT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def write_checkpoint(path: str, kind: str, payload: dict, meta: dict | None = None) -> None:
    doc = {"version": CHECKPOINT_VERSION, "kind": kind, **payload, "meta": meta or {}}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def read_checkpoint(path: str, kind: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from None
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r}")
    if doc.get("kind") != kind:
        raise CheckpointError(f"checkpoint kind {doc.get('kind')!r}, expected {kind!r}")
    return doc
