"""Dataset interchange: one CSV of events plus a JSON sidecar per run.

CSV header is ``index,x`` (SG) or ``index,x,y`` (EPRB), one row per event,
values exactly ``1`` or ``-1``.  The sidecar carries kind, condition vectors,
model variant and parameters, N and seed.  JSON is written with sorted keys
and a trailing newline so identical content gives identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .simulator import (
    EPRB, SG, ConditionRecord, EventDataset, model_from_dict, model_to_dict,
)

RNG_DESCRIPTION = "philox4x64-10, key=(seed, stream), event i -> word i of the counter sequence"
HEADERS = {SG: "index,x", EPRB: "index,x,y"}


class DatasetFormatError(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def dataset_metadata(ds: EventDataset) -> dict:
    return {
        "kind": ds.kind,
        "condition": ds.condition.to_dict(),
        "model": model_to_dict(ds.model),
        "N": ds.N,
        "seed": ds.seed,
        "rng": RNG_DESCRIPTION,
        "toolkit_version": __version__,
    }


def events_to_csv(ds: EventDataset) -> str:
    lines = [HEADERS[ds.kind]]
    if ds.N:
        idx = np.arange(ds.N).astype(str)
        if ds.kind == SG:
            rows = np.char.add(np.char.add(idx, ","), ds.events.astype(str))
        else:
            rows = np.char.add(np.char.add(idx, ","), ds.events[:, 0].astype(str))
            rows = np.char.add(np.char.add(rows, ","), ds.events[:, 1].astype(str))
        lines.extend(rows.tolist())
    return "\n".join(lines) + "\n"


def write_dataset(ds: EventDataset, csv_path) -> tuple[Path, Path]:
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(events_to_csv(ds), encoding="ascii")
    meta = write_json(dataset_metadata(ds), sidecar_path(csv_path))
    return csv_path, meta


def read_dataset(csv_path, meta_path=None) -> EventDataset:
    csv_path = Path(csv_path)
    meta = read_json(meta_path or sidecar_path(csv_path))
    condition = ConditionRecord.from_dict(meta["condition"])
    model = model_from_dict(meta["model"])
    text = csv_path.read_text(encoding="ascii").splitlines()
    if not text or text[0] != HEADERS[condition.kind]:
        raise DatasetFormatError(f"{csv_path}: expected header {HEADERS[condition.kind]!r}")
    width = 2 if condition.kind == SG else 3
    rows = [line.split(",") for line in text[1:]]
    if any(len(r) != width for r in rows):
        raise DatasetFormatError(f"{csv_path}: every row needs {width} fields")
    values = {"1": 1, "-1": -1}
    try:
        events = np.array([[values[v] for v in r[1:]] for r in rows], dtype=np.int8)
    except KeyError as exc:
        raise DatasetFormatError(f"{csv_path}: outcome {exc.args[0]!r} is not 1 or -1") from None
    if [r[0] for r in rows] != [str(i) for i in range(len(rows))]:
        raise DatasetFormatError(f"{csv_path}: index column must run 0..N-1")
    if condition.kind == SG:
        events = events.reshape(-1)
    else:
        events = events.reshape(-1, 2)
    if len(rows) != meta["N"]:
        raise DatasetFormatError(f"{csv_path}: {len(rows)} rows but sidecar says N={meta['N']}")
    return EventDataset(condition, model, int(meta["seed"]), events)
