"""File formats: record CSV + metadata, result tables, manifests."""

import csv
import hashlib
import json
import math
import os

import numpy as np

from .errors import RejectedInput
from .measurement import PilotTag, RecordSet

__all__ = [
    "RECORD_HEADER",
    "write_records",
    "read_records",
    "write_json",
    "read_json",
    "write_table",
    "git_blob_sha1",
    "file_blob_sha1",
]

RECORD_HEADER = ["sample_index", "mode_index", "zeta_re", "zeta_im", "pilot_tag"]


def _num(x):
    return repr(float(x))


def write_records(path, records, metadata=None):
    """One CSV row per (sample, mode); metadata goes to ``<path>.json``."""
    n = records.n
    labels = [PilotTag(t).label for t in range(3)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(RECORD_HEADER) + "\n")
        for z, i, t in zip(records.zeta, records.sample_index, records.pilot_tag):
            tag = labels[t]
            fh.writelines(f"{i},{j},{_num(z[j].real)},{_num(z[j].imag)},{tag}\n" for j in range(n))
    meta = dict(metadata or {})
    meta.update({"n": n, "N": len(records), "rows": len(records) * n})
    write_json(_meta_path(path), meta)


def _meta_path(path):
    return os.fspath(path) + ".json"


def read_records(path):
    """Return ``(RecordSet, metadata)``; metadata is ``{}`` if no sidecar exists."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != RECORD_HEADER:
            raise RejectedInput(f"record CSV header must be {','.join(RECORD_HEADER)}")
        rows = list(reader)
    if not rows:
        raise RejectedInput("record CSV has no rows")
    samples = {}
    for s, j, re, im, tag in rows:
        rec = samples.setdefault(int(s), [{}, PilotTag.parse(tag)])
        rec[0][int(j)] = complex(float(re), float(im))
    n = 1 + max(max(m) for m, _ in samples.values())
    order = sorted(samples)
    zeta = np.empty((len(order), n), dtype=np.complex128)
    for r, s in enumerate(order):
        modes = samples[s][0]
        if len(modes) != n:
            raise RejectedInput(f"sample {s} does not list all {n} modes")
        zeta[r] = [modes[j] for j in range(n)]
    tags = np.array([int(samples[s][1]) for s in order])
    meta = read_json(_meta_path(path)) if os.path.exists(_meta_path(path)) else {}
    return RecordSet(zeta, np.array(order), tags), meta


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj, sort_keys=True):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=sort_keys)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_table(path, columns, rows, fmt="csv"):
    """Write rows as CSV or as a JSON list of objects."""
    if fmt == "json":
        write_json(path, [dict(zip(columns, r)) for r in rows])
        return
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for r in rows:
            fh.write(",".join(_num(v) if isinstance(v, (float, np.floating)) else str(v) for v in r) + "\n")


def git_blob_sha1(data):
    """Content hash as computed by ``git hash-object``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def file_blob_sha1(path):
    with open(path, "rb") as fh:
        return git_blob_sha1(fh.read())
