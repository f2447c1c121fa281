"""CSV/JSON data files with metadata sidecars.

Every numeric CSV field is written with 17 significant digits, which
round-trips IEEE doubles exactly. Writes go to a temporary file in the
target directory and are renamed into place.
"""

import csv
import hashlib
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SpinPairError
from .records import SpectrumRecord, SweepRecord, TransientRecord

COLUMNS = {
    "transient": ("tau_ns", "q_au"),
    "sweep": ("b0_mT", "q_au"),
    "spectrum": ("freq_MHz", "mag_au"),
}


class DataFormatError(SpinPairError, ValueError):
    """File contents do not parse as the expected data kind."""


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps(obj):
    return json.dumps(_to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _kind_of(record):
    if isinstance(record, TransientRecord):
        return "transient", record.tau_ns, record.q
    if isinstance(record, SweepRecord):
        return "sweep", record.b0_mT, record.q
    if isinstance(record, SpectrumRecord):
        return "spectrum", record.freq_MHz, record.mag
    raise TypeError(f"cannot serialize {type(record).__name__}")


def format_csv(kind, x, y):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS[kind])
    for a, b in zip(x, y):
        w.writerow((f"{a:.17g}", f"{b:.17g}"))
    return buf.getvalue()


def write_record(record, path, fmt="csv", sidecar=None):
    """Write ``record`` to ``path`` as CSV plus ``<stem>.meta.json``, or as one JSON file.

    ``sidecar`` entries (seed, config hash, ...) are merged over the record's meta.
    Returns the list of paths written.
    """
    kind, x, y = _kind_of(record)
    meta = {"kind": kind, "generator_version": __version__}
    meta.update(_to_jsonable(record.meta))
    meta.update(_to_jsonable(sidecar or {}))
    path = Path(path)
    if fmt == "csv":
        atomic_write(path, format_csv(kind, x, y))
        side = sidecar_path(path)
        atomic_write(side, dumps(meta))
        return [path, side]
    if fmt == "json":
        cols = COLUMNS[kind]
        atomic_write(path, dumps({"meta": meta, cols[0]: x, cols[1]: y}))
        return [path]
    raise ValueError(f"unknown format {fmt!r}")


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


_FACTORY = {
    "transient": lambda x, y, m: TransientRecord(x, y, m),
    "sweep": lambda x, y, m: SweepRecord(x, y, m),
    "spectrum": lambda x, y, m: SpectrumRecord(x, y, m),
}


def read_record(path, kind=None):
    """Read a CSV (with optional sidecar) or JSON data file back into a record."""
    path = Path(path)
    try:
        text = path.read_text()
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: not a text file") from exc
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
            meta = doc.get("meta", {})
            k = kind or meta.get("kind")
            cols = COLUMNS[k]
            x, y = np.asarray(doc[cols[0]], float), np.asarray(doc[cols[1]], float)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise DataFormatError(f"{path}: malformed JSON data file ({exc})") from exc
    else:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise DataFormatError(f"{path}: empty file")
        header = tuple(h.strip() for h in rows[0])
        matches = [k for k, cols in COLUMNS.items() if cols == header]
        if not matches or (kind and kind not in matches):
            raise DataFormatError(f"{path}: unexpected header {header}")
        k = matches[0]
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise DataFormatError(f"{path}: non-numeric field ({exc})") from exc
        if data.ndim != 2 or data.shape[1] != 2 or not np.all(np.isfinite(data)):
            raise DataFormatError(f"{path}: expected two finite numeric columns")
        x, y = data[:, 0], data[:, 1]
        side = sidecar_path(path)
        meta = {}
        if side.exists():
            try:
                meta = json.loads(side.read_text())
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{side}: {exc}") from exc
    try:
        return _FACTORY[k](x, y, meta)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
