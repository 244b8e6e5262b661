"""File formats: pattern and cohort CSV, window sidecars, versioned JSON and run manifests.

Every JSON document written here carries a ``schema`` field of the form
``palmpp.<kind>/<version>``; readers refuse any other version. CSV files
are validated by their header row.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import PointPattern, Window, make_params, params_class
from .inference import CohortDataset, Image, Patient

SCHEMA_VERSION = 1
COORDS = ("x", "y", "z")
COHORT_COLUMNS = ("patient_id", "image_id", "class", "x", "y", "outcome")
CLASS_LABELS = ("tumour", "stroma")


class SchemaError(ValueError):
    """A file does not match the expected format or schema version."""


def schema_tag(kind: str) -> str:
    return f"palmpp.{kind}/{SCHEMA_VERSION}"


def _fmt(v: float) -> str:
    return "%.17g" % v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def dump_json(kind: str, payload: dict, path) -> None:
    """Write ``payload`` tagged with its schema; keys are sorted for byte stability."""
    doc = {"schema": schema_tag(kind), **_jsonable(payload)}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_json(kind: str, path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
    tag = doc.get("schema") if isinstance(doc, dict) else None
    if tag != schema_tag(kind):
        raise SchemaError(f"{path}: expected schema {schema_tag(kind)!r}, found {tag!r}")
    return doc


def write_window(window: Window, path) -> None:
    dump_json("window", {"lower": list(window.lower), "upper": list(window.upper)}, path)


def _window_from(doc) -> Window:
    try:
        return Window(tuple(map(float, doc["lower"])), tuple(map(float, doc["upper"])))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"window needs 'lower' and 'upper' lists ({exc})") from None


def read_window(path) -> Window:
    return _window_from(load_json("window", path))


def read_windows(path) -> dict:
    """Per-image windows: ``{"images": {image_id: {"lower": [...], "upper": [...]}}}``."""
    doc = load_json("windows", path)
    images = doc.get("images")
    if not isinstance(images, dict) or not images:
        raise SchemaError(f"{path}: 'images' must map image ids to windows")
    return {str(k): _window_from(v) for k, v in images.items()}


def write_windows(windows: dict, path) -> None:
    dump_json("windows", {"images": {k: {"lower": list(w.lower), "upper": list(w.upper)}
                                     for k, w in windows.items()}}, path)


def write_fit(result, path) -> None:
    dump_json("fit", result.to_dict(), path)


def read_fit_params(path):
    """Parameter record stored in a fit JSON."""
    doc = load_json("fit", path)
    model = str(doc.get("model"))
    try:
        cls = params_class(model)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    try:
        return make_params(model, **{k: doc[k] for k in cls.external_names()})
    except KeyError as exc:
        raise SchemaError(f"{path}: missing parameter {exc}") from None


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file; a header row is required") from None
        rows = [row for row in reader if row]
    return header, rows


def write_pattern(p: PointPattern, path) -> None:
    cols = list(COORDS[:p.dim])
    marks = p.marks
    if marks is not None:
        cols.append("class")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i, pt in enumerate(p.points):
            row = [_fmt(v) for v in pt]
            if marks is not None:
                row.append(str(marks[i]))
            w.writerow(row)


def read_pattern(path, window: Window) -> PointPattern:
    """Read a pattern CSV with header ``x,y[,z][,class]``; the window is never inferred."""
    header, rows = _read_rows(path)
    coords = [c for c in COORDS if c in header]
    if coords not in (["x", "y"], ["x", "y", "z"]):
        raise SchemaError(f"{path}: header must contain x,y (and optionally z), got {header}")
    if len(coords) != window.dim:
        raise SchemaError(f"{path}: {len(coords)}D coordinates but a {window.dim}D window")
    idx = [header.index(c) for c in coords]
    try:
        pts = np.array([[float(r[i]) for i in idx] for r in rows], dtype=float).reshape(-1, len(idx))
    except (ValueError, IndexError) as exc:
        raise SchemaError(f"{path}: bad coordinate row ({exc})") from None
    marks = None
    if "class" in header:
        j = header.index("class")
        marks = np.array([r[j].strip() for r in rows], dtype=object)
    return PointPattern(pts, window, marks)


def write_table(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_cohort(path, windows: dict) -> CohortDataset:
    """Build a cohort from long-format CSV rows (one point per row).

    ``windows`` maps image ids to windows; every image must have one.
    Class labels must be ``tumour`` or ``stroma``; outcome must be 0 or 1 and
    constant within a patient.
    """
    header, rows = _read_rows(path)
    missing = [c for c in COHORT_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    col = {c: header.index(c) for c in COHORT_COLUMNS}
    outcomes, points = {}, {}
    for k, r in enumerate(rows, start=2):
        try:
            pid, iid, cls = r[col["patient_id"]], r[col["image_id"]], r[col["class"]].strip()
            x, y = float(r[col["x"]]), float(r[col["y"]])
            out = int(r[col["outcome"]])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: line {k}: {exc}") from None
        if cls not in CLASS_LABELS:
            raise SchemaError(f"{path}: line {k}: class must be one of {CLASS_LABELS}, got {cls!r}")
        if outcomes.setdefault(pid, out) != out:
            raise SchemaError(f"{path}: patient {pid} has inconsistent outcomes")
        points.setdefault(pid, {}).setdefault(iid, {c: [] for c in CLASS_LABELS})[cls].append((x, y))
    patients = []
    for pid, images in points.items():
        imgs = []
        for iid, by_class in images.items():
            if iid not in windows:
                raise SchemaError(f"no window given for image {iid!r}")
            w = windows[iid]
            pats = {c: PointPattern(np.array(v, dtype=float).reshape(-1, 2), w)
                    for c, v in by_class.items()}
            imgs.append(Image(iid, pats["tumour"], pats["stroma"]))
        patients.append(Patient(pid, outcomes[pid], tuple(imgs)))
    return CohortDataset(tuple(patients))


def write_cohort(cohort: CohortDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COHORT_COLUMNS)
        for pat in cohort.patients:
            for img in pat.images:
                for cls in CLASS_LABELS:
                    for x, y in getattr(img, cls).points:
                        w.writerow([pat.id, img.id, cls, _fmt(x), _fmt(y), pat.outcome])


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for reproducible outputs
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), _dt.timezone.utc)
    else:
        t = _dt.datetime.now(_dt.timezone.utc)
    return t.replace(microsecond=0).isoformat()


@dataclass
class RunManifest:
    argv: list
    seed: int | None
    version: str
    inputs: dict = field(default_factory=dict)  # path -> sha256 of raw bytes
    outputs: list = field(default_factory=list)
    timestamp: str = field(default_factory=_timestamp)

    @classmethod
    def create(cls, argv, seed, inputs=()):
        from . import __version__
        return cls(list(argv), seed, __version__,
                   {str(p): file_digest(p) for p in inputs})

    def write(self, path) -> None:
        dump_json("manifest", asdict(self), path)
