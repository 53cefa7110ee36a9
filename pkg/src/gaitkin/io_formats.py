"""Readers and writers for the external file formats.

Everything crossing the package boundary goes through here: pose-estimator
keypoint JSON, camera calibration JSON, TRC marker trajectories and the
CSV/JSON result reports. Internally positions are meters, times seconds and
angles degrees; the parsers own every unit conversion.

Gaps in marker data are NaN in ``MarkerTrajectorySet.positions``. A marker at
the origin is ``0.0``, never a gap.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import CalibrationError, FormatError

# BODY_25 heel indices used when heel markers come straight from a pose
# estimator. Published description names 21 (left) and 25 (right), but BODY_25
# only indexes 0..24, so the right heel defaults to 24. Both are overridable.
POSE_ONLY_HEEL_LANDMARKS = {"left": 21, "right": 24}

UNIT_SCALE = {"m": 1.0, "cm": 0.01, "mm": 0.001}


@dataclass(frozen=True)
class KeypointFrame:
    """2D detections of one subject in one camera frame.

    A confidence of exactly 0 marks a missing detection.
    """

    camera_id: str
    frame_index: int
    landmark_ids: np.ndarray
    uv: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.landmark_ids, dtype=np.int64).reshape(-1)
        uv = np.asarray(self.uv, dtype=float).reshape(-1, 2)
        conf = np.asarray(self.confidence, dtype=float).reshape(-1)
        if not (len(ids) == len(uv) == len(conf)):
            raise ValueError("landmark_ids, uv and confidence lengths differ")
        if len(np.unique(ids)) != len(ids):
            raise ValueError("landmark ids must be unique within a frame")
        if np.any((conf < 0) | (conf > 1)) or np.any(np.isnan(conf)):
            raise ValueError("confidence must lie in [0, 1]")
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        object.__setattr__(self, "landmark_ids", ids)
        object.__setattr__(self, "uv", uv)
        object.__setattr__(self, "confidence", conf)

    def __len__(self):
        return len(self.landmark_ids)

    @property
    def points(self):
        return [
            (int(i), float(u), float(v), float(c))
            for i, (u, v), c in zip(self.landmark_ids, self.uv, self.confidence)
        ]


@dataclass(frozen=True)
class SubjectInfo:
    mass: float
    stature: float
    id: str = "subject"

    def __post_init__(self):
        if not (self.mass > 0 and self.stature > 0):
            raise ValueError("mass and stature must be strictly positive")


@dataclass(frozen=True)
class MarkerTrajectorySet:
    """Labeled 3D marker positions, shape ``(n_frames, n_markers, 3)`` in meters."""

    sample_rate: float
    labels: tuple
    positions: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        labels = tuple(str(lbl) for lbl in self.labels)
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 3 or pos.shape[1:] != (len(labels), 3):
            raise ValueError(
                f"positions shape {pos.shape} does not match {len(labels)} labels"
            )
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be > 0")
        if len(set(labels)) != len(labels):
            raise ValueError("marker labels must be unique")
        # a marker is either fully present or fully absent in a frame
        partial = np.isnan(pos).any(axis=2) & ~np.isnan(pos).all(axis=2)
        if partial.any():
            pos = pos.copy()
            pos[partial] = np.nan
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "positions", pos)

    @property
    def n_frames(self):
        return self.positions.shape[0]

    @property
    def times(self):
        return np.arange(self.n_frames) / self.sample_rate

    @property
    def gap_mask(self):
        """Boolean ``(n_frames, n_markers)``, True where the marker is absent."""
        return np.isnan(self.positions).any(axis=2)

    def index(self, label):
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown marker {label!r}") from None

    def marker(self, label):
        return self.positions[:, self.index(label), :]

    def replace(self, positions=None, labels=None, sample_rate=None):
        return MarkerTrajectorySet(
            sample_rate=self.sample_rate if sample_rate is None else sample_rate,
            labels=self.labels if labels is None else labels,
            positions=self.positions if positions is None else positions,
            metadata=dict(self.metadata),
        )

    def subset(self, labels):
        idx = [self.index(lbl) for lbl in labels]
        return self.replace(positions=self.positions[:, idx, :], labels=tuple(labels))

    def slice_frames(self, start, stop):
        return self.replace(positions=self.positions[start:stop])


# -- keypoints ---------------------------------------------------------------


def _load_json(data, what):
    if isinstance(data, (bytes, bytearray)):
        raw = bytes(data)
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{what}: not UTF-8", offset=exc.start) from None
    else:
        text = str(data)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise FormatError(f"{what}: {exc.msg}", offset=offset) from None


def _person_triplets(person, what):
    flat = person.get("pose_keypoints_2d") if isinstance(person, Mapping) else person
    if not isinstance(flat, list):
        raise FormatError(f"{what}: person entry lacks a pose_keypoints_2d list")
    if len(flat) % 3:
        raise FormatError(
            f"{what}: keypoint list length {len(flat)} is not divisible by 3"
        )
    try:
        arr = np.asarray(flat, dtype=float).reshape(-1, 3)
    except (TypeError, ValueError):
        raise FormatError(f"{what}: non-numeric keypoint value") from None
    return arr


def _frame_from_people(people, camera_id, frame_index, what):
    if not isinstance(people, list):
        raise FormatError(f"{what}: 'people' must be a list")
    best = None
    best_total = -math.inf
    for person in people:
        trip = _person_triplets(person, what)
        total = float(trip[:, 2].sum()) if len(trip) else 0.0
        # ties keep the first entry
        if total > best_total:
            best, best_total = trip, total
    if best is None:
        best = np.zeros((0, 3))
    conf = best[:, 2]
    if np.any((conf < 0) | (conf > 1)):
        raise FormatError(f"{what}: confidence outside [0, 1]")
    return KeypointFrame(
        camera_id=str(camera_id),
        frame_index=int(frame_index),
        landmark_ids=np.arange(len(best)),
        uv=best[:, :2],
        confidence=conf,
    )


def parse_keypoint_file(data, camera_id, frame_index):
    """Parse one pose-estimator frame document (``{"people": [...]}``).

    When several people are present, the one with the highest summed
    confidence is the tracked subject.
    """
    doc = _load_json(data, "keypoint document")
    if not isinstance(doc, Mapping):
        raise FormatError("keypoint document: top level must be an object", offset=0)
    return _frame_from_people(doc.get("people", []), camera_id, frame_index,
                              "keypoint document")


def parse_keypoint_stream(data, camera_id=None):
    """Parse a per-camera document holding a frame array.

    Layout: ``{"camera_id": ..., "frames": [{"frame_index": i, "people": [...]}, ...]}``.
    """
    doc = _load_json(data, "keypoint stream")
    if not isinstance(doc, Mapping) or not isinstance(doc.get("frames"), list):
        raise FormatError("keypoint stream: expected an object with a 'frames' list",
                          offset=0)
    cam = camera_id if camera_id is not None else doc.get("camera_id", "cam")
    frames = []
    for i, entry in enumerate(doc["frames"]):
        if not isinstance(entry, Mapping):
            raise FormatError(f"keypoint stream: frame entry {i} is not an object")
        idx = entry.get("frame_index", i)
        frames.append(_frame_from_people(entry.get("people", []), cam, idx,
                                         f"keypoint stream frame {i}"))
    return frames


def _keypoint_people(frame):
    if len(frame) == 0:
        return []
    flat = np.column_stack([frame.uv, frame.confidence]).reshape(-1)
    return [{"person_id": [-1], "pose_keypoints_2d": [float(x) for x in flat]}]


def write_keypoint_stream(frames, camera_id):
    frames = list(frames)
    doc = {
        "camera_id": str(camera_id),
        "frames": [
            {"frame_index": f.frame_index, "people": _keypoint_people(f)} for f in frames
        ],
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


# -- calibration --------------------------------------------------------------


def _matrix(values, shape, name, cam):
    try:
        arr = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise CalibrationError(f"camera {cam!r}: {name} is not numeric") from None
    if arr.size != int(np.prod(shape)):
        raise CalibrationError(
            f"camera {cam!r}: {name} needs {int(np.prod(shape))} values, got {arr.size}"
        )
    return arr.reshape(shape)


def parse_calibration(text):
    """Parse camera calibration JSON into a list of ``CameraModel``.

    Accepts ``{"cameras": [{"name": ..., "K": [...], ...}, ...]}`` or a mapping
    from camera name to entry. File order is preserved.
    """
    from .camera import CameraModel

    doc = _load_json(text, "calibration")
    if isinstance(doc, Mapping) and isinstance(doc.get("cameras"), list):
        entries = [(e.get("name", f"cam{i}"), e) for i, e in enumerate(doc["cameras"])]
    elif isinstance(doc, Mapping):
        entries = list(doc.items())
    else:
        raise FormatError("calibration: top level must be an object", offset=0)

    cameras = []
    for name, entry in entries:
        if not isinstance(entry, Mapping):
            raise CalibrationError(f"camera {name!r}: entry is not an object")
        for key in ("K", "R", "t"):
            if key not in entry:
                raise CalibrationError(f"camera {name!r}: missing {key}")
        K = _matrix(entry["K"], (3, 3), "K", name)
        dist = _matrix(entry.get("dist", [0.0, 0.0]), (2,), "dist", name)
        R = _matrix(entry["R"], (3, 3), "R", name)
        t = _matrix(entry["t"], (3,), "t", name)
        cameras.append(CameraModel(K, dist, R, t, name=str(name)))
    return cameras


def write_calibration(cameras):
    doc = {
        "cameras": [
            {
                "name": cam.name,
                "K": [float(x) for x in cam.intrinsics.reshape(-1)],
                "dist": [float(x) for x in cam.distortion],
                "R": [float(x) for x in cam.rotation.reshape(-1)],
                "t": [float(x) for x in cam.translation],
            }
            for cam in cameras
        ]
    }
    return json.dumps(doc, indent=2)


# -- TRC ------------------------------------------------------------------------

_TRC_KEYS = ("DataRate", "CameraRate", "NumFrames", "NumMarkers", "Units",
             "OrigDataRate", "OrigDataStartFrame", "OrigNumFrames")


def _split_row(line):
    cells = line.rstrip("\r\n").split("\t")
    return cells


def parse_trc(text):
    """Parse a TRC document.

    Returns ``(MarkerTrajectorySet, SubjectInfo or None)``. Subject metadata is
    read from optional ``SubjectMass``/``SubjectHeight``/``SubjectId`` header
    fields. Blank coordinate cells become gaps.
    """
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8")
    lines = text.splitlines()
    if len(lines) < 5:
        raise FormatError("TRC: header needs at least 5 lines", line=len(lines))

    keys = [k.strip() for k in _split_row(lines[1])]
    vals = [v.strip() for v in _split_row(lines[2])]
    header = dict(zip(keys, vals))
    for key in ("DataRate", "NumFrames", "NumMarkers"):
        if key not in header:
            raise FormatError(f"TRC: header lacks {key}", line=2)
    try:
        rate = float(header["DataRate"])
        n_frames = int(float(header["NumFrames"]))
        n_markers = int(float(header["NumMarkers"]))
    except ValueError:
        raise FormatError("TRC: non-numeric header value", line=3) from None
    if not rate > 0:
        raise FormatError(f"TRC: DataRate must be > 0, got {header['DataRate']}", line=3)
    units = header.get("Units", "m").strip() or "m"
    if units not in UNIT_SCALE:
        raise FormatError(f"TRC: unsupported Units {units!r}", line=3)
    scale = UNIT_SCALE[units]

    label_cells = _split_row(lines[3])[2:]
    labels = [c.strip() for c in label_cells if c.strip()]
    if len(labels) != n_markers:
        raise FormatError(
            f"TRC: NumMarkers={n_markers} but {len(labels)} marker labels", line=4
        )

    n_cols = 2 + 3 * n_markers
    rows = []
    lineno = 5
    for lineno, line in enumerate(lines[5:], start=6):
        if not line.strip():
            # blank separator before data, or trailing newline(s)
            continue
        cells = _split_row(line)
        while len(cells) > n_cols and cells[-1].strip() == "":
            cells.pop()
        if len(cells) != n_cols:
            raise FormatError(
                f"TRC: expected {n_cols} columns, found {len(cells)}", line=lineno
            )
        try:
            coords = [float(c) if c.strip() else math.nan for c in cells[2:]]
        except ValueError:
            raise FormatError("TRC: non-numeric coordinate", line=lineno) from None
        rows.append(coords)

    if len(rows) != n_frames:
        raise FormatError(
            f"TRC: NumFrames={n_frames} but {len(rows)} data rows", line=lineno
        )
    pos = np.asarray(rows, dtype=float).reshape(n_frames, n_markers, 3) * scale

    subject = None
    if "SubjectMass" in header and "SubjectHeight" in header:
        subject = SubjectInfo(
            mass=float(header["SubjectMass"]),
            stature=float(header["SubjectHeight"]),
            id=header.get("SubjectId", "subject"),
        )
    markers = MarkerTrajectorySet(sample_rate=rate, labels=tuple(labels), positions=pos)
    return markers, subject


def _fmt(x):
    return "" if math.isnan(x) else f"{x:.6f}"


def write_trc(markers, units="mm", subject=None, filename="markers.trc"):
    """Serialize a ``MarkerTrajectorySet`` to TRC text.

    Coordinates carry 6 decimals in the chosen units, so a meter-to-mm round
    trip is exact to 1e-9 m.
    """
    if units not in UNIT_SCALE:
        raise ValueError(f"unsupported units {units!r}")
    scale = 1.0 / UNIT_SCALE[units]
    n_frames, n_markers = markers.n_frames, len(markers.labels)
    rate = f"{markers.sample_rate:g}"
    keys = list(_TRC_KEYS)
    vals = [rate, rate, str(n_frames), str(n_markers), units, rate, "1", str(n_frames)]
    if subject is not None:
        keys += ["SubjectMass", "SubjectHeight", "SubjectId"]
        vals += [f"{subject.mass:g}", f"{subject.stature:g}", str(subject.id)]

    out = io.StringIO()
    out.write(f"PathFileType\t4\t(X/Y/Z)\t{filename}\n")
    out.write("\t".join(keys) + "\n")
    out.write("\t".join(vals) + "\n")
    out.write("Frame#\tTime\t" + "\t".join(f"{lbl}\t\t" for lbl in markers.labels)
              .rstrip("\t") + "\n")
    out.write("\t\t" + "\t".join(f"X{i}\tY{i}\tZ{i}" for i in range(1, n_markers + 1))
              + "\n")
    out.write("\n")
    pos = markers.positions * scale
    for f in range(n_frames):
        cells = [str(f + 1), f"{f / markers.sample_rate:.6f}"]
        cells.extend(_fmt(x) for x in pos[f].reshape(-1))
        out.write("\t".join(cells) + "\n")
    return out.getvalue()


# -- reports --------------------------------------------------------------------


def _format_scalar(value):
    if value is None:
        return None
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return None if not math.isfinite(value) else f"{float(value):.6f}"
    return str(value)


def _json_dump(obj, out):
    if isinstance(obj, Mapping):
        out.write("{")
        for i, key in enumerate(sorted(obj, key=str)):
            if i:
                out.write(",")
            out.write(json.dumps(str(key)) + ":")
            _json_dump(obj[key], out)
        out.write("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.write("[")
        for i, item in enumerate(obj):
            if i:
                out.write(",")
            _json_dump(item, out)
        out.write("]")
    else:
        v = _format_scalar(obj)
        if v is None:
            out.write("null")
        elif isinstance(v, bool):
            out.write("true" if v else "false")
        elif isinstance(obj, (float, np.floating)) or isinstance(v, int):
            out.write(str(v))
        else:
            out.write(json.dumps(v))


def write_report(rows: Sequence[Mapping[str, Any]] | Mapping[str, Any],
                 fmt: str = "csv", columns: Iterable[str] | None = None) -> bytes:
    """Serialize results deterministically.

    ``rows`` is a list of flat records. CSV emits a header row then one line
    per record; JSON emits ``{"columns": [...], "rows": [...]}`` with sorted
    keys. Floats are fixed 6-decimal, non-finite values become empty/null.
    A mapping passed as ``rows`` is written as a JSON document as-is.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    if isinstance(rows, Mapping):
        if fmt != "json":
            raise ValueError("nested results can only be written as json")
        out = io.StringIO()
        _json_dump(rows, out)
        return (out.getvalue() + "\n").encode("utf-8")

    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    columns = list(columns)

    if fmt == "csv":
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        if columns:
            writer.writerow(columns)
        for row in rows:
            cells = []
            for col in columns:
                v = _format_scalar(row.get(col))
                cells.append("" if v is None else str(v).lower() if isinstance(v, bool) else v)
            writer.writerow(cells)
        return out.getvalue().encode("utf-8")

    out = io.StringIO()
    _json_dump({"columns": columns, "rows": [{c: r.get(c) for c in columns} for r in rows]},
               out)
    return (out.getvalue() + "\n").encode("utf-8")


def read_report(data, fmt="csv"):
    """Inverse of ``write_report`` for flat reports; numbers come back as floats."""
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8")
    if fmt == "json":
        doc = json.loads(data)
        return doc["rows"] if isinstance(doc, dict) and "rows" in doc else doc
    reader = csv.DictReader(io.StringIO(data))
    rows = []
    for rec in reader:
        row = {}
        for k, v in rec.items():
            if v == "":
                row[k] = None
                continue
            try:
                row[k] = float(v)
            except ValueError:
                row[k] = v
        rows.append(row)
    return rows
