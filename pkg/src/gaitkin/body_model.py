"""Lower-limb skeletal model: pelvis plus thigh, shank and foot per leg.

Frames follow the usual musculoskeletal convention: x anterior, y superior,
z to the subject's right. Every joint is a body-fixed rotation sequence;
the root (pelvis) additionally carries three translations.

Sign conventions (degrees): hip flexion, knee flexion and ankle dorsiflexion
are positive. Hip adduction and internal rotation are positive on both
sides (the left-side axes are mirrored). Pelvis tilt is positive
anteriorly-up about z, obliquity about x, rotation about y.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import FormatError, PoseError, ScalingError

_AXIS = {"X": 0, "Y": 1, "Z": 2}
_AXIS_NAME = "XYZ"


@dataclass(frozen=True)
class Dof:
    coordinate: str
    axis: int
    sign: float = 1.0
    range: tuple = (-180.0, 180.0)

    def clamp(self, value):
        return min(max(value, self.range[0]), self.range[1])


@dataclass(frozen=True)
class Segment:
    name: str
    parent: str | None  # parent segment; None for the root
    length: float       # nominal length at unit scale, meters
    scale: float = 1.0


@dataclass(frozen=True)
class Joint:
    name: str
    parent: str | None
    child: str
    location: tuple     # joint origin in the parent frame at unit parent scale
    rotations: tuple    # Dof, applied in order (body-fixed)
    translations: tuple = ()

    @property
    def coordinates(self):
        return tuple(d.coordinate for d in self.translations + self.rotations)


@dataclass(frozen=True)
class VirtualMarker:
    name: str
    segment: str
    offset: tuple       # in the segment frame at unit scale


class SkeletonModel:
    """Immutable segment tree with joints and virtual markers."""

    def __init__(self, segments, joints, markers, metadata=None):
        self.segments = tuple(segments)
        self.joints = tuple(joints)
        self.markers = tuple(markers)
        self.metadata = dict(metadata or {})
        self._validate()

    # -- structure ------------------------------------------------------------

    def _validate(self):
        names = [s.name for s in self.segments]
        if len(set(names)) != len(names):
            raise ValueError("duplicate segment names")
        roots = [s for s in self.segments if s.parent is None]
        if len(roots) != 1:
            raise ValueError(f"model needs exactly one root segment, found {len(roots)}")
        index = {n: i for i, n in enumerate(names)}
        for i, s in enumerate(self.segments):
            if s.scale <= 0:
                raise ValueError(f"segment {s.name}: scale must be > 0")
            if s.parent is not None and index.get(s.parent, i) >= i:
                raise ValueError(f"segment {s.name}: parent must precede it (tree order)")
        by_child = {}
        for j in self.joints:
            if j.child in by_child:
                raise ValueError(f"segment {j.child} has two parent joints")
            if j.child not in index:
                raise ValueError(f"joint {j.name}: unknown child {j.child}")
            if j.parent != self.segment(j.child).parent:
                raise ValueError(f"joint {j.name}: parent disagrees with segment tree")
            for d in j.rotations + j.translations:
                if not d.range[0] < d.range[1]:
                    raise ValueError(f"coordinate {d.coordinate}: empty range")
            by_child[j.child] = j
        if set(by_child) != set(names):
            raise ValueError("every segment needs exactly one parent joint")
        if len(set(self.coordinate_names)) != len(self.coordinate_names):
            raise ValueError("duplicate coordinate names")
        for m in self.markers:
            if m.segment not in index:
                raise ValueError(f"marker {m.name}: unknown segment {m.segment}")
        if len({m.name for m in self.markers}) != len(self.markers):
            raise ValueError("duplicate marker names")

    def segment(self, name):
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def joint_for(self, segment_name):
        for j in self.joints:
            if j.child == segment_name:
                return j
        raise KeyError(segment_name)

    @cached_property
    def dofs(self):
        """All Dof objects in coordinate order (segment order, translations first)."""
        out = []
        for s in self.segments:
            j = self.joint_for(s.name)
            out.extend(j.translations)
            out.extend(j.rotations)
        return tuple(out)

    @cached_property
    def coordinate_names(self):
        return tuple(d.coordinate for d in self.dofs)

    @property
    def marker_names(self):
        return tuple(m.name for m in self.markers)

    @cached_property
    def rotational(self):
        """Boolean mask over coordinates: True for angles (degrees)."""
        trans = {d.coordinate for j in self.joints for d in j.translations}
        return np.array([c not in trans for c in self.coordinate_names])

    @cached_property
    def ranges(self):
        return np.array([d.range for d in self.dofs], dtype=float)

    def scales(self):
        return {s.name: s.scale for s in self.segments}

    def with_scales(self, scales: Mapping[str, float], **metadata):
        segs = [replace(s, scale=float(scales.get(s.name, s.scale))) for s in self.segments]
        meta = dict(self.metadata)
        meta.update(metadata)
        return SkeletonModel(segs, self.joints, self.markers, meta)

    # -- kernel encoding --------------------------------------------------------

    @cached_property
    def arrays(self):
        names = [s.name for s in self.segments]
        index = {n: i for i, n in enumerate(names)}
        coord = {c: i for i, c in enumerate(self.coordinate_names)}
        S = len(names)
        parent = np.full(S, -1, dtype=np.int64)
        offset = np.zeros((S, 3))
        axis = np.zeros((S, 3), dtype=np.int64)
        sign = np.ones((S, 3))
        cidx = np.full((S, 3), -1, dtype=np.int64)
        root_trans = np.zeros(3, dtype=np.int64)
        for i, s in enumerate(self.segments):
            j = self.joint_for(s.name)
            if s.parent is not None:
                parent[i] = index[s.parent]
                offset[i] = np.asarray(j.location) * self.segments[parent[i]].scale
            else:
                offset[i] = j.location
                if len(j.translations) != 3:
                    raise ValueError("root joint needs three translations")
                for d in j.translations:
                    root_trans[d.axis] = coord[d.coordinate]
            if len(j.rotations) > 3:
                raise ValueError(f"joint {j.name}: at most 3 rotations supported")
            for k, d in enumerate(j.rotations):
                axis[i, k] = d.axis
                sign[i, k] = d.sign
                cidx[i, k] = coord[d.coordinate]
        mseg = np.array([index[m.segment] for m in self.markers], dtype=np.int64)
        moff = np.array([np.asarray(m.offset) * self.segment(m.segment).scale
                         for m in self.markers], dtype=float).reshape(-1, 3)
        return parent, offset, axis, sign, cidx, root_trans, mseg, moff

    # -- serialization ------------------------------------------------------------

    def to_text(self):
        """Line-oriented model description; see ``from_text`` for the grammar."""
        lines = ["# gaitkin skeleton v1"]
        for key in sorted(self.metadata):
            lines.append(f"meta {key} {self.metadata[key]}")
        for s in self.segments:
            lines.append(f"segment {s.name} {s.parent or '-'} {s.length!r} {s.scale!r}")

        def dof(d):
            sg = "+" if d.sign > 0 else "-"
            return f"{d.coordinate}:{_AXIS_NAME[d.axis]}{sg}:{d.range[0]!r}:{d.range[1]!r}"

        for j in self.joints:
            loc = " ".join(repr(float(v)) for v in j.location)
            parts = [f"joint {j.name} {j.parent or '-'} {j.child} {loc}"]
            parts += ["R " + dof(d) for d in j.rotations]
            parts += ["T " + dof(d) for d in j.translations]
            lines.append(" ".join(parts))
        for m in self.markers:
            off = " ".join(repr(float(v)) for v in m.offset)
            lines.append(f"marker {m.name} {m.segment} {off}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        """Parse the format written by ``to_text``.

        Records, one per line (``#`` starts a comment)::

            meta <key> <value>
            segment <name> <parent|-> <length_m> <scale>
            joint <name> <parent|-> <child> <x> <y> <z> {R|T <coord>:<axis><+|->:<lo>:<hi>}...
            marker <name> <segment> <x> <y> <z>
        """
        segments, joints, markers, meta = [], [], [], {}

        def parse_dof(tok, lineno):
            try:
                name, ax, lo, hi = tok.split(":")
                return Dof(name, _AXIS[ax[0]], 1.0 if ax[1] == "+" else -1.0,
                           (float(lo), float(hi)))
            except (ValueError, KeyError, IndexError):
                raise FormatError(f"model: bad coordinate spec {tok!r}", line=lineno) from None

        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "meta":
                    val = " ".join(tok[2:])
                    try:
                        meta[tok[1]] = float(val)
                    except ValueError:
                        meta[tok[1]] = val
                elif tok[0] == "segment":
                    segments.append(Segment(tok[1], None if tok[2] == "-" else tok[2],
                                            float(tok[3]), float(tok[4])))
                elif tok[0] == "joint":
                    rots, trans = [], []
                    rest = tok[7:]
                    if len(rest) % 2:
                        raise FormatError("model: dangling coordinate token", line=lineno)
                    for kind, spec in zip(rest[0::2], rest[1::2]):
                        (rots if kind == "R" else trans).append(parse_dof(spec, lineno))
                    joints.append(Joint(tok[1], None if tok[2] == "-" else tok[2], tok[3],
                                        tuple(float(v) for v in tok[4:7]), tuple(rots),
                                        tuple(trans)))
                elif tok[0] == "marker":
                    markers.append(VirtualMarker(tok[1], tok[2],
                                                 tuple(float(v) for v in tok[3:6])))
                else:
                    raise FormatError(f"model: unknown record {tok[0]!r}", line=lineno)
            except (IndexError, ValueError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(f"model: malformed {tok[0]} record", line=lineno) from None
        try:
            return cls(segments, joints, markers, meta)
        except ValueError as exc:
            raise FormatError(f"model: {exc}") from None


class PoseVector:
    """Named generalized coordinates (meters for translations, degrees otherwise)."""

    def __init__(self, names, values):
        self.names = tuple(names)
        self.values = np.asarray(values, dtype=float).reshape(len(self.names))

    def __getitem__(self, name):
        try:
            return float(self.values[self.names.index(name)])
        except ValueError:
            raise PoseError(f"unknown coordinate {name!r}") from None

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))

    def __repr__(self):
        inner = ", ".join(f"{n}={v:.4g}" for n, v in zip(self.names, self.values))
        return f"PoseVector({inner})"


def pose_array(model, pose):
    """Coordinate vector in model order from a PoseVector, mapping or array."""
    if isinstance(pose, PoseVector):
        pose = pose.as_dict()
    if isinstance(pose, Mapping):
        unknown = set(pose) - set(model.coordinate_names)
        if unknown:
            raise PoseError(f"unknown coordinate(s): {sorted(unknown)}")
        missing = [c for c in model.coordinate_names if c not in pose]
        if missing:
            raise PoseError(f"pose lacks coordinate(s): {missing}")
        return np.array([pose[c] for c in model.coordinate_names], dtype=float)
    q = np.asarray(pose, dtype=float)
    if q.shape[-1] != len(model.coordinate_names):
        raise PoseError(f"pose has {q.shape[-1]} values, model has "
                        f"{len(model.coordinate_names)} coordinates")
    return q


def neutral_pose(model):
    return PoseVector(model.coordinate_names, np.zeros(len(model.coordinate_names)))


def kinematics(model, q, with_jacobian=True):
    """Raw kernel call: positions ``(F, M, 3)`` and Jacobian ``(F, M, 3, n)``."""
    return _kernels.chain_kinematics(np.atleast_2d(q), *model.arrays,
                                     with_jacobian=with_jacobian)


def forward_kinematics(model, pose):
    """World positions of all virtual markers as ``{name: (3,) array}``."""
    q = pose_array(model, pose)
    pos, _ = kinematics(model, q, with_jacobian=False)
    return dict(zip(model.marker_names, pos[0]))


def forward_kinematics_array(model, poses):
    """Marker positions ``(F, M, 3)`` for a pose array ``(F, n)``."""
    pos, _ = kinematics(model, pose_array(model, poses), with_jacobian=False)
    return pos


# -- rotations --------------------------------------------------------------------


def rot(axis, deg):
    a = np.radians(deg)
    c, s = np.cos(a), np.sin(a)
    if axis == 0:
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == 1:
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def pelvis_rotation_matrix(tilt, obliquity, rotation):
    return rot(2, tilt) @ rot(0, obliquity) @ rot(1, rotation)


def pelvis_angles_from_matrix(R):
    """Inverse of ``pelvis_rotation_matrix`` (Z-X-Y body-fixed), degrees."""
    obliquity = np.degrees(np.arcsin(np.clip(R[2, 1], -1.0, 1.0)))
    tilt = np.degrees(np.arctan2(-R[0, 1], R[1, 1]))
    rotation = np.degrees(np.arctan2(-R[2, 0], R[2, 2]))
    return tilt, obliquity, rotation


def apply_rigid_to_pose(model, pose, R_world, t_world):
    """Pose whose markers are ``R_world @ m + t_world`` of the original's."""
    q = pose_array(model, pose).copy()
    names = model.coordinate_names
    i = {n: names.index(n) for n in PELVIS_COORDS}
    Rp = pelvis_rotation_matrix(q[i["pelvis_tilt"]], q[i["pelvis_obliquity"]],
                                q[i["pelvis_rotation"]])
    tp = q[[i["pelvis_tx"], i["pelvis_ty"], i["pelvis_tz"]]]
    tilt, obl, rotn = pelvis_angles_from_matrix(R_world @ Rp)
    q[i["pelvis_tilt"]], q[i["pelvis_obliquity"]], q[i["pelvis_rotation"]] = tilt, obl, rotn
    q[[i["pelvis_tx"], i["pelvis_ty"], i["pelvis_tz"]]] = R_world @ tp + t_world
    return PoseVector(names, q)


# -- default model -------------------------------------------------------------------

PELVIS_COORDS = ("pelvis_tx", "pelvis_ty", "pelvis_tz",
                 "pelvis_tilt", "pelvis_obliquity", "pelvis_rotation")
LEG_COORDS = ("hip_flexion", "hip_adduction", "hip_rotation", "knee_angle", "ankle_angle")

DEFAULT_STATURE = 1.75

# unit-scale geometry for a 1.75 m subject, meters
_HIP_CENTER = (-0.056, -0.078, 0.077)
_THIGH = 0.41
_SHANK = 0.43
_PELVIS_MARKERS = {"ASIS": (0.015, 0.0, 0.125), "PSIS": (-0.155, 0.02, 0.045)}
_KNEE_LATERAL = 0.05
_ANKLE_LATERAL = (-0.005, 0.045)
_HEEL = (-0.06, -0.04, 0.0)
_TOE = (0.17, -0.045, 0.0)

# segment -> marker pair whose distance defines its scale
SCALE_PAIRS = {
    "pelvis": ("RASIS", "LASIS"),
    "thigh_r": ("RASIS", "RKNE"),
    "shank_r": ("RKNE", "RANK"),
    "foot_r": ("RHEEL", "RTOE"),
    "thigh_l": ("LASIS", "LKNE"),
    "shank_l": ("LKNE", "LANK"),
    "foot_l": ("LHEEL", "LTOE"),
}


def default_model() -> SkeletonModel:
    """Generic pelvis + two-leg model at unit scale (1.75 m subject)."""
    segments = [Segment("pelvis", None, 2 * _PELVIS_MARKERS["ASIS"][2])]
    joints = [Joint(
        "ground_pelvis", None, "pelvis", (0.0, 0.0, 0.0),
        # Z-X-Y angles span every orientation with only the middle one limited
        rotations=(Dof("pelvis_tilt", 2, 1.0, (-180.0, 180.0)),
                   Dof("pelvis_obliquity", 0, 1.0, (-90.0, 90.0)),
                   Dof("pelvis_rotation", 1, 1.0, (-180.0, 180.0))),
        translations=(Dof("pelvis_tx", 0, 1.0, (-100.0, 100.0)),
                      Dof("pelvis_ty", 1, 1.0, (-100.0, 100.0)),
                      Dof("pelvis_tz", 2, 1.0, (-100.0, 100.0))),
    )]
    markers = []
    for side, sgn in (("r", 1.0), ("l", -1.0)):
        S = side.upper()
        hip = (_HIP_CENTER[0], _HIP_CENTER[1], sgn * _HIP_CENTER[2])
        segments += [Segment(f"thigh_{side}", "pelvis", _THIGH),
                     Segment(f"shank_{side}", f"thigh_{side}", _SHANK),
                     Segment(f"foot_{side}", f"shank_{side}",
                             float(np.hypot(_TOE[0] - _HEEL[0], _TOE[1] - _HEEL[1])))]
        joints += [
            Joint(f"hip_{side}", "pelvis", f"thigh_{side}", hip, rotations=(
                Dof(f"hip_flexion_{side}", 2, 1.0, (-40.0, 120.0)),
                Dof(f"hip_adduction_{side}", 0, sgn, (-45.0, 30.0)),
                Dof(f"hip_rotation_{side}", 1, sgn, (-45.0, 45.0)))),
            Joint(f"knee_{side}", f"thigh_{side}", f"shank_{side}", (0.0, -_THIGH, 0.0),
                  rotations=(Dof(f"knee_angle_{side}", 2, -1.0, (-10.0, 140.0)),)),
            Joint(f"ankle_{side}", f"shank_{side}", f"foot_{side}", (0.0, -_SHANK, 0.0),
                  rotations=(Dof(f"ankle_angle_{side}", 2, 1.0, (-50.0, 40.0)),)),
        ]
        for name, (x, y, z) in _PELVIS_MARKERS.items():
            markers.append(VirtualMarker(f"{S}{name}", "pelvis", (x, y, sgn * z)))
        markers += [
            VirtualMarker(f"{S}KNE", f"thigh_{side}", (0.0, -_THIGH, sgn * _KNEE_LATERAL)),
            VirtualMarker(f"{S}ANK", f"shank_{side}",
                          (_ANKLE_LATERAL[0], -_SHANK, sgn * _ANKLE_LATERAL[1])),
            VirtualMarker(f"{S}HEEL", f"foot_{side}", _HEEL),
            VirtualMarker(f"{S}TOE", f"foot_{side}", _TOE),
        ]
    # stable marker order: pelvis first, then right leg, then left leg
    order = ["RASIS", "LASIS", "RPSIS", "LPSIS", "RKNE", "LKNE", "RANK", "LANK",
             "RHEEL", "LHEEL", "RTOE", "LTOE"]
    markers.sort(key=lambda m: order.index(m.name))
    return SkeletonModel(segments, joints, markers,
                         {"stature": DEFAULT_STATURE})


def pelvis_center(markers):
    """Mean of the four pelvis markers of a MarkerTrajectorySet, ``(F, 3)``."""
    return np.mean([markers.marker(n) for n in ("RASIS", "LASIS", "RPSIS", "LPSIS")], axis=0)


# -- scaling ---------------------------------------------------------------------


@dataclass(frozen=True)
class MarkerCorrespondence:
    """Virtual marker -> experimental label pairs with non-negative weights."""

    pairs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        pairs = tuple((str(v), str(e), float(w)) for v, e, w in self.pairs)
        if any(w < 0 for _, _, w in pairs):
            raise ValueError("marker weights must be >= 0")
        if pairs and not any(w > 0 for _, _, w in pairs):
            raise ValueError("marker weights cannot all be zero")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def identity(cls, model, weight=1.0):
        return cls(tuple((m, m, weight) for m in model.marker_names))

    def experimental(self, virtual_name):
        for v, e, _ in self.pairs:
            if v == virtual_name:
                return e
        raise KeyError(virtual_name)


def _pair_distance(static_markers, correspondence, pair, segment):
    try:
        labels = [correspondence.experimental(v) for v in pair]
        a, b = (static_markers.marker(lbl) for lbl in labels)
    except KeyError as exc:
        raise ScalingError(f"segment {segment}: missing defining marker {exc}") from None
    d = np.linalg.norm(a - b, axis=1)
    d = d[np.isfinite(d)]
    if len(d) == 0:
        raise ScalingError(f"segment {segment}: defining markers {pair} never present")
    mean = float(d.mean())
    if not mean > 0:
        raise ScalingError(f"segment {segment}: non-positive measured distance")
    return mean


def scale_model(model, static_markers, correspondence=None, subject=None,
                pairs=None) -> SkeletonModel:
    """Per-segment isotropic scaling from marker-pair distances of a static trial.

    scale = mean measured distance of the segment's defining pair over all
    static frames / the same distance on the generic (unit-scale) model in
    its neutral pose. Subject mass and stature are stored as metadata only.
    """
    if correspondence is None:
        correspondence = MarkerCorrespondence.identity(model)
    pairs = SCALE_PAIRS if pairs is None else pairs
    if static_markers.n_frames < 1:
        raise ScalingError("static trial has no frames")
    generic = model.with_scales({s.name: 1.0 for s in model.segments})
    neutral = forward_kinematics(generic, neutral_pose(generic))
    scales = {}
    for seg, pair in pairs.items():
        if seg not in {s.name for s in model.segments}:
            continue
        try:
            ref = float(np.linalg.norm(neutral[pair[0]] - neutral[pair[1]]))
        except KeyError as exc:
            raise ScalingError(f"segment {seg}: model lacks marker {exc}") from None
        scales[seg] = _pair_distance(static_markers, correspondence, pair, seg) / ref
    meta = {}
    if subject is not None:
        meta = {"mass": subject.mass, "stature": subject.stature, "subject": subject.id}
    return model.with_scales(scales, **meta)
