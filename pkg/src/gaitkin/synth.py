"""Synthetic gait scenes with exact ground truth.

Joint coordinates are sinusoids of the gait phase, pushed through forward
kinematics of a scaled default model. Because every quantity is a closed-form
function of time, events and spatiotemporal parameters are known exactly and
serve as the oracle for the rest of the pipeline.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import minimize_scalar

from .body_model import (DEFAULT_STATURE, PoseVector, default_model,
                         forward_kinematics_array)
from .camera import CameraModel
from .events import GaitEvent
from .io_formats import KeypointFrame, MarkerTrajectorySet, SubjectInfo
from .params import SpatiotemporalRecord


@dataclass(frozen=True)
class GaitRecipe:
    stride_length: float = 1.30          # m
    stride_time: float = 1.0             # s
    n_strides: int = 5
    sample_rate: float = 100.0           # Hz
    # sinusoid amplitudes (half peak-to-peak), degrees unless noted
    hip_flexion_amplitude: float = 20.0
    hip_flexion_mean: float = 10.0
    hip_adduction_amplitude: float = 4.0
    hip_rotation_amplitude: float = 4.0
    knee_flexion_amplitude: float = 30.0
    knee_flexion_mean: float = 35.0
    ankle_amplitude: float = 10.0
    pelvis_vertical_amplitude: float = 0.02  # m
    pelvis_lateral_amplitude: float = 0.02   # m
    pelvis_tilt_amplitude: float = 2.0
    pelvis_obliquity_amplitude: float = 4.0
    pelvis_rotation_amplitude: float = 5.0
    # phase of the right hip-flexion peak as a fraction of the cycle
    phase_offset: float = 0.1
    # left leg lags the right by this fraction; 0.5 is symmetric gait
    contralateral_offset: float = 0.5
    subject_mass: float = 70.0
    subject_stature: float = 1.75
    subject_id: str = "synthetic"
    segment_scales: dict = field(default_factory=dict)  # multiplies the stature scale
    seed: int = 0

    def __post_init__(self):
        for name in ("stride_length", "stride_time", "sample_rate", "subject_mass",
                     "subject_stature"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.n_strides < 1:
            raise ValueError("n_strides must be >= 1")

    @property
    def subject(self):
        return SubjectInfo(self.subject_mass, self.subject_stature, self.subject_id)

    @property
    def speed(self):
        return self.stride_length / self.stride_time

    @property
    def n_frames(self):
        return int(round(self.n_strides * self.stride_time * self.sample_rate))

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_mapping(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown recipe keys: {sorted(unknown)}")
        return cls(**data)


def load_recipe(path):
    """Read a recipe from a JSON file of ``GaitRecipe`` fields (missing keys default)."""
    with open(path, encoding="utf-8") as fh:
        return GaitRecipe.from_mapping(json.load(fh))


def oracle_model(recipe):
    base = recipe.subject_stature / DEFAULT_STATURE
    model = default_model()
    scales = {s.name: base * float(recipe.segment_scales.get(s.name, 1.0))
              for s in model.segments}
    return model.with_scales(scales, mass=recipe.subject_mass,
                             stature=recipe.subject_stature, subject=recipe.subject_id)


def _pelvis_height(model):
    """Pelvis height putting the heels on the ground in the neutral pose."""
    q = np.zeros(len(model.coordinate_names))
    pos = forward_kinematics_array(model, q)[0]
    heel = model.marker_names.index("RHEEL")
    return -pos[heel, 1] + 0.02


def poses_at(recipe, model, t):
    """Pose array ``(len(t), n)`` of the recipe at times ``t`` (seconds)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    names = model.coordinate_names
    q = np.zeros((len(t), len(names)))
    col = {n: i for i, n in enumerate(names)}
    tau = 2.0 * np.pi
    phr = t / recipe.stride_time - recipe.phase_offset
    x0 = -0.5 * recipe.stride_length * recipe.n_strides
    q[:, col["pelvis_tx"]] = x0 + recipe.speed * t
    q[:, col["pelvis_ty"]] = _pelvis_height(model) + recipe.pelvis_vertical_amplitude * np.cos(2 * tau * phr)
    q[:, col["pelvis_tz"]] = recipe.pelvis_lateral_amplitude * np.sin(tau * phr)
    q[:, col["pelvis_tilt"]] = recipe.pelvis_tilt_amplitude * np.sin(2 * tau * phr)
    q[:, col["pelvis_obliquity"]] = recipe.pelvis_obliquity_amplitude * np.sin(tau * phr)
    q[:, col["pelvis_rotation"]] = recipe.pelvis_rotation_amplitude * np.cos(tau * phr)
    for side, lag in (("r", 0.0), ("l", recipe.contralateral_offset)):
        ph = phr - lag
        q[:, col[f"hip_flexion_{side}"]] = (recipe.hip_flexion_mean
                                            + recipe.hip_flexion_amplitude * np.cos(tau * ph))
        q[:, col[f"hip_adduction_{side}"]] = recipe.hip_adduction_amplitude * np.sin(tau * ph)
        q[:, col[f"hip_rotation_{side}"]] = recipe.hip_rotation_amplitude * np.cos(tau * (ph + 0.1))
        q[:, col[f"knee_angle_{side}"]] = (recipe.knee_flexion_mean
                                           + recipe.knee_flexion_amplitude * np.cos(tau * (ph - 0.72)))
        q[:, col[f"ankle_angle_{side}"]] = recipe.ankle_amplitude * np.sin(tau * (ph - 0.1))
    return q


def _heel_relative(recipe, model, side, t):
    """Heel minus pelvis-center position along +x at times ``t``."""
    pos = forward_kinematics_array(model, poses_at(recipe, model, t))
    names = model.marker_names
    heel = pos[:, names.index("RHEEL" if side == "right" else "LHEEL"), 0]
    center = pos[:, [names.index(n) for n in ("RASIS", "LASIS", "RPSIS", "LPSIS")], 0].mean(axis=1)
    return heel - center


def _extremum_phase(recipe, model, side, kind):
    """Time within the first cycle at which the heel-relative signal peaks."""
    T = recipe.stride_time
    grid = np.linspace(0.0, T, 2001)
    s = _heel_relative(recipe, model, side, grid)
    sign = -1.0 if kind == "heel_strike" else 1.0
    k = int(np.argmin(sign * s))
    lo, hi = grid[k] - T / 1000, grid[k] + T / 1000
    res = minimize_scalar(lambda x: sign * _heel_relative(recipe, model, side, [x])[0],
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x) % T


@dataclass
class GaitScene:
    recipe: GaitRecipe
    model: object
    poses: np.ndarray                 # (F, n)
    markers: MarkerTrajectorySet
    events: list                      # GaitEvent, ground truth
    event_times: list                 # exact (unrounded) event times, same order
    records: list                     # SpatiotemporalRecord, ground truth

    def pose(self, f):
        return PoseVector(self.model.coordinate_names, self.poses[f])

    @property
    def coordinate_names(self):
        return self.model.coordinate_names


def generate_gait(recipe: GaitRecipe) -> GaitScene:
    model = oracle_model(recipe)
    fs, T = recipe.sample_rate, recipe.stride_time
    t = np.arange(recipe.n_frames) / fs
    poses = poses_at(recipe, model, t)
    pos = forward_kinematics_array(model, poses)
    markers = MarkerTrajectorySet(fs, model.marker_names, pos)

    duration = recipe.n_frames / fs
    raw = []
    for side in ("right", "left"):
        for kind in ("heel_strike", "toe_off"):
            t0 = _extremum_phase(recipe, model, side, kind)
            k = 0
            while t0 + k * T < duration:
                te = t0 + k * T
                frame = int(round(te * fs))
                # extrema on the first or last sample cannot be detected as peaks
                if 1 <= frame <= recipe.n_frames - 2:
                    raw.append((te, side, kind, frame))
                k += 1
    raw.sort()
    events = [GaitEvent(side, kind, frame, frame / fs) for _, side, kind, frame in raw]
    times = [te for te, *_ in raw]

    records = []
    step_frac = {"right": 1.0 - recipe.contralateral_offset % 1.0,
                 "left": recipe.contralateral_offset % 1.0}
    for side in ("right", "left"):
        other = "left" if side == "right" else "right"
        hs = [e for e in events if e.side == side and e.kind == "heel_strike"]
        ohs = [e for e in events if e.side == other and e.kind == "heel_strike"]
        for a, b in zip(hs, hs[1:]):
            if not any(a.frame_index < o.frame_index < b.frame_index for o in ohs):
                continue
            records.append(SpatiotemporalRecord(
                side=side,
                stride_time=T,
                stride_length=recipe.stride_length,
                step_time=step_frac[side] * T,
                step_length=step_frac[side] * recipe.stride_length,
                start_frame=a.frame_index,
                end_frame=b.frame_index,
            ))
    return GaitScene(recipe, model, poses, markers, events, times, records)


def static_trial(recipe: GaitRecipe, n_frames: int = 20) -> MarkerTrajectorySet:
    """Neutral standing pose (all joint angles zero) held for ``n_frames``."""
    model = oracle_model(recipe)
    q = np.zeros((n_frames, len(model.coordinate_names)))
    names = model.coordinate_names
    q[:, names.index("pelvis_ty")] = _pelvis_height(model)
    return MarkerTrajectorySet(recipe.sample_rate, model.marker_names,
                               forward_kinematics_array(model, q))


def default_camera_rig(radius=3.0, height=1.2, angles_deg=(-45.0, -15.0, 15.0, 45.0),
                       focal=1500.0, target=(0.0, 0.9, 0.0), distortion=(0.0, 0.0)):
    """Cameras on an arc around the walkway center, on the subject's right side."""
    cams = []
    for i, a in enumerate(np.radians(angles_deg)):
        pos = (radius * np.sin(a), height, radius * np.cos(a))
        cams.append(CameraModel.look_at(pos, target, focal, distortion=distortion,
                                        name=f"cam{i}"))
    return cams


def render_views(markers: MarkerTrajectorySet, cameras, pixel_noise_sd=0.0,
                 dropout_rate=0.0, seed=0, landmark_ids=None):
    """Project markers into every camera as keypoint frames.

    Landmark ids default to marker order. Absent markers, points behind a
    camera and dropped observations get confidence 0 and ``(0, 0)`` pixels.
    """
    rng = np.random.default_rng(seed)
    F, M = markers.n_frames, len(markers.labels)
    ids = np.arange(M) if landmark_ids is None else np.asarray(landmark_ids)
    streams = []
    pts = markers.positions.reshape(-1, 3)
    present = np.isfinite(pts).all(axis=1)
    for cam in cameras:
        uv, depth = cam.project_many(np.where(present[:, None], pts, 0.0))
        noise = rng.normal(0.0, 1.0, uv.shape) * pixel_noise_sd
        drop = rng.random(len(uv)) < dropout_rate
        ok = present & (depth > 0) & ~drop
        uv = np.where(ok[:, None], uv + noise, 0.0).reshape(F, M, 2)
        conf = ok.astype(float).reshape(F, M)
        streams.append([KeypointFrame(cam.name, f, ids, uv[f], conf[f]) for f in range(F)])
    return streams
