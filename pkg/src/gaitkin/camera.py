"""Pinhole cameras with radial distortion and multi-view triangulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import (AlignmentError, BehindCameraError, CalibrationError,
                     DegenerateGeometryError, DivergenceError,
                     InsufficientViewsError)
from .io_formats import KeypointFrame, MarkerTrajectorySet

DEFAULT_MIN_CONFIDENCE = 0.3
DEGENERATE_RATIO = 1e-10


class CameraModel:
    """Calibrated camera: ``x_cam = R @ X + t``, then radial (k1, k2), then K."""

    def __init__(self, intrinsics, distortion, rotation, translation, name="cam"):
        self.name = str(name)
        K = np.array(intrinsics, dtype=float).reshape(3, 3)
        dist = np.array(distortion, dtype=float).reshape(2)
        R = np.array(rotation, dtype=float).reshape(3, 3)
        t = np.array(translation, dtype=float).reshape(3)
        if np.abs(R.T @ R - np.eye(3)).max() >= 1e-6:
            raise CalibrationError(f"camera {self.name!r}: rotation is not orthonormal")
        if np.linalg.det(R) <= 0:
            raise CalibrationError(f"camera {self.name!r}: rotation has determinant -1")
        if not (K[0, 0] > 0 and K[1, 1] > 0):
            raise CalibrationError(f"camera {self.name!r}: focal lengths must be > 0")
        if not np.all(np.isfinite(K)) or not np.all(np.isfinite(t)):
            raise CalibrationError(f"camera {self.name!r}: non-finite parameters")
        for arr in (K, dist, R, t):
            arr.setflags(write=False)
        self.intrinsics, self.distortion, self.rotation, self.translation = K, dist, R, t

    def __repr__(self):
        return f"CameraModel(name={self.name!r}, f=({self.intrinsics[0, 0]:.1f}, {self.intrinsics[1, 1]:.1f}))"

    @property
    def center(self):
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def look_at(cls, position, target, focal, principal=(960.0, 540.0),
                distortion=(0.0, 0.0), up=(0.0, 1.0, 0.0), name="cam"):
        """Camera at ``position`` with its optical axis through ``target``.

        Image v grows downward, so the camera y axis points against ``up``.
        """
        position = np.asarray(position, dtype=float)
        z = np.asarray(target, dtype=float) - position
        z /= np.linalg.norm(z)
        x = np.cross(z, np.asarray(up, dtype=float))
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = np.vstack([x, y, z])
        K = np.array([[focal, 0.0, principal[0]], [0.0, focal, principal[1]], [0, 0, 1.0]])
        return cls(K, distortion, R, -R @ position, name=name)

    def project_many(self, points):
        """Project ``(N, 3)`` points without depth checks; returns ``(uv, depth)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        uv, _, depth = _kernels._project_with_jac_numpy(
            pts, self.intrinsics[None], self.distortion[None],
            self.rotation[None], self.translation[None])
        return uv[:, 0, :], depth[:, 0]


def project(camera, point3d):
    """Project a 3D point (meters) to pixels. Accepts ``(3,)`` or ``(N, 3)``."""
    pts = np.asarray(point3d, dtype=float)
    uv, depth = camera.project_many(pts.reshape(-1, 3))
    if np.any(depth <= 0):
        raise BehindCameraError(f"point behind camera {camera.name!r}")
    return uv[0] if pts.ndim == 1 else uv


def _normalize(camera, uv):
    uv = np.asarray(uv, dtype=float)
    K = camera.intrinsics
    y = (uv[..., 1] - K[1, 2]) / K[1, 1]
    x = (uv[..., 0] - K[0, 2] - K[0, 1] * y) / K[0, 0]
    return np.stack([x, y], axis=-1)


def _denormalize(camera, xy):
    K = camera.intrinsics
    u = K[0, 0] * xy[..., 0] + K[0, 1] * xy[..., 1] + K[0, 2]
    v = K[1, 1] * xy[..., 1] + K[1, 2]
    return np.stack([u, v], axis=-1)


def undistort_normalized(camera, uv):
    """Undistorted normalized image coordinates for pixel observations."""
    xy = _normalize(camera, uv)
    k1, k2 = camera.distortion
    if k1 == 0.0 and k2 == 0.0:
        return xy
    out, ok = _kernels.undistort_normalized(xy, k1, k2)
    finite = np.isfinite(xy).all(axis=-1)
    if not np.all(ok | ~finite):
        raise DivergenceError(
            f"camera {camera.name!r}: radial inversion did not converge in "
            f"{_kernels.UNDISTORT_MAX_ITER} iterations")
    return out


def undistort(camera, uv):
    """Remove radial distortion from pixel coordinates ``(..., 2)``."""
    return _denormalize(camera, undistort_normalized(camera, uv))


@dataclass(frozen=True)
class Observation:
    camera: CameraModel
    point: tuple
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


class Triangulation(NamedTuple):
    point: np.ndarray
    reprojection_rms: float
    n_views: int
    used: np.ndarray


def _stack_cameras(cameras):
    K = np.stack([c.intrinsics for c in cameras])
    dist = np.stack([c.distortion for c in cameras])
    R = np.stack([c.rotation for c in cameras])
    t = np.stack([c.translation for c in cameras])
    return K, dist, R, t


def triangulate(observations: Sequence[Observation],
                min_confidence: float = DEFAULT_MIN_CONFIDENCE) -> Triangulation:
    """Confidence-weighted DLT followed by one Gauss-Newton refinement.

    Views below ``min_confidence`` are ignored. The returned RMS is the plain
    (unweighted) pixel reprojection RMS over the views used.
    """
    obs = list(observations)
    used = np.array([o.confidence >= min_confidence and o.confidence > 0 for o in obs],
                    dtype=bool)
    if used.sum() < 2:
        raise InsufficientViewsError(
            f"{int(used.sum())} usable views (min_confidence={min_confidence}), need 2")
    cams = [o.camera for o in obs]
    uv = np.array([o.point for o in obs], dtype=float).reshape(1, -1, 2)
    w = np.where(used, [o.confidence for o in obs], 0.0).reshape(1, -1)
    xy = np.zeros_like(uv)
    for c, cam in enumerate(cams):
        if used[c]:
            xy[0, c] = undistort_normalized(cam, uv[0, c])
    X, rms, n_used, status = _kernels.triangulate_batch(
        xy, uv, w, *_stack_cameras(cams), DEGENERATE_RATIO)
    if status[0] == _kernels.DEGENERATE:
        raise DegenerateGeometryError("views have no usable parallax")
    return Triangulation(X[0], float(rms[0]), int(n_used[0]), used)


def triangulate_sequence(streams: Sequence[Sequence[KeypointFrame]], cameras,
                         min_confidence: float = DEFAULT_MIN_CONFIDENCE,
                         sample_rate: float = 100.0, labels=None) -> MarkerTrajectorySet:
    """Triangulate every landmark in every frame of time-aligned camera streams.

    ``streams[c]`` is the frame list of ``cameras[c]``. ``labels`` maps landmark
    id to marker label; by default every landmark seen is kept as ``"L<id>"``.
    Landmarks seen by fewer than two gated views in a frame become gaps.
    The returned set's metadata carries ``reprojection_rms`` and ``n_views``
    arrays of shape ``(n_frames, n_markers)``.
    """
    if len(streams) != len(cameras):
        raise AlignmentError(f"{len(streams)} streams for {len(cameras)} cameras")
    lengths = {len(s) for s in streams}
    if len(lengths) > 1:
        raise AlignmentError(f"stream lengths differ: {[len(s) for s in streams]}")
    n_frames = lengths.pop() if lengths else 0
    for f in range(n_frames):
        idx = {s[f].frame_index for s in streams}
        if len(idx) > 1:
            raise AlignmentError(f"frame {f}: cameras disagree on frame_index {sorted(idx)}")

    if labels is None:
        ids = sorted({int(i) for s in streams for fr in s for i in fr.landmark_ids})
        labels = {i: f"L{i}" for i in ids}
    ids = list(labels)
    col = {lid: j for j, lid in enumerate(ids)}
    C, L = len(cameras), len(ids)

    uv = np.zeros((n_frames, L, C, 2))
    conf = np.zeros((n_frames, L, C))
    for c, stream in enumerate(streams):
        for f, fr in enumerate(stream):
            for lid, p, cf in zip(fr.landmark_ids, fr.uv, fr.confidence):
                j = col.get(int(lid))
                if j is not None:
                    uv[f, j, c] = p
                    conf[f, j, c] = cf

    w = np.where((conf >= min_confidence) & (conf > 0), conf, 0.0)
    xy = np.zeros_like(uv)
    for c, cam in enumerate(cameras):
        m = w[:, :, c] > 0
        if m.any():
            xy[:, :, c][m] = undistort_normalized(cam, uv[:, :, c][m])

    N = n_frames * L
    X, rms, n_used, status = _kernels.triangulate_batch(
        xy.reshape(N, C, 2), uv.reshape(N, C, 2), w.reshape(N, C),
        *_stack_cameras(cameras), DEGENERATE_RATIO)
    X = X.reshape(n_frames, L, 3)
    X[(status != _kernels.OK).reshape(n_frames, L)] = np.nan
    return MarkerTrajectorySet(
        sample_rate=sample_rate,
        labels=tuple(labels[i] for i in ids),
        positions=X,
        metadata={
            "reprojection_rms": rms.reshape(n_frames, L),
            "n_views": n_used.reshape(n_frames, L),
            "degenerate": (status == _kernels.DEGENERATE).reshape(n_frames, L),
        },
    )
