"""Marker-based inverse kinematics by damped least squares."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .body_model import (MarkerCorrespondence, PoseVector, kinematics, neutral_pose,
                         pose_array)
from .errors import NumericalError, UnconstrainedError

MIN_MARKERS = 4
# below this cost (m^2) the fit is exact to machine precision
COST_FLOOR = 1e-28
_MAX_DAMPING = 1e12


@dataclass(frozen=True)
class IkSettings:
    max_iterations: int = 100
    cost_tolerance: float = 1e-12   # relative cost decrease of an accepted step
    step_tolerance: float = 1e-10   # step norm relative to the coordinate norm
    damping_init: float = 1e-3
    weights: Mapping[str, float] | None = None  # per virtual marker, overrides correspondence

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.cost_tolerance > 0 and self.step_tolerance > 0):
            raise ValueError("tolerances must be > 0")


@dataclass(frozen=True)
class IkFrameResult:
    pose: PoseVector | None
    rms_error: float
    iterations: int
    converged: bool
    per_marker_residuals: np.ndarray  # meters, NaN where the marker was not used
    cost: float = float("nan")


def _weights_for(model, correspondence, settings):
    """(experimental label or None, weight) per model marker."""
    if correspondence is None:
        correspondence = MarkerCorrespondence.identity(model)
    table = {v: (e, w) for v, e, w in correspondence.pairs}
    labels, weights = [], []
    for name in model.marker_names:
        e, w = table.get(name, (None, 0.0))
        if settings is not None and settings.weights and name in settings.weights:
            w = float(settings.weights[name])
        labels.append(e)
        weights.append(w if e is not None else 0.0)
    return labels, np.asarray(weights, dtype=float)


def _observed_array(model, observed, labels=None):
    """Observed positions ``(M, 3)`` in model marker order, NaN where absent."""
    if isinstance(observed, Mapping):
        names = labels if labels is not None else model.marker_names
        out = np.full((len(model.marker_names), 3), np.nan)
        for i, lbl in enumerate(names):
            if lbl is not None and lbl in observed:
                out[i] = observed[lbl]
        return out
    arr = np.asarray(observed, dtype=float)
    if arr.shape != (len(model.marker_names), 3):
        raise ValueError(f"observed markers must be shaped ({len(model.marker_names)}, 3)")
    return arr


def _active_weights(obs, weights):
    present = np.isfinite(obs).all(axis=1)
    w = np.where(present, weights, 0.0)
    if not np.any(w > 0):
        raise UnconstrainedError("every marker weight is zero after gap exclusion")
    return w


def ik_cost(model, pose, observed_markers, weights=None):
    """Weighted squared marker distance ``sum_i w_i |m_obs - m_model(pose)|^2``.

    ``observed_markers`` maps virtual marker names to positions (or is an
    ``(M, 3)`` array in model marker order); gapped (NaN) markers are excluded.
    ``weights`` maps names to weights, default 1 for every observed marker.
    """
    obs = _observed_array(model, observed_markers)
    if weights is None:
        w = np.ones(len(model.marker_names))
    elif isinstance(weights, Mapping):
        w = np.array([float(weights.get(n, 0.0)) for n in model.marker_names])
    else:
        w = np.asarray(weights, dtype=float)
    w = _active_weights(obs, w)
    pos, _ = kinematics(model, pose_array(model, pose), with_jacobian=False)
    r = np.where(w[:, None] > 0, pos[0] - obs, 0.0)
    return float(np.sum(w * np.sum(r * r, axis=1)))


def marker_jacobian(model, pose):
    """d(marker xyz)/d(coordinate), shape ``(3M, n)``.

    Rows are marker-major (x, y, z per marker); columns are per degree for
    angles and per meter for translations.
    """
    _, jac = kinematics(model, pose_array(model, pose))
    return jac[0].reshape(-1, jac.shape[-1])


def _evaluate(model, q, obs, w, jac=True):
    pos, J = kinematics(model, q, with_jacobian=jac)
    r = np.where(w[:, None] > 0, pos[0] - obs, 0.0)
    cost = float(np.sum(w * np.sum(r * r, axis=1)))
    return r, cost, (J[0] if jac else None)


def _result(model, q, r, w, cost, iterations, converged):
    used = w > 0
    norms = np.linalg.norm(r, axis=1)
    res = np.where(used, norms, np.nan)
    rms = float(np.sqrt(np.mean(norms[used] ** 2)))
    return IkFrameResult(PoseVector(model.coordinate_names, q), rms, iterations,
                         converged, res, cost)


def solve_frame(model, observed_markers, correspondence=None, settings=None,
                initial_pose=None) -> IkFrameResult:
    """Levenberg-Marquardt fit of the model pose to one frame of markers.

    ``observed_markers`` maps experimental labels to positions (a
    MarkerTrajectorySet frame as a dict) or is an ``(M, 3)`` array already in
    model marker order. Each step is projected onto the joint ranges. Damping
    is multiplied by 10 after a rejected step and by 0.5 after an accepted one.
    """
    settings = settings or IkSettings()
    labels, weights = _weights_for(model, correspondence, settings)
    obs = _observed_array(model, observed_markers, labels)
    w = _active_weights(obs, weights)
    if np.count_nonzero(w) < MIN_MARKERS:
        raise UnconstrainedError(
            f"{np.count_nonzero(w)} weighted markers observed, need {MIN_MARKERS}")
    obs = np.where(w[:, None] > 0, obs, 0.0)

    lo, hi = model.ranges[:, 0], model.ranges[:, 1]
    q0 = neutral_pose(model) if initial_pose is None else initial_pose
    q = np.clip(pose_array(model, q0).astype(float), lo, hi)
    r, cost, J = _evaluate(model, q, obs, w)
    if not np.isfinite(cost):
        raise NumericalError("non-finite IK cost at the initial pose")

    wrow = np.repeat(w, 3)
    lam = settings.damping_init
    converged = cost <= COST_FLOOR
    it = 0
    while not converged and it < settings.max_iterations:
        it += 1
        Jf = J.reshape(-1, J.shape[-1])
        A = Jf.T @ (wrow[:, None] * Jf)
        g = Jf.T @ (wrow * r.reshape(-1))
        diag = np.maximum(np.diag(A), 1e-12 * max(np.max(np.diag(A)), 1e-300))
        try:
            dq = np.linalg.solve(A + lam * np.diag(diag), -g)
        except np.linalg.LinAlgError:
            lam *= 10.0
            continue
        q_new = np.clip(q + dq, lo, hi)
        step = q_new - q
        if np.linalg.norm(step) <= settings.step_tolerance * (np.linalg.norm(q) + settings.step_tolerance):
            converged = True
            break
        r_new, cost_new, J_new = _evaluate(model, q_new, obs, w)
        if not np.isfinite(cost_new):
            raise NumericalError("non-finite IK cost")
        if cost_new < cost:
            decrease = cost - cost_new
            q, r, J = q_new, r_new, J_new
            lam *= 0.5
            if cost_new <= COST_FLOOR or decrease <= settings.cost_tolerance * cost:
                cost = cost_new
                converged = True
                break
            cost = cost_new
        else:
            lam *= 10.0
            if lam > _MAX_DAMPING:
                break
    return _result(model, q, r, w, cost, it, converged)


def _rigid_fit(src, dst):
    """Least-squares rotation and translation mapping ``src`` onto ``dst`` (Kabsch)."""
    cs, cd = src.mean(axis=0), dst.mean(axis=0)
    H = (src - cs).T @ (dst - cd)
    U, _, Vt = np.linalg.svd(H)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    return R, cd - R @ cs


def seed_pose(model, obs, w):
    """Neutral joint angles with the pelvis placed by a rigid fit of pelvis markers."""
    from .body_model import apply_rigid_to_pose, forward_kinematics_array

    q = neutral_pose(model)
    seg = np.array([m.segment for m in model.markers])
    root = model.segments[0].name
    sel = (seg == root) & (w > 0) & np.isfinite(obs).all(axis=1)
    if sel.sum() < 3:
        return q
    neutral = forward_kinematics_array(model, q.values)[0]
    R, t = _rigid_fit(neutral[sel], obs[sel])
    try:
        return apply_rigid_to_pose(model, q, R, t)
    except (KeyError, ValueError):
        return q


def solve_trajectory(model, trajectories, correspondence=None, settings=None):
    """Solve every frame, warm-starting from the previous solved frame.

    Frames with fewer than four weighted markers are returned unconverged
    with ``pose=None``; nothing is raised per frame.
    """
    settings = settings or IkSettings()
    labels, weights = _weights_for(model, correspondence, settings)
    n_markers = len(model.marker_names)
    obs_all = np.full((trajectories.n_frames, n_markers, 3), np.nan)
    for i, lbl in enumerate(labels):
        if lbl is not None and lbl in trajectories.labels:
            obs_all[:, i] = trajectories.marker(lbl)

    # the weights already encode the correspondence, so solve in model order
    identity = MarkerCorrespondence(tuple((n, n, w) for n, w in zip(model.marker_names, weights))
                                    if np.any(weights > 0) else ())
    results = []
    previous = None
    for f in range(trajectories.n_frames):
        obs = obs_all[f]
        present_w = np.where(np.isfinite(obs).all(axis=1), weights, 0.0)
        if np.count_nonzero(present_w) < MIN_MARKERS:
            results.append(IkFrameResult(None, float("nan"), 0, False,
                                         np.full(n_markers, np.nan)))
            continue
        init = previous if previous is not None else seed_pose(model, obs, present_w)
        res = solve_frame(model, obs, identity, settings, init)
        results.append(res)
        previous = res.pose
    return results


def poses_array(results, model):
    """Stack solved poses into ``(F, n)``, NaN rows for failed frames."""
    out = np.full((len(results), len(model.coordinate_names)), np.nan)
    for f, res in enumerate(results):
        if res.pose is not None:
            out[f] = res.pose.values
    return out
