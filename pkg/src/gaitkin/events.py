"""Heel-strike / toe-off detection, cycle segmentation and time normalization.

Events come from the heel position relative to the pelvis center, projected
on the walking direction: heel strikes are its maxima (heel furthest ahead),
toe offs its minima.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

from .errors import GapError, NoCycleError, NoGaitError, SpanError

HEEL_STRIKE = "heel_strike"
TOE_OFF = "toe_off"
SIDES = ("right", "left")
NORMALIZED_SAMPLES = 101
DEFAULT_MIN_SEPARATION = 0.4   # s
DEFAULT_MIN_PROMINENCE = 0.02  # m
VERTICAL = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class GaitEvent:
    side: str
    kind: str
    frame_index: int
    time: float


@dataclass(frozen=True)
class GaitCycle:
    side: str
    start: int          # ipsilateral heel strike frame
    end: int            # next ipsilateral heel strike frame
    contralateral: int  # contralateral heel strike frame, start < c < end

    def __post_init__(self):
        if not self.start < self.contralateral < self.end:
            raise ValueError("contralateral strike must lie strictly inside the cycle")


@dataclass(frozen=True)
class GaitCycleSet:
    cycles: tuple
    sample_rate: float

    def __len__(self):
        return len(self.cycles)

    def __iter__(self):
        return iter(self.cycles)

    def side(self, side):
        return [c for c in self.cycles if c.side == side]


def estimate_walking_axis(pelvis_center):
    """Unit horizontal direction of the pelvis net displacement."""
    p = np.asarray(pelvis_center, dtype=float)
    p = p[np.isfinite(p).all(axis=1)]
    if len(p) < 2:
        raise SpanError("need at least two pelvis samples to estimate the walking axis")
    d = p[-1] - p[0]
    d = d - (d @ VERTICAL) * VERTICAL
    n = np.linalg.norm(d)
    if n < 1e-9:
        raise NoGaitError("pelvis shows no horizontal displacement")
    return d / n


def _unit(axis):
    a = np.asarray(axis, dtype=float).reshape(3)
    n = np.linalg.norm(a)
    if not n > 0:
        raise ValueError("walking axis must be non-zero")
    return a / n


def _side_events(signal, side, distance, prominence):
    hs, _ = find_peaks(signal, distance=distance, prominence=prominence)
    to, _ = find_peaks(-signal, distance=distance, prominence=prominence)
    cand = sorted([(int(f), HEEL_STRIKE) for f in hs] + [(int(f), TOE_OFF) for f in to])
    kept = []
    for frame, kind in cand:
        if kept and kept[-1][1] == kind:
            prev = kept[-1][0]
            # heel strike strength is height of the maximum, toe off depth of the minimum
            stronger = signal[frame] > signal[prev] if kind == HEEL_STRIKE else signal[frame] < signal[prev]
            if stronger:
                kept[-1] = (frame, kind)
            continue
        kept.append((frame, kind))
    return [(f, side, k) for f, k in kept]


def detect_events(heel_left, heel_right, pelvis_center, walking_axis=None,
                  sample_rate=100.0, min_separation=DEFAULT_MIN_SEPARATION,
                  min_prominence=DEFAULT_MIN_PROMINENCE):
    """Detect heel strikes and toe offs for both feet.

    Trajectories are ``(F, 3)`` arrays. ``walking_axis`` is any positive
    multiple of the walking direction; None estimates it from the pelvis.
    Returns events sorted by frame, alternating per side.
    """
    hl, hr, pc = (np.asarray(a, dtype=float) for a in (heel_left, heel_right, pelvis_center))
    n = len(pc)
    if not (len(hl) == len(hr) == n):
        raise ValueError("trajectories must have equal length")
    if n / sample_rate < 1.0:
        raise SpanError(f"trajectories span {n / sample_rate:.3f} s, need at least 1 s")
    if not (np.isfinite(hl).all() and np.isfinite(hr).all() and np.isfinite(pc).all()):
        raise GapError("heel and pelvis trajectories must be gap-free")
    axis = estimate_walking_axis(pc) if walking_axis is None else _unit(walking_axis)
    distance = max(1, int(math.ceil(min_separation * sample_rate)))
    raw = []
    for side, heel in (("left", hl), ("right", hr)):
        raw += _side_events((heel - pc) @ axis, side, distance, min_prominence)
    if not any(k == HEEL_STRIKE for _, _, k in raw):
        raise NoGaitError("no heel strikes found")
    raw.sort(key=lambda e: (e[0], e[1]))
    return [GaitEvent(side, kind, f, f / sample_rate) for f, side, kind in raw]


def validate_events(events):
    """Raise ValueError unless per-side events strictly increase and alternate."""
    for side in SIDES:
        ev = [e for e in events if e.side == side]
        for a, b in zip(ev, ev[1:]):
            if not b.time > a.time:
                raise ValueError(f"{side} events not strictly increasing at frame {b.frame_index}")
            if a.kind == b.kind:
                raise ValueError(f"{side} events do not alternate at frame {b.frame_index}")


def segment_cycles(events, sample_rate) -> GaitCycleSet:
    """One cycle per consecutive same-side heel-strike pair enclosing a contralateral strike."""
    strikes = {s: sorted(e.frame_index for e in events
                         if e.side == s and e.kind == HEEL_STRIKE) for s in SIDES}
    cycles = []
    for side in SIDES:
        other = strikes["left" if side == "right" else "right"]
        for a, b in zip(strikes[side], strikes[side][1:]):
            inside = [c for c in other if a < c < b]
            if inside:
                cycles.append(GaitCycle(side, a, b, inside[0]))
    if not cycles:
        raise NoCycleError("no complete gait cycle in the event list")
    cycles.sort(key=lambda c: (c.start, c.side))
    return GaitCycleSet(tuple(cycles), float(sample_rate))


def time_normalize(waveform, n_samples=NORMALIZED_SAMPLES):
    """Resample one cycle (start and end strikes inclusive) onto 0..100 %."""
    y = np.asarray(waveform, dtype=float)
    if len(y) < 4:
        raise SpanError(f"cycle has {len(y)} samples, need at least 4")
    x = np.arange(len(y), dtype=float)
    out = CubicSpline(x, y, axis=0)(np.linspace(0.0, x[-1], n_samples))
    out[0], out[-1] = y[0], y[-1]
    return out


def cycle_waveforms(values, cycles, side=None):
    """Normalized waveforms of ``values`` over each cycle (optionally one side)."""
    values = np.asarray(values, dtype=float)
    return [time_normalize(values[c.start:c.end + 1]) for c in cycles
            if side is None or c.side == side]
