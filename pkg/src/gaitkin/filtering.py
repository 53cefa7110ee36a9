"""Gap filling and zero-phase low-pass filtering of marker time series."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import butter, sosfiltfilt

from .errors import GapError, ParameterError
from .io_formats import MarkerTrajectorySet

DEFAULT_CUTOFF = 6.0
DEFAULT_ORDER = 4
DEFAULT_MAX_GAP = 10


@dataclass(frozen=True)
class TimeSeries:
    sample_rate: float
    values: np.ndarray

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ParameterError("sample_rate must be > 0")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))

    def __len__(self):
        return len(self.values)

    @property
    def gaps(self):
        return np.isnan(self.values)


def design_lowpass(cutoff, sample_rate, order=DEFAULT_ORDER):
    """Second-order sections for one pass of the zero-phase filter.

    ``order`` is the order of the combined forward-backward filter, so each
    pass is a Butterworth of order ``order // 2``.
    """
    if order <= 0 or order % 2:
        raise ParameterError(f"order must be a positive even integer, got {order}")
    nyq = sample_rate / 2.0
    if not 0 < cutoff < nyq:
        raise ParameterError(f"cutoff {cutoff} Hz must lie in (0, {nyq}) Hz")
    return butter(order // 2, cutoff, btype="low", fs=sample_rate, output="sos")


def lowpass_zero_phase(series: TimeSeries, cutoff: float = DEFAULT_CUTOFF,
                       order: int = DEFAULT_ORDER) -> TimeSeries:
    sos = design_lowpass(cutoff, series.sample_rate, order)
    x = series.values
    if np.isnan(x).any():
        raise GapError("series has gaps; interpolate before filtering")
    pad = 3 * order
    if len(x) <= pad:
        raise ParameterError(f"series length {len(x)} must exceed 3*order = {pad}")
    y = sosfiltfilt(sos, x, padtype="odd", padlen=pad)
    return TimeSeries(series.sample_rate, y)


def _gap_runs(mask):
    """(start, stop) of each run of True in ``mask``."""
    if not mask.any():
        return []
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def interpolate_gaps(series: TimeSeries, max_gap: int = DEFAULT_MAX_GAP) -> TimeSeries:
    """Fill interior gaps of at most ``max_gap`` samples with a cubic spline.

    The spline runs through every present sample (not-a-knot ends), so cubic
    data is reproduced exactly. Boundary gaps and longer gaps stay absent.
    With only two or three present samples the fill is linear.
    """
    x = series.values.copy()
    gaps = np.isnan(x)
    present = np.flatnonzero(~gaps)
    fill = []
    for start, stop in _gap_runs(gaps):
        if start == 0 or stop == len(x) or stop - start > max_gap:
            continue
        fill.append(np.arange(start, stop))
    if not fill or len(present) < 2:
        return TimeSeries(series.sample_rate, x)
    idx = np.concatenate(fill)
    if len(present) >= 4:
        x[idx] = CubicSpline(present, x[present])(idx)
    else:
        x[idx] = np.interp(idx, present, x[present])
    return TimeSeries(series.sample_rate, x)


def filter_trajectories(markers: MarkerTrajectorySet, cutoff: float = DEFAULT_CUTOFF,
                        order: int = DEFAULT_ORDER, max_gap: int = DEFAULT_MAX_GAP):
    """Gap-fill then low-pass every marker axis.

    Returns ``(filtered_set, flagged_labels)``. A marker that still has gaps
    after filling (or is too short to filter) is returned gap-filled but
    unfiltered, and its label is flagged.
    """
    design_lowpass(cutoff, markers.sample_rate, order)  # fail fast on bad parameters
    out = markers.positions.copy()
    flagged = []
    for j, label in enumerate(markers.labels):
        filled = np.empty((markers.n_frames, 3))
        for a in range(3):
            filled[:, a] = interpolate_gaps(
                TimeSeries(markers.sample_rate, markers.positions[:, j, a]), max_gap).values
        if np.isnan(filled).any() or markers.n_frames <= 3 * order:
            out[:, j] = filled
            flagged.append(label)
            continue
        for a in range(3):
            out[:, j, a] = lowpass_zero_phase(
                TimeSeries(markers.sample_rate, filled[:, a]), cutoff, order).values
    return markers.replace(positions=out), flagged
