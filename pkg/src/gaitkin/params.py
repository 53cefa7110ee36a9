"""Spatiotemporal parameters, range of motion and waveform summaries."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DataError, ShapeError, SpanError


@dataclass(frozen=True)
class SpatiotemporalRecord:
    side: str
    stride_time: float    # s
    stride_length: float  # m
    step_time: float      # s
    step_length: float    # m
    start_frame: int = -1
    end_frame: int = -1

    def as_row(self):
        return asdict(self)


COLUMNS = ("side", "start_frame", "end_frame", "stride_time", "stride_length",
           "step_time", "step_length")
PARAMETERS = ("stride_time", "stride_length", "step_time", "step_length")


@dataclass(frozen=True)
class WaveformSummary:
    mean: np.ndarray
    sd: np.ndarray
    n_cycles: int


def _heel_at(heel, frame, side):
    p = heel[frame]
    if not np.isfinite(p).all():
        raise DataError(f"{side} heel has no data at frame {frame}")
    return p


def spatiotemporal(cycles, heel_left, heel_right, walking_axis):
    """Per-cycle stride and step parameters; lengths measured along the walking axis.

    step_length is the along-axis distance between the ipsilateral heel at the
    closing strike and the contralateral heel at its strike inside the cycle.
    """
    axis = np.asarray(walking_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    heels = {"left": np.asarray(heel_left, dtype=float),
             "right": np.asarray(heel_right, dtype=float)}
    fs = cycles.sample_rate
    out = []
    for c in cycles:
        ipsi = heels[c.side]
        contra = heels["left" if c.side == "right" else "right"]
        a = _heel_at(ipsi, c.start, c.side) @ axis
        b = _heel_at(ipsi, c.end, c.side) @ axis
        o = _heel_at(contra, c.contralateral, "contralateral") @ axis
        out.append(SpatiotemporalRecord(
            side=c.side,
            stride_time=(c.end - c.start) / fs,
            stride_length=abs(b - a),
            step_time=(c.end - c.contralateral) / fs,
            step_length=abs(b - o),
            start_frame=c.start,
            end_frame=c.end,
        ))
    return out


def rom(waveform):
    """Range of motion: max minus min (NaN samples ignored)."""
    w = np.asarray(waveform, dtype=float).reshape(-1)
    w = w[np.isfinite(w)]
    if len(w) == 0:
        raise SpanError("empty waveform")
    return float(w.max() - w.min())


def mean_sd_waveform(cycles):
    """Pointwise mean and population SD of equally long normalized cycles."""
    cycles = [np.asarray(c, dtype=float) for c in cycles]
    if not cycles:
        raise SpanError("need at least one cycle")
    if len({c.shape for c in cycles}) != 1:
        raise ShapeError(f"cycle lengths differ: {sorted({len(c) for c in cycles})}")
    stack = np.vstack(cycles)
    return WaveformSummary(stack.mean(axis=0), stack.std(axis=0, ddof=0), len(cycles))
