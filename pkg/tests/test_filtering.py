import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.signal import sosfreqz

from gaitkin import filtering as flt
from gaitkin import synth
from gaitkin.errors import GapError, ParameterError
from gaitkin.io_formats import MarkerTrajectorySet

FS = 100.0


def _ts(values, fs=FS):
    return flt.TimeSeries(fs, np.asarray(values, dtype=float))


def test_constant_is_preserved():
    out = flt.lowpass_zero_phase(_ts(np.full(200, 3.7)))
    np.testing.assert_allclose(out.values, 3.7, atol=1e-9)


def test_design_is_half_order_per_pass():
    sos = flt.design_lowpass(6.0, FS, 4)
    assert sos.shape == (1, 6)  # one biquad = second order per pass
    # combined forward-backward gain at the cutoff is |H|^2 = 0.5
    _, h = sosfreqz(sos, worN=[6.0], fs=FS)
    assert abs(abs(h[0]) ** 2 - 0.5) < 1e-12


@pytest.mark.parametrize("cutoff,order", [(6.0, 4), (10.0, 4), (4.0, 8)])
def test_cutoff_sinusoid_amplitude_ratio(cutoff, order):
    t = np.arange(1000) / FS
    out = flt.lowpass_zero_phase(_ts(np.sin(2 * np.pi * cutoff * t)), cutoff, order).values
    core = slice(200, 800)
    ratio = np.sqrt(2) * np.std(out[core])
    assert abs(ratio - 0.5) / 0.5 < 0.02


def test_nyquist_violation():
    with pytest.raises(ParameterError):
        flt.lowpass_zero_phase(_ts(np.zeros(100)), cutoff=FS)
    with pytest.raises(ParameterError):
        flt.lowpass_zero_phase(_ts(np.zeros(100)), cutoff=0.0)


def test_odd_order_rejected():
    with pytest.raises(ParameterError):
        flt.lowpass_zero_phase(_ts(np.zeros(100)), order=3)


def test_gaps_rejected():
    x = np.zeros(100)
    x[50] = np.nan
    with pytest.raises(GapError):
        flt.lowpass_zero_phase(_ts(x))


def test_too_short_rejected():
    with pytest.raises(ParameterError):
        flt.lowpass_zero_phase(_ts(np.zeros(12)), order=4)


def test_symmetric_pulse_stays_centered():
    x = np.zeros(301)
    x[145:156] = np.hanning(11)
    out = flt.lowpass_zero_phase(_ts(x), 6.0).values
    assert int(np.argmax(out)) == 150
    np.testing.assert_allclose(out[150 - 60:150], out[150 + 60:150:-1], atol=1e-12)


@given(arrays(float, 120, elements=st.floats(-10, 10)),
       arrays(float, 120, elements=st.floats(-10, 10)),
       st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(x, y, a, b):
    f = lambda v: flt.lowpass_zero_phase(_ts(v)).values  # noqa: E731
    np.testing.assert_allclose(f(a * x + b * y), a * f(x) + b * f(y), atol=1e-9)


@given(st.integers(13, 300))
def test_length_preserved(n):
    x = np.sin(np.arange(n) / 7.0)
    assert len(flt.lowpass_zero_phase(_ts(x)).values) == n
    assert len(flt.interpolate_gaps(_ts(x)).values) == n


# -- gap filling -----------------------------------------------------------------

def test_single_gap_on_ramp():
    out = flt.interpolate_gaps(_ts([0.0, 1.0, np.nan, 3.0, 4.0]))
    assert out.values[2] == pytest.approx(2.0, abs=1e-12)


def test_gap_longer_than_max_unchanged():
    x = np.arange(30, dtype=float)
    x[10:15] = np.nan
    out = flt.interpolate_gaps(_ts(x), max_gap=4).values
    assert np.isnan(out[10:15]).all()
    out = flt.interpolate_gaps(_ts(x), max_gap=5).values
    np.testing.assert_allclose(out[10:15], np.arange(10, 15), atol=1e-9)


def test_boundary_gaps_left_absent():
    x = np.arange(20, dtype=float)
    x[:2] = np.nan
    x[-3:] = np.nan
    out = flt.interpolate_gaps(_ts(x)).values
    assert np.isnan(out[:2]).all() and np.isnan(out[-3:]).all()


def test_cubic_reproduced_exactly():
    t = np.arange(40, dtype=float)
    x = 0.01 * t ** 3 - 0.3 * t ** 2 + 2 * t - 5
    g = x.copy()
    g[17:20] = np.nan
    out = flt.interpolate_gaps(_ts(g), max_gap=10).values
    np.testing.assert_allclose(out, x, atol=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_present_samples_untouched(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=60)
    x[rng.random(60) < 0.2] = np.nan
    out = flt.interpolate_gaps(_ts(x)).values
    present = ~np.isnan(x)
    np.testing.assert_array_equal(out[present], x[present])


# -- trajectories ----------------------------------------------------------------

@pytest.fixture(scope="module")
def clean():
    return synth.generate_gait(synth.GaitRecipe(n_strides=3)).markers


def test_gap_free_set_all_filtered(clean):
    out, flagged = flt.filter_trajectories(clean)
    assert flagged == []
    assert not out.gap_mask.any()
    assert out.labels == clean.labels


def test_fully_absent_marker_flagged_untouched(clean):
    pos = clean.positions.copy()
    pos[:, 4] = np.nan
    out, flagged = flt.filter_trajectories(clean.replace(positions=pos))
    assert flagged == [clean.labels[4]]
    assert np.isnan(out.positions[:, 4]).all()


def test_long_gap_marker_passes_through_unfiltered(clean):
    pos = clean.positions.copy()
    pos[100:140, 2] = np.nan
    out, flagged = flt.filter_trajectories(clean.replace(positions=pos))
    assert flagged == [clean.labels[2]]
    present = ~np.isnan(pos[:, 2, 0])
    np.testing.assert_array_equal(out.positions[present, 2], pos[present, 2])


def test_noise_reduced(clean):
    rng = np.random.default_rng(5)
    noisy = clean.positions + rng.normal(0, 0.003, clean.positions.shape)
    pos = noisy.copy()
    pos[50:55, 7] = np.nan
    out, flagged = flt.filter_trajectories(MarkerTrajectorySet(clean.sample_rate, clean.labels, pos))
    assert flagged == []
    err_in = np.sqrt(np.mean((noisy - clean.positions) ** 2))
    err_out = np.sqrt(np.mean((out.positions - clean.positions) ** 2))
    assert err_out < 0.5 * err_in


def test_bad_parameters_fail_fast(clean):
    with pytest.raises(ParameterError):
        flt.filter_trajectories(clean, cutoff=80.0)
