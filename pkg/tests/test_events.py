import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gaitkin import body_model as bm
from gaitkin import events as ev
from gaitkin import synth
from gaitkin.errors import GapError, NoCycleError, NoGaitError, SpanError


def _inputs(markers):
    return markers.marker("LHEEL"), markers.marker("RHEEL"), bm.pelvis_center(markers)


def _key(events):
    return [(e.side, e.kind, e.frame_index) for e in events]


def test_oracle_events_exact(scene):
    found = ev.detect_events(*_inputs(scene.markers), sample_rate=100.0)
    assert _key(found) == _key(scene.events)
    for e in found:
        assert e.time == e.frame_index / 100.0


def test_walking_axis_estimate(scene):
    axis = ev.estimate_walking_axis(bm.pelvis_center(scene.markers))
    np.testing.assert_allclose(axis, [1.0, 0.0, 0.0], atol=1e-3)


def test_stationary_subject():
    hl, hr, pc = (np.tile(p, (300, 1)) for p in ([0, 0, -0.1], [0, 0, 0.1], [0, 1, 0]))
    with pytest.raises(NoGaitError):
        ev.detect_events(hl, hr, pc)
    with pytest.raises(NoGaitError):
        ev.detect_events(hl, hr, pc, walking_axis=[1, 0, 0])


def test_short_span(scene):
    hl, hr, pc = (a[:99] for a in _inputs(scene.markers))
    with pytest.raises(SpanError):
        ev.detect_events(hl, hr, pc, sample_rate=100.0)


def test_gaps_rejected(scene):
    hl, hr, pc = (a.copy() for a in _inputs(scene.markers))
    hl[40] = np.nan
    with pytest.raises(GapError):
        ev.detect_events(hl, hr, pc)


def test_time_reversal_swaps_kinds(scene):
    hl, hr, pc = _inputs(scene.markers)
    n = len(pc)
    fwd = ev.detect_events(hl, hr, pc)
    rev = ev.detect_events(hl[::-1], hr[::-1], pc[::-1])
    swap = {ev.HEEL_STRIKE: ev.TOE_OFF, ev.TOE_OFF: ev.HEEL_STRIKE}
    expected = sorted((e.side, swap[e.kind], n - 1 - e.frame_index) for e in fwd)
    assert sorted(_key(rev)) == expected


@given(st.floats(-50, 50), st.floats(-5, 5), st.floats(-50, 50), st.floats(0.01, 100.0))
def test_translation_and_axis_scale_invariance(dx, dy, dz, scale):
    scene = _SCENE
    hl, hr, pc = _inputs(scene.markers)
    shift = np.array([dx, dy, dz])
    base = ev.detect_events(hl, hr, pc, walking_axis=[1, 0, 0])
    moved = ev.detect_events(hl + shift, hr + shift, pc + shift, walking_axis=[scale, 0, 0])
    assert _key(base) == _key(moved)


_SCENE = synth.generate_gait(synth.GaitRecipe(n_strides=3))


@given(st.integers(0, 2**31 - 1))
def test_kinds_alternate_under_noise(seed):
    rng = np.random.default_rng(seed)
    hl, hr, pc = (a + rng.normal(0, 0.004, a.shape) for a in _inputs(_SCENE.markers))
    found = ev.detect_events(hl, hr, pc)
    ev.validate_events(found)
    for side in ev.SIDES:
        kinds = [e.kind for e in found if e.side == side]
        assert all(a != b for a, b in zip(kinds, kinds[1:]))


def test_validate_events_rejects_repeats():
    bad = [ev.GaitEvent("right", ev.HEEL_STRIKE, 10, 0.1), ev.GaitEvent("right", ev.HEEL_STRIKE, 60, 0.6)]
    with pytest.raises(ValueError):
        ev.validate_events(bad)


# -- cycles ----------------------------------------------------------------------

def _hs(side, frame, fs=100.0):
    return ev.GaitEvent(side, ev.HEEL_STRIKE, frame, frame / fs)


def test_segment_single_cycle():
    cycles = ev.segment_cycles([_hs("right", 10), _hs("left", 60), _hs("right", 110)], 100.0)
    assert len(cycles) == 1
    (c,) = cycles
    assert (c.side, c.start, c.end, c.contralateral) == ("right", 10, 110, 60)


def test_segment_discards_cycle_without_contralateral():
    evs = [_hs("right", 10), _hs("right", 110), _hs("left", 160), _hs("right", 210)]
    cycles = ev.segment_cycles(evs, 100.0)
    assert [(c.start, c.end) for c in cycles] == [(110, 210)]


def test_segment_no_cycle():
    with pytest.raises(NoCycleError):
        ev.segment_cycles([_hs("right", 10), _hs("left", 60)], 100.0)


def test_oracle_cycle_count(scene):
    cycles = ev.segment_cycles(scene.events, 100.0)
    assert len(cycles.side("right")) == 4
    assert len(cycles.side("left")) == 4
    for c in cycles:
        assert c.start < c.contralateral < c.end


def test_cycle_invariant_enforced():
    with pytest.raises(ValueError):
        ev.GaitCycle("right", 10, 100, 100)


# -- normalization ---------------------------------------------------------------

def test_normalize_constant():
    out = ev.time_normalize(np.full(87, 2.5))
    assert out.shape == (101,)
    np.testing.assert_allclose(out, 2.5, atol=1e-12)


@given(st.integers(4, 400), st.floats(-100, 100), st.floats(-100, 100))
def test_normalize_linear_exact(n, a, b):
    out = ev.time_normalize(a + (b - a) * np.linspace(0, 1, n))
    np.testing.assert_allclose(out, a + (b - a) * np.linspace(0, 1, 101), atol=1e-9)


@given(st.integers(4, 300), st.integers(0, 2**31 - 1))
def test_normalize_endpoints(n, seed):
    y = np.random.default_rng(seed).normal(size=n)
    out = ev.time_normalize(y)
    assert len(out) == 101
    assert abs(out[0] - y[0]) < 1e-9 and abs(out[-1] - y[-1]) < 1e-9


def test_normalize_rate_invariance():
    def cycle(fs):
        t = np.arange(int(fs) + 1) / fs
        return np.sin(2 * np.pi * t) + 0.3 * np.cos(4 * np.pi * t)
    np.testing.assert_allclose(ev.time_normalize(cycle(100)), ev.time_normalize(cycle(200)), atol=1e-3)


def test_normalize_too_short():
    with pytest.raises(SpanError):
        ev.time_normalize([1.0, 2.0, 3.0])


def test_cycle_waveforms_stack(scene):
    cycles = ev.segment_cycles(scene.events, 100.0)
    knee = scene.poses[:, scene.model.coordinate_names.index("knee_angle_r")]
    stack = np.vstack(ev.cycle_waveforms(knee, cycles, "right"))
    assert stack.shape == (4, 101)


def test_weaker_of_repeated_kind_dropped():
    # The 0.4 s separation suppresses the shallow minimum at 80 (the deeper one
    # at 115 is within 40 samples), leaving maxima at 60 and 100 back to back:
    # the lower maximum is dropped.
    t = np.arange(300.0)
    g = lambda c, w: np.exp(-0.5 * ((t - c) / w) ** 2)  # noqa: E731
    signal = 0.10 * g(60, 5) + 0.16 * g(100, 5) - 0.05 * g(80, 4) - 0.12 * g(115, 4) + 0.12 * g(250, 10)
    found = ev._side_events(signal, "right", distance=40, prominence=0.02)
    assert [(f, k) for f, _, k in found] == [(100, ev.HEEL_STRIKE), (115, ev.TOE_OFF),
                                             (250, ev.HEEL_STRIKE)]
