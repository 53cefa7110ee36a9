import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gaitkin import io_formats as iof
from gaitkin.errors import CalibrationError, FormatError

FIXTURES = Path(__file__).parent / "fixtures"


def _doc(people):
    return json.dumps({"version": 1.3, "people": people}).encode()


def _person(trip):
    return {"person_id": [-1], "pose_keypoints_2d": [float(x) for x in np.ravel(trip)]}


# -- keypoints -------------------------------------------------------------------

def test_keypoint_single_person_25_landmarks():
    rng = np.random.default_rng(0)
    trip = np.column_stack([rng.uniform(0, 1920, 25), rng.uniform(0, 1080, 25), np.ones(25)])
    frame = iof.parse_keypoint_file(_doc([_person(trip)]), "cam0", 7)
    assert len(frame) == 25
    assert frame.camera_id == "cam0" and frame.frame_index == 7
    np.testing.assert_array_equal(frame.landmark_ids, np.arange(25))
    np.testing.assert_allclose(frame.uv, trip[:, :2])
    np.testing.assert_allclose(frame.confidence, 1.0)
    assert frame.points[3] == (3, trip[3, 0], trip[3, 1], 1.0)


def test_keypoint_empty_people():
    frame = iof.parse_keypoint_file(_doc([]), "cam0", 0)
    assert len(frame) == 0


def test_keypoint_selects_highest_total_confidence():
    weak = np.column_stack([np.zeros(10), np.zeros(10), np.full(10, 0.3)])
    strong = np.column_stack([np.ones(10), np.ones(10), np.full(10, 1.0)])
    frame = iof.parse_keypoint_file(_doc([_person(weak), _person(strong)]), "c", 0)
    np.testing.assert_allclose(frame.confidence.sum(), 10.0)
    np.testing.assert_allclose(frame.uv, 1.0)


def test_keypoint_malformed_reports_byte_offset():
    with pytest.raises(FormatError) as err:
        iof.parse_keypoint_file(b'{"people": [ {"pose_keypoints_2d": [1, 2,]} ]}', "c", 0)
    assert err.value.offset is not None
    assert "byte" in str(err.value)


def test_keypoint_triplet_count_not_divisible_by_3():
    with pytest.raises(FormatError, match="divisible by 3"):
        iof.parse_keypoint_file(_doc([{"pose_keypoints_2d": [1.0, 2.0, 0.5, 4.0]}]), "c", 0)


def test_keypoint_confidence_out_of_range():
    with pytest.raises(FormatError):
        iof.parse_keypoint_file(_doc([_person([[1.0, 2.0, 1.5]])]), "c", 0)


def test_keypoint_frame_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        iof.KeypointFrame("c", 0, [1, 1], np.zeros((2, 2)), np.ones(2))


def test_keypoint_stream_round_trip():
    rng = np.random.default_rng(1)
    frames = [iof.KeypointFrame("cam3", i, np.arange(5), rng.uniform(0, 100, (5, 2)),
                                rng.uniform(0, 1, 5)) for i in range(4)]
    back = iof.parse_keypoint_stream(iof.write_keypoint_stream(frames, "cam3"))
    assert [f.frame_index for f in back] == [0, 1, 2, 3]
    for a, b in zip(frames, back):
        np.testing.assert_array_equal(a.uv, b.uv)
        np.testing.assert_array_equal(a.confidence, b.confidence)
        assert b.camera_id == "cam3"


def test_pose_only_heel_landmarks_default():
    assert iof.POSE_ONLY_HEEL_LANDMARKS == {"left": 21, "right": 24}


# -- TRC -------------------------------------------------------------------------

def test_trc_fixture_mm_to_m():
    markers, subject = iof.parse_trc((FIXTURES / "two_markers_mm.trc").read_text())
    assert subject is None
    assert markers.sample_rate == 100.0
    assert markers.labels == ("A", "B")
    assert markers.n_frames == 3
    np.testing.assert_allclose(markers.positions[0, 0], [1.0, 0.9, -0.05])
    np.testing.assert_allclose(markers.positions[2, 1], [1.22, 0.952, 0.052])


def test_trc_blank_cells_are_gaps():
    markers, _ = iof.parse_trc((FIXTURES / "two_markers_mm.trc").read_text())
    assert markers.gap_mask[1, 1]
    assert np.isnan(markers.positions[1, 1]).all()
    assert not markers.gap_mask[1, 0]


def _fixture_lines():
    return (FIXTURES / "two_markers_mm.trc").read_text().splitlines()


def test_trc_label_count_mismatch():
    lines = _fixture_lines()
    lines[3] = lines[3] + "\tC\t\t"
    with pytest.raises(FormatError):
        iof.parse_trc("\n".join(lines) + "\n")


def test_trc_wrong_column_count_reports_line():
    lines = _fixture_lines()
    lines[7] = lines[7] + "\t3.0"
    with pytest.raises(FormatError) as err:
        iof.parse_trc("\n".join(lines) + "\n")
    assert err.value.line == 8


def test_trc_nonpositive_rate():
    lines = _fixture_lines()
    lines[2] = lines[2].replace("100", "0", 1)
    with pytest.raises(FormatError, match="DataRate"):
        iof.parse_trc("\n".join(lines) + "\n")


def test_trc_frame_count_mismatch_is_an_error():
    lines = _fixture_lines()[:-1]
    with pytest.raises(FormatError):
        iof.parse_trc("\n".join(lines) + "\n")


def test_trc_subject_header_round_trip():
    markers, _ = iof.parse_trc((FIXTURES / "two_markers_mm.trc").read_text())
    subject = iof.SubjectInfo(72.5, 1.81, "S01")
    back, subj = iof.parse_trc(iof.write_trc(markers, subject=subject))
    assert subj == subject
    np.testing.assert_allclose(back.positions, markers.positions, atol=1e-9)


@given(arrays(float, (6, 3, 3), elements=st.floats(-5, 5)),
       arrays(bool, (6, 3)),
       st.sampled_from(["m", "mm", "cm"]))
def test_trc_round_trip_property(pos, gaps, units):
    pos = pos.copy()
    pos[gaps] = np.nan
    markers = iof.MarkerTrajectorySet(120.0, ("a", "b", "c"), pos)
    back, _ = iof.parse_trc(iof.write_trc(markers, units=units))
    assert back.labels == markers.labels and back.n_frames == markers.n_frames
    np.testing.assert_array_equal(back.gap_mask, markers.gap_mask)
    tol = {"m": 1e-6, "cm": 1e-8, "mm": 1e-9}[units]
    np.testing.assert_allclose(back.positions, markers.positions, atol=tol, equal_nan=True)


def test_marker_set_partial_nan_becomes_full_gap():
    pos = np.zeros((2, 1, 3))
    pos[1, 0, 1] = np.nan
    m = iof.MarkerTrajectorySet(100, ["x"], pos)
    assert np.isnan(m.positions[1, 0]).all()


def test_subject_info_validation():
    with pytest.raises(ValueError):
        iof.SubjectInfo(0.0, 1.7)
    with pytest.raises(ValueError):
        iof.SubjectInfo(70.0, -1.0)


# -- calibration -----------------------------------------------------------------

def test_calibration_two_cameras_preserve_order():
    cams = iof.parse_calibration((FIXTURES / "two_cameras.json").read_text())
    assert [c.name for c in cams] == ["front", "side"]
    np.testing.assert_allclose(cams[1].distortion, [-0.1, 0.02])
    back = iof.parse_calibration(iof.write_calibration(cams))
    for a, b in zip(cams, back):
        np.testing.assert_array_equal(a.intrinsics, b.intrinsics)
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.translation, b.translation)


def test_calibration_identity_camera():
    doc = {"cam": {"K": [1000, 0, 0, 0, 1000, 0, 0, 0, 1], "R": np.eye(3).ravel().tolist(),
                   "t": [0, 0, 0]}}
    (cam,) = iof.parse_calibration(json.dumps(doc))
    assert cam.name == "cam"


def test_calibration_reflection_rejected():
    R = np.diag([1.0, 1.0, -1.0])
    doc = {"mirror": {"K": [1000, 0, 0, 0, 1000, 0, 0, 0, 1], "R": R.ravel().tolist(),
                      "t": [0, 0, 0]}}
    with pytest.raises(CalibrationError, match="mirror"):
        iof.parse_calibration(json.dumps(doc))


def test_calibration_non_orthonormal_names_camera():
    R = np.eye(3) * 1.01
    doc = {"cameras": [{"name": "skewed", "K": np.eye(3).ravel().tolist(),
                        "R": R.ravel().tolist(), "t": [0, 0, 0]}]}
    with pytest.raises(CalibrationError, match="skewed"):
        iof.parse_calibration(json.dumps(doc))


# -- reports ---------------------------------------------------------------------

ROWS = [{"side": "right", "stride_time": 1.0, "stride_length": 1.3000004},
        {"side": "left", "stride_time": 0.99, "stride_length": float("nan")}]


def test_report_deterministic():
    assert iof.write_report(ROWS, "csv") == iof.write_report(ROWS, "csv")
    assert iof.write_report(ROWS, "json") == iof.write_report(ROWS, "json")


def test_report_empty_is_header_only():
    out = iof.write_report([], "csv", columns=["side", "stride_time"])
    assert out == b"side,stride_time\n"


def test_report_fixed_six_decimals():
    text = iof.write_report(ROWS, "csv").decode()
    assert "1.300000" in text and "0.990000" in text


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_report_round_trip(fmt):
    back = iof.read_report(iof.write_report(ROWS, fmt), fmt)
    assert back[0]["side"] == "right"
    assert abs(float(back[0]["stride_length"]) - 1.3000004) < 1e-6
    assert back[1]["stride_length"] is None


def test_report_nested_json_sorted_keys():
    out = iof.write_report({"b": 1.0, "a": {"z": 2, "y": [1.5, None]}}, "json")
    assert out == b'{"a":{"y":[1.500000,null],"z":2},"b":1.000000}\n'
    assert json.loads(out)["a"]["y"] == [1.5, None]


def test_report_unknown_format():
    with pytest.raises(ValueError):
        iof.write_report(ROWS, "xml")
