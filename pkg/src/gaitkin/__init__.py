"""Markerless gait analysis from calibrated multi-view 2D keypoints.

Pipeline: triangulate keypoints into 3D markers, gap-fill and low-pass them,
fit a scaled lower-limb skeletal model by inverse kinematics, detect heel
strikes and toe offs, and report spatiotemporal parameters, normalized cycle
waveforms and agreement statistics against a reference method.
"""

from ._kernels import BACKEND
from .body_model import (MarkerCorrespondence, PoseVector, SkeletonModel, default_model,
                         forward_kinematics, scale_model)
from .camera import CameraModel, Observation, project, triangulate, triangulate_sequence, undistort
from .errors import GaitkinError
from .events import (GaitCycleSet, GaitEvent, detect_events, segment_cycles,
                     time_normalize)
from .filtering import (TimeSeries, filter_trajectories, interpolate_gaps,
                        lowpass_zero_phase)
from .ik import IkFrameResult, IkSettings, ik_cost, marker_jacobian, solve_frame, solve_trajectory
from .io_formats import (KeypointFrame, MarkerTrajectorySet, SubjectInfo, parse_calibration,
                         parse_keypoint_file, parse_trc, write_report, write_trc)
from .params import SpatiotemporalRecord, WaveformSummary, mean_sd_waveform, rom, spatiotemporal
from .stats import AgreementStats, bland_altman, compare_rom_sets, mae, pearson
from .synth import GaitRecipe, generate_gait, render_views

__version__ = "0.1.0"
