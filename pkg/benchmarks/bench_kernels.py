#!/usr/bin/env python3
"""Time the numba and pure-numpy kernel paths on oracle-sized workloads.

Both implementations are importable side by side, so one process times both.
Each kernel is called once untimed (JIT compile / cache load), then timed as
the best of ``--repeat`` runs. Results are also cross-checked for agreement.

    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import time

import numpy as np

from gaitkin import _kernels, synth
from gaitkin.camera import _normalize, _stack_cameras


def best_time(fn, repeat):
    fn()  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(n_strides):
    recipe = synth.GaitRecipe(n_strides=n_strides)
    scene = synth.generate_gait(recipe)
    cams = synth.default_camera_rig(distortion=(-0.05, 0.01))
    streams = synth.render_views(scene.markers, cams, pixel_noise_sd=1.0, seed=0)
    F, M, C = scene.markers.n_frames, len(scene.markers.labels), len(cams)
    uv = np.stack([np.stack([fr.uv for fr in s]) for s in streams], axis=2).reshape(F * M, C, 2)
    w = np.ones((F * M, C))
    xy = np.stack([_kernels.undistort_normalized_numpy(_normalize(cam, uv[:, c]), *cam.distortion)[0]
                   for c, cam in enumerate(cams)], axis=1)
    raw = np.stack([_normalize(cam, uv[:, c]) for c, cam in enumerate(cams)], axis=1)
    K, dist, R, t = _stack_cameras(cams)
    arrays = scene.model.arrays
    k1, k2 = cams[0].distortion
    return {
        "undistort": (
            lambda: _kernels.undistort_normalized_numpy(raw[:, 0], k1, k2),
            lambda: _kernels.undistort_normalized_jit(raw[:, 0], k1, k2),
            f"{F * M} points"),
        "triangulate": (
            lambda: _kernels.triangulate_batch_numpy(xy, uv, w, K, dist, R, t),
            lambda: _kernels.triangulate_batch_jit(xy, uv, w, K, dist, R, t),
            f"{F * M} points x {C} views"),
        "fk+jacobian (batch)": (
            lambda: _kernels.chain_kinematics_numpy(scene.poses, *arrays),
            lambda: _kernels.chain_kinematics_jit(scene.poses, *arrays),
            f"{F} frames"),
        "fk+jacobian (1 frame)": (
            lambda: _kernels.chain_kinematics_numpy(scene.poses[:1], *arrays),
            lambda: _kernels.chain_kinematics_jit(scene.poses[:1], *arrays),
            "single frame, as inside an IK iteration"),
    }


def _max_diff(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return max(float(np.nanmax(np.abs(np.asarray(x, float) - np.asarray(y, float))))
               for x, y in zip(a, b) if x is not None)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--strides", type=int, default=5, help="oracle strides (100 frames each)")
    args = parser.parse_args(argv)
    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<24}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>9}{'max |diff|':>12}  size")
    for name, (np_fn, jit_fn, size) in workloads(args.strides).items():
        t_np = best_time(np_fn, args.repeat)
        t_jit = best_time(jit_fn, args.repeat)
        diff = _max_diff(np_fn(), jit_fn())
        print(f"{name:<24}{1e3 * t_np:>12.3f}{1e3 * t_jit:>12.3f}{t_np / t_jit:>8.1f}x"
              f"{diff:>12.2e}  {size}")


if __name__ == "__main__":
    main()
