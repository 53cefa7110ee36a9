"""Command-line pipeline: ``gaitkin {synth,triangulate,analyze,compare}``.

Settings come from a JSON config (``--config``) with command-line flags taking
precedence. Relative paths inside a config resolve against the config file's
directory; relative paths given as flags resolve against the working
directory. Environment variables are never consulted for settings.

Exit codes: 0 success, 1 a pipeline stage failed (the message names the
stage), 2 bad usage, unreadable config or a missing input path.
"""

from __future__ import annotations

import argparse
import json
import sys
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import body_model, camera, events, filtering, ik, io_formats, params, plots, stats, synth
from .errors import GaitkinError, PairingError

EXIT_OK, EXIT_STAGE, EXIT_USAGE = 0, 1, 2

# joint coordinates summarized per cycle; "_r"/"_l" is appended for leg joints
LEG_QUANTITIES = body_model.LEG_COORDS
PELVIS_QUANTITIES = ("pelvis_tilt", "pelvis_obliquity", "pelvis_rotation", "pelvis_ty")
PLOTTED = (("knee_angle", "knee flexion", "deg"),
           ("pelvis_ty", "pelvis vertical translation", "m"),
           ("hip_flexion", "hip flexion", "deg"))
HEELS = {"left": "LHEEL", "right": "RHEEL"}
PELVIS_MARKERS = ("RASIS", "LASIS", "RPSIS", "LPSIS")


class UsageError(Exception):
    """Bad configuration or missing input; exit code 2."""


class StageError(Exception):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


@dataclass
class PipelineConfig:
    calibration: Path | None = None
    keypoints: list = field(default_factory=list)   # one stream file per camera, calibration order
    landmarks: dict | None = None                    # landmark id -> marker label
    markers: Path | None = None                      # triangulated (or reference) TRC
    static: Path | None = None                       # static trial TRC for scaling
    reference: Path | None = None                    # reference analysis directory (compare)
    candidate: Path | None = None                    # candidate analysis directory (compare)
    output: Path = Path("output")
    sample_rate: float = 100.0
    min_confidence: float = camera.DEFAULT_MIN_CONFIDENCE
    filter: dict = field(default_factory=lambda: {
        "enabled": True, "cutoff": filtering.DEFAULT_CUTOFF,
        "order": filtering.DEFAULT_ORDER, "max_gap": filtering.DEFAULT_MAX_GAP})
    ik: dict = field(default_factory=dict)            # IkSettings fields
    events: dict = field(default_factory=lambda: {
        "min_separation": events.DEFAULT_MIN_SEPARATION,
        "min_prominence": events.DEFAULT_MIN_PROMINENCE})
    correspondence: dict | None = None                # virtual marker -> label or [label, weight]
    label: str = "markerless"

    _PATHS = ("calibration", "markers", "static", "reference", "candidate", "output")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError(f"config {path}: top level must be an object")
        return cls.from_mapping(doc, base=path.parent)

    @classmethod
    def from_mapping(cls, doc, base=Path(".")):
        cfg = cls()
        known = set(cls.__dataclass_fields__) - {"_PATHS"}
        unknown = set(doc) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in doc.items():
            if key in cls._PATHS and value is not None:
                value = base / value
            elif key == "keypoints":
                value = [base / p for p in value]
            elif key in ("filter", "events"):
                value = {**getattr(cfg, key), **value}
            setattr(cfg, key, value)
        return cfg


def _require(path, what):
    if path is None:
        raise UsageError(f"no {what} path given")
    if not Path(path).exists():
        raise UsageError(f"{what} not found: {path}")
    return Path(path)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (GaitkinError, ValueError, KeyError) as exc:
        raise StageError(name, exc) from exc


def _write(path, data):
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    path.write_bytes(data)
    return path


def _verify(paths):
    """Re-read every written file with this package's own parsers."""
    for p in paths:
        text = p.read_text(encoding="utf-8")
        if p.suffix == ".trc":
            io_formats.parse_trc(text)
        elif p.suffix == ".csv":
            io_formats.read_report(text, "csv")
        elif p.suffix == ".json":
            json.loads(text)
        elif p.suffix == ".svg":
            ET.fromstring(text.encode("utf-8"))


# -- triangulate -----------------------------------------------------------------


def _landmark_labels(cfg):
    """Landmark id -> label, in numeric id order (JSON keys are strings)."""
    if cfg.landmarks is None:
        return None
    return {int(k): str(v) for k, v in sorted(cfg.landmarks.items(), key=lambda kv: int(kv[0]))}


def gap_statistics(markers):
    """Per-marker (label, missing frames, percent missing, longest gap)."""
    rows = []
    for j, label in enumerate(markers.labels):
        mask = markers.gap_mask[:, j]
        runs = filtering._gap_runs(mask)
        longest = max((b - a for a, b in runs), default=0)
        rows.append({"marker": label, "missing": int(mask.sum()),
                     "percent": 100.0 * mask.mean() if len(mask) else 0.0,
                     "longest_gap": int(longest)})
    return rows


def cmd_triangulate(cfg, out=sys.stdout):
    calib = _require(cfg.calibration, "calibration")
    if not cfg.keypoints:
        raise UsageError("no keypoint stream paths given")
    kp_paths = [_require(p, "keypoint stream") for p in cfg.keypoints]
    if cfg.markers is None:
        cfg.markers = cfg.output / "markers.trc"

    cams = _stage("calibration", io_formats.parse_calibration, calib.read_text(encoding="utf-8"))
    if len(cams) != len(kp_paths):
        raise StageError("calibration", ValueError(
            f"{len(cams)} calibrated cameras but {len(kp_paths)} keypoint streams"))
    streams = [_stage("keypoints", io_formats.parse_keypoint_stream, p.read_bytes(), cam.name)
               for p, cam in zip(kp_paths, cams)]
    markers = _stage("triangulation", camera.triangulate_sequence, streams, cams,
                     cfg.min_confidence, cfg.sample_rate, _landmark_labels(cfg))
    written = [_write(Path(cfg.markers), io_formats.write_trc(markers, filename=Path(cfg.markers).name))]
    _verify(written)

    print(f"triangulated {markers.n_frames} frames x {len(markers.labels)} markers "
          f"-> {cfg.markers}", file=out)
    print(f"{'marker':<12}{'missing':>8}{'%':>8}{'longest':>9}", file=out)
    for row in gap_statistics(markers):
        print(f"{row['marker']:<12}{row['missing']:>8d}{row['percent']:>8.1f}"
              f"{row['longest_gap']:>9d}", file=out)
    return written


# -- analyze ---------------------------------------------------------------------


def _correspondence(cfg, model):
    if cfg.correspondence is None:
        return body_model.MarkerCorrespondence.identity(model)
    pairs = []
    for virtual, spec in cfg.correspondence.items():
        label, weight = (spec, 1.0) if isinstance(spec, str) else (spec[0], float(spec[1]))
        pairs.append((virtual, label, weight))
    return body_model.MarkerCorrespondence(tuple(pairs))


def _experimental(corr, name):
    try:
        return corr.experimental(name)
    except KeyError:
        return name


def _cycle_id(cycle, ordinal):
    return f"{cycle.side}_{ordinal}"


def _joint_series(names, poses, quantity, side):
    if quantity.startswith("pelvis"):
        return poses[:, names.index(quantity)]
    return poses[:, names.index(f"{quantity}_{side[0]}")]


def analyze_markers(markers, cfg, static=None, subject=None):
    """Run scale -> filter -> IK -> events -> parameters; returns a result dict."""
    model = body_model.default_model()
    corr = _correspondence(cfg, model)
    if static is not None:
        model = _stage("scaling", body_model.scale_model, model, static, corr, subject)

    flagged = []
    if cfg.filter.get("enabled", True):
        markers, flagged = _stage("filtering", filtering.filter_trajectories, markers,
                                  float(cfg.filter["cutoff"]), int(cfg.filter["order"]),
                                  int(cfg.filter["max_gap"]))

    settings = _stage("ik", lambda: ik.IkSettings(**cfg.ik))
    results = _stage("ik", ik.solve_trajectory, model, markers, corr, settings)
    poses = ik.poses_array(results, model)

    heel = {s: _stage("events", markers.marker, _experimental(corr, n)) for s, n in HEELS.items()}
    pelvis = _stage("events", lambda: np.mean(
        [markers.marker(_experimental(corr, n)) for n in PELVIS_MARKERS], axis=0))
    axis = _stage("events", events.estimate_walking_axis, pelvis)
    evs = _stage("events", events.detect_events, heel["left"], heel["right"], pelvis, axis,
                 markers.sample_rate, float(cfg.events["min_separation"]),
                 float(cfg.events["min_prominence"]))
    cycles = _stage("events", events.segment_cycles, evs, markers.sample_rate)
    records = _stage("parameters", params.spatiotemporal, cycles, heel["left"], heel["right"], axis)

    names = model.coordinate_names
    ordinals = {"left": 0, "right": 0}
    rom_rows, cycle_ids = [], []
    for c in cycles:
        cid = _cycle_id(c, ordinals[c.side])
        ordinals[c.side] += 1
        cycle_ids.append(cid)
        row = {"cycle": cid, "side": c.side, "start_frame": c.start, "end_frame": c.end}
        for q in LEG_QUANTITIES + PELVIS_QUANTITIES:
            seg = _joint_series(names, poses, q, c.side)[c.start:c.end + 1]
            row[q] = params.rom(seg) if np.isfinite(seg).any() else float("nan")
        rom_rows.append(row)

    waveforms = {}
    for q in LEG_QUANTITIES + PELVIS_QUANTITIES:
        per_side = {}
        for side in events.SIDES:
            curves = [events.time_normalize(_joint_series(names, poses, q, side)[c.start:c.end + 1])
                      for c in cycles if c.side == side]
            if curves:
                per_side[side] = curves
        pooled = [w for side in per_side for w in per_side[side]]
        waveforms[q] = {side: params.mean_sd_waveform(w) for side, w in per_side.items()}
        waveforms[q]["both"] = params.mean_sd_waveform(pooled)

    return {
        "model": model, "markers": markers, "flagged": flagged, "ik": results,
        "poses": poses, "events": evs, "cycles": cycles, "cycle_ids": cycle_ids,
        "records": records, "rom": rom_rows, "waveforms": waveforms, "axis": axis,
    }


def _summary(res, label):
    recs = res["records"]
    ik_res = res["ik"]
    rms = np.array([r.rms_error for r in ik_res], dtype=float)
    means = {p: float(np.mean([getattr(r, p) for r in recs])) for p in params.PARAMETERS}
    sds = {p: float(np.std([getattr(r, p) for r in recs], ddof=0)) for p in params.PARAMETERS}
    return {
        "label": label,
        "n_frames": int(res["markers"].n_frames),
        "sample_rate": float(res["markers"].sample_rate),
        "walking_axis": [float(x) for x in res["axis"]],
        "n_cycles": len(recs),
        "cycles": {side: sum(r.side == side for r in recs) for side in events.SIDES},
        "spatiotemporal_mean": means,
        "spatiotemporal_sd": sds,
        "events": [{"side": e.side, "kind": e.kind, "frame": e.frame_index, "time": e.time}
                   for e in res["events"]],
        "flagged_markers": list(res["flagged"]),
        "ik": {
            "converged_frames": int(sum(r.converged for r in ik_res)),
            "failed_frames": int(sum(r.pose is None for r in ik_res)),
            "median_rms_error": float(np.nanmedian(rms)) if np.isfinite(rms).any() else None,
        },
        "model_scales": res["model"].scales(),
    }


def write_analysis(res, outdir, label="markerless"):
    outdir = Path(outdir)
    written = []
    ids = res["cycle_ids"]
    st_rows = [{"cycle": cid, **r.as_row()} for cid, r in zip(ids, res["records"])]
    written.append(_write(outdir / "spatiotemporal.csv", io_formats.write_report(
        st_rows, "csv", ("cycle",) + params.COLUMNS)))

    names = res["model"].coordinate_names
    fs = res["markers"].sample_rate
    angle_rows = []
    for f, (q, r) in enumerate(zip(res["poses"], res["ik"])):
        row = {"frame": f, "time": f / fs}
        row.update(zip(names, q))
        row["rms_error"] = r.rms_error
        row["converged"] = r.converged
        angle_rows.append(row)
    written.append(_write(outdir / "joint_angles.csv", io_formats.write_report(
        angle_rows, "csv", ("frame", "time") + tuple(names) + ("rms_error", "converged"))))

    rom_cols = ("cycle", "side", "start_frame", "end_frame") + LEG_QUANTITIES + PELVIS_QUANTITIES
    written.append(_write(outdir / "rom.csv", io_formats.write_report(res["rom"], "csv", rom_cols)))

    wf_rows = []
    for q, by_side in res["waveforms"].items():
        for side, summ in by_side.items():
            for i, (m, s) in enumerate(zip(summ.mean, summ.sd)):
                wf_rows.append({"quantity": q, "side": side, "percent": i,
                                "mean": m, "sd": s, "n_cycles": summ.n_cycles})
    written.append(_write(outdir / "waveforms.csv", io_formats.write_report(
        wf_rows, "csv", ("quantity", "side", "percent", "mean", "sd", "n_cycles"))))

    written.append(_write(outdir / "summary.json", io_formats.write_report(
        _summary(res, label), "json")))

    for q, title, unit in PLOTTED:
        svg = plots.waveform_svg(res["waveforms"][q]["both"], title, f"{q} ({unit})")
        written.append(_write(outdir / f"{q}.svg", svg))
    _verify(written)
    return written


def cmd_analyze(cfg, out=sys.stdout):
    path = _require(cfg.markers, "marker file")
    markers, subject = _stage("markers", io_formats.parse_trc, path.read_text(encoding="utf-8"))
    static = None
    if cfg.static is not None:
        static_path = _require(cfg.static, "static trial")
        static, static_subject = _stage("markers", io_formats.parse_trc,
                                        static_path.read_text(encoding="utf-8"))
        subject = subject or static_subject
    res = analyze_markers(markers, cfg, static, subject)
    written = write_analysis(res, cfg.output, cfg.label)
    print(f"{len(res['records'])} complete cycles "
          f"({len(res['cycles'].side('right'))} right, {len(res['cycles'].side('left'))} left)",
          file=out)
    for p in params.PARAMETERS:
        vals = [getattr(r, p) for r in res["records"]]
        print(f"  {p:<14} {np.mean(vals):.4f} +/- {np.std(vals):.4f}", file=out)
    if res["flagged"]:
        print(f"  unfiltered (gaps remain): {', '.join(res['flagged'])}", file=out)
    print(f"wrote {len(written)} files to {cfg.output}", file=out)
    return written


# -- compare ---------------------------------------------------------------------


def _read_rows(directory, name):
    path = _require(Path(directory) / name, f"{name} of analysis")
    return _stage("compare", io_formats.read_report, path.read_text(encoding="utf-8"), "csv")


def _pair_rows(ref_rows, cand_rows, what):
    ref = {r["cycle"]: r for r in ref_rows}
    cand = {r["cycle"]: r for r in cand_rows}
    counts = {}
    for side in events.SIDES:
        counts[side] = (sum(r["side"] == side for r in ref_rows),
                        sum(r["side"] == side for r in cand_rows))
    if set(ref) != set(cand):
        detail = ", ".join(f"{s}: reference {a} vs candidate {b}" for s, (a, b) in counts.items())
        raise StageError("compare", PairingError(f"{what}: cycle counts differ ({detail})"))
    if len(ref) < 2:
        raise StageError("compare", PairingError(f"{what}: need at least 2 paired cycles, got {len(ref)}"))
    return ref, cand


def compare_analyses(ref_dir, cand_dir):
    """Agreement of candidate against reference for parameters and per-coordinate ROM."""
    ref_st, cand_st = _pair_rows(_read_rows(ref_dir, "spatiotemporal.csv"),
                                 _read_rows(cand_dir, "spatiotemporal.csv"), "spatiotemporal")
    ref_rom, cand_rom = _pair_rows(_read_rows(ref_dir, "rom.csv"),
                                   _read_rows(cand_dir, "rom.csv"), "rom")
    out = {"spatiotemporal": {}, "rom": {}}
    for p in params.PARAMETERS:
        out["spatiotemporal"][p] = _stage("compare", stats.compare_rom_sets,
                                          {k: r[p] for k, r in ref_st.items()},
                                          {k: r[p] for k, r in cand_st.items()})
    for q in LEG_QUANTITIES + PELVIS_QUANTITIES:
        ref_vals = {k: r[q] for k, r in ref_rom.items() if r[q] is not None}
        cand_vals = {k: r[q] for k, r in cand_rom.items() if r[q] is not None}
        keys = set(ref_vals) & set(cand_vals)
        if len(keys) < 2:
            continue
        out["rom"][q] = _stage("compare", stats.compare_rom_sets,
                               {k: ref_vals[k] for k in keys}, {k: cand_vals[k] for k in keys})
    return out


def cmd_compare(cfg, out=sys.stdout):
    ref_dir = _require(cfg.reference, "reference analysis directory")
    cand_dir = _require(cfg.candidate, "candidate analysis directory")
    res = compare_analyses(ref_dir, cand_dir)
    outdir = Path(cfg.output)
    written = []

    table = []
    for group in ("spatiotemporal", "rom"):
        for name, a in res[group].items():
            table.append({"method": cfg.label, "group": group, "parameter": name,
                          "corr": a.pearson_r if a.correlation_defined else None,
                          "mae": a.mae, "n": a.n})
    written.append(_write(outdir / "comparison.csv", io_formats.write_report(
        table, "csv", ("method", "group", "parameter", "corr", "mae", "n"))))

    doc = {"method": cfg.label, "reference": str(ref_dir), "candidate": str(cand_dir),
           **{g: {k: a.as_dict() for k, a in res[g].items()} for g in res}}
    written.append(_write(outdir / "agreement.json", io_formats.write_report(doc, "json")))

    units = {"pelvis_ty": "m"}
    for q, a in res["rom"].items():
        svg = plots.bland_altman_svg(a, f"{q} ROM: {cfg.label} - reference", units.get(q, "deg"))
        written.append(_write(outdir / f"bland_altman_{q}.svg", svg))
    _verify(written)

    print(f"{'parameter':<18}{'corr':>10}{'MAE':>12}{'bias':>12}", file=out)
    for row, a in zip(table, [a for g in ("spatiotemporal", "rom") for a in res[g].values()]):
        r = f"{a.pearson_r:.4f}" if a.correlation_defined else "undef"
        print(f"{row['parameter']:<18}{r:>10}{a.mae:>12.5f}{a.bias:>12.5f}", file=out)
    print(f"wrote {len(written)} files to {outdir}", file=out)
    return written


# -- synth -----------------------------------------------------------------------


def write_truth(scene, outdir, label="truth"):
    """Ground truth in the same layout as ``analyze`` output, for ``compare``."""
    outdir = Path(outdir)
    names = scene.model.coordinate_names
    cycles = []
    ordinals = {"left": 0, "right": 0}
    st_rows, rom_rows = [], []
    for rec in sorted(scene.records, key=lambda r: (r.start_frame, r.side)):
        cid = f"{rec.side}_{ordinals[rec.side]}"
        ordinals[rec.side] += 1
        cycles.append(cid)
        st_rows.append({"cycle": cid, **rec.as_row()})
        row = {"cycle": cid, "side": rec.side, "start_frame": rec.start_frame,
               "end_frame": rec.end_frame}
        for q in LEG_QUANTITIES + PELVIS_QUANTITIES:
            row[q] = params.rom(_joint_series(names, scene.poses, q, rec.side)
                                [rec.start_frame:rec.end_frame + 1])
        rom_rows.append(row)
    written = [
        _write(outdir / "spatiotemporal.csv", io_formats.write_report(
            st_rows, "csv", ("cycle",) + params.COLUMNS)),
        _write(outdir / "rom.csv", io_formats.write_report(
            rom_rows, "csv", ("cycle", "side", "start_frame", "end_frame")
            + LEG_QUANTITIES + PELVIS_QUANTITIES)),
        _write(outdir / "events.csv", io_formats.write_report(
            [{"side": e.side, "kind": e.kind, "frame": e.frame_index, "time": e.time}
             for e in scene.events], "csv", ("side", "kind", "frame", "time"))),
        _write(outdir / "joint_angles.csv", io_formats.write_report(
            [{"frame": f, "time": f / scene.recipe.sample_rate, **dict(zip(names, q))}
             for f, q in enumerate(scene.poses)], "csv", ("frame", "time") + tuple(names))),
    ]
    return written


def cmd_synth(args, out=sys.stdout):
    if args.recipe is not None:
        path = _require(Path(args.recipe), "recipe")
        try:
            recipe = synth.load_recipe(path)
        except (ValueError, TypeError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad recipe {path}: {exc}") from None
    else:
        recipe = synth.GaitRecipe()
    seed = recipe.seed if args.seed is None else args.seed
    outdir = Path(args.output)

    scene = _stage("synth", synth.generate_gait, recipe)
    cams = synth.default_camera_rig()
    streams = synth.render_views(scene.markers, cams, args.noise, args.dropout, seed)
    static = synth.static_trial(recipe)

    written = [
        _write(outdir / "recipe.json", recipe.to_json() + "\n"),
        _write(outdir / "calibration.json", io_formats.write_calibration(cams) + "\n"),
        _write(outdir / "reference.trc", io_formats.write_trc(
            scene.markers, subject=recipe.subject, filename="reference.trc")),
        _write(outdir / "static.trc", io_formats.write_trc(
            static, subject=recipe.subject, filename="static.trc")),
    ]
    kp = []
    for cam, frames in zip(cams, streams):
        kp.append(f"keypoints/{cam.name}.json")
        written.append(_write(outdir / kp[-1], io_formats.write_keypoint_stream(frames, cam.name)))
    written += write_truth(scene, outdir / "truth")
    config = {
        "calibration": "calibration.json",
        "keypoints": kp,
        "landmarks": {str(i): lbl for i, lbl in enumerate(scene.markers.labels)},
        "markers": "markers.trc",
        "static": "static.trc",
        "output": "analysis",
        "reference": "truth",
        "candidate": "analysis",
        "sample_rate": recipe.sample_rate,
        "label": "markerless",
    }
    written.append(_write(outdir / "pipeline.json", json.dumps(config, indent=2, sort_keys=True) + "\n"))
    _verify(written)
    print(f"synthetic scene: {recipe.n_frames} frames, {len(scene.events)} events, "
          f"{len(scene.records)} cycles, noise {args.noise} px, dropout {args.dropout}, "
          f"seed {seed} -> {outdir}", file=out)
    return written


# -- entry point -----------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="gaitkin", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON pipeline config")
        p.add_argument("--output", help="output directory")
        p.add_argument("--label", help="method label used in reports")

    p = sub.add_parser("triangulate", help="keypoint streams + calibration -> marker TRC")
    common(p)
    p.add_argument("--calibration")
    p.add_argument("--keypoints", nargs="+", help="per-camera keypoint stream files")
    p.add_argument("--markers", help="TRC file to write (default OUTPUT/markers.trc)")
    p.add_argument("--min-confidence", type=float)
    p.add_argument("--sample-rate", type=float)

    p = sub.add_parser("analyze", help="markers -> IK, events, parameters, plots")
    common(p)
    p.add_argument("--markers", help="TRC marker trajectories")
    p.add_argument("--static", help="static trial TRC used to scale the model")
    p.add_argument("--cutoff", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--max-gap", type=int)
    p.add_argument("--no-filter", action="store_true")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--min-prominence", type=float)
    p.add_argument("--min-separation", type=float)

    p = sub.add_parser("compare", help="agreement between two analysis directories")
    common(p)
    p.add_argument("--reference")
    p.add_argument("--candidate")

    p = sub.add_parser("synth", help="write a synthetic oracle scene")
    p.add_argument("--recipe", help="JSON recipe (GaitRecipe fields)")
    p.add_argument("--output", required=True)
    p.add_argument("--noise", type=float, default=0.0, help="pixel noise SD")
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    return parser


def _config_from_args(args):
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    for key in ("calibration", "markers", "static", "reference", "candidate", "output"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, Path(value))
    if getattr(args, "keypoints", None):
        cfg.keypoints = [Path(p) for p in args.keypoints]
    for key in ("min_confidence", "sample_rate", "label"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    for flag, key in (("cutoff", "cutoff"), ("order", "order"), ("max_gap", "max_gap")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg.filter[key] = value
    if getattr(args, "no_filter", False):
        cfg.filter["enabled"] = False
    if getattr(args, "max_iterations", None) is not None:
        cfg.ik["max_iterations"] = args.max_iterations
    for key in ("min_prominence", "min_separation"):
        value = getattr(args, key, None)
        if value is not None:
            cfg.events[key] = value
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            cmd_synth(args)
        else:
            cfg = _config_from_args(args)
            {"triangulate": cmd_triangulate, "analyze": cmd_analyze,
             "compare": cmd_compare}[args.command](cfg)
    except UsageError as exc:
        print(f"gaitkin: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"gaitkin: {exc.stage} stage failed: {exc.__cause__ or exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
