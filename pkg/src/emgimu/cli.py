"""Batch front-end.

Subcommands wire the library into a resumable pipeline over a cohort of
session directories::

    emgimu synth      --config cfg.json --out runs/demo
    emgimu eval       --config cfg.json --out runs/demo
    emgimu report     --config cfg.json --out runs/demo

plus ``label``, ``preprocess``, ``features``, ``quality`` and ``stats``
for the individual stages.  Stage outputs are cached under
``<out>/cache`` keyed by content hashes of the inputs and the relevant
config subsection, so placement/modality sweeps share one feature pass
and reruns are cheap.  Reports are byte-identical for a given config and
seed regardless of ``--jobs``.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .classify import CvPlan, DEFAULT_GRIDS, cv_evaluate
from .dsp import FilterSpec, SmoothSpec, preprocess_recording
from .errors import MissingResults, PipelineError
from .features import FeatureMatrix, ThresholdSpec, WindowSpec, extract_matrix
from .quality import gesture_quality_table, noise_report
from .session import (
    Gesture,
    Modality,
    Placement,
    Posture,
    ScheduleParams,
    align_labels,
    generate_label_schedule,
    label_track_from_json,
    label_track_to_json,
    load_session,
    parse_manifest,
    save_session,
)
from .stats import SampleGroup, results_to_json, results_to_markdown, run_hypotheses
from .synth import SynthSpec, gen_session

PRESETS = {
    "W1W2": ("W1", "W2"),
    "W3W4": ("W3", "W4"),
    "F1F2": ("F1", "F2"),
    "F3F4": ("F3", "F4"),
    "W1-4": ("W1", "W2", "W3", "W4"),
    "F1-4": ("F1", "F2", "F3", "F4"),
    "W1-4F1-4": ("W1", "W2", "W3", "W4", "F1", "F2", "F3", "F4"),
}

MODALITY_SETS = {
    "emg": (Modality.EMG,),
    "accel": (Modality.ACCEL,),
    "gyro": (Modality.GYRO,),
    "mag": (Modality.MAG,),
    "imu_combined": (Modality.ACCEL, Modality.GYRO, Modality.MAG),
}

CONFIG_VERSION = 1

DEFAULT_CONFIG = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "jobs": 1,
    "synth": {
        "n_participants": 12,
        "separability": 1.0,
        "onset_delay_s": 0.0,
        "csv_decimals": 5,
        "schedule": {
            "gesture_s": 2.0, "rest_s": 2.0, "reps": 4, "n_gestures": 17,
            "pre_gesture_rest_s": 5.0, "calibration_s": 15.0,
        },
    },
    "filter": {"notch_hz": 60.0, "notch_q": 30.0, "band_lo_hz": 20.0,
               "band_hi_hz": 500.0, "band_order": 4, "zero_phase": True},
    "smooth": {"window_samples": 50},
    "window": {"length_s": 0.300, "step_s": 0.150},
    "thresholds": {"zc_eps": 0.0, "ssc_eps": 0.0, "myop_thresh": 20.0,
                   "wamp_thresh": 20.0},
    "align": {"max_shift_s": 0.5},
    "presets": list(PRESETS),
    "modalities": list(MODALITY_SETS),
    "model": {"family": "lda", "grid": None},
    "cv": {"folds": 4},
    "stats": {"alpha": 0.05, "fully_paired": False},
    "permute_labels": False,
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path=None, overrides=None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        user = json.loads(Path(path).read_text())
        if user.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {user.get('version')}")
        cfg = _deep_merge(cfg, user)
    if overrides:
        cfg = _deep_merge(cfg, overrides)
    unknown = [p for p in cfg["presets"] if p not in PRESETS]
    if unknown:
        raise ValueError(f"unknown presets: {unknown}")
    unknown = [m for m in cfg["modalities"] if m not in MODALITY_SETS]
    if unknown:
        raise ValueError(f"unknown modalities: {unknown}")
    return cfg


def _schedule_from_cfg(cfg: dict) -> ScheduleParams:
    s = cfg["synth"]["schedule"]
    return ScheduleParams(**s)


def _specs_from_cfg(cfg: dict):
    return (FilterSpec(**cfg["filter"]), SmoothSpec(**cfg["smooth"]),
            WindowSpec(**cfg["window"]), ThresholdSpec(**cfg["thresholds"]))


def _json_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _hash_bytes(*chunks: bytes) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(c)
    return h.hexdigest()


_FILE_HASHES: dict = {}


def _hash_file(path: Path) -> str:
    stat = path.stat()
    key = (str(path), stat.st_size, stat.st_mtime_ns)
    if key in _FILE_HASHES:
        return _FILE_HASHES[key]
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    _FILE_HASHES[key] = h.hexdigest()
    return _FILE_HASHES[key]


def session_content_hash(session_dir: Path) -> str:
    manifest = session_dir / "manifest.json"
    parts = [_hash_file(manifest).encode()]
    raw = json.loads(manifest.read_text())
    for entry in raw["sensors"]:
        for key in ("emg_file", "imu_file", "file"):
            if entry.get(key):
                parts.append(_hash_file(session_dir / entry[key]).encode())
    return _hash_bytes(*parts)


def discover_sessions(root: Path) -> list[Path]:
    return sorted(p.parent for p in Path(root).glob("*/manifest.json"))


# --- per-session pipeline stages -------------------------------------------------


def _session_feature_key(cfg: dict, content_hash: str) -> str:
    rel = {k: cfg[k] for k in ("filter", "smooth", "window", "thresholds", "align")}
    return _hash_bytes(_json_dumps(rel).encode(), content_hash.encode())


def compute_session_features(session_dir: Path, cfg: dict, cache_dir: Path,
                             log=print) -> tuple[FeatureMatrix, str]:
    """Label, preprocess and extract features for one session, cached."""
    content = session_content_hash(session_dir)
    key = _session_feature_key(cfg, content)
    cache_dir.mkdir(parents=True, exist_ok=True)
    cached = cache_dir / f"features-{key}.npz"
    if cached.is_file():
        log(f"[features] cached {session_dir.name}")
        return FeatureMatrix.from_npz(cached), key

    fspec, sspec, wspec, th = _specs_from_cfg(cfg)
    rec = load_session(session_dir / "manifest.json")
    manifest = parse_manifest(session_dir / "manifest.json")
    schedule = generate_label_schedule(manifest.schedule)
    labels = align_labels(rec, schedule, max_shift_s=cfg["align"]["max_shift_s"])
    pre = preprocess_recording(rec, fspec, sspec)
    fm = extract_matrix(pre, labels, wspec, th)
    tmp = cached.with_name(cached.name + f".tmp-{session_dir.name}.npz")
    fm.to_npz(tmp)
    tmp.rename(cached)
    log(f"[features] computed {session_dir.name}")
    return fm, key


def _permute_within_repetitions(fm: FeatureMatrix, seed: int) -> FeatureMatrix:
    """Shuffle gesture labels inside each repetition (chance-level control
    that keeps every (gesture, repetition) pair populated)."""
    rng = np.random.default_rng(seed)
    gest = fm.gesture.copy()
    for rep in np.unique(fm.repetition):
        idx = np.flatnonzero(fm.repetition == rep)
        gest[idx] = gest[rng.permutation(idx)]
    return dataclasses.replace(fm, gesture=gest)


def _session_id(session_dir: Path) -> str:
    return session_dir.name


def evaluate_session(session_dir: Path, cfg: dict, out: Path, log=print) -> list[dict]:
    """Run every (preset, modality) evaluation for one session; returns
    summary dicts (results are also written under <out>/eval)."""
    cache_dir = out / "cache"
    fm, feat_key = compute_session_features(session_dir, cfg, cache_dir, log=log)
    manifest = parse_manifest(session_dir / "manifest.json")
    if cfg["permute_labels"]:
        perm_seed = int(_hash_bytes(str(cfg["seed"]).encode(),
                                    _session_id(session_dir).encode())[:8], 16)
        fm = _permute_within_repetitions(fm, perm_seed)

    family = cfg["model"]["family"]
    grid = cfg["model"]["grid"] or DEFAULT_GRIDS[family]
    plan = CvPlan(folds=cfg["cv"]["folds"])
    eval_dir = out / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    for preset in cfg["presets"]:
        for modality in cfg["modalities"]:
            tag = f"{_session_id(session_dir)}__{preset}__{modality}"
            eval_cfg_key = _hash_bytes(_json_dumps({
                "features": feat_key, "preset": preset, "modality": modality,
                "model": {"family": family, "grid": grid},
                "cv": cfg["cv"], "permute": cfg["permute_labels"],
                "seed": cfg["seed"]}).encode())
            cached = cache_dir / f"eval-{eval_cfg_key}.json"
            if cached.is_file():
                log(f"[eval] cached {tag}")
                payload = json.loads(cached.read_text())
            else:
                sub = fm.select_columns(placements=PRESETS[preset],
                                        modalities=MODALITY_SETS[modality])
                res = cv_evaluate(sub, plan, model_family=family, grid=grid)
                payload = {
                    "session": _session_id(session_dir),
                    "participant_id": manifest.participant_id,
                    "posture": manifest.posture.value,
                    "preset": preset,
                    "modality": modality,
                    "model_family": family,
                    "fold_accuracies": list(res.fold_accuracies),
                    "mean_accuracy": res.mean_accuracy,
                    "best_params": list(res.best_params),
                    "dbi": res.dbi,
                    "classes": list(res.classes),
                    "confusion": res.confusion.tolist(),
                }
                cached.write_text(_json_dumps(payload))
                log(f"[eval] computed {tag}")
            (eval_dir / f"{tag}.json").write_text(
                json.dumps(payload, indent=2, sort_keys=True))
            rows.append(payload)
    return rows


# --- commands --------------------------------------------------------------------


def _synth_spec_from_cfg(cfg: dict) -> SynthSpec:
    syn = {k: v for k, v in cfg["synth"].items()
           if k not in ("schedule", "csv_decimals", "n_participants")}
    return SynthSpec(seed=cfg["seed"],
                     n_participants=cfg["synth"]["n_participants"],
                     schedule=_schedule_from_cfg(cfg), **syn)


def _synth_one(args):
    cfg, out_sessions, pidx, posture_value = args
    spec = _synth_spec_from_cfg(cfg)
    posture = Posture(posture_value)
    rec, _labels = gen_session(spec, pidx, posture)
    sess_dir = out_sessions / f"{rec.participant_id}_{posture.value}"
    save_session(rec, sess_dir, schedule=spec.schedule_for(posture),
                 decimals=cfg["synth"]["csv_decimals"])
    return sess_dir.name


def cmd_synth(cfg: dict, out: Path, log=print) -> int:
    out_sessions = out / "sessions"
    out_sessions.mkdir(parents=True, exist_ok=True)
    tasks = [(cfg, out_sessions, pidx, posture.value)
             for pidx in range(cfg["synth"]["n_participants"])
             for posture in Posture]
    for name in _run_tasks(_synth_one, tasks, cfg["jobs"]):
        log(f"[synth] wrote {name}")
    _write_run_manifest(cfg, out, "synth")
    return 0


def cmd_label(cfg: dict, out: Path, log=print) -> int:
    label_dir = out / "labels"
    label_dir.mkdir(parents=True, exist_ok=True)
    for sess in discover_sessions(out / "sessions"):
        rec = load_session(sess / "manifest.json")
        manifest = parse_manifest(sess / "manifest.json")
        schedule = generate_label_schedule(manifest.schedule)
        labels = align_labels(rec, schedule, max_shift_s=cfg["align"]["max_shift_s"])
        label_track_to_json(labels, label_dir / f"{sess.name}.json")
        log(f"[label] {sess.name}")
    _write_run_manifest(cfg, out, "label")
    return 0


def cmd_preprocess(cfg: dict, out: Path, log=print) -> int:
    fspec, sspec, _, _ = _specs_from_cfg(cfg)
    pre_dir = out / "preprocessed"
    for sess in discover_sessions(out / "sessions"):
        rec = load_session(sess / "manifest.json")
        manifest = parse_manifest(sess / "manifest.json")
        pre = preprocess_recording(rec, fspec, sspec)
        save_session(pre, pre_dir / sess.name, schedule=manifest.schedule,
                     decimals=cfg["synth"]["csv_decimals"])
        log(f"[preprocess] {sess.name}")
    _write_run_manifest(cfg, out, "preprocess")
    return 0


def cmd_features(cfg: dict, out: Path, log=print) -> int:
    feat_dir = out / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    sessions = discover_sessions(out / "sessions")
    tasks = [(sess, cfg, out) for sess in sessions]
    for sess, fm in zip(sessions, _run_tasks(_features_one, tasks, cfg["jobs"])):
        fm.to_npz(feat_dir / f"{sess.name}.npz")
        log(f"[features] {sess.name} -> {fm.data.shape[0]}x{fm.data.shape[1]}")
    _write_run_manifest(cfg, out, "features")
    return 0


def _features_one(args):
    sess, cfg, out = args
    fm, _ = compute_session_features(sess, cfg, out / "cache", log=lambda *_: None)
    return fm


def cmd_quality(cfg: dict, out: Path, log=print) -> int:
    qual_dir = out / "quality"
    qual_dir.mkdir(parents=True, exist_ok=True)
    recs, tracks = [], []
    for sess in discover_sessions(out / "sessions"):
        rec = load_session(sess / "manifest.json")
        manifest = parse_manifest(sess / "manifest.json")
        schedule = generate_label_schedule(manifest.schedule)
        labels = align_labels(rec, schedule, max_shift_s=cfg["align"]["max_shift_s"])
        if rec.calibration_span[1] > rec.calibration_span[0]:
            noise_report(rec).to_json(qual_dir / f"noise_{sess.name}.json")
            log(f"[quality] noise {sess.name}")
        recs.append(rec)
        tracks.append(labels)
    if recs:
        table = gesture_quality_table(recs, tracks)
        table.to_csv(qual_dir / "quality_table.csv")
        table.to_json(qual_dir / "quality_table.json")
        log(f"[quality] table over {len(recs)} sessions")
    _write_run_manifest(cfg, out, "quality")
    return 0


def _eval_one(args):
    sess, cfg, out = args
    lines: list[str] = []
    try:
        rows = evaluate_session(sess, cfg, out, log=lines.append)
        return (sess.name, rows, lines, None)
    except Exception as exc:  # isolated per participant
        return (sess.name, None, lines,
                f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")


def cmd_eval(cfg: dict, out: Path, log=print) -> int:
    sessions = discover_sessions(out / "sessions")
    if not sessions:
        log("[eval] no sessions found")
        return 1
    tasks = [(sess, cfg, out) for sess in sessions]
    failures = {}
    for name, rows, lines, err in _run_tasks(_eval_one, tasks, cfg["jobs"]):
        for line in lines:
            log(line)
        if err is not None:
            failures[name] = err
            log(f"[eval] FAILED {name}")
        else:
            log(f"[eval] done {name} ({len(rows)} results)")
    (out / "eval").mkdir(parents=True, exist_ok=True)
    (out / "eval" / "failures.json").write_text(
        json.dumps(failures, indent=2, sort_keys=True))
    _write_run_manifest(cfg, out, "eval")
    return 1 if failures else 0


def _load_eval_rows(out: Path) -> list[dict]:
    eval_dir = out / "eval"
    rows = []
    for path in sorted(eval_dir.glob("*__*__*.json")):
        rows.append(json.loads(path.read_text()))
    if not rows:
        raise MissingResults(f"no evaluation results under {eval_dir}")
    return rows


def _accuracy_groups(rows: list[dict], posture: str, preset: str) -> dict:
    """modality -> SampleGroup of per-participant accuracies (participant order)."""
    by_mod: dict[str, dict[str, float]] = {}
    for row in rows:
        if row["posture"] != posture or row["preset"] != preset:
            continue
        by_mod.setdefault(row["modality"], {})[row["participant_id"]] = row["mean_accuracy"]
    return {mod: SampleGroup(mod, tuple(vals[p] for p in sorted(vals)))
            for mod, vals in by_mod.items()}


def cmd_stats(cfg: dict, out: Path, log=print) -> int:
    rows = _load_eval_rows(out)
    stats_dir = out / "stats"
    stats_dir.mkdir(parents=True, exist_ok=True)
    postures = sorted({r["posture"] for r in rows})
    for posture in postures:
        for preset in cfg["presets"]:
            tag = f"{posture}__{preset}"
            groups = _accuracy_groups(rows, posture, preset)
            if len(groups) < 5:
                continue
            if any(len(g.values) < 4 for g in groups.values()):
                (stats_dir / f"{tag}.json").write_text(
                    json.dumps({"flag": "TooFewSamples"}, sort_keys=True))
                log(f"[stats] {tag}: TooFewSamples")
                continue
            results = run_hypotheses(groups, alpha=cfg["stats"]["alpha"],
                                     fully_paired=cfg["stats"]["fully_paired"])
            results_to_json(results, stats_dir / f"{tag}.json")
            results_to_markdown(results, stats_dir / f"{tag}.md")
            log(f"[stats] {tag}: " + " ".join(
                f"{r.hypothesis}={r.decision}" for r in results))
    _write_run_manifest(cfg, out, "stats")
    return 0


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def cmd_report(cfg: dict, out: Path, log=print) -> int:
    """Aggregate eval results into the per-(posture, preset) comparison table."""
    rows = _load_eval_rows(out)
    report_dir = out / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    alpha = cfg["stats"]["alpha"]
    modalities = [m for m in cfg["modalities"]]
    postures = sorted({r["posture"] for r in rows})

    for posture in postures:
        csv_lines = []
        md = [f"# Modality comparison, {posture} degrees "
              f"({rows[0]['model_family']})", ""]
        header = ["preset"]
        for mod in modalities:
            header += [f"acc_{mod}_mean", f"acc_{mod}_std"]
        header += ["p_emg_vs_accel", "d_emg_vs_accel", "p_emg_vs_gyro", "d_emg_vs_gyro",
                   "p_emg_vs_mag", "d_emg_vs_mag", "p_emg_vs_imu", "d_emg_vs_imu",
                   "dbi_emg_mean", "dbi_emg_std", "dbi_imu_mean", "dbi_imu_std"]
        csv_lines.append(",".join(header))
        md.append("| placement | EMG | IMU | p | d | DBI EMG | DBI IMU |")
        md.append("|---|---|---|---|---|---|---|")

        for preset in cfg["presets"]:
            sel = [r for r in rows if r["posture"] == posture and r["preset"] == preset]
            if not sel:
                continue
            cells = [preset]
            acc = {}
            for mod in modalities:
                vals = sorted((r["participant_id"], r["mean_accuracy"])
                              for r in sel if r["modality"] == mod)
                v = np.array([x[1] for x in vals])
                acc[mod] = v
                mean = v.mean() if len(v) else float("nan")
                std = v.std(ddof=1) if len(v) > 1 else 0.0
                cells += [_fmt(mean), _fmt(std)]

            hyp = {}
            if all(len(acc.get(m, [])) >= 4 for m in
                   ("emg", "accel", "gyro", "mag", "imu_combined")):
                groups = {m: SampleGroup(m, tuple(acc[m])) for m in acc}
                for r in run_hypotheses(groups, alpha=alpha,
                                        fully_paired=cfg["stats"]["fully_paired"]):
                    hyp[r.right] = r
                for right in ("accel", "gyro", "mag", "imu_combined"):
                    r = hyp[right]
                    cells += [_fmt(r.p_value), _fmt(r.cohens_d)]
            else:
                cells += ["TooFewSamples", "nan"] * 4

            dbi = {}
            for mod in ("emg", "imu_combined"):
                vals = sorted((r["participant_id"], r["dbi"])
                              for r in sel if r["modality"] == mod)
                v = np.array([x[1] for x in vals])
                dbi[mod] = v
                mean = v.mean() if len(v) else float("nan")
                std = v.std(ddof=1) if len(v) > 1 else 0.0
                cells += [_fmt(mean), _fmt(std)]
            csv_lines.append(",".join(cells))

            if hyp:
                r4 = hyp["imu_combined"]
                star = "*" if r4.p_value < alpha else ""
                md.append(
                    f"| {preset} | {acc['emg'].mean():.2f}({acc['emg'].std(ddof=1):.2f}) "
                    f"| {acc['imu_combined'].mean():.2f}({acc['imu_combined'].std(ddof=1):.2f}) "
                    f"| {star or _fmt(r4.p_value)} | {abs(r4.cohens_d):.2f} "
                    f"| {dbi['emg'].mean():.2f}({dbi['emg'].std(ddof=1):.2f}) "
                    f"| {dbi['imu_combined'].mean():.2f}({dbi['imu_combined'].std(ddof=1):.2f}) |")

        (report_dir / f"report_{posture}.csv").write_text("\n".join(csv_lines) + "\n")
        (report_dir / f"report_{posture}.md").write_text("\n".join(md) + "\n")
        log(f"[report] wrote report_{posture}.csv/.md")
    _write_run_manifest(cfg, out, "report")
    return 0


# --- plumbing --------------------------------------------------------------------


def _run_tasks(fn, tasks, jobs: int):
    """Run tasks preserving input order; results are independent of jobs."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _write_run_manifest(cfg: dict, out: Path, command: str):
    """Record the fully-resolved config and input hashes for reproducibility."""
    sessions = {}
    sess_root = out / "sessions"
    if sess_root.is_dir():
        for sess in discover_sessions(sess_root):
            sessions[sess.name] = session_content_hash(sess)
    payload = {
        "version": CONFIG_VERSION,
        "package_version": __version__,
        "command": command,
        "config": cfg,
        "session_hashes": sessions,
    }
    (out / "run.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


COMMANDS = {
    "synth": cmd_synth,
    "label": cmd_label,
    "preprocess": cmd_preprocess,
    "features": cmd_features,
    "quality": cmd_quality,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emgimu",
        description="EMG/IMU gesture-recognition pipeline over session directories")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config (versioned, see DEFAULT_CONFIG)")
    parser.add_argument("--out", type=Path, required=True,
                        help="run directory (sessions, cache, results)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--jobs", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.command](cfg, args.out)
    except PipelineError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
