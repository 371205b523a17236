"""Command-line entry point binding the toolkit into reproducible runs.

Every subcommand writes a ``manifest.json`` (config hash, seeds, package
version, outputs) next to its artifacts; identical configs and seeds
reproduce byte-identical model and score files. Exit codes: 0 ok,
1 runtime failure (single-line ``error: ...`` on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .audio import read_audio, resolve_audio_path, write_audio
from .config import (ConfigError, cost_from_section, default_config_text,
                     load_cost_config, load_experiment_config,
                     _parser_with_defaults)
from .features import (FeatureRecipe, compute_features, read_feature_file,
                       read_feature_manifest, write_feature_file,
                       write_feature_manifest, FeatureMatrix)
from .fusion import (ENSEMBLE_PRESETS, FusionModel, apply_fusion, load_fusion,
                     save_fusion, train_fusion)
from .gmm import EmConfig, em_fit, kmeans_init, llr_score
from .ivector import (baum_welch_stats, extract_ivector, fuse_ivectors,
                      svm_score, train_linear_svm, train_tv)
from .metrics import CostModel, ScoreSet, compute_eer, compute_min_tdcf, \
    detection_sweep, tdcf_coefficients
from .modelio import load_gmm, load_svm, load_tv, save_gmm, save_svm, save_tv
from .pipeline import GmmPipelineConfig, run_interventions
from .protocol import (PartitionSpec, ScoreRecord, parse_protocol,
                       partition_dataset, read_scores, scores_by_class,
                       write_protocol, write_scores)
from .silence import measure_zero_runs, silence_report, trim_silence
from .synth import CorpusSpec, generate_corpus


class _Tracker:
    """Records created files so a failing command leaves nothing behind."""

    def __init__(self):
        self.paths: list[Path] = []

    def out(self, path) -> Path:
        p = Path(path)
        self.paths.append(p)
        return p

    def discard_all(self) -> None:
        for p in self.paths:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(tracker, out_dir: Path, command: str, params: dict,
                    config_path=None) -> None:
    data = {
        "command": command,
        "package_version": __version__,
        "params": params,
        "outputs": sorted(p.name for p in tracker.paths),
    }
    if config_path is not None:
        data["config_sha256"] = _sha256(config_path)
    path = tracker.out(out_dir / "manifest.json")
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _recipe_from_args(args) -> FeatureRecipe:
    return FeatureRecipe(
        kind=args.kind, window_ms=args.window_ms, hop_ms=args.hop_ms,
        fft_size=args.fft_size, n_filters=args.n_filters, n_ceps=args.n_ceps,
        delta_width=args.delta_width, with_deltas=not args.no_deltas,
        cmvn_mode=args.cmvn,
    )


def _add_recipe_flags(p) -> None:
    p.add_argument("--kind", default="lfcc",
                   choices=["mfcc", "imfcc", "lfcc", "scmc", "cqcc", "ltas"])
    p.add_argument("--window-ms", type=float, default=25.0)
    p.add_argument("--hop-ms", type=float, default=10.0)
    p.add_argument("--fft-size", type=int, default=512)
    p.add_argument("--n-filters", type=int, default=20)
    p.add_argument("--n-ceps", type=int, default=20)
    p.add_argument("--delta-width", type=int, default=2)
    p.add_argument("--no-deltas", action="store_true")
    p.add_argument("--cmvn", default="none", choices=["none", "utterance"])


# ---------------------------------------------------------------------------
# subcommands

def cmd_partition(args, tracker: _Tracker) -> int:
    train = parse_protocol(args.train_protocol)
    dev = parse_protocol(args.dev_protocol)
    spec = PartitionSpec(
        heldout_attacks=frozenset(a for a in args.heldout.split(",") if a),
        seed=args.seed, dev_es_speaker_fraction=args.fraction,
    )
    part = partition_dataset(train, dev, spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_protocol(tracker.out(out / "train_tr.txt"), part.train_tr)
    write_protocol(tracker.out(out / "dev_es.txt"), part.dev_es)
    write_protocol(tracker.out(out / "dev_lr.txt"), part.dev_lr)
    with tracker.out(out / "partition.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "subset"])
        writer.writerows(sorted(part.manifest_rows()))
    for name, stats in part.summary().items():
        print(f"{name}: " + " ".join(f"{k}={v}" for k, v in stats.items()))
    _write_manifest(tracker, out, "partition", {
        "heldout": sorted(spec.heldout_attacks), "fraction": args.fraction,
        "seed": args.seed,
        "dev_es_speakers": sorted(part.dev_es_speakers),
    })
    return 0


def _extract_one(task):
    utt, audio_path, recipe, trim_mode, epsilon, out_path = task
    buf = read_audio(audio_path)
    if trim_mode:
        buf = trim_silence(buf, trim_mode, epsilon)
    window = recipe.stft_config(buf.sample_rate).window_length
    if len(buf) < window:
        return utt, None
    write_feature_file(out_path, compute_features(buf, recipe))
    return utt, out_path.name


def cmd_extract(args, tracker: _Tracker) -> int:
    entries = parse_protocol(args.protocol)
    recipe = _recipe_from_args(args)
    out = Path(args.out_dir)
    feat_dir = out / "feats"
    feat_dir.mkdir(parents=True, exist_ok=True)
    trim_mode = None if args.trim == "none" else args.trim
    tasks = []
    for e in entries:
        audio_path = resolve_audio_path(args.audio_root, e.utterance_id)
        tasks.append((e.utterance_id, audio_path, recipe, trim_mode,
                      args.epsilon, feat_dir / f"{e.utterance_id}.feat"))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_one, tasks, chunksize=8))
    else:
        results = [_extract_one(t) for t in tasks]
    mapping, skipped = {}, []
    for utt, name in results:
        if name is None:
            skipped.append(utt)
        else:
            tracker.out(feat_dir / name)
            mapping[utt] = f"feats/{name}"
    if not mapping:
        raise RuntimeError("no utterance produced features")
    write_feature_manifest(tracker.out(out / "features.manifest"), mapping)
    if skipped:
        print(f"skipped {len(skipped)} too-short utterance(s)", file=sys.stderr)
    print(f"extracted {len(mapping)} utterances -> {out / 'features.manifest'}")
    _write_manifest(tracker, out, "extract", {
        "kind": recipe.kind, "trim": args.trim, "epsilon": args.epsilon,
        "recipe": recipe.__dict__, "skipped": sorted(skipped),
    })
    return 0


def _load_feature_map(manifest_path) -> dict[str, FeatureMatrix]:
    return {utt: read_feature_file(p)
            for utt, p in read_feature_manifest(manifest_path).items()}


def _pooled_frames(feats: dict, utts) -> np.ndarray:
    mats = [feats[u].data for u in utts if u in feats]
    if not mats:
        raise RuntimeError("no feature frames matched the protocol")
    return np.vstack(mats)


def _feature_tag(feats: dict) -> str:
    tags = {fm.tag for fm in feats.values()}
    if len(tags) != 1:
        raise RuntimeError(f"mixed feature kinds in manifest: {sorted(tags)}")
    return tags.pop()


def cmd_train_gmm(args, tracker: _Tracker) -> int:
    entries = parse_protocol(args.protocol)
    feats = _load_feature_map(args.features)
    tag = _feature_tag(feats)
    cfg = EmConfig(max_iters=args.max_iters, rel_tol=args.rel_tol,
                   variance_floor=args.variance_floor, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for key in ("bonafide", "spoof"):
        utts = [e.utterance_id for e in entries if e.key == key]
        frames = _pooled_frames(feats, utts)
        init = kmeans_init(frames, args.mixtures, seed=args.seed,
                           variance_floor=args.variance_floor)
        model, trace = em_fit(frames, init, cfg)
        save_gmm(tracker.out(out / f"{key}.gmm"), model, tag)
        print(f"{key}: {frames.shape[0]} frames, {len(trace)} EM iters, "
              f"final avg ll {trace[-1] / frames.shape[0]:.4f}")
    _write_manifest(tracker, out, "train-gmm", {
        "mixtures": args.mixtures, "seed": args.seed, "feature_tag": tag,
        "max_iters": args.max_iters, "rel_tol": args.rel_tol,
        "variance_floor": args.variance_floor,
    })
    return 0


def cmd_train_ubm(args, tracker: _Tracker) -> int:
    feats = _load_feature_map(args.features)
    tag = _feature_tag(feats)
    frames = _pooled_frames(feats, list(feats))
    cfg = EmConfig(max_iters=args.max_iters, rel_tol=args.rel_tol,
                   variance_floor=args.variance_floor, seed=args.seed)
    init = kmeans_init(frames, args.mixtures, seed=args.seed,
                       variance_floor=args.variance_floor)
    model, trace = em_fit(frames, init, cfg)
    out_path = tracker.out(args.out)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_gmm(out_path, model, tag)
    print(f"UBM: {frames.shape[0]} frames, {len(trace)} EM iters -> {out_path}")
    _write_manifest(tracker, Path(out_path).parent, "train-ubm", {
        "mixtures": args.mixtures, "seed": args.seed, "feature_tag": tag,
    })
    return 0


def cmd_train_tv(args, tracker: _Tracker) -> int:
    ubm, tag = load_gmm(args.ubm)
    feats = _load_feature_map(args.features)
    if _feature_tag(feats) != tag:
        raise RuntimeError(f"feature tag {_feature_tag(feats)} does not match "
                           f"UBM tag {tag}")
    stats = [baum_welch_stats(ubm, fm) for _, fm in sorted(feats.items())]
    model, trace = train_tv(stats, ubm, rank=args.rank, iters=args.iters,
                            seed=args.seed)
    out_path = tracker.out(args.out)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_tv(out_path, model, tag)
    print(f"TV: rank {args.rank}, {len(stats)} utterances, "
          f"ll trace {trace[0]:.1f} -> {trace[-1]:.1f} -> {out_path}")
    _write_manifest(tracker, Path(out_path).parent, "train-tv", {
        "rank": args.rank, "iters": args.iters, "seed": args.seed,
        "feature_tag": tag,
    })
    return 0


def cmd_extract_ivectors(args, tracker: _Tracker) -> int:
    tv, tag = load_tv(args.tv)
    feats = _load_feature_map(args.features)
    if _feature_tag(feats) != tag:
        raise RuntimeError("feature tag does not match the TV model")
    out = Path(args.out_dir)
    ivec_dir = out / "ivecs"
    ivec_dir.mkdir(parents=True, exist_ok=True)
    mapping = {}
    for utt, fm in sorted(feats.items()):
        vec = extract_ivector(tv, baum_welch_stats(tv.ubm, fm))
        path = tracker.out(ivec_dir / f"{utt}.feat")
        write_feature_file(path, FeatureMatrix(data=vec[None, :],
                                               kind=f"ivec-{tag}"))
        mapping[utt] = f"ivecs/{utt}.feat"
    write_feature_manifest(tracker.out(out / "ivectors.manifest"), mapping)
    print(f"extracted {len(mapping)} i-vectors -> {out / 'ivectors.manifest'}")
    _write_manifest(tracker, out, "extract-ivectors", {"feature_tag": tag})
    return 0


def _fused_vectors(manifest_paths) -> tuple[dict[str, np.ndarray], str]:
    """Concatenate per-utterance vectors across manifests, in order."""
    maps = [_load_feature_map(p) for p in manifest_paths]
    tags = [_feature_tag(m) for m in maps]
    common = set(maps[0])
    for m in maps[1:]:
        common &= set(m)
    all_utts = set().union(*maps)
    missing = sorted(all_utts - common)
    if missing:
        raise RuntimeError(
            f"{len(missing)} utterance(s) missing from some vector manifest, "
            f"first: {missing[0]}"
        )
    fused = {utt: fuse_ivectors([m[utt].data.ravel() for m in maps])
             for utt in sorted(common)}
    return fused, "+".join(tags)


def cmd_train_svm(args, tracker: _Tracker) -> int:
    entries = parse_protocol(args.protocol)
    vectors, tag = _fused_vectors(args.vectors)
    key_by_utt = {e.utterance_id: e.key for e in entries}
    rows, labels = [], []
    for utt, vec in sorted(vectors.items()):
        if utt not in key_by_utt:
            raise RuntimeError(f"utterance '{utt}' missing from protocol")
        rows.append(vec)
        labels.append(1.0 if key_by_utt[utt] == "bonafide" else -1.0)
    model, trace = train_linear_svm(np.vstack(rows), np.asarray(labels),
                                    c=args.c, epochs=args.epochs,
                                    seed=args.seed)
    out_path = tracker.out(args.out)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_svm(out_path, model, tag)
    print(f"SVM: {len(rows)} vectors, objective {trace[0]:.4f} -> "
          f"{trace[-1]:.4f} -> {out_path}")
    _write_manifest(tracker, Path(out_path).parent, "train-svm", {
        "c": args.c, "epochs": args.epochs, "seed": args.seed,
        "feature_tag": tag,
    })
    return 0


def cmd_score(args, tracker: _Tracker) -> int:
    records = []
    if args.backend == "gmm":
        bona, tag_b = load_gmm(args.bonafide_model)
        spoof, tag_s = load_gmm(args.spoof_model)
        if tag_b != tag_s:
            raise RuntimeError(f"model feature tags differ: {tag_b} vs {tag_s}")
        feats = _load_feature_map(args.features)
        tag = _feature_tag(feats)
        if tag != tag_b:
            raise RuntimeError(
                f"feature tag {tag} does not match the models ({tag_b})"
            )
        for utt, fm in sorted(feats.items()):
            records.append(ScoreRecord(utt, llr_score(bona, spoof, fm)))
    else:
        model, tag_m = load_svm(args.svm_model)
        vectors, tag = _fused_vectors(args.vectors)
        if tag != tag_m:
            raise RuntimeError(
                f"vector tag {tag} does not match the SVM ({tag_m})"
            )
        for utt, vec in sorted(vectors.items()):
            records.append(ScoreRecord(utt, svm_score(model, vec)))
    out_path = tracker.out(args.out)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_scores(out_path, records)
    print(f"scored {len(records)} utterances -> {out_path}")
    return 0


def _read_scores_manifest(path) -> list[tuple[str, Path]]:
    path = Path(path)
    pairs = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RuntimeError(f"{path}:{ln}: expected 'model_id score_file'")
        mid, p = parts
        fp = Path(p)
        pairs.append((mid, fp if fp.is_absolute() else path.parent / fp))
    if not pairs:
        raise RuntimeError(f"{path}: empty scores manifest")
    if len({mid for mid, _ in pairs}) != len(pairs):
        raise RuntimeError(f"{path}: duplicate model ids")
    return pairs


def _score_matrix(pairs) -> tuple[list[str], np.ndarray, list[str]]:
    ids = [mid for mid, _ in pairs]
    tables = []
    for mid, p in pairs:
        tables.append({r.utterance_id: r.score for r in read_scores(p)})
    utts = sorted(set().union(*tables))
    matrix = np.empty((len(utts), len(tables)))
    for j, table in enumerate(tables):
        missing = [u for u in utts if u not in table]
        if missing:
            raise RuntimeError(
                f"model '{ids[j]}' is missing scores for {len(missing)} "
                f"utterance(s), first: {missing[0]}"
            )
        matrix[:, j] = [table[u] for u in utts]
    return utts, matrix, ids


def cmd_fuse_train(args, tracker: _Tracker) -> int:
    pairs = _read_scores_manifest(args.scores_manifest)
    if args.preset:
        preset = ENSEMBLE_PRESETS[args.preset]
        by_id = dict(pairs)
        missing = [mid for mid in preset if mid not in by_id]
        if missing:
            raise RuntimeError(
                f"preset '{args.preset}' needs model ids {missing} absent "
                "from the scores manifest"
            )
        pairs = [(mid, by_id[mid]) for mid in preset]
    utts, matrix, ids = _score_matrix(pairs)
    entries = parse_protocol(args.protocol)
    key_by_utt = {e.utterance_id: e.key for e in entries}
    try:
        labels = np.array([key_by_utt[u] == "bonafide" for u in utts])
    except KeyError as exc:
        raise RuntimeError(f"utterance {exc} missing from protocol") from exc
    model = train_fusion(matrix, labels, prior=args.prior, input_ids=ids)
    out_path = tracker.out(args.out)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    save_fusion(out_path, model)
    weights = " ".join(f"{mid}={a:.4f}" for mid, a in zip(ids, model.alphas))
    print(f"fusion: {weights} beta={model.beta:.4f} -> {out_path}")
    return 0


def cmd_fuse_apply(args, tracker: _Tracker) -> int:
    model = load_fusion(args.model)
    pairs = _read_scores_manifest(args.scores_manifest)
    utts, matrix, ids = _score_matrix(pairs)
    fused = apply_fusion(model, matrix, input_ids=ids)
    fused = np.atleast_1d(fused)
    out_path = tracker.out(args.out)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_scores(out_path, [ScoreRecord(u, float(s)) for u, s in zip(utts, fused)])
    print(f"fused {len(utts)} utterances -> {out_path}")
    return 0


def _cost_from_args(args) -> CostModel:
    if args.cost_config:
        cost = load_cost_config(args.cost_config)
    else:
        cost = CostModel()
    overrides = {}
    for item in args.cost or []:
        name, _, value = item.partition("=")
        if not value:
            raise RuntimeError(f"--cost expects name=value, got '{item}'")
        overrides[name] = float(value)
    if overrides:
        cost = CostModel(**{**cost.__dict__, **overrides})
    return cost


def cmd_evaluate(args, tracker: _Tracker) -> int:
    records = read_scores(args.scores)
    entries = parse_protocol(args.protocol)
    bona, spoof = scores_by_class(records, entries)
    scores = ScoreSet(bonafide_scores=bona, spoof_scores=spoof)
    cost = _cost_from_args(args)
    eer, eer_thr = compute_eer(scores)
    tdcf, tdcf_thr = compute_min_tdcf(scores, cost)
    print(f"scores:     {args.scores}")
    print(f"counts:     bonafide={bona.size} spoof={spoof.size}")
    print(f"EER:        {100 * eer:.2f}% (threshold {eer_thr:.6f})")
    print(f"min t-DCF:  {tdcf:.4f} (threshold {tdcf_thr:.6f})")
    print(f"cost model: {cost.describe()}")
    if args.sweep_csv:
        c1, c2 = tdcf_coefficients(cost)
        taus, p_miss, p_fa = detection_sweep(scores)
        with tracker.out(args.sweep_csv).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold", "p_miss", "p_fa", "tdcf_norm"])
            for t, pm, pf in zip(taus, p_miss, p_fa):
                writer.writerow([t, pm, pf, (c1 * pm + c2 * pf) / min(c1, c2)])
    return 0


def cmd_audit_silence(args, tracker: _Tracker) -> int:
    entries = parse_protocol(args.protocol)
    report = silence_report(entries, args.audio_root, epsilon=args.epsilon,
                            warn_ratio=args.warn_ratio)
    out_path = tracker.out(args.out_csv)
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(report.to_csv())
    for g in report.groups:
        if g.scope == "class":
            print(f"{g.name}: n={g.count} trailing median "
                  f"{g.trail_median:.0f} samples ({g.trail_median_sec:.3f}s), "
                  f"leading median {g.lead_median:.0f}")
    if report.partial:
        print(f"warning: {len(report.missing_files)} missing file(s); "
              "report is partial", file=sys.stderr)
    if report.cue_warning:
        print("WARNING: trailing-silence medians differ across classes by "
              f"more than {report.warn_ratio}x - the dataset likely leaks "
              "the label through padding")
    return 0


def _trim_one(task):
    utt, audio_path, mode, epsilon, out_path = task
    buf = read_audio(audio_path)
    profile = measure_zero_runs(buf, epsilon)
    trimmed = trim_silence(buf, mode, epsilon)
    write_audio(out_path, trimmed)
    return (utt, profile.leading_run, profile.trailing_run, len(buf),
            len(trimmed), profile.full_silence)


def cmd_trim(args, tracker: _Tracker) -> int:
    entries = parse_protocol(args.protocol)
    out = Path(args.out_dir)
    audio_out = out / "audio"
    audio_out.mkdir(parents=True, exist_ok=True)
    tasks = [(e.utterance_id,
              resolve_audio_path(args.audio_root, e.utterance_id),
              args.mode, args.epsilon, audio_out / f"{e.utterance_id}.wav")
             for e in entries]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_trim_one, tasks, chunksize=8))
    else:
        rows = [_trim_one(t) for t in tasks]
    for t in tasks:
        tracker.out(t[-1])
    with tracker.out(out / "trim_report.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance_id", "leading_run", "trailing_run",
                         "samples_before", "samples_after", "full_silence"])
        writer.writerows(sorted(rows))
    print(f"trimmed {len(rows)} files -> {audio_out}")
    _write_manifest(tracker, out, "trim", {
        "mode": args.mode, "epsilon": args.epsilon,
    })
    return 0


def cmd_intervene(args, tracker: _Tracker) -> int:
    cfg = load_experiment_config(args.config)
    pipeline_cfg = GmmPipelineConfig(
        recipe=cfg.recipe, mixtures=cfg.mixtures, em=cfg.em, cost=cfg.cost,
        trim_mode=cfg.trim_mode, trim_epsilon=cfg.epsilon,
    )
    train = parse_protocol(cfg.train_protocol)
    test = parse_protocol(cfg.test_protocol)
    reports = run_interventions(args.mode, pipeline_cfg, train, test,
                                cfg.audio_root)
    out = Path(args.out_dir or cfg.work_dir)
    out.mkdir(parents=True, exist_ok=True)
    print(" int  metric before -> after")
    for rep in reports:
        print(rep.table_row())
    with tracker.out(out / "interventions.csv").open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "tdcf_before", "tdcf_after",
                         "eer_before", "eer_after"])
        for rep in reports:
            writer.writerow([rep.mode, rep.before.tdcf, rep.after.tdcf,
                             rep.before.eer, rep.after.eer])
    _write_manifest(tracker, out, "intervene", {
        "modes": list(args.mode), "seed": cfg.seed, "gmm_seed": cfg.em.seed,
        "mixtures": cfg.mixtures, "feature_kind": cfg.recipe.kind,
    }, config_path=args.config)
    return 0


def cmd_synth_corpus(args, tracker: _Tracker) -> int:
    spec = CorpusSpec(n_per_class=args.n_per_class,
                      sample_rate=args.sample_rate)
    train_path, test_path, audio_dir = generate_corpus(args.out_dir,
                                                       seed=args.seed,
                                                       spec=spec)
    out = Path(args.out_dir)
    tracker.out(train_path)
    tracker.out(test_path)
    tracker.out(out / "padding_truth.csv")
    print(f"corpus: {2 * args.n_per_class} utterances under {audio_dir}")
    print(f"protocols: {train_path} {test_path}")
    _write_manifest(tracker, out, "synth-corpus", {
        "seed": args.seed, "n_per_class": args.n_per_class,
        "sample_rate": args.sample_rate,
    })
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spoofcm",
        description="Anti-spoofing countermeasures and silence auditing",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--dump-config", action="store_true",
                        help="print the default experiment config and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("partition", help="carve train/dev into train_tr/dev_es/dev_lr")
    p.add_argument("--train-protocol", required=True)
    p.add_argument("--dev-protocol", required=True)
    p.add_argument("--heldout", required=True,
                   help="comma-separated attack ids for dev_es")
    p.add_argument("--fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("extract", help="extract features for a protocol")
    p.add_argument("--protocol", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trim", default="none",
                   choices=["none", "leading", "trailing", "both"])
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    _add_recipe_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train-gmm", help="train bonafide and spoof GMMs")
    p.add_argument("--features", required=True, help="features.manifest path")
    p.add_argument("--protocol", required=True)
    p.add_argument("--mixtures", type=int, default=128)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--variance-floor", type=float, default=1e-3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train_gmm)

    p = sub.add_parser("train-ubm", help="train a UBM on all frames")
    p.add_argument("--features", required=True)
    p.add_argument("--mixtures", type=int, default=128)
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--rel-tol", type=float, default=1e-5)
    p.add_argument("--variance-floor", type=float, default=1e-3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_ubm)

    p = sub.add_parser("train-tv", help="train the total-variability matrix")
    p.add_argument("--features", required=True)
    p.add_argument("--ubm", required=True)
    p.add_argument("--rank", type=int, default=100)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_tv)

    p = sub.add_parser("extract-ivectors", help="posterior-mean i-vectors per utterance")
    p.add_argument("--features", required=True)
    p.add_argument("--tv", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_extract_ivectors)

    p = sub.add_parser("train-svm", help="linear SVM over (fused) vectors")
    p.add_argument("--vectors", action="append", required=True,
                   help="vector manifest; repeat to fuse in order")
    p.add_argument("--protocol", required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("score", help="score utterances with a trained backend")
    p.add_argument("--backend", required=True, choices=["gmm", "svm"])
    p.add_argument("--bonafide-model")
    p.add_argument("--spoof-model")
    p.add_argument("--features")
    p.add_argument("--svm-model")
    p.add_argument("--vectors", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("fuse-train", help="train logistic-regression fusion")
    p.add_argument("--scores-manifest", required=True,
                   help="text file of 'model_id score_file' lines")
    p.add_argument("--protocol", required=True)
    p.add_argument("--prior", type=float, default=0.5)
    p.add_argument("--preset", choices=sorted(ENSEMBLE_PRESETS))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse_train)

    p = sub.add_parser("fuse-apply", help="apply a trained fusion model")
    p.add_argument("--model", required=True)
    p.add_argument("--scores-manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse_apply)

    p = sub.add_parser("evaluate", help="EER and min t-DCF for a score file")
    p.add_argument("--scores", required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--cost-config", help="INI file with a [cost] section")
    p.add_argument("--cost", action="append", metavar="NAME=VALUE",
                   help="override a cost-model field; repeatable")
    p.add_argument("--sweep-csv", help="write the full threshold sweep")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("audit-silence", help="silence-run distributions per class")
    p.add_argument("--protocol", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--warn-ratio", type=float, default=1.5)
    p.add_argument("--out-csv", required=True)
    p.set_defaults(func=cmd_audit_silence)

    p = sub.add_parser("trim", help="write silence-trimmed copies of a corpus")
    p.add_argument("--protocol", required=True)
    p.add_argument("--audio-root", required=True)
    p.add_argument("--mode", default="trailing",
                   choices=["leading", "trailing", "both"])
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("intervene", help="baseline vs silence-trimmed metrics")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", action="append", required=True,
                   choices=["I", "II", "III"],
                   help="intervention mode; repeatable")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("synth-corpus",
                       help="synthetic corpus whose only class cue is trailing silence")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-per-class", type=int, default=500)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.set_defaults(func=cmd_synth_corpus)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "dump_config", False):
        print(default_config_text(), end="")
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    tracker = _Tracker()
    try:
        return args.func(args, tracker)
    except BrokenPipeError:
        raise
    except Exception as exc:  # noqa: BLE001 - single-line CLI error contract
        tracker.discard_all()
        message = str(exc).replace("\n", " ") or exc.__class__.__name__
        print(f"error: {message}", file=sys.stderr)
        return 1


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
