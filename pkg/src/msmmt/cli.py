"""Command-line entry point tying the pipeline together.

Subcommands: gen-synth (synthetic dataset + manifest), preprocess (align /
magnify / augment), features (cached modality-image extraction), train
(single split, debugging), loso (full cross-validation with reports).
All commands share --config; --seed overrides the config seed. Logging level
comes from the MSMMT_LOG environment variable (error | info | debug).

Exit codes: 0 success, 1 validation error, 2 partial per-clip failures,
3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .dataset import ManifestEntry, load_manifest, save_manifest
from .dynimg import dynamic_image
from .evm import evm_magnify
from .loso import Sample, run_alpha_sweep, run_loso
from .model import MicroExpressionModel, save_checkpoint
from .prep import align_and_crop, augment, load_clip, load_landmarks_csv, save_clip
from .synth import gen_synthetic
from .tensorio import read_tensor, write_tensor

log = logging.getLogger("msmmt")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_INTERNAL = 3


def _setup_logging() -> None:
    level = os.environ.get("MSMMT_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"MSMMT_LOG must be error|info|debug, got '{level}'")
    logging.basicConfig(level=levels[level], format="%(levelname)s %(message)s")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _clip_id(entry: ManifestEntry) -> str:
    return Path(entry.clip_path).stem


def _resolve(manifest_path: Path, rel: str) -> Path:
    p = Path(rel)
    return p if p.is_absolute() else manifest_path.parent / p


# -- gen-synth ------------------------------------------------------------------


def cmd_gen_synth(cfg: RunConfig, out_dir: Path) -> int:
    spec = cfg.synthetic_spec()
    clips_dir = out_dir / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)
    clips = gen_synthetic(spec)
    entries = []
    for i, clip in enumerate(clips):
        rel = f"clips/clip{i:04d}.msmt"
        save_clip(clip, out_dir / rel)
        entries.append(
            ManifestEntry(
                clip_path=rel,
                subject_id=clip.subject_id,
                label=clip.label,
                source="synthetic",
                onset=clip.onset,
                apex=clip.apex,
                offset=clip.offset,
            )
        )
    save_manifest(entries, out_dir / "manifest.json")
    log.info("wrote %d clips and manifest to %s", len(entries), out_dir)
    print(f"gen-synth: {len(entries)} clips -> {out_dir / 'manifest.json'}")
    return EXIT_OK


# -- preprocess -----------------------------------------------------------------


def _load_entry_clip(cfg: RunConfig, manifest_path: Path, entry: ManifestEntry):
    """Load a manifest clip: .msmt tensor with sidecar, or a PNG directory
    (metadata then comes from the manifest and the prep.fps config key)."""
    from .prep import VideoClip, load_frames

    path = _resolve(manifest_path, entry.clip_path)
    if path.is_dir():
        return VideoClip(
            frames=load_frames(path),
            fps=float(cfg.sections["prep"]["fps"]),
            subject_id=entry.subject_id,
            label=entry.label,
            onset=entry.onset,
            apex=entry.apex,
            offset=entry.offset,
        )
    return load_clip(path)


def cmd_preprocess(cfg: RunConfig, manifest_path: Path, out_dir: Path) -> int:
    prep_cfg = cfg.sections["prep"]
    entries = load_manifest(manifest_path)
    out_clips = out_dir / "preprocessed"
    out_clips.mkdir(parents=True, exist_ok=True)
    new_entries: list[ManifestEntry] = []
    failures: list[str] = []
    rng = np.random.default_rng(cfg.seed)
    for entry in entries:
        try:
            clip = _load_entry_clip(cfg, manifest_path, entry)
            if prep_cfg["align"]:
                if not entry.landmarks_path:
                    raise ValueError("alignment enabled but no landmarks file")
                lm = load_landmarks_csv(
                    _resolve(manifest_path, entry.landmarks_path), clip.num_frames
                )
                size = prep_cfg["out_size"]
                clip = align_and_crop(
                    clip.frames, lm, (size, size), fps=clip.fps,
                    subject_id=clip.subject_id, label=clip.label,
                    onset=clip.onset, apex=clip.apex, offset=clip.offset,
                )
            if prep_cfg["evm"]["enabled"]:
                clip = evm_magnify(
                    clip,
                    alpha=prep_cfg["evm"]["alpha"],
                    band=tuple(prep_cfg["evm"]["band"]),
                    levels=prep_cfg["evm"]["levels"],
                )
            variants = [("", clip)]
            aug = prep_cfg["augment"]
            for k in range(prep_cfg["augment_copies"]):
                variants.append(
                    (
                        f".aug{k}",
                        augment(
                            clip,
                            seed=int(rng.integers(2**31)),
                            rotation_range=tuple(aug["rotation_range"]),
                            scale_range=tuple(aug["scale_range"]),
                            flip_prob=aug["flip_prob"],
                        ),
                    )
                )
            for suffix, variant in variants:
                rel = f"preprocessed/{_clip_id(entry)}{suffix}.msmt"
                save_clip(variant, out_dir / rel)
                new_entries.append(
                    ManifestEntry(
                        clip_path=rel,
                        subject_id=entry.subject_id,
                        label=entry.label,
                        source=entry.source,
                        onset=variant.onset,
                        apex=variant.apex,
                        offset=variant.offset,
                    )
                )
        except Exception as exc:  # per-clip failure: log, continue
            log.error("preprocess failed for %s: %s", entry.clip_path, exc)
            failures.append(entry.clip_path)
    save_manifest(new_entries, out_dir / "manifest.json")
    print(
        f"preprocess: {len(new_entries)} clips written, {len(failures)} failed "
        f"-> {out_dir / 'manifest.json'}"
    )
    return EXIT_PARTIAL if failures else EXIT_OK


# -- features -------------------------------------------------------------------


def _param_hash(clip_path: Path, params: dict) -> str:
    h = hashlib.sha256()
    h.update(clip_path.read_bytes())
    h.update(json.dumps(params, sort_keys=True).encode())
    return h.hexdigest()


def _feature_paths(clip_path: Path, kind: str) -> tuple[Path, Path]:
    base = clip_path.with_suffix("")  # strip .msmt
    feat = base.with_name(base.name + f".{kind}.msmt")
    meta = base.with_name(base.name + f".{kind}.json")
    return feat, meta


def _cache_valid(feat: Path, meta: Path, digest: str) -> bool:
    if not (feat.exists() and meta.exists()):
        return False
    try:
        return json.loads(meta.read_text())["hash"] == digest
    except (json.JSONDecodeError, KeyError):
        return False


def _compute_one(args: tuple) -> tuple[str, bool, bool]:
    """Worker: ensure both modality images exist for one clip.

    Returns (clip id, dyn was recomputed, flowos was recomputed).
    """
    clip_path_s, dyn_params, flow_params, frame_pair, save_debug = args
    clip_path = Path(clip_path_s)
    from .flow import TVL1Params, clip_flow, compose_flow_os

    dyn_digest = _param_hash(clip_path, dyn_params)
    flow_digest = _param_hash(clip_path, {**flow_params, "frame_pair": frame_pair})
    dyn_feat, dyn_meta = _feature_paths(clip_path, "dyn")
    fos_feat, fos_meta = _feature_paths(clip_path, "flowos")
    did_dyn = did_fos = False
    clip = None
    if not _cache_valid(dyn_feat, dyn_meta, dyn_digest):
        clip = load_clip(clip_path)
        img = dynamic_image(
            clip,
            lambda_reg=dyn_params["lambda_reg"],
            iters=dyn_params["iters"],
            step=dyn_params["step"],
            use_sqrt=dyn_params["use_sqrt"],
        ).image
        write_tensor(dyn_feat, img)
        _atomic_write_text(dyn_meta, json.dumps({"hash": dyn_digest}))
        did_dyn = True
    if not _cache_valid(fos_feat, fos_meta, flow_digest):
        clip = clip or load_clip(clip_path)
        params = TVL1Params(
            attachment=flow_params["attachment"],
            tightness=flow_params["tightness"],
            tau=flow_params["tau"],
            warps=flow_params["warps"],
            dual_iters=flow_params["dual_iters"],
            levels=flow_params["levels"],
            median_filter=flow_params["median_filter"],
        )
        field, strainmap = clip_flow(clip, params, frame_pair=frame_pair)
        write_tensor(fos_feat, compose_flow_os(field, strainmap))
        if save_debug:
            base = clip_path.with_suffix("")
            write_tensor(base.with_name(base.name + ".flow_u.msmt"), field.u)
            write_tensor(base.with_name(base.name + ".flow_v.msmt"), field.v)
            write_tensor(base.with_name(base.name + ".flow_eps.msmt"), strainmap.eps)
        _atomic_write_text(fos_meta, json.dumps({"hash": flow_digest}))
        did_fos = True
    return clip_path.stem, did_dyn, did_fos


def ensure_features(
    cfg: RunConfig, manifest_path: Path, workers: int = 1
) -> tuple[list[ManifestEntry], int, int]:
    """Compute or reuse cached modality images for every manifest entry."""
    entries = load_manifest(manifest_path)
    dyn_params = dict(cfg.sections["dynimg"])
    flow_params = {
        k: v for k, v in cfg.sections["flow"].items()
        if k not in ("frame_pair", "save_debug")
    }
    frame_pair = cfg.sections["flow"]["frame_pair"]
    save_debug = cfg.sections["flow"]["save_debug"]
    jobs = [
        (str(_resolve(manifest_path, e.clip_path)), dyn_params, flow_params,
         frame_pair, save_debug)
        for e in entries
    ]
    recomputed_dyn = recomputed_fos = 0
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for _, did_dyn, did_fos in pool.map(_compute_one, jobs):
                recomputed_dyn += did_dyn
                recomputed_fos += did_fos
    else:
        for job in jobs:
            _, did_dyn, did_fos = _compute_one(job)
            recomputed_dyn += did_dyn
            recomputed_fos += did_fos
    return entries, recomputed_dyn, recomputed_fos


def cmd_features(cfg: RunConfig, manifest_path: Path, workers: int) -> int:
    entries, did_dyn, did_fos = ensure_features(cfg, manifest_path, workers)
    cached = 2 * len(entries) - did_dyn - did_fos
    print(
        f"features: {len(entries)} clips, recomputed {did_dyn} dynamic + "
        f"{did_fos} flow-strain images, {cached} cache hits"
    )
    return EXIT_OK


def load_samples(cfg: RunConfig, manifest_path: Path, workers: int = 1) -> list[Sample]:
    entries, _, _ = ensure_features(cfg, manifest_path, workers)
    samples = []
    for e in entries:
        clip_path = _resolve(manifest_path, e.clip_path)
        dyn_feat, _ = _feature_paths(clip_path, "dyn")
        fos_feat, _ = _feature_paths(clip_path, "flowos")
        try:
            dyn = read_tensor(dyn_feat)
            fos = read_tensor(fos_feat)
        except IOError as exc:
            raise IOError(f"corrupt or missing feature file for {e.clip_path}: {exc}")
        samples.append(
            Sample(
                clip_id=_clip_id(e),
                subject_id=e.subject_id,
                label=e.label,
                dy_image=dyn,
                flowos_image=fos,
                source=e.source,
            )
        )
    return samples


# -- loso / train ----------------------------------------------------------------


def _write_reports(result, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["fold", "test_subject", "n_test", "acc", "uar", "uf1", "train_acc"])
    for i, f in enumerate(result.folds):
        writer.writerow(
            [i, f.test_subject, len(f.clip_ids), f"{f.metrics.acc:.6f}",
             f"{f.metrics.uar:.6f}", f"{f.metrics.uf1:.6f}", f"{f.train_accuracy:.6f}"]
        )
    _atomic_write_text(out_dir / "folds.csv", buf.getvalue())

    agg = {
        "aggregate": result.aggregate.to_dict(),
        "mean_train_accuracy": result.mean_train_accuracy,
        "per_source": {k: v.to_dict() for k, v in result.per_source.items()},
    }
    _atomic_write_text(out_dir / "aggregate.json", json.dumps(agg, indent=2, sort_keys=True))

    buf = io.StringIO()
    writer = csv.writer(buf)
    n_classes = result.aggregate.num_classes
    writer.writerow(
        ["clip_id", "label", "prediction"] + [f"score_{c}" for c in range(n_classes)]
    )
    for f in result.folds:
        for cid, lab, pred, score in zip(f.clip_ids, f.labels, f.predictions, f.scores):
            writer.writerow([cid, int(lab), int(pred)] + [f"{s:.6f}" for s in score])
    _atomic_write_text(out_dir / "predictions.csv", buf.getvalue())


def cmd_loso(
    cfg: RunConfig,
    manifest_path: Path,
    out_dir: Path,
    workers: int,
    alpha_sweep: bool,
    fold: str | None,
) -> int:
    samples = load_samples(cfg, manifest_path, workers)
    model_cfg = cfg.model_config()
    if alpha_sweep:
        alphas = tuple(cfg.sections["eval"]["alphas"])
        results = run_alpha_sweep(samples, model_cfg, cfg.train_config(), alphas)
        out_dir.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["alpha", "acc", "uar", "uf1"])
        for alpha, rep in results:
            writer.writerow(
                [f"{alpha:.1f}", f"{rep.acc:.6f}", f"{rep.uar:.6f}", f"{rep.uf1:.6f}"]
            )
        _atomic_write_text(out_dir / "alpha_sweep.csv", buf.getvalue())
        print(f"alpha sweep -> {out_dir / 'alpha_sweep.csv'}")
        for alpha, rep in results:
            print(f"  alpha={alpha:.1f}  acc={rep.acc:.4f} uar={rep.uar:.4f} uf1={rep.uf1:.4f}")
        return EXIT_OK

    result = run_loso(
        samples, model_cfg, cfg.train_config(),
        fold_subjects=[fold] if fold else None,
    )
    _write_reports(result, out_dir)
    print(f"{'fold':>6} {'subject':>10} {'acc':>8} {'uar':>8} {'uf1':>8}")
    for i, f in enumerate(result.folds):
        print(
            f"{i:>6} {f.test_subject:>10} {f.metrics.acc:>8.4f} "
            f"{f.metrics.uar:>8.4f} {f.metrics.uf1:>8.4f}"
        )
    agg = result.aggregate
    print(f"{'':>6} {'pooled':>10} {agg.acc:>8.4f} {agg.uar:>8.4f} {agg.uf1:>8.4f}")
    print(f"reports -> {out_dir}")
    return EXIT_OK


def cmd_train(
    cfg: RunConfig, manifest_path: Path, out_dir: Path, workers: int, fold: str | None
) -> int:
    from .loso import evaluate, loso_split, train_model
    from .metrics import compute_metrics

    samples = load_samples(cfg, manifest_path, workers)
    plan = loso_split(samples)
    subject = fold or plan.folds[0].test_subject
    chosen = [f for f in plan.folds if f.test_subject == subject]
    if not chosen:
        raise ConfigError(f"no subject '{subject}' in dataset")
    by_id = {s.clip_id: s for s in samples}
    train_sm = [by_id[i] for i in chosen[0].train_ids]
    test_sm = [by_id[i] for i in chosen[0].test_ids]
    model = MicroExpressionModel(cfg.model_config(), seed=cfg.seed)
    history = train_model(
        model, train_sm, cfg.train_config(), np.random.default_rng(cfg.seed)
    )
    labels, preds, _ = evaluate(model, test_sm)
    rep = compute_metrics(labels, preds, cfg.model_config().num_classes)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(model, out_dir / "checkpoint")
    print(
        f"train: held-out subject {subject}: acc={rep.acc:.4f} uar={rep.uar:.4f} "
        f"uf1={rep.uf1:.4f} (final loss {history[-1]:.4f})"
    )
    print(f"checkpoint -> {out_dir / 'checkpoint'}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="msmmt",
        description="Micro-motion recognition pipeline: synthetic data, "
        "feature extraction, training, and LOSO evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="parallel workers")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset manifest JSON")

    common(sub.add_parser("gen-synth", help="generate the synthetic dataset"), manifest=False)
    common(sub.add_parser("preprocess", help="align / magnify / augment clips"))
    common(sub.add_parser("features", help="extract and cache modality images"))
    p_train = sub.add_parser("train", help="train one split for debugging")
    common(p_train)
    p_train.add_argument("--fold", default=None, help="held-out subject id")
    p_loso = sub.add_parser("loso", help="full leave-one-subject-out evaluation")
    common(p_loso)
    p_loso.add_argument("--fold", default=None, help="run a single fold (subject id)")
    p_loso.add_argument(
        "--alpha-sweep", action="store_true",
        help="sweep the loss blend weight and emit a CSV",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        out_dir = Path(args.out)
        if args.command == "gen-synth":
            return cmd_gen_synth(cfg, out_dir)
        if args.command == "preprocess":
            return cmd_preprocess(cfg, Path(args.manifest), out_dir)
        if args.command == "features":
            return cmd_features(cfg, Path(args.manifest), args.workers)
        if args.command == "train":
            return cmd_train(cfg, Path(args.manifest), out_dir, args.workers, args.fold)
        if args.command == "loso":
            return cmd_loso(
                cfg, Path(args.manifest), out_dir, args.workers,
                args.alpha_sweep, args.fold,
            )
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IOError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # unexpected
        logging.getLogger("msmmt").exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
