"""Command-line surface: split, baseline, train, eval, synth."""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import metrics
from .audio import MelSpectrogramExtractor, load_audio, load_mel_cache, save_mel_cache
from .catalog import (
    ArtistDisjointSplitter,
    apply_taxonomy,
    load_catalog,
    load_manifest,
    partition,
    save_manifest,
)
from .langid import (
    MetadataVectorizer,
    NGramLanguageDetector,
    baseline_predict,
    builtin_detector,
    load_profiles,
    load_vector_table,
)
from .languages import default_taxonomy
from .model import ModelConfig
from .synth import make_synth_catalog
from .training import (
    EVAL_MODES,
    EXPERIMENT_NAMES,
    TrackDataset,
    load_checkpoint,
    predict_dataset,
    run_experiment,
)

BASELINE_CONFIGS = (
    ("artist_name", ("artist",)),
    ("album_name", ("album",)),
    ("track_title", ("title",)),
    ("joining_all", ("artist", "album", "title")),
)


def _require_file(path, message: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise click.UsageError(message)
    return path


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    cfg = json.loads(_require_file(path, "config file not found").read_text())
    unknown = set(cfg) - {"model", "train", "frontend"}
    if unknown:
        raise click.UsageError(f"unknown config sections: {sorted(unknown)}")
    return cfg


def _detector(profiles_dir, seed) -> NGramLanguageDetector:
    if profiles_dir:
        return NGramLanguageDetector(seed=seed).fit_profiles(load_profiles(profiles_dir))
    return builtin_detector(seed=seed)


def _labeled_records(metadata, audio_root, delimiter):
    _require_file(metadata, "metadata file not found")
    taxonomy = default_taxonomy()
    records = load_catalog(metadata, delimiter=delimiter, audio_root=audio_root)
    return apply_taxonomy(records, taxonomy), taxonomy


def _lang_rows(records, detector, vectors_path):
    if vectors_path:
        table = load_vector_table(_require_file(vectors_path, "vector file not found"))
        missing = [r.track_id for r in records if r.track_id not in table]
        if missing:
            raise click.UsageError(
                f"vector file lacks {len(missing)} track ids (first: {missing[0]})"
            )
        return np.stack([table[r.track_id] for r in records])
    vectorizer = MetadataVectorizer(detector=detector).fit()
    return vectorizer.transform([r.meta for r in records])


def _audio_rows(records, frontend: MelSpectrogramExtractor, cache_dir):
    mats = []
    for r in records:
        mel = load_mel_cache(cache_dir, r.track_id) if cache_dir else None
        if mel is None:
            path = Path(r.audio_path)
            if not path.is_file():
                raise click.UsageError(f"audio file not found for track {r.track_id}: {path}")
            mel = frontend.process(load_audio(path)).astype(np.float32)
            if cache_dir:
                save_mel_cache(cache_dir, r.track_id, mel)
        mats.append(mel)
    shapes = {m.shape for m in mats}
    if len(shapes) > 1:
        raise click.UsageError(
            f"tracks produce differing spectrogram shapes {sorted(shapes)}; "
            "use uniform clip lengths"
        )
    return np.stack(mats)


def _build_dataset(records, taxonomy, variant, detector, vectors_path, frontend,
                   cache_dir) -> TrackDataset:
    labels = [r.label for r in records]
    lang = audio = None
    if variant in ("full", "text_only"):
        lang = _lang_rows(records, detector, vectors_path)
    if variant in ("full", "audio_only"):
        audio = _audio_rows(records, frontend, cache_dir)
    return TrackDataset.from_arrays(
        labels=labels, classes=taxonomy.classes, audio=audio, lang=lang
    )


@click.group()
def main():
    """Singing-language identification toolkit."""


@main.command("split")
@click.option("--metadata", required=True, help="Delimited metadata file.")
@click.option("--seed", default=0, show_default=True)
@click.option("--ratio", default=0.8, show_default=True)
@click.option("--delimiter", default=",", show_default=True)
@click.option("--out", required=True, help="Manifest output path.")
def cmd_split(metadata, seed, ratio, delimiter, out):
    """Produce an artist-disjoint stratified train/validation manifest."""
    records, _ = _labeled_records(metadata, None, delimiter)
    try:
        manifest = ArtistDisjointSplitter(ratio=ratio, seed=seed).split(records)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    save_manifest(manifest, out)
    click.echo(
        f"wrote {out}: {len(manifest.train_ids)} train / {len(manifest.valid_ids)} valid"
    )
    for warning in manifest.warnings:
        click.echo(f"warning: {warning}")


@main.command("baseline")
@click.option("--metadata", required=True)
@click.option("--split", "split_path", required=True, help="Split manifest.")
@click.option("--seed", default=0, show_default=True)
@click.option("--delimiter", default=",", show_default=True)
@click.option("--profiles", default=None, help="Directory of language profile files.")
@click.option("--side", type=click.Choice(["train", "valid"]), default="valid",
              show_default=True)
@click.option("--out-dir", required=True)
def cmd_baseline(metadata, split_path, seed, delimiter, profiles, side, out_dir):
    """Evaluate the detector-only predictor under each text-input configuration."""
    records, taxonomy = _labeled_records(metadata, None, delimiter)
    manifest = load_manifest(_require_file(split_path, "split manifest not found"))
    train_records, valid_records = partition(records, manifest)
    chosen = train_records if side == "train" else valid_records
    if not chosen:
        raise click.UsageError(f"no records on the {side} side")
    detector = _detector(profiles, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    y_true = [r.label for r in chosen]
    for name, fields in BASELINE_CONFIGS:
        y_pred = [baseline_predict(r.meta, detector, taxonomy, fields) for r in chosen]
        cm, report = metrics.evaluate(y_true, y_pred, taxonomy.classes)
        metrics.save_report(report, out / f"baseline_{name}")
        if name == "joining_all":
            metrics.save_confusion(cm, taxonomy.classes, out / "confusion_joining_all")
        click.echo(
            f"{name}: macro F1 {report.macro_f1:.3f}, weighted F1 {report.weighted_f1:.3f}"
        )


def _frontend_from_config(cfg: dict) -> MelSpectrogramExtractor:
    return MelSpectrogramExtractor(**cfg.get("frontend", {}))


@main.command("train")
@click.option("--experiment", type=click.Choice(EXPERIMENT_NAMES), required=True)
@click.option("--metadata", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--audio-root", default=None, help="Directory holding <id>.wav files.")
@click.option("--seed", default=0, show_default=True)
@click.option("--epochs", default=None, type=int, help="Override max epochs.")
@click.option("--batch-size", default=None, type=int)
@click.option("--lr", default=None, type=float)
@click.option("--patience", default=None, type=int)
@click.option("--delimiter", default=",", show_default=True)
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--profiles", default=None)
@click.option("--vectors", default=None, help="Pre-computed language vector table.")
@click.option("--cache-dir", default=None, envvar="LRIDNET_CACHE_DIR")
@click.option("--out-dir", required=True)
def cmd_train(experiment, metadata, split_path, audio_root, seed, epochs, batch_size,
              lr, patience, delimiter, config_path, profiles, vectors, cache_dir,
              out_dir):
    """Train an experiment and write its checkpoint and epoch log."""
    cfg = _load_config_file(config_path)
    records, taxonomy = _labeled_records(metadata, audio_root, delimiter)
    manifest = load_manifest(_require_file(split_path, "split manifest not found"))
    train_records, valid_records = partition(records, manifest)
    if not train_records or not valid_records:
        raise click.UsageError("manifest leaves one side empty")

    frontend = _frontend_from_config(cfg)
    detector = _detector(profiles, seed)
    variant = {"AO": "audio_only", "TO": "text_only"}.get(experiment, "full")

    model_overrides = dict(cfg.get("model", {}))
    model_overrides.setdefault("n_mels", frontend.n_mels)
    model_overrides["n_classes"] = taxonomy.n_classes
    train_overrides = dict(cfg.get("train", {}))
    train_overrides["seed"] = seed
    for key, value in (("max_epochs", epochs), ("batch_size", batch_size),
                       ("learning_rate", lr), ("patience", patience)):
        if value is not None:
            train_overrides[key] = value

    train_set = _build_dataset(train_records, taxonomy, variant, detector, vectors,
                               frontend, cache_dir)
    valid_set = _build_dataset(valid_records, taxonomy, variant, detector, vectors,
                               frontend, cache_dir)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        with open(out / "train_log.jsonl", "w", encoding="utf-8") as log_stream:
            model, ckpt, log = run_experiment(
                experiment, train_set, valid_set,
                model_overrides=model_overrides,
                train_overrides=train_overrides,
                log_stream=log_stream,
            )
    except (ValueError, RuntimeError) as exc:
        raise click.UsageError(str(exc))
    from .training import save_checkpoint

    save_checkpoint(ckpt, out / "checkpoint.npz")
    best = log.epochs[log.best_epoch - 1]
    click.echo(
        f"trained {experiment}: best epoch {log.best_epoch} "
        f"(valid loss {best.valid_loss:.4f}, weighted F1 {best.valid_weighted_f1:.3f}), "
        f"stopped at epoch {log.stop_epoch}"
    )
    click.echo(f"checkpoint: {out / 'checkpoint.npz'}")


@main.command("eval")
@click.option("--checkpoint", "checkpoint_path", required=True)
@click.option("--metadata", required=True)
@click.option("--split", "split_path", required=True)
@click.option("--audio-root", default=None)
@click.option("--mode", type=click.Choice(EVAL_MODES), default="full", show_default=True)
@click.option("--side", type=click.Choice(["train", "valid"]), default="valid",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--delimiter", default=",", show_default=True)
@click.option("--config", "config_path", default=None)
@click.option("--profiles", default=None)
@click.option("--vectors", default=None)
@click.option("--cache-dir", default=None, envvar="LRIDNET_CACHE_DIR")
@click.option("--out-dir", required=True)
def cmd_eval(checkpoint_path, metadata, split_path, audio_root, mode, side, seed,
             delimiter, config_path, profiles, vectors, cache_dir, out_dir):
    """Evaluate a checkpoint under full or missing-modality input conditions."""
    cfg = _load_config_file(config_path)
    ckpt = load_checkpoint(_require_file(checkpoint_path, "checkpoint file not found"))
    records, taxonomy = _labeled_records(metadata, audio_root, delimiter)
    manifest = load_manifest(_require_file(split_path, "split manifest not found"))
    train_records, valid_records = partition(records, manifest)
    chosen = train_records if side == "train" else valid_records
    if not chosen:
        raise click.UsageError(f"no records on the {side} side")

    frontend = _frontend_from_config(cfg)
    detector = _detector(profiles, seed)
    variant = ckpt.model_config.variant
    dataset = _build_dataset(chosen, taxonomy, variant, detector, vectors, frontend,
                             cache_dir)
    model = ckpt.build_model()
    preds = predict_dataset(model, dataset, mode=mode)
    y_true = [r.label for r in chosen]
    y_pred = [taxonomy.classes[i] for i in preds]
    cm, report = metrics.evaluate(y_true, y_pred, taxonomy.classes)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics.save_report(report, out / f"report_{mode}")
    metrics.save_confusion(cm, taxonomy.classes, out / f"confusion_{mode}")
    click.echo(
        f"eval {mode} ({side}): macro F1 {report.macro_f1:.3f}, "
        f"weighted F1 {report.weighted_f1:.3f}"
    )


@main.command("synth")
@click.option("--n", "n_tracks", default=500, show_default=True)
@click.option("--classes", "n_classes", default=5, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--clip-seconds", default=1.0, show_default=True)
@click.option("--sample-rate", default=44100, show_default=True)
@click.option("--out-dir", required=True)
def cmd_synth(n_tracks, n_classes, seed, clip_seconds, sample_rate, out_dir):
    """Generate a synthetic catalog whose audio and text both encode the label."""
    try:
        metadata_path = make_synth_catalog(
            out_dir,
            n_tracks=n_tracks,
            n_classes=n_classes,
            seed=seed,
            clip_seconds=clip_seconds,
            sample_rate=sample_rate,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    click.echo(f"wrote {n_tracks} tracks under {out_dir}")
    click.echo(f"metadata: {metadata_path}")


if __name__ == "__main__":
    main()
