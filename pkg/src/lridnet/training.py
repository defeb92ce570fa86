"""Training loop, experiment presets, and checkpoint serialization.

Training uses Adam on unweighted cross-entropy over per-epoch seeded shuffles
(every sample exactly once per epoch, no class balancing) and early stopping
on validation loss: the returned weights are those of the epoch with the
lowest validation loss, and the loop stops once that monitor has not improved
for ``patience`` consecutive epochs. All randomness (shuffling and the two
modality-dropout streams) derives from the single config seed, so repeated
runs on the same hardware produce identical logs.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, asdict, replace

import numpy as np
import torch
from torch.nn import functional as F

from . import metrics
from .languages import CLASS_NAMES
from .model import LridNet, ModelConfig

EXPERIMENT_NAMES = ("Main", "ADr", "TDr", "ATDr", "AO", "TO")

DROPOUT_RATE = 0.2

_EXPERIMENT_SETTINGS = {
    "Main": {"variant": "full", "audio_dropout_rate": 0.0, "text_dropout_rate": 0.0},
    "ADr": {"variant": "full", "audio_dropout_rate": DROPOUT_RATE, "text_dropout_rate": 0.0},
    "TDr": {"variant": "full", "audio_dropout_rate": 0.0, "text_dropout_rate": DROPOUT_RATE},
    "ATDr": {"variant": "full", "audio_dropout_rate": DROPOUT_RATE, "text_dropout_rate": DROPOUT_RATE},
    "AO": {"variant": "audio_only", "audio_dropout_rate": 0.0, "text_dropout_rate": 0.0},
    "TO": {"variant": "text_only", "audio_dropout_rate": 0.0, "text_dropout_rate": 0.0},
}

EVAL_MODES = ("full", "missing_audio", "missing_text")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")


def make_experiment(name: str) -> tuple[ModelConfig, TrainConfig]:
    """Model/training configuration pair for a named experiment."""
    if name not in _EXPERIMENT_SETTINGS:
        raise ValueError(
            f"unknown experiment {name!r}; valid names: {', '.join(EXPERIMENT_NAMES)}"
        )
    return ModelConfig(**_EXPERIMENT_SETTINGS[name]), TrainConfig()


@dataclass
class TrackDataset:
    """In-memory tensors for one split: audio mels, language vectors, labels."""

    labels: torch.Tensor
    classes: tuple[str, ...]
    audio: torch.Tensor | None = None
    lang: torch.Tensor | None = None

    def __post_init__(self):
        if self.audio is None and self.lang is None:
            raise ValueError("dataset needs at least one modality")
        n = len(self.labels)
        for name in ("audio", "lang"):
            t = getattr(self, name)
            if t is not None and len(t) != n:
                raise ValueError(f"{name} has {len(t)} rows but there are {n} labels")
        if n and int(self.labels.max()) >= len(self.classes):
            raise ValueError("label index outside class list")

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_arrays(cls, labels, classes=CLASS_NAMES, audio=None, lang=None):
        """Build from numpy arrays; labels may be class names or indices."""
        classes = tuple(classes)
        if len(labels) and isinstance(labels[0], str):
            index = {c: i for i, c in enumerate(classes)}
            labels = [index[l] for l in labels]
        return cls(
            labels=torch.as_tensor(np.asarray(labels), dtype=torch.long),
            classes=classes,
            audio=None if audio is None else torch.as_tensor(np.asarray(audio), dtype=torch.float32),
            lang=None if lang is None else torch.as_tensor(np.asarray(lang), dtype=torch.float32),
        )

    def inputs_for(self, idx: torch.Tensor, variant: str, mode: str = "full"):
        """Model inputs for a batch, zeroing a modality per the eval mode."""
        x_audio = x_lang = None
        if variant in ("full", "audio_only"):
            if self.audio is None:
                raise ValueError(f"variant {variant!r} needs audio features")
            x_audio = self.audio[idx]
            if mode == "missing_audio":
                x_audio = torch.zeros_like(x_audio)
        if variant in ("full", "text_only"):
            if self.lang is None:
                raise ValueError(f"variant {variant!r} needs language vectors")
            x_lang = self.lang[idx]
            if mode == "missing_text":
                x_lang = torch.zeros_like(x_lang)
        return x_audio, x_lang


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    valid_loss: float
    train_weighted_f1: float
    valid_weighted_f1: float


@dataclass
class TrainLog:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stop_epoch: int = 0

    def to_jsonl(self) -> str:
        lines = [json.dumps(asdict(r)) for r in self.epochs]
        lines.append(json.dumps({"best_epoch": self.best_epoch, "stop_epoch": self.stop_epoch}))
        return "\n".join(lines) + "\n"


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    classes: tuple[str, ...]
    state: dict[str, np.ndarray]

    def build_model(self) -> LridNet:
        model = LridNet(self.model_config)
        model.load_state_dict(
            {k: torch.as_tensor(v) for k, v in self.state.items()}
        )
        model.eval()
        return model


def save_checkpoint(ckpt: Checkpoint, path):
    """Single-archive format: parameter arrays plus an embedded JSON header."""
    meta = {
        "model_config": ckpt.model_config.to_dict(),
        "train_config": asdict(ckpt.train_config),
        "classes": list(ckpt.classes),
    }
    arrays = {f"param/{k}": v for k, v in ckpt.state.items()}
    np.savez(path, __meta__=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(str(npz["__meta__"][()]))
        state = {
            k[len("param/"):]: npz[k] for k in npz.files if k.startswith("param/")
        }
    return Checkpoint(
        model_config=ModelConfig.from_dict(meta["model_config"]),
        train_config=TrainConfig(**meta["train_config"]),
        classes=tuple(meta["classes"]),
        state=state,
    )


def _epoch_batches(n: int, batch_size: int, generator: torch.Generator) -> list[torch.Tensor]:
    """Seeded shuffle chunked into batches; every index appears exactly once.

    A trailing singleton is merged into the previous batch because batch
    normalization cannot run on a single training sample.
    """
    perm = torch.randperm(n, generator=generator)
    batches = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = torch.cat([batches[-2], batches[-1]])
        batches.pop()
    return batches


def _weighted_f1(y_true: list[int], y_pred: list[int], n_classes: int) -> float:
    cm = metrics.confusion_matrix(y_true, y_pred, list(range(n_classes)))
    return metrics.report_from_confusion(cm, list(range(n_classes))).weighted_f1


@torch.no_grad()
def _evaluate_loss(model: LridNet, dataset: TrackDataset, batch_size: int,
                   mode: str = "full"):
    model.eval()
    total_loss = 0.0
    preds: list[int] = []
    for start in range(0, len(dataset), batch_size):
        idx = torch.arange(start, min(start + batch_size, len(dataset)))
        x_audio, x_lang = dataset.inputs_for(idx, model.config.variant, mode)
        logits = model(x_audio, x_lang)
        total_loss += F.cross_entropy(logits, dataset.labels[idx], reduction="sum").item()
        preds.extend(logits.argmax(dim=1).tolist())
    return total_loss / len(dataset), preds


def predict_dataset(model: LridNet, dataset: TrackDataset, batch_size: int = 64,
                    mode: str = "full") -> list[int]:
    """Argmax class indices for every item, under a full or missing-modality mode."""
    if mode not in EVAL_MODES:
        raise ValueError(f"mode must be one of {EVAL_MODES}, got {mode!r}")
    _, preds = _evaluate_loss(model, dataset, batch_size, mode)
    return preds


def train(model: LridNet, train_set: TrackDataset, valid_set: TrackDataset,
          config: TrainConfig, log_stream=None) -> tuple[Checkpoint, TrainLog]:
    """Fit the model, returning the best-validation-loss checkpoint and the log.

    ``log_stream`` (optional file-like) receives one JSON line per epoch.
    """
    if len(train_set) == 0 or len(valid_set) == 0:
        raise ValueError("training and validation sets must be non-empty")

    torch.manual_seed(config.seed)
    shuffle_gen = torch.Generator().manual_seed(config.seed)
    model.set_dropout_generators(
        torch.Generator().manual_seed(config.seed + 1),
        torch.Generator().manual_seed(config.seed + 2),
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    log = TrainLog()
    best_loss = float("inf")
    best_state: dict[str, np.ndarray] = {}

    for epoch in range(1, config.max_epochs + 1):
        model.train()
        epoch_loss = 0.0
        train_preds: list[int] = []
        train_true: list[int] = []
        for batch_no, idx in enumerate(_epoch_batches(len(train_set), config.batch_size, shuffle_gen)):
            x_audio, x_lang = train_set.inputs_for(idx, model.config.variant)
            logits = model(x_audio, x_lang)
            loss = F.cross_entropy(logits, train_set.labels[idx])
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss {loss.item()} at epoch {epoch}, batch {batch_no}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += loss.item() * len(idx)
            train_preds.extend(logits.argmax(dim=1).tolist())
            train_true.extend(train_set.labels[idx].tolist())

        valid_loss, valid_preds = _evaluate_loss(model, valid_set, config.batch_size)
        if not np.isfinite(valid_loss):
            raise RuntimeError(f"non-finite validation loss {valid_loss} at epoch {epoch}")
        record = EpochRecord(
            epoch=epoch,
            train_loss=epoch_loss / len(train_set),
            valid_loss=valid_loss,
            train_weighted_f1=_weighted_f1(train_true, train_preds, len(train_set.classes)),
            valid_weighted_f1=_weighted_f1(
                valid_set.labels.tolist(), valid_preds, len(valid_set.classes)
            ),
        )
        log.epochs.append(record)
        if log_stream is not None:
            log_stream.write(json.dumps(asdict(record)) + "\n")
            log_stream.flush()

        if valid_loss < best_loss:
            best_loss = valid_loss
            log.best_epoch = epoch
            best_state = {
                k: v.detach().cpu().numpy().copy() for k, v in model.state_dict().items()
            }
        if epoch - log.best_epoch >= config.patience:
            break

    log.stop_epoch = log.epochs[-1].epoch
    ckpt = Checkpoint(
        model_config=model.config,
        train_config=config,
        classes=train_set.classes,
        state=best_state,
    )
    model.load_state_dict({k: torch.as_tensor(v) for k, v in best_state.items()})
    model.eval()
    return ckpt, log


def run_experiment(name: str, train_set: TrackDataset, valid_set: TrackDataset,
                   model_overrides: dict | None = None,
                   train_overrides: dict | None = None,
                   log_stream=None) -> tuple[LridNet, Checkpoint, TrainLog]:
    """Build, train, and return the model for a named experiment."""
    model_config, train_config = make_experiment(name)
    if model_overrides:
        model_config = replace(model_config, **model_overrides)
    if train_overrides:
        train_config = replace(train_config, **train_overrides)
    torch.manual_seed(train_config.seed)
    model = LridNet(model_config)
    ckpt, log = train(model, train_set, valid_set, train_config, log_stream=log_stream)
    return model, ckpt, log
