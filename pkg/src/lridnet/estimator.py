"""Scikit-learn style wrapper around the fusion network and trainer."""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator, ClassifierMixin

from .model import LridNet, ModelConfig
from .training import TrackDataset, TrainConfig, _EXPERIMENT_SETTINGS, make_experiment, train


def _coerce_inputs(X, variant: str):
    """Accept dict/tuple/single-array inputs and return (audio, lang) arrays."""
    audio = lang = None
    if isinstance(X, dict):
        audio = X.get("audio")
        lang = X.get("lang")
    elif isinstance(X, (tuple, list)) and len(X) == 2:
        audio, lang = X
    elif variant == "audio_only":
        audio = X
    elif variant == "text_only":
        lang = X
    else:
        raise TypeError(
            "X must be a dict with 'audio'/'lang' keys or an (audio, lang) pair"
        )
    if variant in ("full", "audio_only") and audio is None:
        raise ValueError(f"variant {variant!r} requires audio features")
    if variant in ("full", "text_only") and lang is None:
        raise ValueError(f"variant {variant!r} requires language vectors")
    return audio, lang


class LridNetClassifier(BaseEstimator, ClassifierMixin):
    """fit/predict interface over the audio+text fusion model.

    ``X`` is a dict with ``"audio"`` (n, n_mels, frames) and/or ``"lang"``
    (n, 56) arrays, or a plain array for the single-modality experiments.
    When no explicit validation split is passed to ``fit``, a seeded random
    fraction of the training data is held out for early stopping; use an
    explicit split when artist disjointness matters.
    """

    def __init__(
        self,
        experiment: str = "Main",
        learning_rate: float = 1e-4,
        batch_size: int = 32,
        max_epochs: int = 200,
        patience: int = 20,
        seed: int = 0,
        validation_fraction: float = 0.2,
        n_mels: int = 128,
        audio_base_channels: int = 64,
        audio_blocks: tuple[int, ...] = (3, 4, 6, 3),
        text_hidden: int = 128,
        fusion_hidden: int = 256,
    ):
        self.experiment = experiment
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed
        self.validation_fraction = validation_fraction
        self.n_mels = n_mels
        self.audio_base_channels = audio_base_channels
        self.audio_blocks = audio_blocks
        self.text_hidden = text_hidden
        self.fusion_hidden = fusion_hidden

    def _model_config(self) -> ModelConfig:
        base, _ = make_experiment(self.experiment)
        return ModelConfig(
            variant=base.variant,
            audio_dropout_rate=base.audio_dropout_rate,
            text_dropout_rate=base.text_dropout_rate,
            n_classes=len(self.classes_),
            n_mels=self.n_mels,
            audio_base_channels=self.audio_base_channels,
            audio_blocks=tuple(self.audio_blocks),
            text_hidden=self.text_hidden,
            fusion_hidden=self.fusion_hidden,
        )

    def fit(self, X, y, X_valid=None, y_valid=None):
        variant = _EXPERIMENT_SETTINGS.get(self.experiment, {}).get("variant")
        if variant is None:
            make_experiment(self.experiment)  # raises with the valid-name list
        audio, lang = _coerce_inputs(X, variant)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        index = {c: i for i, c in enumerate(self.classes_)}
        labels = np.array([index[v] for v in y])

        def make_dataset(a, l, lab):
            return TrackDataset.from_arrays(
                labels=lab, classes=tuple(map(str, self.classes_)), audio=a, lang=l
            )

        if X_valid is not None:
            va, vl = _coerce_inputs(X_valid, variant)
            y_valid = np.asarray(y_valid)
            valid_labels = np.array([index[v] for v in y_valid])
            train_set = make_dataset(audio, lang, labels)
            valid_set = make_dataset(va, vl, valid_labels)
        else:
            rng = np.random.default_rng(self.seed)
            order = rng.permutation(len(labels))
            n_valid = max(1, int(round(len(labels) * self.validation_fraction)))
            valid_idx, train_idx = order[:n_valid], order[n_valid:]
            pick = lambda arr, idx: None if arr is None else np.asarray(arr)[idx]
            train_set = make_dataset(pick(audio, train_idx), pick(lang, train_idx), labels[train_idx])
            valid_set = make_dataset(pick(audio, valid_idx), pick(lang, valid_idx), labels[valid_idx])

        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            patience=self.patience,
            seed=self.seed,
        )
        torch.manual_seed(self.seed)
        self.model_ = LridNet(self._model_config())
        self.checkpoint_, self.log_ = train(self.model_, train_set, valid_set, config)
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("classifier is not fitted")
        audio, lang = _coerce_inputs(X, self.model_.config.variant)
        to_tensor = lambda a: None if a is None else torch.as_tensor(
            np.asarray(a), dtype=torch.float32
        )
        self.model_.eval()
        return self.model_.predict_proba(to_tensor(audio), to_tensor(lang)).numpy()

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]
