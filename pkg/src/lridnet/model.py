"""Fusion network: residual CNN over log-mels, MLP over language vectors.

The audio branch is a bottleneck residual network (stem conv + max-pool, then
four stages of 3/4/6/3 blocks at the default width) whose stride arithmetic
uses ceil-mode shapes, so a 128x2580 input yields a 2048-channel 4x81 feature
map before global average pooling. The text branch is a stack of
linear/batchnorm/ReLU blocks. Branch outputs are concatenated and classified
by a single hidden-layer head. Whole-input modality dropout can be applied to
either branch input during training; survivors pass through unscaled and the
module is an exact identity in eval mode.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch import nn

from .languages import CLASS_NAMES, VECTOR_DIM

VARIANTS = ("full", "audio_only", "text_only")


@dataclass
class ModelConfig:
    variant: str = "full"
    n_classes: int = len(CLASS_NAMES)
    lang_dim: int = VECTOR_DIM
    n_mels: int = 128
    audio_dropout_rate: float = 0.0
    text_dropout_rate: float = 0.0
    audio_base_channels: int = 64
    audio_blocks: tuple[int, ...] = (3, 4, 6, 3)
    text_hidden: int = 128
    text_layers: int = 3
    fusion_hidden: int = 256

    def __post_init__(self):
        self.audio_blocks = tuple(self.audio_blocks)
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("audio_dropout_rate", "text_dropout_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {rate}")
        for name in ("n_classes", "lang_dim", "n_mels", "audio_base_channels",
                     "text_hidden", "text_layers", "fusion_hidden"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not self.audio_blocks or any(b <= 0 for b in self.audio_blocks):
            raise ValueError("audio_blocks must be a non-empty tuple of positives")

    @property
    def audio_embed_dim(self) -> int:
        return self.audio_base_channels * Bottleneck.expansion * 2 ** (len(self.audio_blocks) - 1)

    @property
    def n_downsamplings(self) -> int:
        # Stem conv, max-pool, and every stage after the first halve time/frequency.
        return 2 + len(self.audio_blocks) - 1

    @property
    def min_time_frames(self) -> int:
        return 2 ** self.n_downsamplings

    def to_dict(self) -> dict:
        d = asdict(self)
        d["audio_blocks"] = list(self.audio_blocks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["audio_blocks"] = tuple(d["audio_blocks"])
        return cls(**d)


def tiny_config(n_classes: int = 2) -> ModelConfig:
    """Miniature configuration (8-dim embeddings) for numeric verification."""
    return ModelConfig(
        n_classes=n_classes,
        n_mels=8,
        audio_base_channels=2,
        audio_blocks=(1,),
        text_hidden=8,
        fusion_hidden=8,
    )


@dataclass
class Prediction:
    """Class probabilities plus the argmax index for one item."""

    probs: np.ndarray
    class_index: int

    def top_class(self, classes=CLASS_NAMES) -> str:
        return classes[self.class_index]


class ModalityDropout(nn.Module):
    """Whole-input dropout: zero an entire sample with probability ``rate``.

    Surviving samples are passed through unscaled (no 1/(1-rate) factor), and
    in eval mode the module is the identity. Each instance draws from its own
    generator when one is assigned, so two dropout modules draw independently.
    """

    def __init__(self, rate: float, generator: torch.Generator | None = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.generator = generator

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if not self.training or self.rate == 0.0:
            return x
        drop = torch.rand(x.shape[0], generator=self.generator) < self.rate
        shape = (x.shape[0],) + (1,) * (x.dim() - 1)
        zero = torch.zeros((), dtype=x.dtype, device=x.device)
        return torch.where(drop.view(shape).to(x.device), zero, x)

    def extra_repr(self) -> str:
        return f"rate={self.rate}"


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, in_channels: int, width: int, stride: int = 1):
        super().__init__()
        out_channels = width * self.expansion
        self.conv1 = nn.Conv2d(in_channels, width, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(width)
        self.conv2 = nn.Conv2d(width, width, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(width)
        self.conv3 = nn.Conv2d(width, out_channels, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU(inplace=True)
        if stride != 1 or in_channels != out_channels:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_channels),
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return self.relu(out + self.shortcut(x))


class AudioEncoder(nn.Module):
    """Residual CNN over (batch, 1, n_mels, frames) log-mel inputs."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        base = config.audio_base_channels
        self.config = config
        self.stem = nn.Sequential(
            nn.Conv2d(1, base, 7, stride=2, padding=3, bias=False),
            nn.BatchNorm2d(base),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, stride=2, padding=1),
        )
        stages = []
        in_channels = base
        for i, n_blocks in enumerate(config.audio_blocks):
            width = base * 2**i
            blocks = []
            for j in range(n_blocks):
                stride = 2 if (i > 0 and j == 0) else 1
                blocks.append(Bottleneck(in_channels, width, stride))
                in_channels = width * Bottleneck.expansion
            stages.append(nn.Sequential(*blocks))
        self.stages = nn.Sequential(*stages)
        self.out_channels = in_channels

    def _check_input(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() == 3:
            x = x.unsqueeze(1)
        if x.dim() != 4 or x.shape[1] != 1:
            raise ValueError(f"expected (batch, 1, mels, frames) input, got {tuple(x.shape)}")
        if x.shape[2] != self.config.n_mels:
            raise ValueError(f"expected {self.config.n_mels} mel bins, got {x.shape[2]}")
        if x.shape[3] < self.config.min_time_frames:
            raise ValueError(
                f"input too short for {self.config.n_downsamplings} downsamplings"
            )
        return x

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Pre-pool feature map, shape (batch, channels, mels/2^d, frames/2^d)."""
        return self.stages(self.stem(self._check_input(x)))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x).mean(dim=(2, 3))


class TextEncoder(nn.Module):
    """Stack of linear/batchnorm/ReLU blocks over language vectors."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        layers = []
        in_dim = config.lang_dim
        for _ in range(config.text_layers):
            layers += [
                nn.Linear(in_dim, config.text_hidden),
                nn.BatchNorm1d(config.text_hidden),
                nn.ReLU(inplace=True),
            ]
            in_dim = config.text_hidden
        self.net = nn.Sequential(*layers)
        self.in_dim = config.lang_dim
        self.out_dim = config.text_hidden

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected (batch, {self.in_dim}) input, got {tuple(x.shape)}")
        return self.net(x)


class FusionHead(nn.Module):
    """Hidden layer over concatenated embeddings, then class logits."""

    def __init__(self, in_dim: int, config: ModelConfig):
        super().__init__()
        self.in_dim = in_dim
        self.net = nn.Sequential(
            nn.Linear(in_dim, config.fusion_hidden),
            nn.BatchNorm1d(config.fusion_hidden),
            nn.ReLU(inplace=True),
            nn.Linear(config.fusion_hidden, config.n_classes),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.in_dim:
            raise ValueError(f"expected {self.in_dim}-dim fusion input, got {x.shape[1]}")
        return self.net(x)


class LridNet(nn.Module):
    """Audio/text fusion classifier with optional per-branch modality dropout.

    ``forward`` returns logits; a missing modality is represented by an
    all-zero tensor of the canonical shape, which matches what the dropout
    modules feed the branches when they fire during training.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        head_in = 0
        if config.variant in ("full", "audio_only"):
            self.audio_encoder = AudioEncoder(config)
            self.audio_dropout = ModalityDropout(config.audio_dropout_rate)
            head_in += config.audio_embed_dim
        else:
            self.audio_encoder = None
        if config.variant in ("full", "text_only"):
            self.text_encoder = TextEncoder(config)
            self.text_dropout = ModalityDropout(config.text_dropout_rate)
            head_in += config.text_hidden
        else:
            self.text_encoder = None
        self.head = FusionHead(head_in, config)
        self.apply(_init_weights)

    def set_dropout_generators(self, audio: torch.Generator | None,
                               text: torch.Generator | None):
        """Attach independent RNG streams to each dropout module."""
        if self.audio_encoder is not None:
            self.audio_dropout.generator = audio
        if self.text_encoder is not None:
            self.text_dropout.generator = text

    def forward(self, x_audio: torch.Tensor | None = None,
                x_lang: torch.Tensor | None = None) -> torch.Tensor:
        parts = []
        if self.audio_encoder is not None:
            if x_audio is None:
                raise ValueError(f"variant {self.config.variant!r} requires an audio input")
            parts.append(self.audio_encoder(self.audio_dropout(x_audio)))
        if self.text_encoder is not None:
            if x_lang is None:
                raise ValueError(f"variant {self.config.variant!r} requires a text input")
            parts.append(self.text_encoder(self.text_dropout(x_lang)))
        fused = parts[0] if len(parts) == 1 else torch.cat(parts, dim=1)
        return self.head(fused)

    @torch.no_grad()
    def predict_proba(self, x_audio=None, x_lang=None) -> torch.Tensor:
        return torch.softmax(self.forward(x_audio, x_lang), dim=1)

    @torch.no_grad()
    def predict(self, x_audio=None, x_lang=None) -> list[Prediction]:
        probs = self.predict_proba(x_audio, x_lang).cpu().numpy()
        return [Prediction(p, int(p.argmax())) for p in probs]


def _init_weights(module: nn.Module):
    if isinstance(module, (nn.Conv2d, nn.Linear)):
        nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, (nn.BatchNorm1d, nn.BatchNorm2d)):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)
