"""Waveform-to-mel-spectrogram frontend.

Stereo input is downmixed to mono, polyphase-resampled to the working rate,
framed without padding, Hann-windowed, and projected through a Slaney-style
triangular mel filterbank applied to the magnitude spectrum; values are
log10-compressed with a small floor. All operations are pure functions, so
batch preprocessing can run in parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.io import wavfile
from sklearn.base import BaseEstimator, TransformerMixin

DEFAULT_SAMPLE_RATE = 22050
DEFAULT_N_FFT = 1024
DEFAULT_HOP = 256
DEFAULT_N_MELS = 128
DEFAULT_LOG_FLOOR = 1e-10


@dataclass
class AudioClip:
    """PCM audio as a (channels, samples) float array plus its sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        if arr.ndim != 2 or arr.shape[0] not in (1, 2):
            raise ValueError(f"expected 1 or 2 channels, got array of shape {arr.shape}")
        if arr.shape[1] == 0:
            raise ValueError("clip has no samples")
        if self.sample_rate <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        self.samples = arr

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate


def downmix(clip: AudioClip) -> AudioClip:
    """Average channels to mono; mono passes through unchanged."""
    if clip.n_channels == 1:
        return clip
    return AudioClip(clip.samples.mean(axis=0), clip.sample_rate)


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Band-limited polyphase resampling (Kaiser-windowed filter).

    Output length is round(n * target/source); upsampling is allowed.
    """
    if target_rate <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    g = math.gcd(target_rate, clip.sample_rate)
    up, down = target_rate // g, clip.sample_rate // g
    out = signal.resample_poly(clip.samples, up, down, axis=1)
    want = int(round(clip.n_samples * target_rate / clip.sample_rate))
    if out.shape[1] > want:
        out = out[:, :want]
    elif out.shape[1] < want:
        out = np.pad(out, ((0, 0), (0, want - out.shape[1])))
    return AudioClip(out, target_rate)


def hz_to_mel(freq):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    freq = np.asarray(freq, dtype=np.float64)
    f_sp = 200.0 / 3.0
    min_log_hz = 1000.0
    logstep = math.log(6.4) / 27.0
    mel = freq / f_sp
    above = freq >= min_log_hz
    mel = np.where(above, min_log_hz / f_sp + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep, mel)
    return mel


def mel_to_hz(mel):
    mel = np.asarray(mel, dtype=np.float64)
    f_sp = 200.0 / 3.0
    min_log_mel = 1000.0 / f_sp
    logstep = math.log(6.4) / 27.0
    freq = mel * f_sp
    above = mel >= min_log_mel
    freq = np.where(above, 1000.0 * np.exp(logstep * (np.maximum(mel, min_log_mel) - min_log_mel)), freq)
    return freq


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float = 0.0,
                   fmax: float | None = None) -> np.ndarray:
    """Triangular mel filters (n_mels, n_fft//2 + 1), area-normalized."""
    if fmax is None:
        fmax = sample_rate / 2.0
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    mel_pts = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    weights = np.zeros((n_mels, len(fft_freqs)))
    for i in range(n_mels):
        lower = (fft_freqs - hz_pts[i]) / max(hz_pts[i + 1] - hz_pts[i], 1e-12)
        upper = (hz_pts[i + 2] - fft_freqs) / max(hz_pts[i + 2] - hz_pts[i + 1], 1e-12)
        weights[i] = np.maximum(0.0, np.minimum(lower, upper))
        weights[i] *= 2.0 / (hz_pts[i + 2] - hz_pts[i])
    return weights


def n_frames(n_samples: int, n_fft: int = DEFAULT_N_FFT, hop: int = DEFAULT_HOP) -> int:
    """Frame count without padding: 1 + floor((n - n_fft) / hop)."""
    if n_samples < n_fft:
        raise ValueError("input shorter than one frame")
    return 1 + (n_samples - n_fft) // hop


def melspectrogram(
    clip: AudioClip,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    n_mels: int = DEFAULT_N_MELS,
    fmin: float = 0.0,
    fmax: float | None = None,
    log_floor: float = DEFAULT_LOG_FLOOR,
) -> np.ndarray:
    """Log-magnitude mel spectrogram of a mono clip, shape (n_mels, frames).

    No edge padding is applied, so the frame count follows
    ``1 + floor((n - n_fft) / hop)`` exactly. The filterbank consumes the
    magnitude (not power) spectrum; compression is log10(x + log_floor).
    """
    if clip.n_channels != 1:
        raise ValueError("melspectrogram expects a mono clip; downmix first")
    x = clip.samples[0]
    frames = n_frames(len(x), n_fft, hop)
    window = signal.get_window("hann", n_fft, fftbins=True)
    strided = np.lib.stride_tricks.sliding_window_view(x, n_fft)[:: hop][:frames]
    spectrum = np.abs(np.fft.rfft(strided * window, axis=1))
    fb = mel_filterbank(clip.sample_rate, n_fft, n_mels, fmin, fmax)
    mel = fb @ spectrum.T
    return np.log10(mel + log_floor)


class MelSpectrogramExtractor(BaseEstimator, TransformerMixin):
    """Transformer from raw clips to log-mel matrices.

    Handles downmix and resampling to ``sample_rate`` before analysis.
    ``transform`` returns a stacked (n, n_mels, frames) array when all inputs
    produce the same frame count, otherwise a list of matrices.
    """

    def __init__(
        self,
        sample_rate: int = DEFAULT_SAMPLE_RATE,
        n_fft: int = DEFAULT_N_FFT,
        hop: int = DEFAULT_HOP,
        n_mels: int = DEFAULT_N_MELS,
        fmin: float = 0.0,
        fmax: float | None = None,
        log_floor: float = DEFAULT_LOG_FLOOR,
    ):
        self.sample_rate = sample_rate
        self.n_fft = n_fft
        self.hop = hop
        self.n_mels = n_mels
        self.fmin = fmin
        self.fmax = fmax
        self.log_floor = log_floor

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop

    def fit(self, X=None, y=None):
        return self

    def process(self, clip: AudioClip) -> np.ndarray:
        mono = resample(downmix(clip), self.sample_rate)
        return melspectrogram(
            mono,
            n_fft=self.n_fft,
            hop=self.hop,
            n_mels=self.n_mels,
            fmin=self.fmin,
            fmax=self.fmax,
            log_floor=self.log_floor,
        )

    def transform(self, X):
        mats = [self.process(clip) for clip in X]
        if mats and len({m.shape for m in mats}) == 1:
            return np.stack(mats)
        return mats


def load_audio(path) -> AudioClip:
    """Read an audio file into an AudioClip with samples in [-1, 1].

    WAV is read natively; other formats go through the optional ``soundfile``
    decoder when it is installed.
    """
    path = Path(path)
    if path.suffix.lower() == ".wav":
        rate, data = wavfile.read(path)
        data = np.asarray(data)
        if data.dtype == np.int16:
            data = data / 32768.0
        elif data.dtype == np.int32:
            data = data / 2147483648.0
        elif data.dtype == np.uint8:
            data = (data.astype(np.float64) - 128.0) / 128.0
        else:
            data = data.astype(np.float64)
        if data.ndim == 2:
            data = data.T
        return AudioClip(data, int(rate))
    try:
        import soundfile
    except ImportError:
        raise ValueError(
            f"cannot decode {path.suffix!r} files: install 'soundfile' for non-WAV input"
        ) from None
    data, rate = soundfile.read(path, always_2d=True)
    return AudioClip(data.T, int(rate))


def save_wav(path, clip: AudioClip):
    """Write a clip as a 32-bit float WAV file."""
    data = clip.samples.astype(np.float32)
    wavfile.write(path, clip.sample_rate, data[0] if clip.n_channels == 1 else data.T)


def save_mel_cache(directory, track_id: str, mel: np.ndarray) -> Path:
    """Store one spectrogram per track id as row-major float32 ``.npy``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{track_id}.npy"
    np.save(path, np.ascontiguousarray(mel, dtype=np.float32))
    return path


def load_mel_cache(directory, track_id: str) -> np.ndarray | None:
    """Fetch a cached spectrogram, or None when absent."""
    path = Path(directory) / f"{track_id}.npy"
    if not path.exists():
        return None
    return np.load(path)
