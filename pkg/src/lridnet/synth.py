"""Synthetic desk-scale dataset: planted audio tones and per-language metadata.

Each class gets a characteristic tone (distinct fundamental plus a weak
harmonic, under additive noise) and metadata text sampled from the bundled
corpus of a language that folds to that class, so both modalities encode the
label. Output matches the real catalog layout: a metadata CSV plus one WAV
per track, split across several artists per class so artist-disjoint splits
remain meaningful.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .audio import AudioClip, save_wav
from .langid import load_bundled_corpus

# (taxonomy class, source language code, tone fundamental in Hz), in class order.
CLASS_SOURCES = (
    ("English", "en", 150.0),
    ("Portuguese", "pt", 218.0),
    ("Spanish", "es", 316.0),
    ("Korean", "ko", 458.0),
    ("Others", "sv", 664.0),
    ("French", "fr", 963.0),
    ("Japanese", "ja", 1396.0),
    ("German", "de", 2024.0),
    ("Polish", "pl", 2935.0),
    ("Italian", "it", 4256.0),
    ("Slovakian", "sk", 6171.0),
)


def _word_pool(code: str) -> list[str]:
    """Unique word-like tokens from the bundled corpus, chunking unspaced scripts."""
    words: list[str] = []
    seen = set()
    for line in load_bundled_corpus(code):
        for token in line.split():
            token = token.strip(".,!?;:()\"'«»。、")
            if len(token) > 12:
                pieces = [token[i : i + 4] for i in range(0, len(token), 4)]
            else:
                pieces = [token]
            for piece in pieces:
                if len(piece) >= 2 and piece not in seen:
                    seen.add(piece)
                    words.append(piece)
    return words


def _phrase(rng: np.random.Generator, pool: list[str], n_words: int,
            titlecase: bool = False) -> str:
    words = [pool[int(i)] for i in rng.integers(0, len(pool), n_words)]
    if titlecase:
        words = [w.capitalize() for w in words]
    return " ".join(words)


def _tone(rng: np.random.Generator, base_freq: float, distractor_freqs,
          n_samples: int, sample_rate: int, noise_level: float) -> np.ndarray:
    """Stereo class tone under noise, plus a weaker tone from another class.

    The distractor forces the audio decision to compare component magnitudes
    rather than detect mere presence, which keeps the audio task learnable but
    harder than the planted text, mirroring real data where metadata is the
    stronger cue.
    """
    freq = base_freq * (1.0 + 0.03 * rng.uniform(-1.0, 1.0))
    t = np.arange(n_samples) / sample_rate
    amp = rng.uniform(0.2, 0.4)
    mono = amp * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    if 2 * freq < sample_rate / 2:
        mono = mono + 0.3 * amp * np.sin(2 * np.pi * 2 * freq * t + rng.uniform(0, 2 * np.pi))
    if len(distractor_freqs):
        di = int(rng.integers(0, len(distractor_freqs)))
        dfreq = distractor_freqs[di] * (1.0 + 0.03 * rng.uniform(-1.0, 1.0))
        mono = mono + 0.45 * amp * np.sin(2 * np.pi * dfreq * t + rng.uniform(0, 2 * np.pi))
    stereo = np.stack([mono, mono]) + rng.normal(0.0, noise_level, (2, n_samples))
    return np.clip(stereo, -1.0, 1.0)


def make_synth_catalog(
    out_dir,
    n_tracks: int = 500,
    n_classes: int = 5,
    seed: int = 7,
    clip_seconds: float = 1.0,
    sample_rate: int = 44100,
    noise_level: float = 0.2,
    missing_album_prob: float = 0.02,
) -> Path:
    """Generate the dataset under ``out_dir`` and return the metadata CSV path."""
    if not 1 <= n_classes <= len(CLASS_SOURCES):
        raise ValueError(f"n_classes must be in [1, {len(CLASS_SOURCES)}], got {n_classes}")
    if n_tracks < n_classes:
        raise ValueError("need at least one track per class")
    out_dir = Path(out_dir)
    audio_dir = out_dir / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    n_samples = int(round(clip_seconds * sample_rate))

    sources = CLASS_SOURCES[:n_classes]
    per_class = [n_tracks // n_classes] * n_classes
    for i in range(n_tracks % n_classes):
        per_class[i] += 1

    rows = []
    track_no = 0
    all_freqs = [f for _, _, f in sources]
    for (class_name, code, base_freq), n_class_tracks in zip(sources, per_class):
        distractors = [f for f in all_freqs if f != base_freq]
        pool = _word_pool(code)
        n_artists = max(5, n_class_tracks // 8)
        artists = []
        while len(artists) < n_artists:
            name = _phrase(rng, pool, 2, titlecase=True)
            if name not in artists:
                artists.append(name)
        # Uneven artist sizes keep group splits able to hit the target ratio.
        weights = rng.uniform(0.5, 1.5, n_artists)
        assignment = rng.choice(n_artists, size=n_class_tracks, p=weights / weights.sum())
        albums = {a: _phrase(rng, pool, int(rng.integers(2, 4))) for a in artists}
        for artist_idx in assignment:
            track_no += 1
            track_id = f"t{track_no:05d}"
            artist = artists[int(artist_idx)]
            album = "" if rng.uniform() < missing_album_prob else albums[artist]
            title = _phrase(rng, pool, int(rng.integers(2, 5)))
            clip = AudioClip(
                _tone(rng, base_freq, distractors, n_samples, sample_rate, noise_level),
                sample_rate,
            )
            save_wav(audio_dir / f"{track_id}.wav", clip)
            rows.append((track_id, artist, album, title, code))

    metadata_path = out_dir / "metadata.csv"
    with open(metadata_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "artist", "album", "title", "lang"])
        writer.writerows(rows)
    return metadata_path
