"""Character n-gram naive-Bayes language identification for track metadata.

Builds per-language profiles of 1/2/3-gram relative frequencies and turns an
arbitrary metadata string into a probability vector over the fixed detector
language list, with a trailing dimension flagging detection failure (blank or
non-alphabetic input). Detection runs several seeded random-sampling trials
whose posteriors are averaged, so results are reproducible for a given seed.
"""

from __future__ import annotations

import json
import math
import random
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .languages import (
    CODE_TO_INDEX,
    DETECTOR_CODES,
    FAILURE_INDEX,
    VECTOR_DIM,
    ClassTaxonomy,
    default_taxonomy,
)

MIN_ORDER = 1
MAX_ORDER = 3

# Sampling-trial constants for the iterative posterior update.
N_TRIALS = 7
MAX_ITERATIONS = 1000
SMOOTHING_ALPHA = 0.5
ALPHA_JITTER = 0.05
SMOOTHING_SCALE = 1.0 / 10000.0
CONVERGENCE_THRESHOLD = 0.99999
NORMALIZE_EVERY = 5

# ISO 639-2 code for "no linguistic content"; returned by predict() when the
# failure dimension fires.
FAILURE_CODE = "zxx"


def normalize_text(text: str) -> str:
    """NFKC-normalize, lowercase, and reduce to letters separated by single spaces."""
    text = unicodedata.normalize("NFKC", text).lower()
    cleaned = [ch if ch.isalpha() else " " for ch in text]
    return " ".join("".join(cleaned).split())


def extract_ngrams(text: str) -> list[str]:
    """All 1..3-grams of the cleaned text, space-padded at word boundaries.

    Grams are returned in order of occurrence with duplicates kept, so
    sampling during detection is weighted by frequency. Empty when the input
    has no alphabetic content.
    """
    cleaned = normalize_text(text)
    if not cleaned:
        return []
    padded = f" {cleaned} "
    grams = []
    for n in range(MIN_ORDER, MAX_ORDER + 1):
        for i in range(len(padded) - n + 1):
            gram = padded[i : i + n]
            if any(ch.isalpha() for ch in gram):
                grams.append(gram)
    return grams


@dataclass
class LanguageProfile:
    """Per-language n-gram model: counts plus derived log relative frequencies.

    Frequencies are normalized within each n-gram order, so log probabilities
    are finite and non-positive. Counts are kept for serialization and profile
    merging; the log table is what detection consumes.
    """

    language_code: str
    ngram_log_probs: dict[str, float] = field(default_factory=dict)
    ngram_counts: dict[str, int] = field(default_factory=dict)

    def validate(self):
        orders_seen = set()
        for gram, logp in self.ngram_log_probs.items():
            if not (math.isfinite(logp) and logp <= 0.0):
                raise ValueError(
                    f"profile {self.language_code!r}: log-prob for {gram!r} is {logp}"
                )
            orders_seen.add(len(gram))
        missing = set(range(MIN_ORDER, MAX_ORDER + 1)) - orders_seen
        if missing:
            raise ValueError(
                f"profile {self.language_code!r} has no n-grams of order {sorted(missing)}"
            )
        return self


def _log_probs_from_counts(counts: dict[str, int]) -> dict[str, float]:
    totals: Counter = Counter()
    for gram, c in counts.items():
        totals[len(gram)] += c
    return {gram: math.log(c / totals[len(gram)]) for gram, c in counts.items() if c > 0}


def build_profile(corpus, language_code: str) -> LanguageProfile:
    """Count 1..3-grams over the corpus and normalize per order.

    The corpus is any iterable of unicode strings; the result is deterministic
    given the corpus contents.
    """
    counts: Counter = Counter()
    n_docs = 0
    for doc in corpus:
        n_docs += 1
        counts.update(extract_ngrams(doc))
    if n_docs == 0:
        raise ValueError("empty training corpus")
    if not counts:
        raise ValueError(f"corpus for {language_code!r} contains no alphabetic content")
    profile = LanguageProfile(
        language_code=language_code,
        ngram_log_probs=_log_probs_from_counts(counts),
        ngram_counts=dict(counts),
    )
    return profile.validate()


def save_profile(profile: LanguageProfile, path):
    """Write a profile as JSON: language code plus per-order n-gram count maps."""
    by_order: dict[str, dict[str, int]] = {
        str(n): {} for n in range(MIN_ORDER, MAX_ORDER + 1)
    }
    for gram, c in profile.ngram_counts.items():
        by_order[str(len(gram))][gram] = c
    payload = {"language_code": profile.language_code, "ngram_counts": by_order}
    Path(path).write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True), encoding="utf-8"
    )


def load_profile(path) -> LanguageProfile:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    counts: dict[str, int] = {}
    for order_counts in payload["ngram_counts"].values():
        for gram, c in order_counts.items():
            counts[gram] = int(c)
    profile = LanguageProfile(
        language_code=payload["language_code"],
        ngram_log_probs=_log_probs_from_counts(counts),
        ngram_counts=counts,
    )
    return profile.validate()


def load_profiles(directory) -> dict[str, LanguageProfile]:
    """Load every ``*.json`` profile in a directory, keyed by language code."""
    profiles = {}
    for path in sorted(Path(directory).glob("*.json")):
        profile = load_profile(path)
        profiles[profile.language_code] = profile
    if not profiles:
        raise ValueError(f"no profile files found in {directory}")
    return profiles


def failure_vector() -> np.ndarray:
    vec = np.zeros(VECTOR_DIM)
    vec[FAILURE_INDEX] = 1.0
    return vec


def is_failure(vector) -> bool:
    return bool(np.asarray(vector)[FAILURE_INDEX] == 1.0)


def check_language_vector(vector, atol: float = 1e-6) -> np.ndarray:
    """Raise if a vector violates the probability-vector contract."""
    vector = np.asarray(vector, dtype=float)
    if vector.shape != (VECTOR_DIM,):
        raise ValueError(f"expected shape ({VECTOR_DIM},), got {vector.shape}")
    if np.any(vector < -atol) or np.any(vector > 1 + atol):
        raise ValueError("vector entries outside [0, 1]")
    if abs(vector.sum() - 1.0) > atol:
        raise ValueError(f"vector sums to {vector.sum()!r}, expected 1")
    if vector[FAILURE_INDEX] not in (0.0, 1.0):
        raise ValueError("failure dimension must be exactly 0 or 1")
    if vector[FAILURE_INDEX] == 1.0 and np.any(vector[:FAILURE_INDEX] != 0.0):
        raise ValueError("failure vector must carry no language mass")
    return vector


class NGramLanguageDetector(BaseEstimator):
    """Naive-Bayes character n-gram detector over the fixed language list.

    Fit from labeled documents, or adopt pre-built profiles with
    ``fit_profiles``. ``predict_proba`` returns rows in the fixed
    56-dimensional layout: one column per detector code, then the failure
    flag. Fitted detectors are immutable and safe to share across threads;
    every ``detect`` call carries its own RNG seeded from ``seed``.
    """

    def __init__(
        self,
        seed: int = 0,
        n_trials: int = N_TRIALS,
        max_iterations: int = MAX_ITERATIONS,
        smoothing_alpha: float = SMOOTHING_ALPHA,
    ):
        self.seed = seed
        self.n_trials = n_trials
        self.max_iterations = max_iterations
        self.smoothing_alpha = smoothing_alpha

    def fit(self, X, y):
        """Build one profile per language from documents X labeled with codes y."""
        X = list(X)
        y = list(y)
        if len(X) != len(y):
            raise ValueError("X and y must have equal length")
        if not X:
            raise ValueError("empty training corpus")
        by_code: dict[str, list[str]] = {}
        for doc, code in zip(X, y):
            by_code.setdefault(code, []).append(doc)
        profiles = {code: build_profile(docs, code) for code, docs in by_code.items()}
        return self._set_profiles(profiles)

    def fit_profiles(self, profiles: dict[str, LanguageProfile]):
        """Adopt pre-built profiles (e.g. loaded from disk) as the fitted state."""
        return self._set_profiles(dict(profiles))

    def _set_profiles(self, profiles):
        unknown = sorted(set(profiles) - set(DETECTOR_CODES))
        if unknown:
            raise ValueError(f"profiles for unsupported language codes: {unknown}")
        for profile in profiles.values():
            profile.validate()
        # Language axis ordered by the fixed code list, never by insertion
        # order, so a permuted profile set yields identical outputs.
        self.profiles_ = profiles
        self.codes_ = tuple(sorted(profiles, key=CODE_TO_INDEX.__getitem__))
        gram_rows: dict[str, np.ndarray] = {}
        for j, code in enumerate(self.codes_):
            for gram, logp in self.profiles_[code].ngram_log_probs.items():
                row = gram_rows.get(gram)
                if row is None:
                    row = gram_rows[gram] = np.zeros(len(self.codes_))
                row[j] = math.exp(logp)
        self._gram_probs = gram_rows
        return self

    def _check_fitted(self):
        if not hasattr(self, "profiles_"):
            raise RuntimeError("detector is not fitted; call fit() or fit_profiles()")

    def detect(self, text: str) -> np.ndarray:
        """Language-probability vector for one string (fixed 56-dim layout).

        Returns the failure vector when the input has no alphabetic content or
        shares no n-gram with any profile; never raises for bad text.
        """
        self._check_fitted()
        grams = [g for g in extract_ngrams(text) if g in self._gram_probs]
        if not grams:
            return failure_vector()
        rng = random.Random(self.seed)
        n_langs = len(self.codes_)
        accum = np.zeros(n_langs)
        for _ in range(self.n_trials):
            alpha = max(self.smoothing_alpha + rng.gauss(0.0, ALPHA_JITTER), 0.0)
            weight = alpha * SMOOTHING_SCALE
            prob = np.full(n_langs, 1.0 / n_langs)
            for i in range(self.max_iterations):
                gram = grams[rng.randrange(len(grams))]
                prob *= weight + self._gram_probs[gram]
                if (i + 1) % NORMALIZE_EVERY == 0:
                    prob /= prob.sum()
                    if prob.max() > CONVERGENCE_THRESHOLD:
                        break
            accum += prob / prob.sum()
        accum /= accum.sum()
        vec = np.zeros(VECTOR_DIM)
        for j, code in enumerate(self.codes_):
            vec[CODE_TO_INDEX[code]] = accum[j]
        return vec

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return np.stack([self.detect(text) for text in X])

    def predict(self, X) -> list[str]:
        """Top detector code per input; ``FAILURE_CODE`` where detection failed."""
        out = []
        for vec in self.predict_proba(X):
            if is_failure(vec):
                out.append(FAILURE_CODE)
            else:
                out.append(DETECTOR_CODES[int(np.argmax(vec[:FAILURE_INDEX]))])
        return out


def bundled_corpus_codes() -> tuple[str, ...]:
    """Language codes with a corpus shipped inside the package."""
    root = resources.files("lridnet.data") / "corpora"
    return tuple(sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt")))

def load_bundled_corpus(code: str) -> list[str]:
    """One document per line of the bundled corpus for ``code``."""
    root = resources.files("lridnet.data") / "corpora"
    text = (root / f"{code}.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]


def builtin_detector(seed: int = 0) -> NGramLanguageDetector:
    """Detector fitted on every bundled corpus."""
    docs, codes = [], []
    for code in bundled_corpus_codes():
        for line in load_bundled_corpus(code):
            docs.append(line)
            codes.append(code)
    return NGramLanguageDetector(seed=seed).fit(docs, codes)


@dataclass(frozen=True)
class MetadataTriple:
    """Raw track metadata; empty strings mean the field is missing."""

    artist_name: str = ""
    album_name: str = ""
    track_title: str = ""


def _as_triple(item) -> MetadataTriple:
    if isinstance(item, MetadataTriple):
        return item
    if isinstance(item, dict):
        return MetadataTriple(
            item.get("artist_name", item.get("artist", "")),
            item.get("album_name", item.get("album", "")),
            item.get("track_title", item.get("title", "")),
        )
    if isinstance(item, (tuple, list)) and len(item) == 3:
        return MetadataTriple(*item)
    raise TypeError(f"cannot interpret {type(item).__name__} as metadata triple")


def join_metadata(meta: MetadataTriple, fields=("artist", "album", "title")) -> str:
    """Concatenate artist, album, title with single spaces; empty fields vanish.

    ``fields`` selects which pieces participate, in the fixed order; it exists
    for the single-field baseline configurations.
    """
    meta = _as_triple(meta)
    by_name = {
        "artist": meta.artist_name,
        "album": meta.album_name,
        "title": meta.track_title,
    }
    parts = [by_name[f].strip() for f in ("artist", "album", "title") if f in fields]
    return " ".join(p for p in parts if p)


class MetadataVectorizer(BaseEstimator, TransformerMixin):
    """Transformer from metadata triples to language-probability rows.

    ``detector`` may be a fitted :class:`NGramLanguageDetector`; when None,
    ``fit`` builds the bundled-corpora detector. ``fields`` restricts which
    metadata pieces are joined (the text-input configurations of the
    baseline).
    """

    def __init__(self, detector=None, fields=("artist", "album", "title"), seed: int = 0):
        self.detector = detector
        self.fields = fields
        self.seed = seed

    def fit(self, X=None, y=None):
        self.detector_ = (
            self.detector if self.detector is not None else builtin_detector(self.seed)
        )
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "detector_"):
            self.fit()
        rows = [
            self.detector_.detect(join_metadata(_as_triple(item), self.fields))
            for item in X
        ]
        return np.stack(rows) if rows else np.zeros((0, VECTOR_DIM))


def baseline_predict(
    meta,
    detector: NGramLanguageDetector,
    taxonomy: ClassTaxonomy | None = None,
    fields=("artist", "album", "title"),
) -> str:
    """Class label from the detector's top language, folded into the taxonomy.

    Detection failures and languages outside the named classes both land in
    the catch-all class.
    """
    taxonomy = taxonomy or default_taxonomy()
    vec = detector.detect(join_metadata(_as_triple(meta), fields))
    if is_failure(vec):
        return taxonomy.fallback
    code = DETECTOR_CODES[int(np.argmax(vec[:FAILURE_INDEX]))]
    return taxonomy.fold(code)


def save_vector_table(path, vectors: dict[str, np.ndarray], delimiter: str = ","):
    """Write track-id → 56-column vector rows as delimited text."""
    with open(path, "w", encoding="utf-8") as fh:
        for track_id in vectors:
            vec = check_language_vector(vectors[track_id])
            fh.write(track_id + delimiter)
            fh.write(delimiter.join(format(v, ".9g") for v in vec))
            fh.write("\n")


def load_vector_table(path, delimiter: str = ",") -> dict[str, np.ndarray]:
    """Read externally computed language vectors: one row per track id.

    Each row is a track id followed by 56 numeric columns; rows must satisfy
    the probability-vector contract.
    """
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            if len(cells) != 1 + VECTOR_DIM:
                raise ValueError(
                    f"{path}:{lineno}: expected {1 + VECTOR_DIM} columns, got {len(cells)}"
                )
            track_id = cells[0]
            if track_id in vectors:
                raise ValueError(f"{path}:{lineno}: duplicate track id {track_id!r}")
            try:
                vec = np.array([float(c) for c in cells[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
            try:
                vectors[track_id] = check_language_vector(vec)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return vectors
