"""Track catalog ingestion, class folding, and artist-disjoint splits."""

from __future__ import annotations

import csv
import json
import unicodedata
from dataclasses import dataclass, field, replace
from pathlib import Path

import random

from sklearn.base import BaseEstimator

from .langid import MetadataTriple
from .languages import ClassTaxonomy, default_taxonomy

DEFAULT_COLUMNS = {
    "id": "id",
    "artist": "artist",
    "album": "album",
    "title": "title",
    "lang": "lang",
}

# Raw language-column values that mark a track as instrumental.
INSTRUMENTAL_MARKERS = ("instrumental", "-")


@dataclass
class TrackRecord:
    track_id: str
    meta: MetadataTriple
    audio_path: str
    language: str
    is_instrumental: bool = False
    label: str | None = None

    @property
    def artist_key(self) -> str:
        """Canonical artist identity: NFC-normalized name, surrounding space stripped."""
        return unicodedata.normalize("NFC", self.meta.artist_name).strip()


def load_catalog(path, columns: dict | None = None, delimiter: str = ",",
                 audio_root: str | None = None) -> list[TrackRecord]:
    """Parse a delimited metadata file into track records.

    ``columns`` maps the logical fields (id, artist, album, title, lang) to
    the file's column names. Audio paths are ``audio_root/<id>.wav`` when a
    root is given, else the raw id.
    """
    cols = dict(DEFAULT_COLUMNS)
    if columns:
        cols.update(columns)
    path = Path(path)
    records: list[TrackRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        for logical in ("id", "artist", "album", "title", "lang"):
            if cols[logical] not in header:
                raise ValueError(f"missing column: {cols[logical]}")
        for row in reader:
            track_id = (row[cols["id"]] or "").strip()
            if not track_id:
                raise ValueError(f"{path}: row with empty track id")
            if track_id in seen:
                raise ValueError(f"duplicate track id: {track_id}")
            seen.add(track_id)
            lang = (row[cols["lang"]] or "").strip()
            audio = (
                str(Path(audio_root) / f"{track_id}.wav") if audio_root else track_id
            )
            records.append(
                TrackRecord(
                    track_id=track_id,
                    meta=MetadataTriple(
                        artist_name=row[cols["artist"]] or "",
                        album_name=row[cols["album"]] or "",
                        track_title=row[cols["title"]] or "",
                    ),
                    audio_path=audio,
                    language=lang,
                    is_instrumental=lang.lower() in INSTRUMENTAL_MARKERS,
                )
            )
    return records


def apply_taxonomy(records, taxonomy: ClassTaxonomy | None = None) -> list[TrackRecord]:
    """Drop instrumental tracks and fold raw labels into taxonomy classes."""
    taxonomy = taxonomy or default_taxonomy()
    return [
        replace(r, label=taxonomy.fold(r.language))
        for r in records
        if not r.is_instrumental
    ]


@dataclass
class SplitManifest:
    """Train/validation id partition plus bookkeeping for reproducibility."""

    train_ids: tuple[str, ...]
    valid_ids: tuple[str, ...]
    class_counts: dict[str, dict[str, int]]
    seed: int
    ratio: float
    warnings: list[str] = field(default_factory=list)

    def side_of(self, track_id: str) -> str:
        if track_id in self._train_set():
            return "train"
        if track_id in self._valid_set():
            return "valid"
        raise KeyError(track_id)

    def _train_set(self):
        if not hasattr(self, "_train_cache"):
            self._train_cache = frozenset(self.train_ids)
        return self._train_cache

    def _valid_set(self):
        if not hasattr(self, "_valid_cache"):
            self._valid_cache = frozenset(self.valid_ids)
        return self._valid_cache


class ArtistDisjointSplitter(BaseEstimator):
    """Greedy stratified split that keeps every artist on a single side.

    Artists are ordered by descending track count (seeded shuffle breaks
    ties), then each is assigned to whichever side leaves the smaller summed
    per-class deviation from the target ratio; a refinement sweep then moves
    single artists across while that strictly reduces the deviation. Large
    groups are placed first and small ones fine-tune the balance, which keeps
    per-class train fractions close to the target whenever the artist
    granularity permits.
    """

    def __init__(self, ratio: float = 0.8, seed: int = 0, tolerance: float = 0.02,
                 refine_passes: int = 10):
        self.ratio = ratio
        self.seed = seed
        self.tolerance = tolerance
        self.refine_passes = refine_passes

    def split(self, records) -> SplitManifest:
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"ratio must be in (0, 1), got {self.ratio}")
        records = list(records)
        if not records:
            raise ValueError("no records to split")
        if any(r.label is None for r in records):
            raise ValueError("records are unlabeled; apply the taxonomy first")

        by_artist: dict[str, list[TrackRecord]] = {}
        for r in records:
            by_artist.setdefault(r.artist_key, []).append(r)

        class_totals: dict[str, int] = {}
        for r in records:
            class_totals[r.label] = class_totals.get(r.label, 0) + 1
        targets = {c: self.ratio * n for c, n in class_totals.items()}

        contribs: dict[str, dict[str, int]] = {}
        for artist, tracks in by_artist.items():
            contrib: dict[str, int] = {}
            for r in tracks:
                contrib[r.label] = contrib.get(r.label, 0) + 1
            contribs[artist] = contrib

        artists = sorted(by_artist)
        random.Random(self.seed).shuffle(artists)
        artists.sort(key=lambda a: -len(by_artist[a]))

        train_counts = {c: 0 for c in class_totals}

        def deviation(counts, classes):
            return sum(abs(counts[c] - targets[c]) / class_totals[c] for c in classes)

        train_artists: set[str] = set()
        for artist in artists:
            contrib = contribs[artist]
            with_artist = {c: train_counts[c] + n for c, n in contrib.items()}
            without = {c: train_counts[c] for c in contrib}
            if deviation(with_artist, contrib) <= deviation(without, contrib):
                train_artists.add(artist)
                for c, n in contrib.items():
                    train_counts[c] += n

        # Local refinement, deterministic scan order. First flip single artists
        # across sides while the summed relative deviation strictly drops;
        # then, for classes still outside tolerance, swap train/valid artist
        # pairs touching that class. Swaps restore sub-artist granularity that
        # single moves cannot reach.
        for _ in range(self.refine_passes):
            improved = False
            for artist in artists:
                contrib = contribs[artist]
                sign = -1 if artist in train_artists else 1
                moved = {c: train_counts[c] + sign * n for c, n in contrib.items()}
                if deviation(moved, contrib) < deviation(train_counts, contrib):
                    improved = True
                    for c, n in contrib.items():
                        train_counts[c] += sign * n
                    if sign < 0:
                        train_artists.discard(artist)
                    else:
                        train_artists.add(artist)
            if not improved:
                break

        def move_delta(outs, ins):
            affected = set()
            for a in outs + ins:
                affected |= set(contribs[a])
            moved = dict.fromkeys(affected)
            for c in affected:
                moved[c] = train_counts[c]
            for a in outs:
                for c, n in contribs[a].items():
                    moved[c] -= n
            for a in ins:
                for c, n in contribs[a].items():
                    moved[c] += n
            return deviation(moved, affected) - deviation(train_counts, affected)

        def apply_move(outs, ins):
            for a in outs:
                train_artists.discard(a)
                for c, n in contribs[a].items():
                    train_counts[c] -= n
            for a in ins:
                train_artists.add(a)
                for c, n in contribs[a].items():
                    train_counts[c] += n

        # Sub-artist correction for classes still outside tolerance: evaluate
        # swap / 1-for-2 / 2-for-1 exchanges touching the class and apply the
        # best strictly improving one; repeat until none remains. The pair
        # enumeration is skipped for classes with many artists, where plain
        # greedy granularity is already finer than the tolerance.
        max_moves = max(len(artists), 100)
        for _ in range(max_moves):
            off_classes = [
                c for c in sorted(class_totals)
                if abs(train_counts[c] / class_totals[c] - self.ratio) > self.tolerance
            ]
            best = None
            for c in off_classes:
                in_side = [a for a in artists if a in train_artists and c in contribs[a]]
                out_side = [a for a in artists if a not in train_artists and c in contribs[a]]
                moves = [([a], [b]) for a in in_side for b in out_side]
                if len(in_side) <= 60 and len(out_side) <= 60:
                    moves += [
                        ([a], [b1, b2])
                        for a in in_side
                        for i, b1 in enumerate(out_side)
                        for b2 in out_side[i + 1 :]
                    ]
                    moves += [
                        ([a1, a2], [b])
                        for i, a1 in enumerate(in_side)
                        for a2 in in_side[i + 1 :]
                        for b in out_side
                    ]
                if len(in_side) <= 30 and len(out_side) <= 30:
                    # Pair-for-pair exchanges, prefiltered on this class's
                    # count so only locally improving combinations get the
                    # full multi-class evaluation.
                    cn = {a: contribs[a].get(c, 0) for a in in_side + out_side}
                    now = abs(train_counts[c] - targets[c])
                    in_pairs = [
                        (a1, a2)
                        for i, a1 in enumerate(in_side)
                        for a2 in in_side[i + 1 :]
                    ]
                    out_pairs = [
                        (b1, b2)
                        for i, b1 in enumerate(out_side)
                        for b2 in out_side[i + 1 :]
                    ]
                    for a1, a2 in in_pairs:
                        for b1, b2 in out_pairs:
                            shifted = (
                                train_counts[c] - cn[a1] - cn[a2] + cn[b1] + cn[b2]
                            )
                            if abs(shifted - targets[c]) < now - 1e-12:
                                moves.append(([a1, a2], [b1, b2]))
                for outs, ins in moves:
                    delta = move_delta(outs, ins)
                    if delta < -1e-12 and (best is None or delta < best[0]):
                        best = (delta, outs, ins)
            if best is None:
                break
            apply_move(best[1], best[2])

        train_ids, valid_ids = [], []
        counts = {c: {"train": 0, "valid": 0} for c in class_totals}
        for r in records:
            side = "train" if r.artist_key in train_artists else "valid"
            (train_ids if side == "train" else valid_ids).append(r.track_id)
            counts[r.label][side] += 1

        warnings = []
        lo, hi = self.ratio - self.tolerance, self.ratio + self.tolerance
        for c in sorted(class_totals):
            frac = counts[c]["train"] / class_totals[c]
            if not lo <= frac <= hi:
                n_artists = len({r.artist_key for r in records if r.label == c})
                detail = " (single-artist class)" if n_artists == 1 else ""
                warnings.append(
                    f"class {c}: train fraction {frac:.3f} outside "
                    f"[{lo:.2f}, {hi:.2f}]{detail}"
                )

        return SplitManifest(
            train_ids=tuple(sorted(train_ids)),
            valid_ids=tuple(sorted(valid_ids)),
            class_counts=counts,
            seed=self.seed,
            ratio=self.ratio,
            warnings=warnings,
        )


def split_records(records, ratio: float = 0.8, seed: int = 0) -> SplitManifest:
    return ArtistDisjointSplitter(ratio=ratio, seed=seed).split(records)


def partition(records, manifest: SplitManifest):
    """Records grouped into (train, valid) lists according to the manifest."""
    train = [r for r in records if r.track_id in manifest._train_set()]
    valid = [r for r in records if r.track_id in manifest._valid_set()]
    return train, valid


def save_manifest(manifest: SplitManifest, path):
    payload = {
        "seed": manifest.seed,
        "ratio": manifest.ratio,
        "class_counts": manifest.class_counts,
        "warnings": manifest.warnings,
        "train_ids": list(manifest.train_ids),
        "valid_ids": list(manifest.valid_ids),
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def load_manifest(path) -> SplitManifest:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return SplitManifest(
        train_ids=tuple(payload["train_ids"]),
        valid_ids=tuple(payload["valid_ids"]),
        class_counts=payload["class_counts"],
        seed=payload["seed"],
        ratio=payload["ratio"],
        warnings=list(payload.get("warnings", [])),
    )
