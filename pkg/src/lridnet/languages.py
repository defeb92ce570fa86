"""Shared language vocabulary: detector code list and the 11-class track taxonomy."""

from __future__ import annotations

from dataclasses import dataclass, field

# Detector language codes in fixed order. The probability vector produced by the
# text featurizer has one entry per code plus a trailing failure flag, so this
# ordering is part of the on-disk/wire contract and must never be reordered.
DETECTOR_CODES = (
    "af", "ar", "bg", "bn", "ca", "cs", "cy", "da", "de", "el",
    "en", "es", "et", "fa", "fi", "fr", "gu", "he", "hi", "hr",
    "hu", "id", "it", "ja", "kn", "ko", "lt", "lv", "mk", "ml",
    "mr", "ne", "nl", "no", "pa", "pl", "pt", "ro", "ru", "sk",
    "sl", "so", "sq", "sv", "sw", "ta", "te", "th", "tl", "tr",
    "uk", "ur", "vi", "zh-cn", "zh-tw",
)

N_DETECTOR_LANGS = len(DETECTOR_CODES)
FAILURE_INDEX = N_DETECTOR_LANGS
VECTOR_DIM = N_DETECTOR_LANGS + 1

CODE_TO_INDEX = {code: i for i, code in enumerate(DETECTOR_CODES)}

# Track classes ordered by training-set popularity, with the catch-all bucket
# in its fixed position. This ordering is used everywhere a class index appears
# (model output layer, confusion matrices, reports).
CLASS_NAMES = (
    "English", "Portuguese", "Spanish", "Korean", "Others",
    "French", "Japanese", "German", "Polish", "Italian", "Slovakian",
)

OTHERS_CLASS = "Others"

# Detector codes that map onto a named class; everything else folds to Others.
_CODE_TO_CLASS = {
    "en": "English",
    "pt": "Portuguese",
    "es": "Spanish",
    "ko": "Korean",
    "fr": "French",
    "ja": "Japanese",
    "de": "German",
    "pl": "Polish",
    "it": "Italian",
    "sk": "Slovakian",
}


@dataclass(frozen=True)
class ClassTaxonomy:
    """Fixed ordered class list plus the raw-label folding rule.

    Raw labels are language codes (case-insensitive); anything not mapped to a
    named class folds into the catch-all class.
    """

    classes: tuple[str, ...] = CLASS_NAMES
    code_map: dict[str, str] = field(default_factory=lambda: dict(_CODE_TO_CLASS))
    fallback: str = OTHERS_CLASS

    def __post_init__(self):
        if self.fallback not in self.classes:
            raise ValueError(f"fallback class {self.fallback!r} not in class list")
        bad = [c for c in self.code_map.values() if c not in self.classes]
        if bad:
            raise ValueError(f"code map targets unknown classes: {bad}")

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_index(self, name: str) -> int:
        return self.classes.index(name)

    def fold(self, raw_label: str) -> str:
        """Map a raw language label to one of the taxonomy classes."""
        return self.code_map.get(raw_label.strip().lower(), self.fallback)


def default_taxonomy() -> ClassTaxonomy:
    return ClassTaxonomy()
