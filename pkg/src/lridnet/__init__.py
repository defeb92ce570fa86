"""Multimodal singing-language identification: audio + metadata fusion."""

from .audio import AudioClip, MelSpectrogramExtractor, downmix, melspectrogram, resample
from .catalog import (
    ArtistDisjointSplitter,
    SplitManifest,
    TrackRecord,
    apply_taxonomy,
    load_catalog,
    load_manifest,
    partition,
    save_manifest,
    split_records,
)
from .estimator import LridNetClassifier
from .langid import (
    LanguageProfile,
    MetadataTriple,
    MetadataVectorizer,
    NGramLanguageDetector,
    baseline_predict,
    build_profile,
    builtin_detector,
    join_metadata,
)
from .languages import CLASS_NAMES, DETECTOR_CODES, VECTOR_DIM, ClassTaxonomy, default_taxonomy
from .metrics import MetricsReport, confusion_matrix, display_transform, report_from_confusion
from .model import LridNet, ModalityDropout, ModelConfig, Prediction, tiny_config
from .synth import make_synth_catalog
from .training import (
    Checkpoint,
    TrackDataset,
    TrainConfig,
    TrainLog,
    load_checkpoint,
    make_experiment,
    predict_dataset,
    run_experiment,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "MelSpectrogramExtractor", "downmix", "melspectrogram", "resample",
    "ArtistDisjointSplitter", "SplitManifest", "TrackRecord", "apply_taxonomy",
    "load_catalog", "load_manifest", "partition", "save_manifest", "split_records",
    "LridNetClassifier",
    "LanguageProfile", "MetadataTriple", "MetadataVectorizer", "NGramLanguageDetector",
    "baseline_predict", "build_profile", "builtin_detector", "join_metadata",
    "CLASS_NAMES", "DETECTOR_CODES", "VECTOR_DIM", "ClassTaxonomy", "default_taxonomy",
    "MetricsReport", "confusion_matrix", "display_transform", "report_from_confusion",
    "LridNet", "ModalityDropout", "ModelConfig", "Prediction", "tiny_config",
    "make_synth_catalog",
    "Checkpoint", "TrackDataset", "TrainConfig", "TrainLog", "load_checkpoint",
    "make_experiment", "predict_dataset", "run_experiment", "save_checkpoint", "train",
]
