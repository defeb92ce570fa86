import numpy as np
import pytest
from sklearn.base import clone

from lridnet.estimator import LridNetClassifier


def toy_text_data(n, seed=0):
    rng = np.random.default_rng(seed)
    y = np.array(["alpha", "beta"])[rng.integers(0, 2, n)]
    lang = rng.uniform(0, 0.05, (n, 56)).astype(np.float32)
    lang[y == "alpha", 0] += 0.9
    lang[y == "beta", 1] += 0.9
    return lang, y


TINY = dict(n_mels=8, audio_base_channels=2, audio_blocks=(1,), text_hidden=8,
            fusion_hidden=8)


def test_sklearn_param_surface():
    clf = LridNetClassifier(experiment="TO", seed=3)
    params = clf.get_params()
    assert params["experiment"] == "TO"
    assert params["seed"] == 3
    cloned = clone(clf)
    assert cloned.get_params() == params


def test_fit_predict_text_only():
    lang, y = toy_text_data(120, seed=1)
    clf = LridNetClassifier(experiment="TO", learning_rate=1e-2, max_epochs=15,
                            patience=15, seed=0, **TINY)
    clf.fit({"lang": lang}, y)
    assert set(clf.classes_) == {"alpha", "beta"}
    preds = clf.predict({"lang": lang})
    assert (preds == y).mean() >= 0.95
    probs = clf.predict_proba({"lang": lang})
    assert probs.shape == (120, 2)
    assert np.abs(probs.sum(axis=1) - 1).max() < 1e-6


def test_fit_with_explicit_validation_and_plain_array():
    lang, y = toy_text_data(60, seed=2)
    lv, yv = toy_text_data(30, seed=3)
    clf = LridNetClassifier(experiment="TO", learning_rate=1e-2, max_epochs=5,
                            patience=5, seed=0, **TINY)
    clf.fit(lang, y, X_valid=lv, y_valid=yv)  # TO accepts a bare lang array
    assert clf.log_.stop_epoch == 5
    assert clf.predict(lv).shape == (30,)


def test_full_variant_requires_both_inputs():
    lang, y = toy_text_data(20, seed=4)
    clf = LridNetClassifier(experiment="Main", max_epochs=1, **TINY)
    with pytest.raises((TypeError, ValueError)):
        clf.fit({"lang": lang}, y)


def test_full_variant_tuple_input():
    lang, y = toy_text_data(40, seed=5)
    rng = np.random.default_rng(6)
    audio = rng.normal(size=(40, 8, 16)).astype(np.float32)
    clf = LridNetClassifier(experiment="Main", learning_rate=1e-2, max_epochs=2,
                            patience=2, seed=0, **TINY)
    clf.fit((audio, lang), y)
    preds = clf.predict((audio, lang))
    assert preds.shape == (40,)


def test_unknown_experiment_raises():
    lang, y = toy_text_data(10)
    clf = LridNetClassifier(experiment="Bogus", **TINY)
    with pytest.raises(ValueError, match="valid names"):
        clf.fit({"lang": lang}, y)


def test_predict_before_fit():
    clf = LridNetClassifier(experiment="TO", **TINY)
    with pytest.raises(RuntimeError, match="not fitted"):
        clf.predict_proba({"lang": np.zeros((1, 56))})
