"""scikit-learn compatible wrappers around the front end and the classifier."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionError
from .network import (NetworkSpec, WeightStore, canonical_network, infer_batch, infer_windows,
                      zero_weights)
from .preprocess import SAMPLE_RATE, spectrogram
from .streaming import derive_plan, plan_memory_bytes, stream_spectrogram
from .weightfile import load_weights


def check_signals(X) -> np.ndarray:
    """Raw signals as a 2D float array ``(n_signals, n_samples)``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    return check_array(X, dtype=np.float64, ensure_min_features=1)


def check_spectrograms(X, net: NetworkSpec) -> np.ndarray:
    """Spectrogram batch as ``(n, T, F, C)`` float32, validated against ``net``."""
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X[None, :, :, None]
    elif X.ndim == 3:
        X = X[..., None] if net.input_c == 1 and X.shape[-1] == net.input_f else X[None]
    X = check_array(X, dtype=np.float32, allow_nd=True)
    if X.ndim != 4 or X.shape[2:] != (net.input_f, net.input_c):
        raise DimensionError(f"spectrograms must be (n, T, {net.input_f}, {net.input_c}), got {X.shape}")
    return X


class SpectrogramExtractor(TransformerMixin, BaseEstimator):
    """Raw 1 ksps signal(s) to ``(T, 64)`` log-power spectrograms.

    Stateless: ``fit`` only records the input width.
    """

    def __init__(self, sample_rate: float = SAMPLE_RATE):
        self.sample_rate = sample_rate

    def fit(self, X, y=None):
        self.n_features_in_ = check_signals(X).shape[1]
        return self

    def transform(self, X):
        X = check_signals(X)
        return np.stack([spectrogram(x, self.sample_rate) for x in X])


class TDPClassifier(ClassifierMixin, BaseEstimator):
    """Binary spectrogram classifier with pre-trained weights.

    Training is out of scope.  ``fit`` validates the weights and derives the
    streaming plan, and that is all it does.

    Parameters
    ----------
    weights : WeightStore or path, optional
        Defaults to an all-zero canonical network (always predicts 0.5).
    mode : {"stream", "batch"}
        Time-distributed streaming inference or layer-by-layer inference.
    threshold : float
        Decision threshold on the positive-class probability.
    """

    def __init__(self, weights=None, mode: str = "stream", threshold: float = 0.5,
                 accumulate64: bool = False):
        self.weights = weights
        self.mode = mode
        self.threshold = threshold
        self.accumulate64 = accumulate64

    def fit(self, X=None, y=None):
        if self.mode not in ("stream", "batch"):
            raise ValueError(f"mode must be 'stream' or 'batch', got {self.mode!r}")
        store = self.weights
        if store is None:
            store = zero_weights(canonical_network())
        elif not isinstance(store, WeightStore):
            store = load_weights(store)
        store.validate()
        self.store_ = store
        self.network_ = store.network
        self.plan_ = derive_plan(store.network)
        self.classes_ = np.array([0, 1])
        if X is not None:
            check_spectrograms(X, self.network_)
        return self

    @property
    def memory_bytes_(self) -> int:
        check_is_fitted(self, "plan_")
        return plan_memory_bytes(self.plan_)

    def _proba_one(self, x: np.ndarray) -> float:
        if self.mode == "batch":
            return infer_batch(self.network_, self.store_, x, self.accumulate64)
        return float(stream_spectrogram(self.plan_, self.store_, x, "full", self.accumulate64)[0])

    def predict_proba(self, X) -> np.ndarray:
        """Positive-class probability of each whole spectrogram, as ``(n, 2)``."""
        check_is_fitted(self, "plan_")
        X = check_spectrograms(X, self.network_)
        p = np.array([self._proba_one(x) for x in X])
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= self.threshold).astype(int)

    def window_proba(self, x, decimate: bool = False) -> np.ndarray:
        """Probabilities of the nominal-length windows within one long spectrogram.

        Windows advance by one streaming step, or by a whole window when
        ``decimate`` is set.
        """
        check_is_fitted(self, "plan_")
        x = check_spectrograms(x, self.network_)
        if x.shape[0] != 1:
            raise DimensionError("window_proba takes a single spectrogram")
        if self.mode == "batch":
            hop = self.plan_.window if decimate else 1
            return infer_windows(self.network_, self.store_, x[0], hop, self.accumulate64)
        return stream_spectrogram(self.plan_, self.store_, x[0], "tumbling" if decimate else "sliding",
                                  self.accumulate64)

