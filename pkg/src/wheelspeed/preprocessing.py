"""Per-channel z-score normalization."""

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .validation import check_features


class ZScoreScaler(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Centre and scale each column with statistics from ``fit`` data only.

    Columns with (near) zero spread get unit scale so they pass through
    centred rather than blowing up.
    """

    def __init__(self, min_scale=1e-8):
        self.min_scale = min_scale

    def fit(self, X, y=None):
        X = check_features(X)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > self.min_scale, std, 1.0)
        self.n_features_in_ = X.shape[1]
        self.n_samples_seen_ = X.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_features(X, self.n_features_in_)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = check_features(X, self.n_features_in_)
        return X * self.scale_ + self.mean_

    def to_dict(self):
        check_is_fitted(self)
        return {"mean": self.mean_.tolist(), "scale": self.scale_.tolist(),
                "n_samples_seen": int(self.n_samples_seen_)}

    @classmethod
    def from_dict(cls, d):
        s = cls()
        s.mean_ = np.asarray(d["mean"], dtype=float)
        s.scale_ = np.asarray(d["scale"], dtype=float)
        s.n_features_in_ = s.mean_.size
        s.n_samples_seen_ = d.get("n_samples_seen", 0)
        return s
