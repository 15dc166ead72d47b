"""Single-nearest-neighbor memory mapping outbound-traffic vectors to rewards."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y


class NearestNeighborMemory(RegressorMixin, BaseEstimator):
    """Online 1-NN regressor.

    Samples are kept in insertion order. A prediction returns the reward of
    the stored input closest in Euclidean distance to the query; among equally
    close inputs the earliest-inserted wins.

    Parameters
    ----------
    capacity : int or None
        Maximum number of stored samples. When exceeded the oldest sample is
        evicted. ``None`` keeps everything.
    """

    def __init__(self, capacity=None):
        self.capacity = capacity

    def _check_capacity(self):
        if self.capacity is not None and (
            not isinstance(self.capacity, numbers.Integral) or self.capacity < 1
        ):
            raise ValueError(f"capacity must be a positive integer or None, got {self.capacity!r}")

    def fit(self, X, y):
        for attr in ("X_", "y_", "n_features_in_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        self._check_capacity()
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        if hasattr(self, "n_features_in_"):
            if X.shape[1] != self.n_features_in_:
                raise ValueError(f"input has {X.shape[1]} features, memory holds {self.n_features_in_}")
            X = np.vstack([self.X_, X])
            y = np.concatenate([self.y_, y])
        else:
            self.n_features_in_ = X.shape[1]
        if self.capacity is not None and len(y) > self.capacity:
            X, y = X[-self.capacity :], y[-self.capacity :]
        self.X_, self.y_ = X, y
        return self

    def append(self, x, reward: float) -> "NearestNeighborMemory":
        """Add one sample, skipping the array validation of :meth:`partial_fit`."""
        x = np.asarray(x, dtype=float)
        if not hasattr(self, "n_features_in_"):
            self._check_capacity()
            if x.ndim != 1:
                raise ValueError(f"input must be a vector, got shape {x.shape}")
            self.n_features_in_ = x.shape[0]
            self.X_, self.y_ = x[None, :].copy(), np.array([float(reward)])
            return self
        if x.shape != (self.n_features_in_,):
            raise ValueError(f"input has shape {x.shape}, memory holds {self.n_features_in_} features")
        drop = 1 if self.capacity is not None and len(self.y_) >= self.capacity else 0
        self.X_ = np.concatenate([self.X_[drop:], x[None, :]])
        self.y_ = np.append(self.y_[drop:], float(reward))
        return self

    def __len__(self):
        return len(self.y_) if hasattr(self, "y_") else 0

    def predict_one(self, x) -> float:
        if not len(self):
            raise ValueError("cannot predict from an empty memory")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features_in_,):
            raise ValueError(f"query has shape {x.shape}, memory holds {self.n_features_in_} features")
        d2 = ((self.X_ - x) ** 2).sum(axis=1)
        return float(self.y_[int(np.argmin(d2))])

    def predict(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"query has {X.shape[1]} features, memory holds {self.n_features_in_}")
        d2 = ((self.X_[None, :, :] - X[:, None, :]) ** 2).sum(axis=2)
        return self.y_[np.argmin(d2, axis=1)]


def nn_predict(memory: NearestNeighborMemory, query) -> float:
    return memory.predict_one(query)


def nn_update(memory: NearestNeighborMemory, x, reward: float) -> NearestNeighborMemory:
    return memory.append(x, reward)
