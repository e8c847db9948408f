"""Single-component PLS: first direction, latent regression, prediction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataError


class NoSignalError(ValueError):
    pass


class DegenerateComponentError(ValueError):
    pass


def sign_convention(w: np.ndarray) -> np.ndarray:
    """Flip ``w`` so that its largest-magnitude entry is positive."""
    k = int(np.argmax(np.abs(w)))
    return -w if w[k] < 0 else w


def first_direction(Z) -> np.ndarray:
    """Leading left singular vector of the p x q cross product ``Z``.

    This maximizes ``w' Z Z' w`` over unit vectors.  The p x p matrix
    ``Z Z'`` is never formed.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if not np.any(Z):
        raise NoSignalError("no signal: cross product X'Y is identically zero")
    U, _, _ = np.linalg.svd(Z, full_matrices=False)
    return sign_convention(U[:, 0].copy())


@dataclass(frozen=True)
class LatentModel:
    w: np.ndarray
    q_load: np.ndarray
    beta: np.ndarray


def latent_regress(X, Y, w) -> LatentModel:
    """Least-squares regression of each response on the component ``t = Xw``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    w = np.asarray(w, dtype=float)
    t = X @ w
    tt = float(t @ t)
    if tt < 1e-12:
        raise DegenerateComponentError("degenerate component: t't < 1e-12")
    q_load = (t @ Y) / tt
    return LatentModel(w, q_load, np.outer(w, q_load))


def zero_model(p: int, q: int) -> LatentModel:
    return LatentModel(np.zeros(p), np.zeros(q), np.zeros((p, q)))


def predict(model: LatentModel, X_new) -> np.ndarray:
    X_new = np.asarray(X_new, dtype=float)
    if X_new.ndim != 2 or X_new.shape[1] != model.beta.shape[0]:
        raise DataError(
            f"X_new must have {model.beta.shape[0]} columns, got shape {X_new.shape}"
        )
    return X_new @ model.beta


def fit_pls1(X, Y) -> LatentModel:
    """Plain one-component PLS fit."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return latent_regress(X, Y, first_direction(X.T @ Y))
