"""Domain data model: studies, cross products, penalty configuration, results."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .penalties import outer_gamma


class DataError(ValueError):
    """Structurally invalid input data."""


class Model(str, Enum):
    HOMOGENEITY = "homo"
    HETEROGENEITY = "hetero"


class Contrast(str, Enum):
    MAGNITUDE = "mag"
    SIGN = "sign"


def _as_matrix(a, name):
    # copy so that freezing the stored array never touches the caller's
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name} must be a 2-D matrix, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class StudyData:
    """One study: predictors ``X`` (n x p) and responses ``Y`` (n x q)."""

    X: np.ndarray
    Y: np.ndarray
    id: str = ""

    def __post_init__(self):
        X = _as_matrix(self.X, f"study {self.id!r} X")
        Y = _as_matrix(self.Y, f"study {self.id!r} Y")
        if X.shape[0] != Y.shape[0]:
            raise DataError(
                f"study {self.id!r}: X has {X.shape[0]} rows but Y has {Y.shape[0]}"
            )
        if X.shape[0] < 2:
            raise DataError(f"study {self.id!r}: need at least 2 rows, got {X.shape[0]}")
        if X.shape[1] < 1 or Y.shape[1] < 1:
            raise DataError(f"study {self.id!r}: empty predictor or response block")
        if not (np.isfinite(X).all() and np.isfinite(Y).all()):
            raise DataError(
                f"study {self.id!r}: non-finite entries (missing values must be imputed upstream)"
            )
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.Y.shape[1]

    def subset(self, rows) -> "StudyData":
        rows = np.asarray(rows)
        return StudyData(self.X[rows], self.Y[rows], self.id)


@dataclass(frozen=True)
class MultiStudyData:
    """Ordered studies sharing the same predictor and response columns."""

    studies: tuple

    def __init__(self, studies: Sequence[StudyData]):
        studies = tuple(studies)
        if len(studies) < 1:
            raise DataError("at least one study is required")
        p, q = studies[0].p, studies[0].q
        for k, s in enumerate(studies):
            if s.p != p:
                raise DataError(
                    f"study {k} ({s.id!r}) has {s.p} predictors, expected {p}"
                )
            if s.q != q:
                raise DataError(f"study {k} ({s.id!r}) has {s.q} responses, expected {q}")
        object.__setattr__(self, "studies", studies)

    @classmethod
    def from_arrays(cls, Xs, Ys, ids=None) -> "MultiStudyData":
        ids = ids or [f"study{k + 1}" for k in range(len(Xs))]
        return cls([StudyData(X, Y, i) for X, Y, i in zip(Xs, Ys, ids)])

    def __len__(self):
        return len(self.studies)

    def __iter__(self):
        return iter(self.studies)

    def __getitem__(self, k):
        return self.studies[k]

    @property
    def L(self) -> int:
        return len(self.studies)

    @property
    def p(self) -> int:
        return self.studies[0].p

    @property
    def q(self) -> int:
        return self.studies[0].q

    @property
    def sizes(self) -> np.ndarray:
        return np.array([s.n for s in self.studies])

    def pooled(self) -> StudyData:
        """Row-wise concatenation of all studies."""
        return StudyData(
            np.vstack([s.X for s in self.studies]),
            np.vstack([s.Y for s in self.studies]),
            "pooled",
        )


@dataclass(frozen=True)
class CrossProduct:
    """``Z = X^T Y`` for one study, with the sample count used for weighting."""

    Z: np.ndarray
    n: int


def build_cross_products(data: MultiStudyData) -> list[CrossProduct]:
    return [CrossProduct(s.X.T @ s.Y, s.n) for s in data]


def standardize(data: MultiStudyData, center=True, scale=True):
    """Center/scale every study separately.

    Y columns are centered whenever ``center`` is set; only X is scaled.
    Returns ``(standardized_data, warnings)`` where the warnings list names
    zero-variance columns that were left centered-only.
    """
    out, issues = [], []
    for s in data:
        X, Y = s.X.copy(), s.Y.copy()
        if center:
            X -= X.mean(axis=0)
            Y -= Y.mean(axis=0)
        if scale:
            sd = X.std(axis=0, ddof=1)
            # a column that is constant up to rounding gets no scaling
            flat = sd <= 1e-12 * np.maximum(np.abs(X).max(axis=0), 1.0)
            for j in np.flatnonzero(flat):
                issues.append(f"study {s.id!r} column {j}: zero variance, not scaled")
            sd[flat] = 1.0
            X /= sd
        out.append(StudyData(X, Y, s.id))
    for msg in issues:
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return MultiStudyData(out), issues


@dataclass(frozen=True)
class PenaltySpec:
    """Structural model, contrast kind and all scalar penalty parameters.

    ``b`` is the outer-MCP concavity of the composite penalty; when left as
    ``None`` it is linked to ``mu1`` by ``b = L a mu1^2 / 2`` at fit time.
    ``printed_sign_denominator`` switches the sign-contrast updates to the
    whole-denominator grouping ``(1 + mu2*(L-1)) / (c^2 + tau2)``.
    """

    model: Model = Model.HOMOGENEITY
    contrast: Contrast = Contrast.MAGNITUDE
    mu1: float = 0.0
    mu2: float = 0.0
    a: float = 6.0
    b: float | None = None
    tau2: float = 0.5
    kappa: float = 0.5
    printed_sign_denominator: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "contrast", Contrast(self.contrast))
        if self.mu1 < 0 or self.mu2 < 0:
            raise ValueError("mu1 and mu2 must be nonnegative")
        if not self.a > 1:
            raise ValueError(f"a must be > 1, got {self.a}")
        if self.b is not None and not self.b > 0:
            raise ValueError(f"b must be > 0, got {self.b}")
        if not self.tau2 > 0:
            raise ValueError(f"tau2 must be > 0, got {self.tau2}")
        if not 0 < self.kappa <= 0.5:
            raise ValueError(f"kappa must lie in (0, 0.5], got {self.kappa}")

    def outer_b(self, n_datasets: int) -> float:
        if self.b is not None:
            return self.b
        return outer_gamma(n_datasets, self.a, self.mu1)

    def resolved(self, n_datasets: int) -> "PenaltySpec":
        """Copy with ``b`` filled in for the heterogeneity model."""
        if self.model is Model.HETEROGENEITY and self.b is None and self.mu1 > 0:
            return replace(self, b=self.outer_b(n_datasets))
        return self

    def with_tuning(self, mu1: float, mu2: float) -> "PenaltySpec":
        """Copy at a new ``(mu1, mu2)``; a linked ``b`` is re-derived later."""
        return replace(self, mu1=float(mu1), mu2=float(mu2))

    @property
    def label(self) -> str:
        return f"{self.model.value}_{self.contrast.value}"


@dataclass
class DirectionState:
    """Per-dataset directions ``w`` and surrogates ``c`` (rows of (L, p) arrays)."""

    w: np.ndarray
    c: np.ndarray
    iteration: int = 0


@dataclass
class FitResult:
    directions: list
    selected: np.ndarray
    beta: list
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    fully_penalized: bool = False
    q_loadings: list = field(default_factory=list)

    @property
    def L(self) -> int:
        return len(self.directions)

    def predict(self, l: int, X_new) -> np.ndarray:
        X_new = np.asarray(X_new, dtype=float)
        if X_new.shape[1] != self.beta[l].shape[0]:
            raise DataError(
                f"X_new has {X_new.shape[1]} columns, model expects {self.beta[l].shape[0]}"
            )
        return X_new @ self.beta[l]
