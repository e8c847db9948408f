"""Cross-validated choice of ``(mu1, mu2)``."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DataError, Model, MultiStudyData, PenaltySpec, build_cross_products
from .pls import NoSignalError, first_direction
from .solver import PREDICTION_MODES, IsplsConfig, solve_directions, study_models
from .spls import _zzt

MU2_STAR_LEVELS = (0.0, 0.01, 0.1, 1.0, 10.0)


@dataclass(frozen=True)
class TuningGrid:
    mu1_values: tuple
    mu2_values: tuple
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        mu1 = tuple(float(v) for v in self.mu1_values)
        mu2 = tuple(float(v) for v in self.mu2_values)
        if not mu1 or not mu2:
            raise ValueError("tuning grids must be nonempty")
        if list(mu1) != sorted(mu1) or list(mu2) != sorted(mu2):
            raise ValueError("tuning grids must be sorted ascending")
        if min(mu1) < 0 or min(mu2) < 0:
            raise ValueError("tuning values must be nonnegative")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        object.__setattr__(self, "mu1_values", mu1)
        object.__setattr__(self, "mu2_values", mu2)


@dataclass
class CvResult:
    scores: np.ndarray  # (len(mu1_values), len(mu2_values)) mean held-out MSPE
    best: tuple
    per_fold: np.ndarray  # (n_mu1, n_mu2, folds, L)
    grid: TuningGrid
    folds: list = field(default_factory=list)  # per study, list of held-out index arrays


def make_folds(sizes, folds: int, seed: int) -> list[list[np.ndarray]]:
    """Per-study seeded shuffles split into ``folds`` held-out blocks.

    Every study contributes rows to every fold.
    """
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    out = []
    for n, ss in zip(sizes, streams):
        if n < folds:
            raise DataError(f"a study with {n} rows cannot be split into {folds} folds")
        perm = np.random.default_rng(ss).permutation(n)
        blocks = [np.sort(b) for b in np.array_split(perm, folds)]
        if n - max(len(b) for b in blocks) < 2:
            raise DataError(f"a study with {n} rows leaves < 2 training rows in some fold")
        out.append(blocks)
    return out


def split_fold(data: MultiStudyData, fold_blocks, k: int):
    """Training and held-out data for fold ``k``."""
    train, test = [], []
    for study, blocks in zip(data, fold_blocks):
        held = blocks[k]
        keep = np.setdiff1d(np.arange(study.n), held, assume_unique=True)
        train.append(study.subset(keep))
        test.append(study.subset(held))
    return MultiStudyData(train), MultiStudyData(test)


def init_threshold_scale(data: MultiStudyData) -> float:
    """``max_{l,j} |(Z Z' w0)_j|`` over studies at the PLS initialization."""
    best = 0.0
    for cp in build_cross_products(data):
        try:
            w0 = first_direction(cp.Z)
        except NoSignalError:
            continue
        best = max(best, float(np.abs(_zzt(cp.Z, w0)).max()))
    return best


def default_grid(data: MultiStudyData, folds: int = 5, seed: int = 0, n_mu1: int = 10) -> TuningGrid:
    """Ten log-spaced ``mu1`` over ``[0.001 M, M]`` and five ``mu2`` levels.

    The ``mu2`` levels are chosen so that the contrast weights
    ``mu2* = mu2 n^2`` take the values 0, 0.01, 0.1, 1, 10 at the mean
    squared study size; the c-step curvature from the fit term is 1, so
    these span "no contrast" to "strong fusion".
    """
    M = init_threshold_scale(data)
    mu1 = tuple(np.geomspace(1e-3 * M, M, n_mu1)) if M > 0 else (0.0,)
    n2 = float(np.mean(data.sizes.astype(float) ** 2))
    mu2 = tuple(v / n2 for v in MU2_STAR_LEVELS)
    return TuningGrid(mu1, mu2, folds, seed)


def heldout_mspe(study, beta) -> float:
    resid = study.Y - study.X @ beta
    return float(np.mean(resid * resid))


def _best_index(scores: np.ndarray) -> tuple[int, int]:
    """Argmin with ties going to larger mu1, then larger mu2."""
    lowest = np.nanmin(scores)
    hits = np.argwhere(scores == lowest)
    i, j = max(map(tuple, hits))
    return int(i), int(j)


def cross_validate(
    data: MultiStudyData,
    spec_template: PenaltySpec,
    grid: TuningGrid,
    cfg_template: IsplsConfig | None = None,
    prediction: str = "rank1",
) -> CvResult:
    """K-fold CV over the ``(mu1, mu2)`` grid.

    Scores are held-out MSPE averaged over studies with equal weights, then
    over folds.  A linked ``b`` is re-derived for every ``mu1``.
    """
    if prediction not in PREDICTION_MODES:
        raise ValueError(f"unknown prediction mode {prediction!r}")
    cfg_template = cfg_template or IsplsConfig(penalty=spec_template)
    fold_blocks = make_folds(data.sizes, grid.folds, grid.seed)
    splits = [split_fold(data, fold_blocks, k) for k in range(grid.folds)]
    cross = [build_cross_products(train) for train, _ in splits]
    n1, n2 = len(grid.mu1_values), len(grid.mu2_values)
    per_fold = np.empty((n1, n2, grid.folds, data.L))
    for i, mu1 in enumerate(grid.mu1_values):
        for j, mu2 in enumerate(grid.mu2_values):
            spec = spec_template.with_tuning(mu1, mu2)
            if spec_template.model is Model.HETEROGENEITY and spec_template.b is None:
                spec = spec.resolved(data.L)
            cfg = _with_penalty(cfg_template, spec)
            for k, (train, test) in enumerate(splits):
                fit = solve_directions(cross[k], cfg)
                models = study_models(train, fit.directions, prediction)
                for l in range(data.L):
                    per_fold[i, j, k, l] = heldout_mspe(test[l], models[l].beta)
    scores = per_fold.mean(axis=3).mean(axis=2)
    i, j = _best_index(scores)
    return CvResult(scores, (grid.mu1_values[i], grid.mu2_values[j]), per_fold, grid, fold_blocks)


def _with_penalty(cfg: IsplsConfig, spec: PenaltySpec) -> IsplsConfig:
    return IsplsConfig(
        penalty=spec,
        outer_max_iter=cfg.outer_max_iter,
        outer_tol=cfg.outer_tol,
        inner_max_iter=cfg.inner_max_iter,
        inner_tol=cfg.inner_tol,
        sweep_max=cfg.sweep_max,
    )
