"""Simulated multi-study data with AR(1) predictors and rank-one coefficients."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .data import MultiStudyData, StudyData


class Scenario(str, Enum):
    S1 = "S1"  # common support, shared coefficient values
    S2 = "S2"  # common support, study-specific magnitudes
    S3 = "S3"  # 5 shared variables plus 5 study-specific ones
    S4 = "S4"  # independent random supports


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: Scenario = Scenario.S1
    L: int = 4
    p: int = 100
    q: int = 5
    n: int = 40
    rho: float = 0.2
    n_signal: int = 10
    noise_sd: float = 1.0
    seed: int = 0
    coef_low: float = 0.5
    coef_high: float = 4.0
    response_growth: float = 1.2

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        for name in ("L", "p", "q", "n", "n_signal"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.n_signal > self.p:
            raise ValueError("n_signal cannot exceed p")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        if self.scenario is Scenario.S3:
            shared = self.n_signal // 2
            own = self.n_signal - shared
            if self.p < shared + own * self.L:
                raise ValueError(
                    f"scenario S3 needs p >= {shared + own * self.L} "
                    f"(shared {shared} + {own} per study x {self.L}), got p={self.p}"
                )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scenario"] = self.scenario.value
        return d


@dataclass(frozen=True)
class GroundTruth:
    beta1: np.ndarray  # (L, p) first coefficient column per study
    support: np.ndarray  # (L, p) bool
    beta: np.ndarray  # (L, p, q)


def ar1_factor(p: int, rho: float) -> np.ndarray:
    """Lower Cholesky factor of the AR(1) correlation ``rho^|j-k|``.

    Closed form: ``F[i, 0] = rho^i`` and ``F[i, j] = rho^(i-j) sqrt(1-rho^2)``
    for ``1 <= j <= i``; its inverse is bidiagonal (the AR recursion).
    """
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    idx = np.arange(p)
    lag = idx[:, None] - idx[None, :]
    F = np.where(lag >= 0, float(rho) ** np.maximum(lag, 0), 0.0)
    F[:, 1:] *= np.sqrt(1.0 - rho * rho)
    return F


def _supports(spec: ScenarioSpec, rng) -> np.ndarray:
    L, p, k = spec.L, spec.p, spec.n_signal
    support = np.zeros((L, p), dtype=bool)
    if spec.scenario in (Scenario.S1, Scenario.S2):
        support[:, :k] = True
    elif spec.scenario is Scenario.S3:
        shared = k // 2
        own = k - shared
        support[:, :shared] = True
        picks = rng.choice(np.arange(shared, p), size=own * L, replace=False)
        for l in range(L):
            support[l, np.sort(picks[l * own:(l + 1) * own])] = True
    else:
        for l in range(L):
            support[l, rng.choice(p, size=k, replace=False)] = True
    return support


def make_truth(spec: ScenarioSpec, rng) -> GroundTruth:
    """Draw supports and coefficients.

    Each signal position gets one random sign shared by every study that
    uses it.  Magnitudes are uniform on ``[coef_low, coef_high]``: one draw
    shared by all studies in S1, independent per study otherwise.
    """
    support = _supports(spec, rng)
    L, p = support.shape
    signs = rng.choice([-1.0, 1.0], size=p)
    if spec.scenario is Scenario.S1:
        mags = np.tile(rng.uniform(spec.coef_low, spec.coef_high, size=p), (L, 1))
    else:
        mags = rng.uniform(spec.coef_low, spec.coef_high, size=(L, p))
    beta1 = np.where(support, signs * mags, 0.0)
    growth = spec.response_growth ** np.arange(spec.q)
    beta = beta1[:, :, None] * growth[None, None, :]
    return GroundTruth(beta1, support, beta)


def draw_studies(spec: ScenarioSpec, truth: GroundTruth, rng, n: int | None = None) -> MultiStudyData:
    n = spec.n if n is None else n
    F = ar1_factor(spec.p, spec.rho)
    studies = []
    for l in range(spec.L):
        X = rng.standard_normal((n, spec.p)) @ F.T
        Y = X @ truth.beta[l] + spec.noise_sd * rng.standard_normal((n, spec.q))
        studies.append(StudyData(X, Y, f"study{l + 1}"))
    return MultiStudyData(studies)


def scenario_streams(seed: int):
    """Independent generators for (truth, training data, test data)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def gen_scenario(spec: ScenarioSpec):
    """Training data and ground truth for one scenario draw."""
    truth_rng, data_rng, _ = scenario_streams(spec.seed)
    truth = make_truth(spec, truth_rng)
    return draw_studies(spec, truth, data_rng), truth


def gen_test_data(spec: ScenarioSpec, truth: GroundTruth, n: int | None = None) -> MultiStudyData:
    """Fresh draw from the same truth, independent of the training draw."""
    return draw_studies(spec, truth, scenario_streams(spec.seed)[2], n)
