"""Integrative sparse PLS: joint first directions for L studies.

The fit alternates a per-study w-step with a joint c-step.  Under the
infinite-ridge reduction the c-step objective for study ``l`` is

    c'c/2 - s'c + pen1 + pen2,        s = Z Z' w,

which is separable across variables ``j``; each variable's group
``c_j = (c_j^(1), ..., c_j^(L))`` is solved independently.  All sweeps below
are therefore vectorized over ``j``.  Within a sweep every quantity is
evaluated at the sweep's reference point (the previous iterate), so one
sweep is the exact minimizer of a frozen surrogate:

* pen1 is linearized at the reference (group MCP slope, or composite-MCP
  weights ``alpha_jl``);
* the magnitude contrast holds the other studies at the reference;
* the sign contrast additionally freezes the denominator of the smoothed
  sign, giving curvature ``1 + mu2*(L-1)/(c_ref^2 + tau2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data import (
    Contrast,
    CrossProduct,
    DataError,
    DirectionState,
    FitResult,
    Model,
    MultiStudyData,
    PenaltySpec,
    build_cross_products,
)
from .penalties import (
    composite_weights,
    mcp,
    mcp_slope,
    smooth_sign,
    soft_threshold,
    weighted_group_threshold,
)
from .pls import (
    DegenerateComponentError,
    LatentModel,
    NoSignalError,
    first_direction,
    latent_regress,
    zero_model,
)
from .spls import OrthogonalSurrogateError, spls_w_step


class SolverError(RuntimeError):
    """Numerical failure inside the solver (non-finite iterates)."""


@dataclass(frozen=True)
class IsplsConfig:
    penalty: PenaltySpec = field(default_factory=PenaltySpec)
    outer_max_iter: int = 100
    outer_tol: float = 1e-4
    inner_max_iter: int = 50
    inner_tol: float = 1e-6
    sweep_max: int = 100

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.inner_tol > 0):
            raise ValueError("tolerances must be positive")
        if min(self.outer_max_iter, self.inner_max_iter, self.sweep_max) < 1:
            raise ValueError("iteration caps must be >= 1")

    @property
    def sweep_cap(self) -> int:
        """Sweeps per c-step: the homogeneity-magnitude update is a plain CD
        sweep, the others are inner fixed-point iterations."""
        p = self.penalty
        if p.model is Model.HOMOGENEITY and p.contrast is Contrast.MAGNITUDE:
            return self.sweep_max
        return self.inner_max_iter


@dataclass(frozen=True)
class ContrastWeights:
    """Per-study contrast strengths ``mu2* = mu2 n_l^2``."""

    mu2_star: tuple

    @classmethod
    def from_sizes(cls, mu2, sizes) -> "ContrastWeights":
        return cls(tuple(float(mu2) * float(n) ** 2 for n in sizes))

    def column(self) -> np.ndarray:
        return np.asarray(self.mu2_star, dtype=float)[:, None]


# ---------------------------------------------------------------------------
# sweeps on (L, p) arrays


def _contrast_terms(c, spec: PenaltySpec, mu2s, mask):
    """Return the contrast-adjusted linear term offset and curvature."""
    others = max(int(mask.sum()) - 1, 0)
    if spec.contrast is Contrast.MAGNITUDE:
        total = c.sum(axis=0)
        shift = mu2s * (total[None, :] - c)
        curv = np.broadcast_to(1.0 + mu2s * others, c.shape)
        return shift, curv
    r2 = c * c + spec.tau2
    root = np.sqrt(r2)
    sm = c / root
    shift = mu2s / root * (sm.sum(axis=0)[None, :] - sm)
    if spec.printed_sign_denominator:
        curv = (1.0 + mu2s * others) / r2
    else:
        curv = 1.0 + mu2s * others / r2
    return shift, curv


def sweep(s, c_ref, spec: PenaltySpec, mu2s, mask=None):
    """One update of every variable group from the reference ``c_ref``.

    Parameters
    ----------
    s : ndarray (L, p)
        Fit parts ``Z Z' w`` per study.
    c_ref : ndarray (L, p)
    spec : PenaltySpec with ``b`` resolved for the heterogeneity model.
    mu2s : ndarray (L, 1)
        Contrast weights ``mu2 n_l^2``.
    mask : bool ndarray (L, 1), optional
        Studies taking part; excluded rows stay zero and drop out of the
        contrast sums.
    """
    if mask is None:
        mask = np.ones((s.shape[0], 1), dtype=bool)
    c_ref = np.where(mask, c_ref, 0.0)
    shift, curv = _contrast_terms(c_ref, spec, mu2s, mask)
    S = np.where(mask, s + shift, 0.0)
    curv = np.where(mask, curv, 1.0)

    if spec.model is Model.HOMOGENEITY:
        g = mcp_slope(np.sqrt(np.sum(c_ref * c_ref, axis=0)), spec.mu1, spec.a)
        if spec.contrast is Contrast.SIGN and spec.printed_sign_denominator:
            norm_s = np.sqrt(np.sum(S * S, axis=0))
            with np.errstate(divide="ignore", invalid="ignore"):
                factor = np.where(norm_s > g, (norm_s - g) / norm_s, 0.0)
            out = factor[None, :] * S / curv
        else:
            out = weighted_group_threshold(S, curv, g)
    else:
        alpha = composite_weights(c_ref, spec.mu1, spec.a, spec.outer_b(int(mask.sum())))
        out = soft_threshold(S, alpha) / curv
    return np.where(mask, out, 0.0)


def _group_slope(c_ref, spec):
    return mcp_slope(np.sqrt(np.sum(c_ref * c_ref, axis=0)), spec.mu1, spec.a)


def surrogate_value(s, c, c_ref, spec: PenaltySpec, mu2s, mask=None) -> float:
    """Frozen surrogate minimized exactly by :func:`sweep` from ``c_ref``."""
    if mask is None:
        mask = np.ones((s.shape[0], 1), dtype=bool)
    c = np.where(mask, c, 0.0)
    c_ref = np.where(mask, c_ref, 0.0)
    val = float(np.sum(0.5 * c * c - s * c))
    if spec.model is Model.HOMOGENEITY:
        val += float(np.sum(_group_slope(c_ref, spec) * np.sqrt(np.sum(c * c, axis=0))))
    else:
        alpha = composite_weights(c_ref, spec.mu1, spec.a, spec.outer_b(int(mask.sum())))
        val += float(np.sum(alpha * np.abs(c)))
    L = c.shape[0]
    for l in range(L):
        if not mask[l, 0]:
            continue
        for k in range(L):
            if k == l or not mask[k, 0]:
                continue
            if spec.contrast is Contrast.MAGNITUDE:
                diff = c[l] - c_ref[k]
            else:
                diff = c[l] / np.sqrt(c_ref[l] ** 2 + spec.tau2) - smooth_sign(c_ref[k], spec.tau2)
            val += 0.5 * float(mu2s[l, 0]) * float(np.sum(diff * diff))
    return val


def selection_penalty(c, spec: PenaltySpec) -> float:
    """pen1 at ``c`` (L, p): group MCP or composite MCP."""
    if spec.model is Model.HOMOGENEITY:
        return float(np.sum(mcp(np.sqrt(np.sum(c * c, axis=0)), spec.mu1, spec.a)))
    if spec.mu1 == 0:
        return 0.0
    inner = mcp(np.abs(c), spec.mu1, spec.a).sum(axis=0)
    return float(np.sum(mcp(inner, 1.0, spec.outer_b(c.shape[0]))))


def _pairwise_contrast(c, spec, weights_col):
    """``sum_l (weight_l/2) sum_{l' != l} (d_l - d_l')^2`` over all variables."""
    d = c if spec.contrast is Contrast.MAGNITUDE else smooth_sign(c, spec.tau2)
    L = c.shape[0]
    total = 0.0
    for l in range(L):
        for k in range(L):
            if k != l:
                total += 0.5 * float(weights_col[l]) * float(np.sum((d[l] - d[k]) ** 2))
    return total


def _pair_contrast(c, spec, weights_col):
    """``sum_{l<l'} ((w_l + w_l')/4) (d_l - d_l')^2`` over all variables.

    Each unordered pair is counted once, with the mean weight.  For equal
    weights this is the potential whose minimizer is the magnitude-contrast
    c-step fixed point.
    """
    d = c if spec.contrast is Contrast.MAGNITUDE else smooth_sign(c, spec.tau2)
    L = c.shape[0]
    total = 0.0
    for l in range(L):
        for k in range(l + 1, L):
            weight = 0.25 * (float(weights_col[l]) + float(weights_col[k]))
            total += weight * float(np.sum((d[l] - d[k]) ** 2))
    return total


def reduced_objective(s, c, spec: PenaltySpec, mu2s) -> float:
    """Infinite-ridge objective in ``c`` used for the objective trace:
    ``sum_l (c'c/2 - s'c) + pen1 + pen2`` with ``mu2*`` and pairs counted once."""
    val = float(np.sum(0.5 * c * c - s * c)) + selection_penalty(c, spec)
    return val + _pair_contrast(c, spec, np.asarray(mu2s).ravel())


def objective_value(Z: Sequence[CrossProduct], w, c, spec: PenaltySpec, weights=None) -> float:
    """Penalized objective without the ridge term.

    ``sum_l f(w_l, c_l) / (2 n_l^2) + pen1(c) + pen2(c)`` where
    ``f = -kappa w'ZZ'w + (1-kappa)(c-w)'ZZ'(c-w)`` and pen2 uses ``mu2``
    (the sign form with the smoothed sign).  ``weights`` is accepted for
    signature symmetry with the c-steps and is not needed here.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    spec = spec.resolved(len(Z))
    kappa = spec.kappa
    total = 0.0
    for l, cp in enumerate(Z):
        zw = cp.Z.T @ w[l]
        zd = cp.Z.T @ (c[l] - w[l])
        f = -kappa * float(zw @ zw) + (1.0 - kappa) * float(zd @ zd)
        total += f / (2.0 * cp.n ** 2)
    total += selection_penalty(c, spec)
    total += _pairwise_contrast(c, spec, np.full(len(Z), spec.mu2))
    return total


def _fit_parts(Z: Sequence[CrossProduct], w):
    return np.vstack([cp.Z @ (cp.Z.T @ w_l) for cp, w_l in zip(Z, w)])


def run_c_step(s, c_prev, spec: PenaltySpec, mu2s, mask=None, max_sweeps=100, tol=1e-6):
    """Iterate :func:`sweep` until the max change is below ``tol`` (relative
    to ``max(1, max|c|)``) or ``max_sweeps`` is reached."""
    c = np.asarray(c_prev, dtype=float)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        c_new = sweep(s, c, spec, mu2s, mask)
        if not np.isfinite(c_new).all():
            raise SolverError("non-finite iterate in c-step")
        change = float(np.max(np.abs(c_new - c))) if c.size else 0.0
        scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        c = c_new
        if change <= tol * scale:
            break
    return c, sweeps


def _c_step(kind, Z, w, c_prev, spec, weights, cfg):
    model, contrast = kind
    if spec.model is not model or spec.contrast is not contrast:
        raise ValueError(f"penalty spec {spec.label} does not match this c-step")
    spec = spec.resolved(len(Z))
    cfg = cfg or IsplsConfig(penalty=spec)
    s = _fit_parts(Z, np.atleast_2d(w))
    cap = cfg.sweep_max if kind == (Model.HOMOGENEITY, Contrast.MAGNITUDE) else cfg.inner_max_iter
    c, _ = run_c_step(s, np.atleast_2d(np.asarray(c_prev, float)), spec, weights.column(),
                      max_sweeps=cap, tol=cfg.inner_tol)
    return list(c)


def c_step_homo_mag(Z, w, c_prev, spec, weights, cfg=None):
    """Group-MCP selection with magnitude contrast."""
    return _c_step((Model.HOMOGENEITY, Contrast.MAGNITUDE), Z, w, c_prev, spec, weights, cfg)


def c_step_homo_sign(Z, w, c_prev, spec, weights, cfg=None):
    """Group-MCP selection with smoothed-sign contrast."""
    return _c_step((Model.HOMOGENEITY, Contrast.SIGN), Z, w, c_prev, spec, weights, cfg)


def c_step_hetero_mag(Z, w, c_prev, spec, weights, cfg=None):
    """Composite-MCP selection with magnitude contrast."""
    return _c_step((Model.HETEROGENEITY, Contrast.MAGNITUDE), Z, w, c_prev, spec, weights, cfg)


def c_step_hetero_sign(Z, w, c_prev, spec, weights, cfg=None):
    """Composite-MCP selection with smoothed-sign contrast."""
    return _c_step((Model.HETEROGENEITY, Contrast.SIGN), Z, w, c_prev, spec, weights, cfg)


# ---------------------------------------------------------------------------
# outer loop


@dataclass
class DirectionFit:
    """Raw solver output on cross products (no regression step)."""

    directions: np.ndarray
    c: np.ndarray
    w: np.ndarray
    objective_trace: list
    converged: bool
    iterations: int
    active: np.ndarray


def solve_directions(
    Z: Sequence[CrossProduct],
    cfg: IsplsConfig,
    callback: Callable[[DirectionState], None] | None = None,
) -> DirectionFit:
    """Run the alternating algorithm on precomputed cross products.

    Works for any number of studies (including one), which the public
    :func:`fit_ispls` restricts to two or more.
    """
    L = len(Z)
    p = Z[0].Z.shape[0]
    spec = cfg.penalty.resolved(L)
    mu2s = ContrastWeights.from_sizes(spec.mu2, [cp.n for cp in Z]).column()

    w = np.zeros((L, p))
    mask = np.ones((L, 1), dtype=bool)
    svds = [None] * L
    for l, cp in enumerate(Z):
        try:
            w[l] = first_direction(cp.Z)
        except NoSignalError:
            mask[l, 0] = False
            continue
        if spec.kappa < 0.5:
            U, sigma, _ = np.linalg.svd(cp.Z, full_matrices=False)
            svds[l] = (U, sigma)

    c = w.copy()
    trace = []
    converged = False
    t = 0
    for t in range(1, cfg.outer_max_iter + 1):
        for l in range(L):
            if mask[l, 0] and np.any(c[l]):
                try:
                    w[l] = spls_w_step(Z[l].Z, c[l], spec.kappa, svds[l])
                except OrthogonalSurrogateError:
                    pass
        s = np.where(mask, _fit_parts(Z, w), 0.0)
        c_new, _ = run_c_step(s, c, spec, mu2s, mask, cfg.sweep_cap, cfg.inner_tol)
        trace.append(reduced_objective(s, c_new, spec, mu2s))
        delta = float(np.sum(np.linalg.norm(c_new - c, axis=1)))
        scale = max(1.0, float(np.sum(np.linalg.norm(c, axis=1))))
        c = c_new
        if callback is not None:
            callback(DirectionState(w.copy(), c.copy(), t))
        if delta <= cfg.outer_tol * scale:
            converged = True
            break

    norms = np.linalg.norm(c, axis=1, keepdims=True)
    directions = np.divide(c, norms, out=np.zeros_like(c), where=norms > 0)
    return DirectionFit(directions, c, w, trace, converged, t, mask.ravel())


def _refit_direction(study, selected):
    """PLS direction restricted to the selected variables, embedded in R^p."""
    out = np.zeros(study.p)
    if not selected.any():
        return out
    Zs = study.X[:, selected].T @ study.Y
    out[selected] = first_direction(Zs)
    return out


PREDICTION_MODES = ("rank1", "refit")


def study_models(data: MultiStudyData, directions, prediction: str = "rank1") -> list[LatentModel]:
    """Per-study latent regressions on the fitted directions.

    A zero direction (nothing selected) or a degenerate component gives the
    zero model.
    """
    models = []
    for l, study in enumerate(data):
        direction = np.asarray(directions[l], dtype=float)
        if prediction == "refit":
            direction = _refit_direction(study, direction != 0)
        model = None
        if direction.any():
            try:
                model = latent_regress(study.X, study.Y, direction)
            except DegenerateComponentError:
                model = None
        models.append(model or zero_model(data.p, data.q))
    return models


def fit_ispls(
    data: MultiStudyData,
    cfg: IsplsConfig,
    callback: Callable[[DirectionState], None] | None = None,
    prediction: str = "rank1",
) -> FitResult:
    """Fit integrative sparse PLS.

    Non-convergence within ``outer_max_iter`` is reported through
    ``FitResult.converged`` rather than raised.

    ``prediction="refit"`` re-estimates each study's direction by plain PLS
    on its selected variables before the latent regression; the default uses
    the penalized direction directly.
    """
    if data.L < 2:
        raise DataError("integrative fitting needs at least two studies")
    if prediction not in PREDICTION_MODES:
        raise ValueError(f"unknown prediction mode {prediction!r}")
    fit = solve_directions(build_cross_products(data), cfg, callback)
    models = study_models(data, fit.directions, prediction)
    betas = [m.beta for m in models]
    loads = [m.q_load for m in models]
    return FitResult(
        directions=list(fit.directions),
        selected=fit.directions != 0,
        beta=betas,
        objective_trace=fit.objective_trace,
        converged=fit.converged,
        iterations=fit.iterations,
        fully_penalized=not fit.directions.any(),
        q_loadings=loads,
    )
