"""Single-dataset sparse PLS with the infinite-ridge c-step.

The c-step minimizes ``c'c/2 - w'ZZ'c + lambda1 |c|_1``, i.e. coordinatewise
soft thresholding of ``ZZ'w``; the w-step solves the constrained least
squares problem in ``w`` for fixed ``c``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FitResult
from .penalties import soft_threshold
from .pls import DegenerateComponentError, first_direction, latent_regress, zero_model


class OrthogonalSurrogateError(ValueError):
    pass


@dataclass(frozen=True)
class SplsConfig:
    """Sparse PLS settings.

    ``lambda1`` is on the scale of ``|(ZZ'w)_j|``.  If ``eta`` is given it
    takes precedence and sets ``lambda1 = eta * max_j |(ZZ'w0)_j|`` at the
    PLS initialization ``w0``.
    """

    kappa: float = 0.5
    lambda1: float = 0.0
    eta: float | None = None
    max_iter: int = 200
    tol: float = 1e-4

    def __post_init__(self):
        if not 0 < self.kappa <= 0.5:
            raise ValueError("kappa must lie in (0, 0.5]")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be >= 0")
        if self.eta is not None and not 0 <= self.eta < 1:
            raise ValueError("eta must lie in [0, 1)")
        if self.max_iter < 1 or not self.tol > 0:
            raise ValueError("max_iter must be >= 1 and tol > 0")


def _zzt(Z, v):
    return Z @ (Z.T @ v)


def multiplier_equation(sigma, proj, lam):
    """Right-hand side ``sum_i sigma_i^4 <u_i,c>^2 / (sigma_i^2 + lam)^2``."""
    s2 = sigma * sigma
    return float(np.sum((s2 * proj / (s2 + lam)) ** 2))


def solve_multiplier(sigma, proj, kappa):
    """Bisection for the Lagrange multiplier of the w-step.

    Returns ``None`` when even ``lam = 0`` falls below ``1/kappa'^2`` (no
    root), in which case the caller uses the normalized limiting direction.
    """
    kp = (1.0 - kappa) / (1.0 - 2.0 * kappa)
    target = 1.0 / (kp * kp)
    if multiplier_equation(sigma, proj, 0.0) < target:
        return None
    lo, hi = 0.0, max(float(sigma[0] ** 2), 1e-300)
    while multiplier_equation(sigma, proj, hi) >= target:
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-10 * hi:
        mid = 0.5 * (lo + hi)
        if multiplier_equation(sigma, proj, mid) >= target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def spls_w_step(Z, c, kappa=0.5, svd=None):
    """Update the unit direction ``w`` for a fixed surrogate ``c``.

    For ``kappa = 0.5`` this is ``ZZ'c / ||ZZ'c||``.  For smaller ``kappa``,
    ``w = kappa' (ZZ' + lam I)^{-1} ZZ'c`` with ``kappa' = (1-kappa)/(1-2kappa)``
    and the multiplier ``lam`` chosen so that ``||w|| = 1``.

    ``svd`` may carry a precomputed thin SVD ``(U, sigma)`` of ``Z``.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    c = np.asarray(c, dtype=float)
    mc = _zzt(Z, c)
    norm_mc = np.linalg.norm(mc)
    if norm_mc <= 1e-300 or norm_mc <= 1e-14 * np.linalg.norm(Z) ** 2 * np.linalg.norm(c):
        raise OrthogonalSurrogateError("orthogonal surrogate: ZZ'c = 0")
    if kappa >= 0.5:
        return mc / norm_mc
    if svd is None:
        U, sigma, _ = np.linalg.svd(Z, full_matrices=False)
    else:
        U, sigma = svd
    keep = sigma > sigma[0] * 1e-12
    U, sigma = U[:, keep], sigma[keep]
    proj = U.T @ c
    lam = solve_multiplier(sigma, proj, kappa)
    if lam is None:
        return mc / norm_mc
    kp = (1.0 - kappa) / (1.0 - 2.0 * kappa)
    s2 = sigma * sigma
    w = kp * (U @ (s2 / (s2 + lam) * proj))
    return w / np.linalg.norm(w)


def w_step_multiplier(Z, c, kappa):
    """The multiplier used by :func:`spls_w_step` (``None`` in the limiting case)."""
    if kappa >= 0.5:
        return None
    U, sigma, _ = np.linalg.svd(np.asarray(Z, dtype=float), full_matrices=False)
    keep = sigma > sigma[0] * 1e-12
    return solve_multiplier(sigma[keep], U[:, keep].T @ c, kappa)


def spls_objective(Z, w, c, lambda1):
    """Infinite-ridge surrogate ``c'c/2 - w'ZZ'c + lambda1 |c|_1``."""
    return float(0.5 * c @ c - w @ _zzt(Z, c) + lambda1 * np.abs(c).sum())


def threshold_scale(Z) -> float:
    """``max_j |(ZZ'w0)_j|`` at the PLS direction ``w0``; thresholds at or
    above this value zero every coordinate on the first c-step."""
    Z = np.asarray(Z, dtype=float)
    return float(np.abs(_zzt(Z, first_direction(Z))).max())


def fit_spls(X, Y, cfg: SplsConfig = SplsConfig()) -> FitResult:
    """Fit single-dataset sparse PLS by alternating w- and c-steps."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    p, q = X.shape[1], Y.shape[1]
    Z = X.T @ Y
    w = first_direction(Z)
    lambda1 = cfg.lambda1
    if cfg.eta is not None:
        lambda1 = cfg.eta * float(np.abs(_zzt(Z, w)).max())
    svd = None
    if cfg.kappa < 0.5:
        U, sigma, _ = np.linalg.svd(Z, full_matrices=False)
        svd = (U, sigma)

    c = w.copy()
    trace = []
    converged = False
    fully_penalized = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        w = spls_w_step(Z, c, cfg.kappa, svd)
        c_new = soft_threshold(_zzt(Z, w), lambda1)
        trace.append(spls_objective(Z, w, c_new, lambda1))
        if not np.any(c_new):
            c = c_new
            converged = fully_penalized = True
            break
        delta = np.linalg.norm(c_new - c)
        scale = max(1.0, np.linalg.norm(c))
        c = c_new
        if delta <= cfg.tol * scale:
            converged = True
            break

    if fully_penalized:
        direction = np.zeros(p)
        model = zero_model(p, q)
    else:
        direction = c / np.linalg.norm(c)
        try:
            model = latent_regress(X, Y, direction)
        except DegenerateComponentError:
            model = zero_model(p, q)
    return FitResult(
        directions=[direction],
        selected=(direction != 0)[None, :],
        beta=[model.beta],
        objective_trace=trace,
        converged=converged,
        iterations=it,
        fully_penalized=fully_penalized,
        q_loadings=[model.q_load],
    )
