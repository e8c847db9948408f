"""Penalty primitives: MCP, group norms, composite-MCP weights, smoothed sign.

All functions accept scalars or numpy arrays and broadcast elementwise.

The derivative ``mcp_deriv`` follows the signed convention, so it is 0 at
``t = 0``.  Coordinate-descent updates linearize the penalty in the
*magnitude* of a coefficient, where the relevant quantity is the right
derivative at 0 (equal to ``lam``); that is what ``mcp_slope`` returns and
what the solvers use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class McpParams:
    """MCP level ``lam`` and concavity ``gamma``."""

    lam: float
    gamma: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")


def mcp(t, lam, gamma):
    """Minimax concave penalty ``lam * int_0^|t| (1 - x/(lam*gamma))_+ dx``.

    Equals ``lam|t| - t^2/(2 gamma)`` for ``|t| <= lam*gamma`` and the
    constant ``lam^2 gamma / 2`` beyond.  ``lam = 0`` disables the penalty.
    """
    t = np.abs(np.asarray(t, dtype=float))
    if lam == 0:
        return np.zeros_like(t)[()]
    knot = lam * gamma
    out = np.where(t <= knot, lam * t - t * t / (2.0 * gamma), 0.5 * lam * knot)
    return out[()]


def mcp_deriv(t, lam, gamma):
    """Signed derivative ``lam (1 - |t|/(lam gamma))_+ sgn(t)``; zero at 0."""
    t = np.asarray(t, dtype=float)
    if lam == 0:
        return np.zeros_like(t)[()]
    out = lam * np.maximum(1.0 - np.abs(t) / (lam * gamma), 0.0) * np.sign(t)
    return out[()]


def mcp_slope(t_abs, lam, gamma):
    """Right derivative of the MCP in ``|t|``: ``lam (1 - |t|/(lam gamma))_+``.

    Unlike :func:`mcp_deriv` this is ``lam`` at 0, which is the subgradient
    bound that makes a zero coefficient a fixed point of the thresholding
    updates.
    """
    t_abs = np.abs(np.asarray(t_abs, dtype=float))
    if lam == 0:
        return np.zeros_like(t_abs)[()]
    return (lam * np.maximum(1.0 - t_abs / (lam * gamma), 0.0))[()]


def group_norm(c_j):
    """Euclidean norm of one variable's coefficients across datasets."""
    return float(np.sqrt(np.sum(np.square(np.asarray(c_j, dtype=float)))))


def outer_gamma(n_datasets, a, mu1):
    """The linked outer-MCP concavity ``b = L a mu1^2 / 2``."""
    return 0.5 * n_datasets * a * mu1 * mu1


def composite_weight(c_j_prev, l, mu1, a, b, one_sided=False):
    """Linearized composite-MCP weight for coordinate ``(j, l)``.

    ``alpha_jl = rho'(sum_k rho(|c_k|; mu1, a); 1, b) * rho'(|c_l|; mu1, a)``
    evaluated at the previous iterate ``c_j_prev`` (length L).

    With ``one_sided=False`` both derivatives use the signed convention, so an
    all-zero group has weight 0.  ``one_sided=True`` uses right derivatives,
    which is the form the solver needs (weight ``mu1`` at an all-zero group).
    """
    c_j_prev = np.abs(np.asarray(c_j_prev, dtype=float))
    if mu1 == 0:
        return 0.0
    inner_sum = float(np.sum(mcp(c_j_prev, mu1, a)))
    deriv = mcp_slope if one_sided else mcp_deriv
    return float(deriv(inner_sum, 1.0, b) * deriv(c_j_prev[l], mu1, a))


def composite_weights(c, mu1, a, b):
    """Vectorized one-sided composite-MCP weights.

    Parameters
    ----------
    c : ndarray, shape (L, p)
        Reference iterate, one row per dataset.

    Returns
    -------
    ndarray, shape (L, p)
    """
    if mu1 == 0:
        return np.zeros_like(c)
    abs_c = np.abs(c)
    inner = mcp(abs_c, mu1, a)
    outer = mcp_slope(inner.sum(axis=0), 1.0, b)
    return outer[None, :] * mcp_slope(abs_c, mu1, a)


def smooth_sign(c, tau2):
    """Differentiable sign surrogate ``c / sqrt(c^2 + tau2)``."""
    if not tau2 > 0:
        raise ValueError(f"tau2 must be > 0, got {tau2}")
    c = np.asarray(c, dtype=float)
    return (c / np.sqrt(c * c + tau2))[()]


def soft_threshold(s, alpha):
    """``sgn(s) (|s| - alpha)_+``, the proximal map of ``alpha|x|``."""
    s = np.asarray(s, dtype=float)
    return (np.sign(s) * np.maximum(np.abs(s) - alpha, 0.0))[()]


def weighted_group_threshold(S, D, g, max_iter=60):
    """Minimize ``sum_l (D_l c_l^2 / 2 - S_l c_l) + g ||c||_2`` per column.

    Parameters
    ----------
    S : ndarray, shape (L, p)
    D : ndarray, broadcastable to (L, p), strictly positive curvatures
    g : ndarray, shape (p,), nonnegative group weights

    Returns
    -------
    ndarray, shape (L, p)
        The exact minimizer.  When ``D`` is constant within a column this is
        ``(||S|| - g)_+ S / (D ||S||)``; otherwise ``c_l = S_l / (D_l + u)``
        with ``u = g/||c||`` found by safeguarded Newton iteration.
    """
    S = np.asarray(S, dtype=float)
    D = np.broadcast_to(np.asarray(D, dtype=float), S.shape)
    g = np.asarray(g, dtype=float)
    norm_s = np.sqrt(np.sum(S * S, axis=0))
    active = norm_s > g
    out = np.zeros_like(S)
    if not active.any():
        return out

    d_min = D.min(axis=0)
    d_max = D.max(axis=0)
    uniform = active & (d_max == d_min)
    if uniform.any():
        shrink = (norm_s[uniform] - g[uniform]) / (d_min[uniform] * norm_s[uniform])
        out[:, uniform] = S[:, uniform] * shrink

    hard = active & ~uniform
    if hard.any():
        Sh, Dh, gh = S[:, hard], D[:, hard], g[hard]
        excess = norm_s[hard] - gh
        lo = gh * d_min[hard] / excess
        hi = gh * d_max[hard] / excess
        u = 0.5 * (lo + hi)
        g2 = gh * gh
        for _ in range(max_iter):
            ratio = Sh / (Dh + u)
            h = np.sum((ratio * u) ** 2, axis=0) - g2
            lo = np.where(h < 0, u, lo)
            hi = np.where(h > 0, u, hi)
            dh = np.sum(2.0 * ratio * ratio * u * Dh / (Dh + u), axis=0)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = u - h / dh
            bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
            u_next = np.where(bad, 0.5 * (lo + hi), step)
            done = np.abs(u_next - u) <= 1e-15 * np.maximum(u, 1.0)
            u = u_next
            if done.all():
                break
        out[:, hard] = Sh / (Dh + u)
    return out
