"""Desk-scale exact-kernel reference computations.

Everything here runs in 64-bit arithmetic and serves as the oracle
against which the approximate feature pipeline is validated: exact RBF
Gram matrices, the regularized interpolation solve
``(n gamma I + K) t = y``, its mutual-position generalization through the
V-matrix ``(n gamma I + V K) t = V y``, and the kernel-approximation
error report used by the ``kernel-check`` command.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import fastfood
from .fastfood import FeatureMapSpec, RBF


def rbf_kernel(x: np.ndarray, y: np.ndarray, sigma: float) -> float:
    """exp(-|x - y|^2 / (2 sigma^2)), exact."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    d = x - y
    return float(np.exp(-(d @ d) / (2.0 * sigma * sigma)))


def rbf_gram(x: np.ndarray, sigma: float) -> np.ndarray:
    """Exact symmetric Gram matrix with unit diagonal.

    The strict upper triangle is computed once and mirrored, so
    K[c, r] == K[r, c] holds bit-exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    k = np.exp(-d2 / (2.0 * sigma * sigma))
    k = np.triu(k, 1)
    k = k + k.T
    np.fill_diagonal(k, 1.0)
    return k


def ridge_solve(k: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    """Coefficients t of the strictly positive system (n gamma I + K) t = y."""
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    k = np.asarray(k, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = k.shape[0]
    a = k + n * gamma * np.eye(n)
    try:
        c, low = cho_factor(a, lower=True)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"regularized Gram is not positive definite: {exc}") from exc
    return cho_solve((c, low), y)


def ridge_predict(x_train: np.ndarray, t: np.ndarray, x_test: np.ndarray,
                  sigma: float) -> np.ndarray:
    """f(x) = sum_z t_z k(x_z, x) evaluated at each test point."""
    x_train = np.asarray(x_train, dtype=np.float64)
    x_test = np.asarray(x_test, dtype=np.float64)
    sq_tr = (x_train * x_train).sum(axis=1)
    sq_te = (x_test * x_test).sum(axis=1)
    d2 = sq_te[:, None] + sq_tr[None, :] - 2.0 * (x_test @ x_train.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-d2 / (2.0 * sigma * sigma)) @ np.asarray(t, dtype=np.float64)


def v_matrix(x: np.ndarray, bounds: np.ndarray | None = None) -> np.ndarray:
    """Mutual-position matrix V(c, z) = sum_k (t_k - max(x_c^k, x_z^k)).

    ``bounds`` holds the per-coordinate caps t_k and defaults to the
    per-coordinate data maxima, the tightest valid choice.  Every
    coordinate must lie in [0, t_k].
    """
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if bounds is None:
        bounds = x.max(axis=0)
    else:
        bounds = np.asarray(bounds, dtype=np.float64)
        if bounds.shape != (d,):
            raise ValueError(f"bounds must have shape ({d},)")
    if (x < 0.0).any():
        c, k = np.argwhere(x < 0.0)[0]
        raise ValueError(f"sample {c} coordinate {k} is negative")
    over = x > bounds[None, :]
    if over.any():
        c, k = np.argwhere(over)[0]
        raise ValueError(
            f"sample {c} coordinate {k} exceeds bound {bounds[k]}")
    v = np.zeros((n, n), dtype=np.float64)
    for k in range(d):
        col = x[:, k]
        v += bounds[k] - np.maximum(col[:, None], col[None, :])
    return v


def v_ridge_solve(k: np.ndarray, v: np.ndarray, y: np.ndarray,
                  gamma: float) -> np.ndarray:
    """Coefficients t of the V-regularized system (n gamma I + V K) t = V y."""
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = k.shape[0]
    return np.linalg.solve(n * gamma * np.eye(n) + v @ k, v @ y)


@dataclass
class KernelCheckStats:
    """Error report of feature inner products against the exact kernel."""
    dims: int
    D: int                 # stacked dimension padded_dim * expansions
    pairs: int
    mean_err: float
    max_err: float
    ref_scale: float       # Monte-Carlo scale 1/sqrt(D)

    def to_dict(self) -> dict:
        return asdict(self)


def kernel_check(spec: FeatureMapSpec,
                 pairs: list[tuple[np.ndarray, np.ndarray]],
                 blocks: list | None = None) -> KernelCheckStats:
    """Compare <phi(x), phi(x')> with the exact RBF kernel over pairs."""
    if not isinstance(spec.kernel, RBF):
        raise ValueError("kernel_check requires an RBF spec")
    if not pairs:
        raise ValueError("need at least one pair")
    if blocks is None:
        blocks = fastfood.build_blocks(spec)
    xs = np.stack([p[0] for p in pairs])
    ys = np.stack([p[1] for p in pairs])
    fx = fastfood.feature_map_batch(spec, blocks, xs).astype(np.float64)
    fy = fastfood.feature_map_batch(spec, blocks, ys).astype(np.float64)
    approx = (fx * fy).sum(axis=1)
    sigma = spec.kernel.sigma
    exact = np.array([rbf_kernel(x, y, sigma) for x, y in pairs])
    err = np.abs(approx - exact)
    d = spec.padded_dim * spec.expansions
    return KernelCheckStats(
        dims=spec.input_dim,
        D=d,
        pairs=len(pairs),
        mean_err=float(err.mean()),
        max_err=float(err.max()),
        ref_scale=float(1.0 / np.sqrt(d)),
    )
