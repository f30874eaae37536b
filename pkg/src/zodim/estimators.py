"""Gaussian-direction gradient estimators and Monte Carlo moment diagnostics.

The core primitive is the two-point estimator ((f(x + rho xi) - f(x)) / rho) xi
with xi ~ N(0, I).  The diagnostics verify the moment identities the solver
analyses rest on: unbiasedness, E||<g,xi> xi||^2 = (d+2)||g||^2, the
Mahalanobis identity E[xi xi^T M xi xi^T] = tr(M) I + 2M, and the error bound
for the noisy estimator against the idealized one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIAGNOSTIC_DIM_CAP = 32


class EstimatorError(ValueError):
    pass


class DirectionSampler:
    """Counter-based generator of i.i.d. N(0, I_d) directions.

    The (seed, stream_id, index) triple fully determines a direction, so
    concurrent scheduling cannot change any run's sample path.  Directions are
    produced in fixed-size blocks, each generated from its own counter offset.
    """

    BLOCK = 512

    def __init__(self, d: int, seed: int, stream_id: int = 0):
        self.d = int(d)
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._block_index = -1
        self._block = None
        self._next = 0

    def _load_block(self, bi: int) -> None:
        bitgen = np.random.Philox(
            counter=np.array([0, 0, bi, 0], dtype=np.uint64),
            key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        self._block = np.random.Generator(bitgen).standard_normal((self.BLOCK, self.d))
        self._block_index = bi

    def draw(self, index: int) -> np.ndarray:
        bi, off = divmod(int(index), self.BLOCK)
        if bi != self._block_index:
            self._load_block(bi)
        return self._block[off]

    def __iter__(self):
        return self

    def __next__(self) -> np.ndarray:
        xi = self.draw(self._next)
        self._next += 1
        return xi

    def draw_matrix(self, start: int, n: int) -> np.ndarray:
        """n consecutive directions starting at `start`, as an (n, d) array."""
        out = np.empty((n, self.d))
        for i in range(n):
            out[i] = self.draw(start + i)
        return out


@dataclass
class GradientEstimate:
    vector: np.ndarray
    direction: np.ndarray
    queries_used: int


def tilde_grad(grad: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Idealized rank-one estimator <grad, xi> xi (diagnostic-only, 0 queries)."""
    grad = np.asarray(grad, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if grad.shape != xi.shape:
        raise EstimatorError("dimension mismatch")
    return float(np.dot(grad, xi)) * xi


def hat_grad_rho(o, x: np.ndarray, rho: float, xi: np.ndarray) -> GradientEstimate:
    """Two-point estimator ((f~(x + rho xi) - f~(x)) / rho) xi; exactly 2 queries."""
    if rho <= 0:
        raise EstimatorError("rho must be positive")
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    vals = o.query_many(np.stack([x, x + rho * xi]))
    if not np.all(np.isfinite(vals)):
        raise EstimatorError("non-finite oracle values")
    scale = (vals[1] - vals[0]) / rho
    return GradientEstimate(vector=scale * xi, direction=xi, queries_used=2)


def _sample_directions(d: int, n: int, seed: int) -> np.ndarray:
    sampler = DirectionSampler(d, seed)
    blocks = []
    got = 0
    bi = 0
    while got < n:
        sampler._load_block(bi)
        blocks.append(sampler._block.copy())
        got += sampler.BLOCK
        bi += 1
    return np.vstack(blocks)[:n]


def moment_diagnostic(grad: np.ndarray, M: np.ndarray, n_samples: int, seed: int = 0) -> dict:
    """Monte Carlo check of the first and second moments of the rank-one estimator.

    Returns the deviation of the sample mean from grad and the ratio of the
    empirical Mahalanobis second moment to its closed form
    grad^T (tr(M) I + 2M) grad, with standard errors.
    """
    grad = np.asarray(grad, dtype=float)
    M = np.asarray(M, dtype=float)
    d = grad.size
    if d > DIAGNOSTIC_DIM_CAP:
        raise EstimatorError(f"diagnostics capped at d={DIAGNOSTIC_DIM_CAP}")
    if n_samples < 10_000:
        raise EstimatorError("need at least 1e4 samples")
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    if eigs.min() < -1e-10:
        raise EstimatorError("M must be positive semi-definite")
    X = _sample_directions(d, n_samples, seed)
    z = X @ grad
    mean_vec = (z[:, None] * X).mean(axis=0)
    quad = z * z * np.einsum("ij,jk,ik->i", X, M, X)
    denom = float(grad @ (np.trace(M) * np.eye(d) + 2.0 * M) @ grad)
    emp = float(quad.mean())
    stderr = float(quad.std(ddof=1) / np.sqrt(n_samples))
    return {
        "mean_error": float(np.linalg.norm(mean_vec - grad)),
        "mean_error_expected_scale": float(
            np.sqrt(max((d + 2) * np.dot(grad, grad) - np.dot(grad, grad), 0.0)
                    / n_samples)),
        "m_quadratic_ratio": emp / denom if denom > 0 else (1.0 if emp == 0 else np.inf),
        "m_quadratic_stderr": stderr / denom if denom > 0 else 0.0,
        "empirical_quadratic": emp,
        "denominator": denom,
        "lemma3_bound": float(3.0 * np.trace(M) * np.dot(grad, grad)),
    }


def error_bound_check(o_noisy, problem, x: np.ndarray, rho: float, B: np.ndarray,
                      n_samples: int, seed: int = 0) -> dict:
    """Empirical check of E||hat - tilde||_B^2 <= 8 delta^2/rho^2 tr(B)
    + (15 rho^2 / 2) tr(A)^2 tr(B) on a quadratic, same xi for both estimators.
    """
    x = np.asarray(x, dtype=float)
    B = np.asarray(B, dtype=float)
    d = x.size
    if d > DIAGNOSTIC_DIM_CAP:
        raise EstimatorError(f"diagnostics capped at d={DIAGNOSTIC_DIM_CAP}")
    g = problem.gradient(x)
    tr_A = float(problem.hessian_spectrum().sum())
    X = _sample_directions(d, n_samples, seed)
    fplus = o_noisy.query_many(x + rho * X)
    f0 = o_noisy.query_many(np.tile(x, (n_samples, 1)))
    scale_hat = (fplus - f0) / rho
    scale_tilde = X @ g
    D = (scale_hat - scale_tilde)[:, None] * X
    vals = np.einsum("ij,jk,ik->i", D, B, D)
    delta = o_noisy.delta
    bound = (8.0 * delta ** 2 / rho ** 2) * np.trace(B) \
        + (15.0 * rho ** 2 / 2.0) * tr_A ** 2 * np.trace(B)
    emp = float(vals.mean())
    return {
        "empirical": emp,
        "bound": float(bound),
        "stderr": float(vals.std(ddof=1) / np.sqrt(n_samples)),
        "ok": emp <= bound,
    }
