"""Zeroth-order oracles: the only interface through which solvers see objectives.

An OracleHandle returns function values with query accounting and optional
bounded adversarial noise (|f~(x) - f(x)| <= delta).  On top of it sit the two
derived oracles: a four-query evaluator of the local quadratic Taylor model
(`asoe`) and a coordinate-wise forward-difference gradient approximation
(`approximate_gradient`).  Both derived oracles require a noise-free base
handle; composing the two noise layers has no accuracy guarantee and is
rejected at construction.
"""
from __future__ import annotations

import hashlib
import math
from typing import Callable, Optional

import numpy as np


class OracleError(ValueError):
    pass


def _hash_signal(x: np.ndarray) -> float:
    """Deterministic adversarial signal s(x) in [-1, 1], fixed per query point."""
    h = hashlib.blake2b(np.ascontiguousarray(x, dtype=float).tobytes(),
                        digest_size=8).digest()
    u = int.from_bytes(h, "little") / float(2 ** 64)
    return 2.0 * u - 1.0


class OracleHandle:
    """Query-counting zeroth-order oracle with bounded noise.

    noise: "none", "uniform" (seeded random in [-delta, delta]) or
    "hash" (deterministic delta * s(x), identical for identical points).
    """

    def __init__(self, problem, noise: str = "none", delta: float = 0.0, seed: int = 0):
        if delta < 0:
            raise OracleError("delta must be non-negative")
        if noise not in ("none", "uniform", "hash"):
            raise OracleError(f"unknown noise model {noise!r}")
        if noise == "none" and delta != 0.0:
            raise OracleError("noise model 'none' requires delta = 0")
        self.problem = problem
        self.d = problem.d
        self.noise = noise
        self.delta = float(delta)
        self._calls = 0
        self._rng = np.random.Generator(
            np.random.Philox(key=np.uint64(seed) + np.uint64(0xA5A5)))

    @property
    def calls(self) -> int:
        return self._calls

    def _noise_for(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        if self.noise == "none" or self.delta == 0.0:
            return np.zeros(n)
        if self.noise == "uniform":
            return self.delta * self._rng.uniform(-1.0, 1.0, size=n)
        return self.delta * np.array([_hash_signal(row) for row in X])

    def query(self, x: np.ndarray) -> float:
        return float(self.query_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def query_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if not np.all(np.isfinite(X)):
            raise OracleError("non-finite query point")
        vals = self.problem.evaluate_many(X) + self._noise_for(X)
        self._calls += X.shape[0]
        return vals


class TaylorOracle:
    """Oracle for the quadratic Taylor model of f at a fixed center.

    Each query spends 4 base-oracle calls (or 1 when y == center) and returns
    the model value to accuracy `delta`.  Only one level of model wrapping is
    allowed, and the base oracle must be noise-free.

    The accuracy actually requested from `asoe` shrinks with the query radius
    r = ||y - center||: it is min(delta, 0.1 L r^2, 0.2 H r^3).  This keeps
    every base-oracle probe within 0.1 r of the center, so the smoothness
    constants only need to hold locally and the rounding amplification of the
    curvature probe stays bounded by a constant.  With a fixed delta the probe
    offsets grow like delta / (H r^2) as r shrinks, which sends queries far
    outside the region where L and H are valid.
    """

    def __init__(self, base, center: np.ndarray, L: float, H: float, delta: float):
        if isinstance(base, TaylorOracle):
            raise OracleError("model oracles cannot be nested")
        if base.delta != 0.0:
            raise OracleError("model oracle requires a noise-free base oracle")
        if L <= 0 or H <= 0 or delta <= 0:
            raise OracleError("L, H, delta must be positive")
        self.base = base
        self.center = np.asarray(center, dtype=float).copy()
        self.L = float(L)
        self.H = float(H)
        self.delta = float(delta)
        self.d = base.d
        self._calls = 0

    @property
    def calls(self) -> int:
        return self._calls

    def query(self, y: np.ndarray) -> float:
        self._calls += 1
        r = float(np.linalg.norm(np.asarray(y, dtype=float) - self.center))
        if r == 0.0:
            return self.base.query(self.center)
        delta_eff = min(self.delta, 0.1 * self.L * r * r,
                        0.2 * self.H * r ** 3)
        return asoe(self.base, self.L, self.H, self.center, y, delta_eff)

    def query_many(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return np.array([self.query(y) for y in Y])


class PenalizedOracle:
    """Adds an analytically known term to an oracle at zero query cost."""

    def __init__(self, inner, penalty: Callable[[np.ndarray], float],
                 penalty_many: Optional[Callable[[np.ndarray], np.ndarray]] = None):
        self.inner = inner
        self.penalty = penalty
        self.penalty_many = penalty_many
        self.d = inner.d
        self.delta = inner.delta

    @property
    def calls(self) -> int:
        return self.inner.calls

    def query(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return self.inner.query(x) + float(self.penalty(x))

    def query_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        vals = self.inner.query_many(X)
        if self.penalty_many is not None:
            return vals + self.penalty_many(X)
        return vals + np.array([float(self.penalty(x)) for x in X])


def asoe(o, L: float, H: float, x: np.ndarray, y: np.ndarray, delta: float) -> float:
    """Four-query evaluation of the quadratic Taylor model f_x(y) to accuracy delta.

    Queries x, x + (delta/(L r^2)) (y-x) and x +- (delta/(2 H r^3)) (y-x) with
    r = ||y - x||; the forward difference recovers the linear term and the
    central second difference the curvature term.  With r = 0 the model value
    is f(x) itself, obtained with a single query.
    """
    if L <= 0 or H <= 0:
        raise OracleError("L and H must be positive")
    if delta <= 0:
        raise OracleError("delta must be positive")
    if getattr(o, "delta", 0.0) != 0.0:
        raise OracleError("asoe requires a noise-free oracle")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dvec = y - x
    r = float(np.linalg.norm(dvec))
    if not math.isfinite(r) or r > 1e50:
        raise OracleError("query point too far from the expansion center")
    if r == 0.0:
        return o.query(x)
    t = delta / (L * r * r)
    c = delta / (2.0 * H * r ** 3)
    pts = np.stack([x, x + t * dvec, x + c * dvec, x - c * dvec])
    f0, ff, fp, fm = o.query_many(pts)
    linear = (L * r * r / delta) * (ff - f0)
    quadratic = (2.0 * H * H * r ** 6 / (delta * delta)) * (fp + fm - 2.0 * f0)
    return float(f0 + linear + quadratic)


def approximate_gradient(o, L: float, x: np.ndarray, eps_A: float) -> np.ndarray:
    """Coordinate-wise forward differences with step 2 eps_A / (d L).

    Uses exactly d+1 queries (f(x) is shared) and satisfies
    ||v - grad f(x)|| <= eps_A for L-smooth f.
    """
    if L <= 0 or eps_A <= 0:
        raise OracleError("L and eps_A must be positive")
    if getattr(o, "delta", 0.0) != 0.0:
        raise OracleError("approximate_gradient requires a noise-free oracle")
    x = np.asarray(x, dtype=float)
    d = x.size
    rho = 2.0 * eps_A / (d * L)
    pts = np.vstack([x, x + rho * np.eye(d)])
    vals = o.query_many(pts)
    v = (vals[1:] - vals[0]) / rho
    if not np.all(np.isfinite(v)):
        raise OracleError("non-finite gradient approximation")
    return v


def trace_estimate(o, x: np.ndarray, rho: float, n_samples: int, seed: int = 0) -> float:
    """Randomized second-difference estimate of tr(Hessian f(x)).

    Mean over Gaussian xi of (f(x+rho xi) - 2 f(x) + f(x-rho xi)) / rho^2;
    unbiased on quadratics.
    """
    if rho <= 0:
        raise OracleError("rho must be positive")
    if n_samples <= 0:
        raise OracleError("n_samples must be positive")
    if getattr(o, "delta", 0.0) != 0.0:
        raise OracleError("trace_estimate requires a noise-free oracle")
    x = np.asarray(x, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + np.uint64(0x7E)))
    total = 0.0
    chunk = 4096
    done = 0
    f0 = o.query(x)
    while done < n_samples:
        m = min(chunk, n_samples - done)
        Xi = rng.standard_normal((m, x.size))
        fp = o.query_many(x + rho * Xi)
        fm = o.query_many(x - rho * Xi)
        total += float(((fp - 2.0 * f0 + fm) / rho ** 2).sum())
        done += m
    return total / n_samples
