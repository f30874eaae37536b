"""Benchmark objectives with analytically known derivatives, optima, and spectra.

Every solver claim in this package is certified against the ground truth that
these fixtures expose: exact gradients, exact Hessian spectra, and closed-form
(or high-accuracy) optima.  Quadratics are stored in their eigenbasis so that
evaluation is O(d) and the spectrum is exact by construction; dense matrices
exist only as a small-dimension cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

DENSE_HESSIAN_CAP = 64


class ProblemConfigError(ValueError):
    """Raised when a problem specification cannot be realized."""


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumSpec:
    """Recipe for a non-increasing, non-negative eigenvalue list.

    kinds: flat, powerlaw (C/i^beta), powerlaw_floor (mu + C/i^beta),
    explicit, csv.
    """

    kind: str
    level: float = 1.0
    C: float = 1.0
    beta: float = 1.0
    mu: float = 0.0
    values: Optional[tuple] = None
    path: Optional[str] = None

    @staticmethod
    def flat(level: float) -> "SpectrumSpec":
        if level <= 0:
            raise ProblemConfigError("flat spectrum level must be positive")
        return SpectrumSpec(kind="flat", level=level)

    @staticmethod
    def powerlaw(C: float, beta: float) -> "SpectrumSpec":
        if C <= 0 or beta <= 0:
            raise ProblemConfigError("powerlaw parameters must be positive")
        return SpectrumSpec(kind="powerlaw", C=C, beta=beta)

    @staticmethod
    def powerlaw_floor(C: float, beta: float, mu: float) -> "SpectrumSpec":
        if C <= 0 or beta <= 0 or mu <= 0:
            raise ProblemConfigError("powerlaw_floor parameters must be positive")
        return SpectrumSpec(kind="powerlaw_floor", C=C, beta=beta, mu=mu)

    @staticmethod
    def explicit(values) -> "SpectrumSpec":
        vals = tuple(float(v) for v in values)
        return SpectrumSpec(kind="explicit", values=vals)

    @staticmethod
    def from_csv(path: str) -> "SpectrumSpec":
        return SpectrumSpec(kind="csv", path=str(path))

    def realize(self, d: int) -> np.ndarray:
        if d <= 0:
            raise ProblemConfigError("dimension must be positive")
        if self.kind == "flat":
            eigs = np.full(d, float(self.level))
        elif self.kind == "powerlaw":
            i = np.arange(1, d + 1, dtype=float)
            eigs = self.C / i ** self.beta
        elif self.kind == "powerlaw_floor":
            i = np.arange(1, d + 1, dtype=float)
            eigs = self.mu + self.C / i ** self.beta
        elif self.kind == "explicit":
            eigs = np.asarray(self.values, dtype=float)
            if eigs.size != d:
                raise ProblemConfigError(
                    f"explicit spectrum has {eigs.size} values, expected {d}")
        elif self.kind == "csv":
            eigs = load_spectrum_csv(self.path)
            if eigs.size != d:
                raise ProblemConfigError(
                    f"csv spectrum has {eigs.size} values, expected {d}")
        else:
            raise ProblemConfigError(f"unknown spectrum kind {self.kind!r}")
        if np.any(eigs < 0):
            raise ProblemConfigError("eigenvalues must be non-negative")
        if np.any(np.diff(eigs) > 1e-12 * max(1.0, float(eigs[0]))):
            raise ProblemConfigError("eigenvalues must be non-increasing")
        return eigs.astype(float)


def load_spectrum_csv(path: str) -> np.ndarray:
    """Load eigenvalues: one non-negative value per line, descending.

    Blank lines and '#' comments are ignored.
    """
    vals = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            vals.append(float(line))
    if not vals:
        raise ProblemConfigError(f"no eigenvalues found in {path}")
    eigs = np.asarray(vals, dtype=float)
    if np.any(eigs < 0) or np.any(np.diff(eigs) > 0):
        raise ProblemConfigError(f"spectrum in {path} must be non-negative, descending")
    return eigs


# ---------------------------------------------------------------------------
# rotations (products of Householder reflectors)
# ---------------------------------------------------------------------------

def make_reflectors(d: int, k: int, seed: int) -> np.ndarray:
    """k unit vectors defining Q = H_1 H_2 ... H_k with H_i = I - 2 v_i v_i^T."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    V = rng.standard_normal((k, d))
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    return V


def _apply_reflectors(V: Optional[np.ndarray], X: np.ndarray, transpose: bool) -> np.ndarray:
    """Apply Q (or Q^T) to the rows of X.  Q = H_1 ... H_k."""
    if V is None or V.shape[0] == 0:
        return X
    order = range(V.shape[0]) if transpose else range(V.shape[0] - 1, -1, -1)
    Y = X
    for i in order:
        v = V[i]
        Y = Y - 2.0 * np.outer(Y @ v, v)
    return Y


# ---------------------------------------------------------------------------
# quadratic problems
# ---------------------------------------------------------------------------

class QuadraticProblem:
    """f(x) = 1/2 x^T A x + b^T x with A = Q diag(eigs) Q^T."""

    def __init__(self, eigenvalues, reflectors: Optional[np.ndarray] = None,
                 b: Optional[np.ndarray] = None):
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.d = self.eigenvalues.size
        self.reflectors = reflectors
        self.b = np.zeros(self.d) if b is None else np.asarray(b, dtype=float)
        if self.b.size != self.d:
            raise ProblemConfigError("linear term dimension mismatch")

    # spectrum-derived constants
    @property
    def L(self) -> float:
        return float(self.eigenvalues.max())

    @property
    def mu(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def tr_A(self) -> float:
        return float(self.eigenvalues.sum())

    def to_eigenbasis(self, x: np.ndarray) -> np.ndarray:
        return _apply_reflectors(self.reflectors, np.atleast_2d(x), transpose=True)

    def from_eigenbasis(self, z: np.ndarray) -> np.ndarray:
        return _apply_reflectors(self.reflectors, np.atleast_2d(z), transpose=False)

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.evaluate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ProblemConfigError("dimension mismatch in evaluate")
        Z = self.to_eigenbasis(X)
        return 0.5 * (Z * Z) @ self.eigenvalues + X @ self.b

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        z = self.to_eigenbasis(x)[0]
        return self.from_eigenbasis(z * self.eigenvalues)[0] + self.b

    def hessian(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        if self.d > DENSE_HESSIAN_CAP:
            raise ProblemConfigError(
                f"dense Hessian capped at d={DENSE_HESSIAN_CAP}")
        return self.from_eigenbasis(
            self.from_eigenbasis(np.diag(self.eigenvalues)).T)

    def hessian_spectrum(self) -> np.ndarray:
        return self.eigenvalues.copy()

    def top_eigenvector(self) -> np.ndarray:
        e = np.zeros(self.d)
        e[int(np.argmax(self.eigenvalues))] = 1.0
        return self.from_eigenbasis(e)[0]

    def optimum(self):
        if self.mu <= 0:
            raise ProblemConfigError("closed-form optimum requires min eigenvalue > 0")
        zb = self.to_eigenbasis(self.b)[0]
        x_star = self.from_eigenbasis(-zb / self.eigenvalues)[0]
        f_star = self.evaluate(x_star)
        return x_star, f_star

    def gap(self, x: np.ndarray) -> float:
        """f(x) - f*, computed stably in the eigenbasis."""
        z = self.to_eigenbasis(np.asarray(x, dtype=float))[0]
        zb = self.to_eigenbasis(self.b)[0]
        if self.mu > 0:
            # 1/2 lam (z - z*)^2 with z* = -zb/lam, summed: avoids cancellation
            dz = z + zb / self.eigenvalues
            return float(0.5 * np.dot(self.eigenvalues, dz * dz))
        return float(0.5 * np.dot(self.eigenvalues, z * z) + np.dot(zb, z))


def make_quadratic(spec: SpectrumSpec, d: int, seed: int = 0, rotate: bool = False,
                   b_mode: str = "zero", n_reflectors: int = 4) -> QuadraticProblem:
    eigs = spec.realize(d)
    V = make_reflectors(d, n_reflectors, seed) if rotate else None
    if b_mode == "zero":
        b = np.zeros(d)
    elif b_mode == "random_unit":
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + np.uint64(1)))
        b = rng.standard_normal(d)
        b /= np.linalg.norm(b)
    else:
        raise ProblemConfigError(f"unknown b_mode {b_mode!r}")
    return QuadraticProblem(eigs, reflectors=V, b=b)


# ---------------------------------------------------------------------------
# ridge-separable problems  f(x) = (1/N) sum_i q_i(beta_i^T x)
# ---------------------------------------------------------------------------

class SquaredLink:
    """q(t) = t^2 / 2."""
    L0 = 1.0

    def q(self, t):
        return 0.5 * t * t

    def dq(self, t):
        return t

    def d2q(self, t):
        return np.ones_like(t)


class LogisticLink:
    """q(t) = log(1 + e^t); curvature bounded by 1/4."""
    L0 = 0.25

    def q(self, t):
        return np.logaddexp(0.0, t)

    def dq(self, t):
        return 1.0 / (1.0 + np.exp(-t))

    def d2q(self, t):
        s = self.dq(t)
        return s * (1.0 - s)


class RidgeSeparableProblem:
    def __init__(self, data: np.ndarray, link):
        self.data = np.asarray(data, dtype=float)
        if self.data.ndim != 2:
            raise ProblemConfigError("data must be an (N, d) array")
        self.N, self.d = self.data.shape
        self.link = link
        self.L0 = float(link.L0)
        self.R = float(np.linalg.norm(self.data, axis=1).max())
        self.mean_sq_norm = float((np.linalg.norm(self.data, axis=1) ** 2).mean())

    def evaluate(self, x):
        return float(self.evaluate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ProblemConfigError("dimension mismatch in evaluate")
        T = X @ self.data.T
        return self.link.q(T).mean(axis=1)

    def gradient(self, x):
        t = self.data @ np.asarray(x, dtype=float)
        return self.data.T @ self.link.dq(t) / self.N

    def hessian(self, x):
        if self.d > DENSE_HESSIAN_CAP:
            raise ProblemConfigError(
                f"dense Hessian capped at d={DENSE_HESSIAN_CAP}")
        t = self.data @ np.asarray(x, dtype=float)
        w = self.link.d2q(t)
        return (self.data.T * w) @ self.data / self.N


def make_ridge_separable(d: int, N: int, seed: int = 0, link: str = "squared",
                         scale: float = 1.0) -> RidgeSeparableProblem:
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + np.uint64(7)))
    data = scale * rng.standard_normal((N, d)) / math.sqrt(d)
    links = {"squared": SquaredLink(), "logistic": LogisticLink()}
    if link not in links:
        raise ProblemConfigError(f"unknown link {link!r}")
    return RidgeSeparableProblem(data, links[link])


# ---------------------------------------------------------------------------
# nonconvex fixture: separable quartic-minus-quadratic in a rotated basis
# ---------------------------------------------------------------------------

class NonconvexTestProblem:
    """f(x) = sum_i a_i/4 z_i^4 - b_i/2 z_i^2 with z = Q^T x.

    The origin is a strict saddle (Hessian eigenvalues -b_i there); the minima
    sit at z_i = +-sqrt(b_i/a_i).  Smoothness constants are certified on the
    ball of radius `domain_radius`.
    """

    def __init__(self, a, b, domain_radius: float,
                 reflectors: Optional[np.ndarray] = None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if np.any(self.a <= 0) or np.any(self.b <= 0):
            raise ProblemConfigError("quartic coefficients must be positive")
        self.d = self.a.size
        self.domain_radius = float(domain_radius)
        self.reflectors = reflectors
        if self.domain_radius < np.sqrt(self.b / self.a).max():
            raise ProblemConfigError("domain must contain the minima")

    @property
    def H(self) -> float:
        return float(6.0 * self.a.max() * self.domain_radius)

    @property
    def L(self) -> float:
        r2 = self.domain_radius ** 2
        return float(np.maximum(3.0 * self.a * r2 - self.b, self.b).max())

    @property
    def f_star(self) -> float:
        return float(-(self.b ** 2 / self.a).sum() / 4.0)

    def minima_coordinates(self) -> np.ndarray:
        return np.sqrt(self.b / self.a)

    def _z(self, X):
        return _apply_reflectors(self.reflectors, np.atleast_2d(X), transpose=True)

    def evaluate(self, x):
        return float(self.evaluate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ProblemConfigError("dimension mismatch in evaluate")
        Z = self._z(X)
        Z2 = Z * Z
        return 0.25 * Z2 * Z2 @ self.a - 0.5 * Z2 @ self.b

    def gradient(self, x):
        z = self._z(np.asarray(x, dtype=float))[0]
        gz = self.a * z ** 3 - self.b * z
        return _apply_reflectors(self.reflectors, np.atleast_2d(gz), transpose=False)[0]

    def hessian(self, x):
        if self.d > DENSE_HESSIAN_CAP:
            raise ProblemConfigError(
                f"dense Hessian capped at d={DENSE_HESSIAN_CAP}")
        z = self._z(np.asarray(x, dtype=float))[0]
        diag = np.diag(3.0 * self.a * z * z - self.b)
        M = _apply_reflectors(self.reflectors, diag, transpose=False)
        return _apply_reflectors(self.reflectors, M.T, transpose=False)

    def gap(self, x):
        return self.evaluate(x) - self.f_star


# ---------------------------------------------------------------------------
# convex quartic fixture: f(x) = 1/4 ||x||^4 + 1/2 ||x||^2
# ---------------------------------------------------------------------------

class ConvexQuarticProblem:
    """Strongly convex non-quadratic fixture; optimum at the origin, f* = 0."""

    def __init__(self, d: int, domain_radius: float = 2.0):
        self.d = int(d)
        self.domain_radius = float(domain_radius)

    @property
    def L(self) -> float:
        return float(3.0 * self.domain_radius ** 2 + 1.0)

    @property
    def mu(self) -> float:
        return 1.0

    @property
    def H(self) -> float:
        return float(6.0 * self.domain_radius)

    f_star = 0.0

    def evaluate(self, x):
        return float(self.evaluate_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def evaluate_many(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ProblemConfigError("dimension mismatch in evaluate")
        s = (X * X).sum(axis=1)
        return 0.25 * s * s + 0.5 * s

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return (np.dot(x, x) + 1.0) * x

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return (np.dot(x, x) + 1.0) * np.eye(self.d) + 2.0 * np.outer(x, x)

    def optimum(self):
        return np.zeros(self.d), 0.0

    def gap(self, x):
        return self.evaluate(x)


# ---------------------------------------------------------------------------
# metadata and generic accessors
# ---------------------------------------------------------------------------

@dataclass
class ProblemMeta:
    """Constants a solver may rely on: mu <= L, Delta >= 0, D >= 0.

    H may be 0 (pure quadratic) or math.inf (unknown).
    """
    mu: float = 0.0
    L: float = 1.0
    H: float = 0.0
    Delta: float = 0.0
    D: float = 0.0

    def __post_init__(self):
        if self.mu > self.L:
            raise ProblemConfigError("mu must not exceed L")
        if self.Delta < 0 or self.D < 0:
            raise ProblemConfigError("Delta and D must be non-negative")


def evaluate(problem, x) -> float:
    """Exact, noise-free function value."""
    return problem.evaluate(x)


def reference_derivatives(problem, x):
    """Exact gradient and Hessian information; solvers never call this."""
    grad = problem.gradient(x)
    if isinstance(problem, QuadraticProblem):
        return grad, problem.hessian_spectrum()
    return grad, problem.hessian(x)


def optimum(problem):
    return problem.optimum()
