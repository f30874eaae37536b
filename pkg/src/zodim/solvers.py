"""The four zeroth-order solvers.

Each solver consumes only an oracle handle plus configuration and emits a
RunTrace with audited oracle counts.  Ground-truth stopping (`gap_fn`) is
injected by the caller and never touches the oracle, so reported oracle calls
reflect the algorithm alone.

* rg_rho: single-direction random gradient descent, step 1/(12 tr A).
* zhb: heavy-ball variant whose step is set from the effective dimension
  ED_{1/2}; `zhb_regularized` extends it to weakly convex objectives through
  an added quadratic surrogate term.
* anpe_zo: accelerated proximal-extragradient outer loop whose regularized
  model subproblems are solved by zhb through the four-query Taylor oracle,
  with a bracket search over the proximal parameter lambda.
* cubic_zo: cubically regularized outer loop with a radius bracket search,
  returning an approximate second-order stationary point.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .estimators import DirectionSampler
from .oracles import (OracleError, OracleHandle, PenalizedOracle, TaylorOracle,
                      approximate_gradient)

PAPER_C_STEP = 14400.0


class SolverConfigError(ValueError):
    pass


@dataclass
class TraceRecord:
    k: int
    oracle_calls: int
    f_gap: Optional[float]
    grad_norm: Optional[float]
    wall_ns: int


@dataclass
class RunTrace:
    records: list
    x_out: np.ndarray
    status: str
    iters: int
    oracle_calls: int
    extras: dict = field(default_factory=dict)


def _default_rho(x0: np.ndarray) -> float:
    return 1e-6 * max(1.0, float(np.linalg.norm(x0)))


# ---------------------------------------------------------------------------
# random gradient descent
# ---------------------------------------------------------------------------

@dataclass
class RgConfig:
    rho: Optional[float] = None
    step_mode: str = "paper"          # "paper": h = 1/(12 tr A); "manual": h given
    h: Optional[float] = None
    tr_A: Optional[float] = None
    max_iters: int = 100_000
    target_gap: Optional[float] = None
    seed: int = 0
    stream_id: int = 0
    record_stride: int = 100


def rg_rho(o, x0: np.ndarray, cfg: RgConfig,
           gap_fn: Optional[Callable[[np.ndarray], float]] = None) -> RunTrace:
    x = np.asarray(x0, dtype=float).copy()
    if cfg.step_mode == "paper":
        if cfg.tr_A is None or cfg.tr_A <= 0:
            raise SolverConfigError("paper step mode requires tr_A > 0")
        h = 1.0 / (12.0 * cfg.tr_A)
    elif cfg.step_mode == "manual":
        if cfg.h is None or cfg.h <= 0:
            raise SolverConfigError("manual step mode requires h > 0")
        h = float(cfg.h)
    else:
        raise SolverConfigError(f"unknown step_mode {cfg.step_mode!r}")
    rho = cfg.rho if cfg.rho is not None else _default_rho(x)
    sampler = DirectionSampler(x.size, cfg.seed, cfg.stream_id)
    calls0 = o.calls
    t0 = time.perf_counter_ns()
    records = []
    status = "MaxIters"
    k = 0

    def record(k):
        gap = gap_fn(x) if gap_fn is not None else None
        records.append(TraceRecord(k, o.calls - calls0, gap, None,
                                   time.perf_counter_ns() - t0))

    record(0)
    for k in range(1, cfg.max_iters + 1):
        xi = sampler.draw(k - 1)
        vals = o.query_many(np.stack([x, x + rho * xi]))
        x = x - h * ((vals[1] - vals[0]) / rho) * xi
        if not np.all(np.isfinite(x)):
            status = "Diverged"
            break
        if gap_fn is not None and cfg.target_gap is not None:
            if gap_fn(x) <= cfg.target_gap:
                status = "TargetReached"
                break
        if k % cfg.record_stride == 0:
            record(k)
    record(k)
    return RunTrace(records=records, x_out=x, status=status, iters=k,
                    oracle_calls=o.calls - calls0, extras={"h": h, "rho": rho})


# ---------------------------------------------------------------------------
# zeroth-order heavy ball
# ---------------------------------------------------------------------------

@dataclass
class ZhbConfig:
    mu: float = 1.0
    ed_half: float = 1.0
    c_step: float = 4.0               # paper value: 14400
    rho: Optional[float] = None
    max_iters: int = 100_000
    target_gap: Optional[float] = None
    seed: int = 0
    stream_id: int = 0
    repeats: int = 1
    record_stride: int = 100
    escape_radius: Optional[float] = None


def _zhb_single(o, x0: np.ndarray, cfg: ZhbConfig, gap_fn, stream_id: int) -> RunTrace:
    if cfg.mu <= 0 or cfg.ed_half <= 0:
        raise SolverConfigError("mu and ed_half must be positive")
    h = 1.0 / (cfg.c_step * cfg.ed_half) ** 2
    beta = math.sqrt(h * cfg.mu)
    if not 0.0 < beta < 1.0:
        raise SolverConfigError(f"momentum parameter beta={beta} outside (0,1)")
    x = np.asarray(x0, dtype=float).copy()
    start = x.copy()
    v = np.zeros_like(x)
    rho = cfg.rho if cfg.rho is not None else _default_rho(x)
    sampler = DirectionSampler(x.size, cfg.seed, stream_id)
    calls0 = o.calls
    t0 = time.perf_counter_ns()
    records = []
    status = "MaxIters"
    best_val = math.inf
    best_y = x.copy()
    n = 0

    def record(k, point):
        gap = gap_fn(point) if gap_fn is not None else None
        records.append(TraceRecord(k, o.calls - calls0, gap, None,
                                   time.perf_counter_ns() - t0))

    record(0, x)
    for n in range(1, cfg.max_iters + 1):
        xi = sampler.draw(n - 1)
        y = x + (1.0 - beta) * v
        if cfg.escape_radius is not None and \
                float(np.linalg.norm(y - start)) > cfg.escape_radius:
            status = "Diverged"
            best_val, best_y = -math.inf, y.copy()
            break
        try:
            vals = o.query_many(np.stack([y, y + rho * xi]))
        except (OracleError, OverflowError, FloatingPointError):
            status = "Diverged"
            break
        f_y = vals[0]
        if f_y < best_val:
            best_val = f_y
            best_y = y.copy()
        x_new = y - h * ((vals[1] - vals[0]) / rho) * xi
        v = x_new - x
        x = x_new
        if not np.all(np.isfinite(x)):
            status = "Diverged"
            break
        if gap_fn is not None and cfg.target_gap is not None:
            if gap_fn(y) <= cfg.target_gap:
                status = "TargetReached"
                break
        if n % cfg.record_stride == 0:
            record(n, y)
    record(n, best_y)
    return RunTrace(records=records, x_out=best_y, status=status, iters=n,
                    oracle_calls=o.calls - calls0,
                    extras={"h": h, "beta": beta, "rho": rho,
                            "best_oracle_value": best_val, "x_final": x})


def zhb(o, x0: np.ndarray, cfg: ZhbConfig,
        gap_fn: Optional[Callable[[np.ndarray], float]] = None) -> RunTrace:
    """Heavy-ball iteration y = x + (1-beta) v; x+ = y - h g_hat(y); v+ = x+ - x.

    With repeats > 1, runs independent sample streams and keeps the run whose
    best oracle-reported value is lowest (success amplification).
    """
    best = None
    total0 = o.calls
    for r in range(max(1, cfg.repeats)):
        trace = _zhb_single(o, x0, cfg, gap_fn, cfg.stream_id + r)
        if best is None or trace.extras["best_oracle_value"] < \
                best.extras["best_oracle_value"]:
            best = trace
        if trace.status == "TargetReached":
            best = trace
            break
    best.extras["total_oracle_calls_all_repeats"] = o.calls - total0
    return best


def zhb_regularized(o, x0: np.ndarray, eps: float, D: float, cfg: ZhbConfig,
                    gap_fn: Optional[Callable[[np.ndarray], float]] = None) -> RunTrace:
    """ZHB on the surrogate g(x) = f(x) + eps/(2 D^2) ||x||^2.

    The quadratic term is added outside the oracle at zero query cost.  The
    surrogate is (eps/D^2)-strongly convex and its ED_{1/2} is bounded by
    ED_{1/2}(f) + d sqrt(eps/D^2).
    """
    if eps <= 0 or D <= 0:
        raise SolverConfigError("eps and D must be positive")
    lam = eps / (2.0 * D * D)
    g = PenalizedOracle(o, lambda x: lam * float(np.dot(x, x)),
                        penalty_many=lambda X: lam * (X * X).sum(axis=1))
    d = np.asarray(x0).size
    sub = ZhbConfig(mu=eps / (D * D), ed_half=cfg.ed_half + d * math.sqrt(eps / (D * D)),
                    c_step=cfg.c_step, rho=cfg.rho, max_iters=cfg.max_iters,
                    target_gap=cfg.target_gap, seed=cfg.seed, stream_id=cfg.stream_id,
                    repeats=cfg.repeats, record_stride=cfg.record_stride)
    return zhb(g, x0, sub, gap_fn=gap_fn)


# ---------------------------------------------------------------------------
# model subproblem solves (shared by the two outer-loop solvers)
# ---------------------------------------------------------------------------

def _solve_model_subproblem(o, center: np.ndarray, L: float, H: float,
                            pen_coeff: float, mu_sub: float,
                            rel_target: Optional[float] = None,
                            abs_target: Optional[float] = None,
                            c_step: float = 4.0, max_iters: int = 200_000,
                            seed: int = 0, stream_id: int = 0,
                            escape_radius: Optional[float] = None) -> tuple:
    """Minimize f_center(y) + pen_coeff/2 ||y - center||^2 via ZHB + Taylor oracle.

    Accuracy is given either relative to the initial gap g(center) - g*
    (`rel_target`) or absolutely (`abs_target`).  A cheap forward-difference
    gradient at the center sets the characteristic solution distance, from
    which the model accuracy delta and the smoothing radius rho are scaled:
    delta as large as the error budget allows, because the four-query model
    evaluation amplifies float rounding by H^2 r^6 / delta^2.
    """
    d = center.size
    fc = o.query(center)
    f_scale = max(1.0, abs(fc))
    v = approximate_gradient(o, L, center, 1e-4 * L * max(1.0, float(np.linalg.norm(center))))
    G = float(np.linalg.norm(v))
    r_char = max(G / mu_sub, 1e-9)
    if escape_radius is not None:
        r_char = min(max(r_char, escape_radius / 8.0), escape_radius)
        escape = escape_radius
    else:
        # strongly convex subproblem: the iterates stay within a few
        # characteristic radii of the center, so anything far beyond that is
        # a rounding-noise runaway and should abort the subsolve early
        escape = 100.0 * max(r_char, 1e-3)
    gap0_est = max(0.5 * G * G / mu_sub, 1e-300)
    if abs_target is None:
        abs_target = rel_target * gap0_est
    abs_target = max(abs_target, 1e-14 * f_scale)
    grad_res = math.sqrt(2.0 * mu_sub * abs_target)
    delta_model = max(min(0.1 * r_char * grad_res, 0.25 * abs_target),
                      1e-13 * f_scale)
    rho = max(3e-4 * r_char, 1e-12)
    model = TaylorOracle(o, center, L, H, delta_model)
    sub = PenalizedOracle(
        model,
        lambda y: 0.5 * pen_coeff * float(np.dot(y - center, y - center)),
        penalty_many=lambda Y: 0.5 * pen_coeff * ((Y - center) ** 2).sum(axis=1))
    L_sub = L + pen_coeff
    ed_sub = d * math.sqrt(L_sub)
    h = 1.0 / (c_step * ed_sub) ** 2
    beta = math.sqrt(h * mu_sub)
    kappa = L_sub / mu_sub
    n = int(math.ceil(
        math.log(400.0 * kappa * max(gap0_est / abs_target, 10.0)) / (beta / 4.0)))
    n = max(10, min(n, max_iters))
    cfg = ZhbConfig(mu=mu_sub, ed_half=ed_sub, c_step=c_step, rho=rho,
                    max_iters=n, seed=seed, stream_id=stream_id,
                    record_stride=10 ** 9, escape_radius=escape)
    trace = zhb(sub, center, cfg)
    return trace.x_out, trace


# ---------------------------------------------------------------------------
# accelerated proximal extragradient (A-NPE) with zeroth-order subsolves
# ---------------------------------------------------------------------------

def anpe_step_size(lam: float, A: float) -> float:
    """Root a of a^2 = lam (A + a): the extragradient weight recursion."""
    return 0.5 * (lam + math.sqrt(lam * lam + 4.0 * lam * A))


@dataclass
class AnpeConfig:
    sigma: float = 0.5
    sigma_u: float = 0.25
    N: int = 200
    eps_A: Optional[float] = None     # must be < D / N^{3/2}
    target_gap: Optional[float] = None
    seed: int = 0
    max_depth: int = 60
    sub_c_step: float = 4.0
    sub_max_iters: int = 200_000
    # Cap on the proximal parameter.  With H near zero the acceptance window
    # [2 sigma_l / H, 2 sigma_u / H] recedes to infinity; a clamped candidate
    # is accepted without the window test and the iteration degenerates to a
    # proximal-point step, which is the sensible limit for quadratics.
    lambda_max: Optional[float] = None

    @property
    def sigma_l(self) -> float:
        return self.sigma_u / 2.0


def anpe_zo(o, x0: np.ndarray, meta, cfg: AnpeConfig,
            gap_fn: Optional[Callable[[np.ndarray], float]] = None) -> RunTrace:
    if not 0.0 < cfg.sigma_l < cfg.sigma_u < cfg.sigma < 1.0:
        raise SolverConfigError("need 0 < sigma_l < sigma_u < sigma < 1")
    if getattr(o, "delta", 0.0) != 0.0:
        raise SolverConfigError("anpe_zo requires a noise-free top-level oracle")
    L, H, D = meta.L, meta.H, meta.D
    if not (math.isfinite(L) and math.isfinite(H)) or L <= 0 or H <= 0 or D <= 0:
        raise SolverConfigError("finite positive L, H, D required")
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    A = 0.0
    lam = cfg.sigma_l * math.sqrt(1.0 - cfg.sigma ** 2) / (16.0 * D * H)
    eps_A = cfg.eps_A if cfg.eps_A is not None else 0.5 * D / cfg.N ** 1.5
    if eps_A >= D / cfg.N ** 1.5:
        raise SolverConfigError("eps_A must be below D / N^(3/2)")
    lo_bracket = 2.0 * cfg.sigma_l / H
    hi_bracket = 2.0 * cfg.sigma_u / H
    su2 = (cfg.sigma - cfg.sigma_u) ** 2

    calls0 = o.calls
    t0 = time.perf_counter_ns()
    records = []
    lam_hist, a_hist, A_hist, depth_hist, s_hist = [], [], [], [], []
    clamped_hist = []
    status = "MaxIters"
    stream = 0
    k = 0
    for k in range(1, cfg.N + 1):
        lam_lo, lam_hi = None, None
        cur = lam
        accepted = False
        depth = 0
        while depth < cfg.max_depth:
            depth += 1
            clamped = cfg.lambda_max is not None and cur >= cfg.lambda_max
            if clamped:
                cur = cfg.lambda_max
            a = anpe_step_size(cur, A)
            xt = x.copy() if A == 0.0 else (A / (A + a)) * y + (a / (A + a)) * x
            rel = su2 / (2.0 * cur * (L * cur + 1.0 + su2) * (L + 1.0 / cur))
            if clamped:
                rel = max(rel, 1e-4)
            stream += 1
            y_cand, _ = _solve_model_subproblem(
                o, xt, L, H, pen_coeff=1.0 / cur, mu_sub=meta.mu + 1.0 / cur,
                rel_target=rel, c_step=cfg.sub_c_step,
                max_iters=cfg.sub_max_iters, seed=cfg.seed, stream_id=stream)
            s = cur * float(np.linalg.norm(y_cand - xt))
            if clamped:
                accepted = True
                break
            if s < lo_bracket:
                lam_lo = cur if lam_lo is None else max(lam_lo, cur)
            elif s > hi_bracket:
                lam_hi = cur if lam_hi is None else min(lam_hi, cur)
            else:
                accepted = True
                break
            if lam_lo is not None and lam_hi is not None:
                cur = math.sqrt(lam_lo * lam_hi)
            elif lam_lo is not None:
                cur = 2.0 * cur
            else:
                cur = 0.5 * cur
        if not accepted:
            status = "Diverged"
            break
        lam = cur
        A += a
        y = y_cand
        v = approximate_gradient(o, L, y, eps_A / a)
        x = x - a * v
        lam_hist.append(lam)
        a_hist.append(a)
        A_hist.append(A)
        depth_hist.append(depth)
        s_hist.append(s)
        clamped_hist.append(clamped)
        gap = gap_fn(y) if gap_fn is not None else None
        records.append(TraceRecord(k, o.calls - calls0, gap, None,
                                   time.perf_counter_ns() - t0))
        if gap is not None and cfg.target_gap is not None and gap <= cfg.target_gap:
            status = "TargetReached"
            break
    return RunTrace(records=records, x_out=y, status=status, iters=k,
                    oracle_calls=o.calls - calls0,
                    extras={"lambda": lam_hist, "a": a_hist, "A": A_hist,
                            "depth": depth_hist, "bracket_s": s_hist,
                            "clamped": clamped_hist,
                            "lo_bracket": lo_bracket, "hi_bracket": hi_bracket})


# ---------------------------------------------------------------------------
# cubic regularization with zeroth-order subsolves
# ---------------------------------------------------------------------------

@dataclass
class CubicConfig:
    eps: float = 1e-2
    eps_C: Optional[float] = None
    eps_D: Optional[float] = None
    r0: float = 1.0
    max_outer: int = 200
    max_depth: int = 60
    target_gap: Optional[float] = None
    seed: int = 0
    sub_c_step: float = 4.0
    sub_max_iters: int = 200_000
    paper_constants: bool = False
    Delta_est: Optional[float] = None
    domain_radius: Optional[float] = None


def _cubic_tolerances(eps: float, H: float, Delta: float, paper: bool):
    if paper:
        growth = 16.0 * (24.0 * Delta / H) ** (1.0 / 3.0) / math.sqrt(eps * H) + 1.0
        eps_C = 0.5 * min(eps / (800.0 * growth), eps / 800.0,
                          (eps / H) ** 1.5 / 2000.0)
        eps_D = 0.5 * min(math.sqrt(eps / H) / (200.0 * growth),
                          math.sqrt(eps / (40000.0 * H)))
        return eps_C, eps_D
    return eps / 100.0, math.sqrt(eps / H) / 20.0


def cubic_zo(o, x0: np.ndarray, meta, cfg: CubicConfig,
             gap_fn: Optional[Callable[[np.ndarray], float]] = None) -> RunTrace:
    """Outer cubic-regularization loop with a bracket-and-bisect radius search.

    Each candidate radius r solves min_y f_x(y) + (r H / 2)||y - x||^2 through
    ZHB on the Taylor-model oracle; the test ||y - x|| <= r decides whether r
    shrinks (upper bound) or grows (lower bound).  The loop stops once the
    accepted radius drops below sqrt(eps / H).
    """
    if getattr(o, "delta", 0.0) != 0.0:
        raise SolverConfigError("cubic_zo requires a noise-free top-level oracle")
    L, H = meta.L, meta.H
    if not (math.isfinite(L) and math.isfinite(H)) or L <= 0 or H <= 0:
        raise SolverConfigError("finite positive L and H required")
    eps = cfg.eps
    x = np.asarray(x0, dtype=float).copy()
    Delta_est = cfg.Delta_est if cfg.Delta_est is not None else \
        (meta.Delta if meta.Delta > 0 else 1.0)
    eps_C, eps_D = _cubic_tolerances(eps, H, Delta_est, cfg.paper_constants)
    r_stop = math.sqrt(eps / H)
    calls0 = o.calls
    t0 = time.perf_counter_ns()
    records = []
    outer_f = []
    r_hist, depth_hist = [], []
    status = "MaxIters"
    stream = [10 ** 6]

    f0 = o.query(x)
    best_f = f0
    outer_f.append(f0)

    def subsolve(center, r):
        stream[0] += 1
        y, trace = _solve_model_subproblem(
            o, center, L, H, pen_coeff=r * H, mu_sub=r * H / 2.0,
            abs_target=eps_C, c_step=cfg.sub_c_step,
            max_iters=cfg.sub_max_iters, seed=cfg.seed,
            stream_id=stream[0], escape_radius=4.0 * r)
        return y

    def search(center, r_init):
        r = max(r_init, eps_D)
        r_l, r_u = 0.0, math.inf
        y_u = None
        depth = 0
        while depth < cfg.max_depth:
            depth += 1
            y = subsolve(center, r)
            if float(np.linalg.norm(y - center)) <= r:
                r_u, y_u = r, y
            else:
                r_l = r
            if (r_l > 0.0 and r_u < math.inf) or r_u < eps_D:
                break
            r = 0.5 * r if r_u < math.inf else 2.0 * r
        while r_u - r_l >= eps_D and depth < cfg.max_depth and r_u < math.inf:
            depth += 1
            r = 0.5 * (r_l + r_u)
            y = subsolve(center, r)
            if float(np.linalg.norm(y - center)) <= r:
                r_u, y_u = r, y
            else:
                r_l = r
        return r_u, y_u, depth

    r = cfg.r0
    k = 0
    for k in range(1, cfg.max_outer + 1):
        r_u, y, depth = search(x, r)
        if y is None or not math.isfinite(r_u):
            status = "Diverged"
            break
        if cfg.domain_radius is not None and \
                float(np.linalg.norm(y)) > cfg.domain_radius:
            status = "LeftDomain"
            x = y
            break
        x = y
        r_hist.append(r_u)
        depth_hist.append(depth)
        fx = o.query(x)
        outer_f.append(fx)
        best_f = min(best_f, fx)
        Delta_est = max(f0 - best_f, eps)
        if cfg.paper_constants:
            eps_C, eps_D = _cubic_tolerances(eps, H, Delta_est, True)
        gap = gap_fn(x) if gap_fn is not None else None
        records.append(TraceRecord(k, o.calls - calls0, gap, None,
                                   time.perf_counter_ns() - t0))
        if r_u < r_stop:
            status = "TargetReached"
            break
        r = max(r_u, r_stop)
    return RunTrace(records=records, x_out=x, status=status, iters=k,
                    oracle_calls=o.calls - calls0,
                    extras={"outer_f": outer_f, "r": r_hist, "depth": depth_hist,
                            "eps_C": eps_C, "eps_D": eps_D})
