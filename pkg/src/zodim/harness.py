"""Experiment harness: configs, batch execution, certification, CSV, scaling fits.

Config files are flat `key = value` documents with dotted sections; unknown
keys are rejected by name.  Sweeps expand into cells, every (cell, seed) pair
runs with its own oracle handle and counter-based sample stream, so results
are bit-identical regardless of worker scheduling (ZO_THREADS caps the pool).
Ground-truth stopping is evaluated against the problem's reference, never
through the oracle, so it costs no queries.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import effdim, estimators, problems, solvers
from .oracles import OracleHandle

CELL_CAP = 512

CSV_COLUMNS = ["run_id", "solver", "d", "mu", "tr_A", "ed_half", "status",
               "iters", "oracle_calls", "final_gap", "wall_ns"]


class HarnessConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "problem.kind": str,
    "problem.d": int,
    "problem.spectrum": str,
    "problem.rotate": bool,
    "problem.b_mode": str,
    "problem.seed": int,
    "problem.domain_radius": float,
    "x0.mode": str,
    "x0.norm": float,
    "solver.name": str,
    "solver.target_gap": float,
    "solver.max_iters": int,
    "solver.rho": float,
    "solver.c_step": float,
    "solver.mu": float,
    "solver.eps": float,
    "solver.D": float,
    "solver.repeats": int,
    "seeds": int,
    "base_seed": int,
    "sweep.d": str,
    "sweep.mu": str,
    "sweep.solver": str,
}

_DEFAULTS = {
    "problem.kind": "quadratic",
    "problem.d": 8,
    "problem.spectrum": "flat:1.0",
    "problem.rotate": False,
    "problem.b_mode": "zero",
    "problem.seed": 0,
    "problem.domain_radius": 2.0,
    "x0.mode": "gaussian",
    "x0.norm": 1.0,
    "solver.name": "rg",
    "solver.target_gap": 0.01,
    "solver.max_iters": 200_000,
    "solver.rho": None,
    "solver.c_step": 4.0,
    "solver.mu": None,
    "solver.eps": 0.01,
    "solver.D": 1.0,
    "solver.repeats": 1,
    "seeds": 1,
    "base_seed": 0,
    "sweep.d": None,
    "sweep.mu": None,
    "sweep.solver": None,
}


def _coerce(key: str, raw: str):
    typ = _KNOWN_KEYS[key]
    raw = raw.strip()
    if typ is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise HarnessConfigError(f"key {key!r}: expected boolean, got {raw!r}")
    try:
        return typ(raw)
    except ValueError as exc:
        raise HarnessConfigError(f"key {key!r}: {exc}") from exc


def parse_config(text: str) -> dict:
    """Parse flat `key = value` text.  Unknown keys are errors."""
    cfg = dict(_DEFAULTS)
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HarnessConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise HarnessConfigError(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, raw)
    return cfg


def load_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_spectrum(text: str) -> problems.SpectrumSpec:
    """Parse 'flat:1.0', 'powerlaw:C,beta', 'powerlaw_floor:C,beta,mu',
    'explicit:v1,v2,...' or 'csv:path'."""
    if ":" not in text:
        raise HarnessConfigError(f"bad spectrum {text!r}; expected kind:params")
    kind, args = text.split(":", 1)
    kind = kind.strip()
    if kind == "flat":
        return problems.SpectrumSpec.flat(float(args))
    if kind == "powerlaw":
        C, beta = (float(v) for v in args.split(","))
        return problems.SpectrumSpec.powerlaw(C, beta)
    if kind == "powerlaw_floor":
        C, beta, mu = (float(v) for v in args.split(","))
        return problems.SpectrumSpec.powerlaw_floor(C, beta, mu)
    if kind == "explicit":
        return problems.SpectrumSpec.explicit([float(v) for v in args.split(",")])
    if kind == "csv":
        return problems.SpectrumSpec.from_csv(args.strip())
    raise HarnessConfigError(f"unknown spectrum kind {kind!r}")


# ---------------------------------------------------------------------------
# cell construction and execution
# ---------------------------------------------------------------------------

def expand_cells(cfg: dict) -> list:
    ds = [cfg["problem.d"]]
    if cfg["sweep.d"]:
        ds = [int(v) for v in str(cfg["sweep.d"]).split(",")]
    mus = [None]
    if cfg["sweep.mu"]:
        mus = [float(v) for v in str(cfg["sweep.mu"]).split(",")]
    solvers_ = [cfg["solver.name"]]
    if cfg["sweep.solver"]:
        solvers_ = [v.strip() for v in str(cfg["sweep.solver"]).split(",")]
    cells = []
    for d, mu, sol in product(ds, mus, solvers_):
        cell = dict(cfg)
        cell["problem.d"] = d
        cell["solver.name"] = sol
        cell["_sweep_mu"] = mu
        cells.append(cell)
    n_runs = len(cells) * cfg["seeds"]
    if n_runs > CELL_CAP:
        raise HarnessConfigError(
            f"sweep expands to {n_runs} runs, above the cap of {CELL_CAP}")
    return cells


def _spectrum_for_cell(cell: dict) -> problems.SpectrumSpec:
    spec = parse_spectrum(cell["problem.spectrum"])
    mu = cell.get("_sweep_mu")
    if mu is not None:
        if spec.kind == "powerlaw_floor":
            spec = problems.SpectrumSpec.powerlaw_floor(spec.C, spec.beta, mu)
        elif spec.kind == "flat":
            spec = problems.SpectrumSpec.flat(mu)
        else:
            raise HarnessConfigError(
                "sweep.mu only applies to flat or powerlaw_floor spectra")
    return spec


def build_problem(cell: dict):
    kind = cell["problem.kind"]
    d = cell["problem.d"]
    if kind == "quadratic":
        return problems.make_quadratic(
            _spectrum_for_cell(cell), d, seed=cell["problem.seed"],
            rotate=cell["problem.rotate"], b_mode=cell["problem.b_mode"])
    if kind == "quartic":
        return problems.ConvexQuarticProblem(d, cell["problem.domain_radius"])
    if kind == "nonconvex":
        return problems.NonconvexTestProblem(
            np.ones(d), np.ones(d), cell["problem.domain_radius"])
    raise HarnessConfigError(f"unknown problem kind {kind!r}")


def build_x0(problem, cell: dict, run_seed: int) -> np.ndarray:
    mode = cell["x0.mode"]
    norm = cell["x0.norm"]
    d = problem.d
    if mode == "zero":
        return np.zeros(d)
    if mode == "gaussian":
        rng = np.random.Generator(np.random.Philox(
            key=np.array([run_seed, 0xB0], dtype=np.uint64)))
        v = rng.standard_normal(d)
        return norm * v / np.linalg.norm(v)
    if mode == "top_eig":
        return norm * problem.top_eigenvector()
    if mode == "balanced":
        # equal per-mode contribution to the initial gap
        z = 1.0 / np.sqrt(np.maximum(problem.eigenvalues, 1e-30))
        z *= norm / np.linalg.norm(z)
        return problem.from_eigenbasis(z)[0]
    raise HarnessConfigError(f"unknown x0 mode {mode!r}")


def run_cell(cell: dict, seed_index: int) -> dict:
    """Execute one (cell, seed) pair and return a CSV row dict."""
    run_seed = (cell["base_seed"] * 1_000_003 + seed_index) & 0x7FFFFFFF
    problem = build_problem(cell)
    x0 = build_x0(problem, cell, run_seed)
    gap_fn = problem.gap
    delta0 = gap_fn(x0)
    target = cell["solver.target_gap"] * delta0 if delta0 > 0 else None
    oracle = OracleHandle(problem)
    name = cell["solver.name"]

    is_quad = isinstance(problem, problems.QuadraticProblem)
    eigs = problem.hessian_spectrum() if is_quad else None
    tr_A = float(eigs.sum()) if is_quad else float("nan")
    mu = problem.mu if hasattr(problem, "mu") else float("nan")
    ed_half = effdim.ed_exact(eigs, 0.5) if is_quad else float("nan")

    if name == "rg":
        cfg = solvers.RgConfig(rho=cell["solver.rho"], tr_A=tr_A,
                               max_iters=cell["solver.max_iters"],
                               target_gap=target, seed=run_seed)
        trace = solvers.rg_rho(oracle, x0, cfg, gap_fn=gap_fn)
    elif name == "zhb":
        mu_cfg = cell["solver.mu"] if cell["solver.mu"] is not None else mu
        cfg = solvers.ZhbConfig(mu=mu_cfg, ed_half=ed_half,
                                c_step=cell["solver.c_step"],
                                rho=cell["solver.rho"],
                                max_iters=cell["solver.max_iters"],
                                target_gap=target, seed=run_seed,
                                repeats=cell["solver.repeats"])
        trace = solvers.zhb(oracle, x0, cfg, gap_fn=gap_fn)
    elif name == "zhb_reg":
        cfg = solvers.ZhbConfig(ed_half=ed_half if math.isfinite(ed_half) else 1.0,
                                c_step=cell["solver.c_step"],
                                rho=cell["solver.rho"],
                                max_iters=cell["solver.max_iters"],
                                target_gap=target, seed=run_seed)
        trace = solvers.zhb_regularized(oracle, x0, cell["solver.eps"],
                                        cell["solver.D"], cfg, gap_fn=gap_fn)
    elif name == "anpe":
        meta = problems.ProblemMeta(mu=getattr(problem, "mu", 0.0), L=problem.L,
                                    H=problem.H, Delta=delta0,
                                    D=cell["solver.D"])
        cfg = solvers.AnpeConfig(target_gap=target, seed=run_seed)
        trace = solvers.anpe_zo(oracle, x0, meta, cfg, gap_fn=gap_fn)
    elif name == "cubic":
        meta = problems.ProblemMeta(mu=0.0, L=problem.L, H=problem.H,
                                    Delta=max(delta0, 0.0), D=cell["solver.D"])
        cfg = solvers.CubicConfig(eps=cell["solver.eps"], seed=run_seed,
                                  domain_radius=cell["problem.domain_radius"])
        trace = solvers.cubic_zo(oracle, x0, meta, cfg, gap_fn=gap_fn)
    else:
        raise HarnessConfigError(f"unknown solver {name!r}")

    wall_ns = trace.records[-1].wall_ns if trace.records else 0
    return {
        "run_id": f"{name}-d{problem.d}-mu{_fmt(mu)}-s{seed_index}",
        "solver": name,
        "d": problem.d,
        "mu": _fmt(mu),
        "tr_A": _fmt(tr_A),
        "ed_half": _fmt(ed_half),
        "status": trace.status,
        "iters": trace.iters,
        "oracle_calls": trace.oracle_calls,
        "final_gap": _fmt(gap_fn(trace.x_out)),
        "wall_ns": wall_ns,
    }


def _fmt(v: float) -> str:
    return "%.17g" % float(v)


def _worker(args):
    cell, seed_index = args
    return run_cell(cell, seed_index)


def run_experiment(cfg: dict, parallel: bool = True) -> list:
    """Run all (cell, seed) pairs; rows are deterministic except wall_ns."""
    cells = expand_cells(cfg)
    jobs = [(cell, s) for cell in cells for s in range(cfg["seeds"])]
    n_workers = int(os.environ.get("ZO_THREADS", "0")) or (os.cpu_count() or 1)
    if parallel and n_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_worker, jobs))
    else:
        rows = [_worker(j) for j in jobs]
    rows.sort(key=lambda r: r["run_id"])
    return rows


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def write_csv(rows: list, path_or_buf) -> None:
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "w", newline="", encoding="utf-8") if own else path_or_buf
    try:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    finally:
        if own:
            fh.close()


def read_csv(path_or_buf) -> list:
    own = isinstance(path_or_buf, (str, os.PathLike))
    fh = open(path_or_buf, "r", newline="", encoding="utf-8") if own else path_or_buf
    try:
        return list(csv.DictReader(fh))
    finally:
        if own:
            fh.close()


def rows_to_text(rows: list) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def certify(problem, x, eps: float, delta: float) -> dict:
    """Check eps-optimality (when f* is known) and (eps, delta)-second-order
    stationarity against reference derivatives."""
    grad = problem.gradient(x)
    grad_norm = float(np.linalg.norm(grad))
    if isinstance(problem, problems.QuadraticProblem):
        min_eig = float(problem.hessian_spectrum().min())
    else:
        min_eig = float(np.linalg.eigvalsh(problem.hessian(x)).min())
    is_ssp = grad_norm <= eps and min_eig >= -delta
    is_eps_optimal = None
    if hasattr(problem, "gap"):
        try:
            is_eps_optimal = bool(problem.gap(x) <= eps)
        except problems.ProblemConfigError:
            is_eps_optimal = None
    return {"is_eps_optimal": is_eps_optimal, "is_ssp": bool(is_ssp),
            "grad_norm": grad_norm, "min_hessian_eig": min_eig}


# ---------------------------------------------------------------------------
# scaling fits
# ---------------------------------------------------------------------------

@dataclass
class ScalingReport:
    axis: str
    cells: list
    slope: float
    stderr: float


_AXES = {
    "d": lambda c: float(c["d"]),
    "ed_half": lambda c: float(c["ed_half"]),
    "inv_mu_sqrt": lambda c: 1.0 / math.sqrt(float(c["mu"])),
    "tr_over_mu": lambda c: float(c["tr_A"]) / float(c["mu"]),
}


def fit_scaling(rows: list, x_axis: str) -> ScalingReport:
    """Least-squares log-log slope of median oracle calls against an axis."""
    if x_axis not in _AXES:
        raise HarnessConfigError(f"unknown axis {x_axis!r}; choose from {sorted(_AXES)}")
    groups = {}
    for row in rows:
        key = (row["solver"], row["d"], row["mu"])
        groups.setdefault(key, []).append(row)
    cells = []
    for key, members in sorted(groups.items()):
        reached = [m for m in members if m["status"] == "TargetReached"]
        if len(reached) * 2 < len(members):
            continue
        calls = sorted(int(m["oracle_calls"]) for m in reached)
        median = calls[len(calls) // 2] if len(calls) % 2 else \
            0.5 * (calls[len(calls) // 2 - 1] + calls[len(calls) // 2])
        q1 = calls[len(calls) // 4]
        q3 = calls[(3 * len(calls)) // 4]
        cells.append({
            "solver": key[0], "d": int(key[1]), "mu": float(key[2]),
            "tr_A": float(members[0]["tr_A"]), "ed_half": float(members[0]["ed_half"]),
            "median_calls": float(median), "iqr": float(q3 - q1),
            "x": _AXES[x_axis]({"d": key[1], "mu": key[2],
                                "tr_A": members[0]["tr_A"],
                                "ed_half": members[0]["ed_half"]}),
        })
    xs = np.array([c["x"] for c in cells])
    if np.unique(xs).size < 3:
        raise HarnessConfigError("need at least 3 distinct axis values with data")
    ys = np.array([c["median_calls"] for c in cells])
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    n = lx.size
    if n > 2 and res.size:
        s2 = float(res[0]) / (n - 2)
        stderr = math.sqrt(s2 / float(((lx - lx.mean()) ** 2).sum()))
    else:
        stderr = 0.0
    return ScalingReport(axis=x_axis, cells=cells, slope=float(coef[0]),
                         stderr=stderr)


# ---------------------------------------------------------------------------
# moment validation
# ---------------------------------------------------------------------------

def validate_moments(d: int = 8, n_samples: int = 200_000, seed: int = 0) -> list:
    """Run the estimator diagnostics; returns machine-readable check results.

    With too few samples for a 3-sigma verdict the check is flagged as having
    insufficient precision instead of failing.
    """
    checks = []
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed) + np.uint64(3)))
    grad = rng.standard_normal(d)
    grad /= np.linalg.norm(grad)
    rep = estimators.moment_diagnostic(grad, np.eye(d), max(n_samples, 10_000), seed)
    tol = 4.0 * math.sqrt((d + 2) / max(n_samples, 10_000))
    sufficient = n_samples >= 50_000
    checks.append({
        "name": "unbiasedness",
        "passed": rep["mean_error"] <= tol,
        "insufficient_precision": not sufficient,
        "value": rep["mean_error"], "threshold": tol,
    })
    W = rng.standard_normal((d, d))
    M = W @ W.T / d
    rep = estimators.moment_diagnostic(grad, M, max(n_samples, 10_000), seed + 1)
    band = 0.05 if sufficient else 10.0 * rep["m_quadratic_stderr"]
    checks.append({
        "name": "mahalanobis_second_moment",
        "passed": abs(rep["m_quadratic_ratio"] - 1.0) <= band,
        "insufficient_precision": not sufficient,
        "value": rep["m_quadratic_ratio"], "threshold": band,
    })
    checks.append({
        "name": "mahalanobis_upper_bound",
        "passed": rep["empirical_quadratic"] <= rep["lemma3_bound"],
        "insufficient_precision": False,
        "value": rep["empirical_quadratic"], "threshold": rep["lemma3_bound"],
    })
    p = problems.make_quadratic(problems.SpectrumSpec.flat(1.0), min(d, 4), seed=seed)
    o = OracleHandle(p, noise="uniform", delta=0.01, seed=seed)
    x = rng.standard_normal(min(d, 4))
    rep = estimators.error_bound_check(o, p, x, 0.1, np.eye(min(d, 4)),
                                      max(n_samples // 4, 10_000), seed + 2)
    checks.append({
        "name": "noisy_estimator_error_bound",
        "passed": rep["ok"],
        "insufficient_precision": not sufficient,
        "value": rep["empirical"], "threshold": rep["bound"],
    })
    return checks
