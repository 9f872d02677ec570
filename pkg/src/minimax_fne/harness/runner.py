"""Run configuration, dispatch to the solvers, and trajectory/report output."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import InvalidInputError
from ..measures import is_eps_fne, stationarity
from ..ncc import FW, PGD, NccConfig, ncc_iteration_counts, solve_ncc
from ..oracle import Trajectory
from ..pl_gda import PlConfig, pl_iteration_counts, solve_pl
from ..problems import make_problem
from .diagnostics import estimate_rate_constants

logger = logging.getLogger(__name__)

__all__ = ["RunConfig", "RunReport", "run", "run_suite", "write_trajectory_csv",
           "CSV_COLUMNS", "config_hash"]

CSV_COLUMNS = ["iter", "x_measure", "y_measure", "f_value", "g_lambda_value", "step_norm", "wall_ns"]


@dataclass
class RunConfig:
    problem: dict
    solver: str = "ncc"
    mode: str = "practical"
    eps: float = 1e-3
    outer: str = PGD
    K: Optional[int] = None
    T: Optional[int] = None
    lam: Optional[float] = None
    N: Optional[int] = None
    eta: Optional[float] = None
    eta_theta: Optional[float] = None
    seed: int = 0
    out_dir: Optional[str] = None
    measure_stride: int = 1
    stop_at_eps: bool = True
    warm_start: bool = True
    exact_inner: bool = False
    theta0: Optional[list] = None
    alpha0: Optional[list] = None
    max_outer: int = 100_000
    record_wall_time: bool = False

    def validate(self) -> None:
        if self.solver not in ("pl", "ncc"):
            raise InvalidInputError(f"solver must be 'pl' or 'ncc', got {self.solver!r}")
        if self.mode not in ("theory", "practical"):
            raise InvalidInputError(f"mode must be 'theory' or 'practical', got {self.mode!r}")
        if self.outer not in (PGD, FW):
            raise InvalidInputError(f"outer must be 'pgd' or 'fw', got {self.outer!r}")
        if not self.eps > 0:
            raise InvalidInputError("eps must be positive")
        if self.mode == "theory" and not 0 < self.eps < 1:
            raise InvalidInputError(f"theory mode needs eps in (0, 1), got {self.eps}")
        if self.measure_stride < 1:
            raise InvalidInputError("measure_stride must be >= 1")
        if not isinstance(self.problem, dict) or "name" not in self.problem:
            raise InvalidInputError("problem must be a selector object with a 'name'")
        if self.out_dir is not None:
            Path(self.out_dir).mkdir(parents=True, exist_ok=True)
            if not os.access(self.out_dir, os.W_OK):
                raise InvalidInputError(f"output directory {self.out_dir} is not writable")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON form of the config, output location excluded."""
    data = config.to_dict()
    data.pop("out_dir", None)
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunReport:
    problem: str
    solver: str
    mode: str
    eps: float
    constants: dict
    T: int
    K: int
    iterations: int
    best_iter: Optional[int]
    best_theta: Optional[list]
    best_alpha: Optional[list]
    best_x: Optional[float]
    best_y: Optional[float]
    verdict: bool
    wall_time_s: float
    config_hash: str
    seed: int
    status: str = "ok"
    error: Optional[str] = None
    warnings: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_trajectory_csv(traj: Trajectory, path, record_wall_time: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in traj.records:
            w.writerow([
                r.iter, _fmt(r.x_measure), _fmt(r.y_measure), _fmt(r.f_value),
                _fmt(r.g_lambda_value), _fmt(r.step_norm),
                r.wall_time_ns if record_wall_time else "",
            ])


def _resolve(config: RunConfig, problem, theta0, alpha0, notes):
    """Return the solver config plus the constants snapshot."""
    if config.solver == "pl":
        if config.mode == "theory":
            a0 = np.zeros(problem.alpha_dim) if alpha0 is None else alpha0
            consts = estimate_rate_constants(problem, "pl", config.eps,
                                             _initial_theta(problem, theta0), a0, seed=config.seed)
            if consts.rho == 0:
                # mu == l22: one inner step of size 1/l22 already solves the inner problem.
                T = pl_iteration_counts(
                    dataclasses.replace(consts, rho=0.5), config.eps).T
                K = 1
            else:
                T, K = pl_iteration_counts(consts, config.eps)
            consts_d = consts.to_dict()
        else:
            K = 10 if config.K is None else config.K
            T = 1000 if config.T is None else config.T
            consts_d = {}
        if config.K is not None:
            K = config.K
        if config.T is not None:
            T = config.T
        T = _cap(T, config.max_outer, notes)
        pc = PlConfig.for_problem(problem, config.eps, K, T, warm_start=config.warm_start,
                                  theta0=theta0, alpha0=alpha0,
                                  measure_stride=config.measure_stride,
                                  stop_at_eps=config.stop_at_eps and config.mode == "practical")
        if config.eta is not None:
            pc.eta1 = config.eta
        if config.eta_theta is not None:
            pc.eta2 = config.eta_theta
        return pc, consts_d

    nc = NccConfig.for_problem(problem, config.eps, K=config.K, T=config.T or 1000,
                               lam=config.lam, outer_rule=config.outer, theta0=theta0,
                               alpha0=alpha0, outer_step=config.eta_theta,
                               exact_inner=config.exact_inner,
                               measure_stride=config.measure_stride,
                               stop_at_eps=config.stop_at_eps and config.mode == "practical",
                               seed=config.seed)
    consts_d = {"lam": nc.lam, "N": nc.N, "eta": nc.eta}
    if config.mode == "theory":
        consts = estimate_rate_constants(problem, "ncc", config.eps, _initial_theta(problem, theta0),
                                         alpha0 if alpha0 is not None else
                                         problem.alpha_set.project(problem.alpha_set.centroid()),
                                         lam=nc.lam, seed=config.seed)
        counts = ncc_iteration_counts(consts, config.eps, config.outer)
        consts_d.update(consts.to_dict())
        if config.lam is None:
            nc.lam = counts.lam
        nc.K = counts.K if config.K is None else config.K
        nc.T = counts.T if config.T is None else config.T
        nc.L_tilde = consts.L_tilde if config.outer == FW else None
    if config.N is not None:
        nc.N = config.N
    if config.eta is not None:
        nc.eta = config.eta
    nc.K = max(nc.K, nc.N)
    nc.T = _cap(nc.T, config.max_outer, notes)
    return nc, consts_d


def _initial_theta(problem, theta0):
    return problem.theta_set.project(problem.theta_set.centroid() if theta0 is None else theta0)


def _cap(T, cap, notes):
    if T > cap:
        notes.append(f"outer iteration count {T} capped at max_outer={cap}")
        return cap
    return T


def run(config: RunConfig) -> RunReport:
    """Solve one configured problem and write ``trajectory.csv`` and ``report.json``."""
    config.validate()
    problem = make_problem(config.problem)
    theta0 = None if config.theta0 is None else np.asarray(config.theta0, dtype=float)
    alpha0 = None if config.alpha0 is None else np.asarray(config.alpha0, dtype=float)
    notes: list = []
    started = time.perf_counter()
    traj = Trajectory()
    status, error = "ok", None

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        solver_cfg, consts = _resolve(config, problem, theta0, alpha0, notes)
        try:
            if config.solver == "pl":
                solve_pl(problem, solver_cfg, trajectory=traj)
            else:
                solve_ncc(problem, solver_cfg, trajectory=traj)
        except Exception as exc:  # flushed below, then re-raised
            status, error = "error", f"{type(exc).__name__}: {exc}"
            failure = exc
        else:
            failure = None
    notes.extend(str(w.message) for w in caught)
    wall = time.perf_counter() - started

    best = traj.best if traj.records else None
    verdict = False
    if best is not None:
        # Recompute from the logged point so the verdict cannot drift from the record.
        verdict = is_eps_fne(stationarity(problem, best.theta, best.alpha), config.eps)
    report = RunReport(
        problem=problem.name,
        solver=config.solver,
        mode=config.mode,
        eps=config.eps,
        constants=_jsonable(consts),
        T=solver_cfg.T,
        K=solver_cfg.K,
        iterations=(traj.records[-1].iter + 1) if traj.records else 0,
        best_iter=None if best is None else best.iter,
        best_theta=None if best is None else best.theta.tolist(),
        best_alpha=None if best is None else best.alpha.tolist(),
        best_x=None if best is None else best.x_measure,
        best_y=None if best is None else best.y_measure,
        verdict=bool(verdict),
        wall_time_s=wall,
        config_hash=config_hash(config),
        seed=config.seed,
        status=status,
        error=error,
        warnings=notes,
        extra=_jsonable(traj.info),
    )
    if config.out_dir is not None:
        out = Path(config.out_dir)
        write_trajectory_csv(traj, out / "trajectory.csv", config.record_wall_time)
        with open(out / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if failure is not None:
        raise RuntimeError(f"run {report.config_hash[:12]} failed: {error}") from failure
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _run_entry(data: dict) -> dict:
    try:
        return run(RunConfig.from_dict(data)).to_dict()
    except Exception as exc:
        return {"status": "error", "error": f"{type(exc).__name__}: {exc}",
                "config": data}


def run_suite(suite: dict, out_dir=None, jobs: int = 1) -> list:
    """Run every config in ``suite["runs"]``; each run writes to its own subdirectory."""
    runs = suite.get("runs")
    if not isinstance(runs, list) or not runs:
        raise InvalidInputError("suite must contain a non-empty 'runs' list")
    base = Path(out_dir or suite.get("out_dir", "bench_out"))
    entries = []
    for i, r in enumerate(runs):
        r = dict(r)
        r["out_dir"] = str(base / r.pop("name", f"run_{i:03d}"))
        entries.append(r)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_entry, entries))
    else:
        results = [_run_entry(e) for e in entries]
    base.mkdir(parents=True, exist_ok=True)
    with open(base / "summary.json", "w") as fh:
        json.dump(results, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return results
