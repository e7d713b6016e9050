# multiview/services/trainer.py

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize
from scipy.special import softmax

from multiview.core import MarginMatrix, MultiviewDataset, MvModel, VoteWeights
from multiview.errors import DataError, NumericalError, UsageError
from multiview.services.weak_learners import VoterPool, margin_matrix
from multiview.utils.bregman import QVector, objective

logger = logging.getLogger(__name__)

RHO_SOLVERS = ("exact_vertex", "entropic", "slsqp")
MONOTONE_ATOL = 1e-9
LAMBDA_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    """
    T: number of parallel-update iterations.
    epsilon: smoothing added to W+ and W- in the delta update; None means 1/(2m).
    rho_solver: exact_vertex | entropic | slsqp.
    rho_lambda: temperature of the entropic solver; None means mean(scores) + 1e-12.
    tolerance: stop early once an iteration lowers the objective by less than this (0 = off).
    line_search: backtrack along the proposed step so the objective never increases.
    """

    T: int = 2
    epsilon: Optional[float] = None
    rho_solver: str = "entropic"
    rho_lambda: Optional[float] = None
    seed: int = 0
    tolerance: float = 0.0
    line_search: bool = True
    max_halvings: int = 30
    n_jobs: int = 1

    def __post_init__(self):
        if int(self.T) < 1:
            raise UsageError(f"T must be >= 1, got {self.T}")
        if self.epsilon is not None and not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise UsageError(f"epsilon must be a finite number >= 0, got {self.epsilon}")
        if self.rho_solver not in RHO_SOLVERS:
            raise UsageError(f"rho_solver must be one of {', '.join(RHO_SOLVERS)}, got {self.rho_solver!r}")
        if self.rho_lambda is not None and not self.rho_lambda > 0:
            raise UsageError(f"rho_lambda must be > 0, got {self.rho_lambda}")
        if not self.tolerance >= 0:
            raise UsageError(f"tolerance must be >= 0, got {self.tolerance}")
        if int(self.max_halvings) < 0:
            raise UsageError(f"max_halvings must be >= 0, got {self.max_halvings}")

    def smoothing(self, m: int) -> float:
        return 1.0 / (2 * m) if self.epsilon is None else float(self.epsilon)

    def to_dict(self) -> dict:
        return {
            "T": self.T, "epsilon": self.epsilon, "rho_solver": self.rho_solver,
            "rho_lambda": self.rho_lambda, "seed": self.seed, "tolerance": self.tolerance,
            "line_search": self.line_search,
        }


@dataclass
class IterationRecord:
    t: int
    objective_before: float
    objective: float
    bound: float
    step: float
    q: list[float]
    w_plus: list[list[float]]
    w_minus: list[list[float]]
    delta: list[list[float]]
    view_scores: list[float]
    rho_proposed: list[float]
    rho: list[float]
    pi: list[list[float]]
    monotone: bool
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        # wall time stays out of the file so equal seeds give equal bytes
        payload = dict(self.__dict__)
        payload.pop("wall_time")
        return payload


@dataclass
class TrainTrace:
    """Per-iteration record of a training run; objectives are D_F(0 || q) = logistic sums."""

    initial_objective: float = math.nan
    epsilon: float = math.nan
    records: list[IterationRecord] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def objectives(self) -> list[float]:
        """D_F(0 || q^(1)), then the objective after every completed iteration."""
        return [self.initial_objective] + [r.objective for r in self.records]

    @property
    def final_objective(self) -> float:
        return self.objectives[-1]

    def is_monotone(self, atol: float = MONOTONE_ATOL) -> bool:
        values = self.objectives
        return all(b <= a + atol for a, b in zip(values, values[1:]))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True, allow_nan=False) + "\n" for r in self.records)

    def save(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_jsonl())
        return path


# ============================================================
# Building blocks
# ============================================================

def weight_stats(M_v: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    W+_j = sum of q_i over rows where (M_v)_ij = +1, W-_j over rows where it is -1.
    Column sums run in ascending row order.
    """
    M_v = np.asarray(M_v, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if M_v.ndim != 2 or M_v.shape[0] != q.size:
        raise DataError(f"margin block of shape {M_v.shape} does not match q of length {q.size}")
    weights = q[:, None]
    w_plus = np.where(M_v > 0, weights, 0.0).sum(axis=0)
    w_minus = np.where(M_v < 0, weights, 0.0).sum(axis=0)
    return w_plus, w_minus


def delta_update(w_plus, w_minus, epsilon: float):
    """delta = 1/2 ln((W+ + eps) / (W- + eps)), elementwise."""
    w_plus = np.asarray(w_plus, dtype=np.float64)
    w_minus = np.asarray(w_minus, dtype=np.float64)
    if np.any(w_plus < 0) or np.any(w_minus < 0):
        raise DataError("W+ and W- must be non-negative")
    if epsilon == 0 and (np.any(w_plus == 0) or np.any(w_minus == 0)):
        raise NumericalError("a voter has W+ = 0 or W- = 0; set epsilon > 0 to enable smoothing")
    delta = 0.5 * (np.log(w_plus + epsilon) - np.log(w_minus + epsilon))
    return float(delta) if delta.ndim == 0 else delta


def view_score(w_plus, w_minus) -> float:
    """sum_j (sqrt(W+_j) - sqrt(W-_j))^2: the guaranteed progress of one view."""
    return float(np.sum((np.sqrt(w_plus) - np.sqrt(w_minus)) ** 2))


def _project(rho: np.ndarray) -> np.ndarray:
    rho = np.clip(rho, 0.0, None)
    return rho / rho.sum()


def solve_rho(scores: Sequence[float], mode: str = "entropic", lam: Optional[float] = None) -> np.ndarray:
    """
    Minimise -sum_v rho_v scores_v over the simplex.

    exact_vertex: the objective is linear, so the optimum is the vertex of the
      best view (uniform over exact ties).
    entropic: adds lam * negative entropy; the minimiser is softmax(scores / lam).
      lam defaults to mean(scores) + 1e-12.
    slsqp: hands the linear problem to scipy's SLSQP and projects the answer
      back onto the simplex.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise DataError("scores must be a non-empty vector")
    if not np.all(np.isfinite(scores)) or np.any(scores < 0):
        raise NumericalError(f"view scores must be finite and >= 0, got {scores.tolist()}")
    V = scores.size
    if np.all(scores == 0):
        return np.full(V, 1.0 / V)

    if mode == "exact_vertex":
        best = scores == scores.max()
        return best / best.sum()
    if mode == "entropic":
        lam = float(scores.mean()) + LAMBDA_FLOOR if lam is None else float(lam)
        if not lam > 0:
            raise UsageError(f"entropic lambda must be > 0, got {lam}")
        return _project(softmax(scores / lam))
    if mode == "slsqp":
        result = minimize(
            lambda rho: -float(rho @ scores),
            x0=np.full(V, 1.0 / V),
            jac=lambda rho: -scores,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * V,
            constraints=[{"type": "eq", "fun": lambda rho: float(rho.sum()) - 1.0, "jac": lambda rho: np.ones(V)}],
        )
        if not result.success:
            logger.warning("[trainer] SLSQP did not converge (%s); using its last iterate", result.message)
        return _project(np.asarray(result.x, dtype=np.float64))
    raise UsageError(f"unknown rho solver {mode!r}")


def compute_A(rho_next: Sequence[float], scores: Sequence[float]) -> float:
    """A = -sum_v rho_v sum_j (sqrt(W+) - sqrt(W-))^2; never positive."""
    return -float(np.dot(np.asarray(rho_next, dtype=np.float64), np.asarray(scores, dtype=np.float64)))


def _view_update(block: np.ndarray, q: np.ndarray, epsilon: float):
    w_plus, w_minus = weight_stats(block, q)
    return w_plus, w_minus, delta_update(w_plus, w_minus, epsilon), view_score(w_plus, w_minus)


def _all_finite(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


# ============================================================
# Training loop
# ============================================================

def fit_margins(M: MarginMatrix, cfg: TrainConfig) -> tuple[VoteWeights, TrainTrace]:
    """
    Parallel-update minimisation of D_F(0 || q) over (Pi, rho).

    Start from rho = 1/V, pi_v = 1/n_v. Each iteration computes q from the
    current weights, W+/W- and delta for every voter (views in parallel),
    proposes pi + delta and a new rho from the view scores, then moves along
    that proposal. With line_search the step is halved until the objective
    does not increase (no move at all is the fallback); without it the full
    step is always taken.

    Returns the weights after the last completed iteration.
    """
    epsilon = cfg.smoothing(M.m)
    weights = VoteWeights.uniform(M.n_voters)
    trace = TrainTrace(epsilon=epsilon)
    current = objective(M, weights)
    trace.initial_objective = current
    workers = Parallel(n_jobs=cfg.n_jobs, prefer="threads")

    for t in range(1, cfg.T + 1):
        started = time.perf_counter()
        q = QVector.from_margins(M.vote_margins(weights))
        updates = workers(delayed(_view_update)(block, q.values, epsilon) for block in M.blocks)
        w_plus = [u[0] for u in updates]
        w_minus = [u[1] for u in updates]
        deltas = [u[2] for u in updates]
        scores = np.array([u[3] for u in updates])

        rho_proposed = solve_rho(scores, cfg.rho_solver, cfg.rho_lambda)
        bound = compute_A(rho_proposed, scores)

        step = 1.0
        halvings = cfg.max_halvings if cfg.line_search else 0
        while True:
            pi_next = tuple(p + step * d for p, d in zip(weights.pi, deltas))
            rho_next = _project((1.0 - step) * weights.rho + step * rho_proposed) if step < 1.0 else rho_proposed
            if not _all_finite(q.values, rho_next, *pi_next):
                raise NumericalError(f"non-finite weights at iteration {t}", trace=trace)
            candidate = VoteWeights(pi=pi_next, rho=rho_next)
            value = objective(M, candidate)
            if value <= current or halvings == 0:
                break
            step /= 2.0
            halvings -= 1

        if cfg.line_search and value > current:
            logger.warning("[trainer] iteration %d: no descent along the proposed step, keeping weights", t)
            step, candidate, value = 0.0, weights, current

        monotone = value <= current + MONOTONE_ATOL
        record = IterationRecord(
            t=t,
            objective_before=current,
            objective=value,
            bound=bound,
            step=step,
            q=q.values.tolist(),
            w_plus=[w.tolist() for w in w_plus],
            w_minus=[w.tolist() for w in w_minus],
            delta=[d.tolist() for d in deltas],
            view_scores=scores.tolist(),
            rho_proposed=rho_proposed.tolist(),
            rho=candidate.rho.tolist(),
            pi=[p.tolist() for p in candidate.pi],
            monotone=monotone,
            wall_time=time.perf_counter() - started,
        )
        trace.records.append(record)

        # the zero-step fallback above keeps searched runs monotone
        if not monotone:
            logger.warning("[trainer] iteration %d increased the objective: %.12g -> %.12g", t, current, value)

        logger.debug("[trainer] iteration %d/%d objective=%.12g step=%g rho=%s",
                     t, cfg.T, value, step, np.round(candidate.rho, 6).tolist())

        decrease = current - value
        weights, current = candidate, value
        if cfg.tolerance > 0 and decrease < cfg.tolerance:
            trace.stopped_early = True
            logger.info("[trainer] stopping after iteration %d: decrease %.3g < tolerance %.3g",
                        t, decrease, cfg.tolerance)
            break

    return weights, trace


def fit(data: MultiviewDataset, pool: VoterPool, cfg: TrainConfig) -> tuple[MvModel, TrainTrace]:
    """Train the view and voter weights of a majority vote over an already trained pool."""
    M = margin_matrix(pool, data)
    weights, trace = fit_margins(M, cfg)
    metadata = {
        **cfg.to_dict(),
        "epsilon_used": trace.epsilon,
        "iterations": len(trace.records),
        "final_objective": trace.final_objective,
        "depths": [list(d) for d in pool.depths],
        "m": data.m,
    }
    logger.info("[trainer] %d iteration(s), objective %.12g -> %.12g, rho=%s",
                len(trace.records), trace.initial_objective, trace.final_objective,
                np.round(weights.rho, 6).tolist())
    return MvModel(pools=pool, weights=weights, metadata=metadata), trace
