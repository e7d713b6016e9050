"""
Binary-entropy Bregman machinery behind the trainer.

With F(p) = sum p_i ln p_i + (1 - p_i) ln(1 - p_i), the divergence D_F is a
sum of per-coordinate binary KL terms, and D_F(0 || q) with
q_i = sigma(margin_i) equals the logistic loss sum ln(1 + exp(-margin_i)).
`objective` evaluates both sides and refuses to return if they disagree.

Conventions: natural logs, 0 ln 0 = 0, sigma(z) = 1 / (1 + e^z) (decreasing).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy.special import expit

from multiview.core import MarginMatrix, VoteWeights
from multiview.errors import DataError, NumericalError

BOUNDARY_CLAMP = 1e-300
OBJECTIVE_RTOL = 1e-9


@dataclass
class Diagnostics:
    """Counts log arguments that were lifted to BOUNDARY_CLAMP."""
    clamped: int = 0


def sigma(z: Any):
    """1 / (1 + e^z), evaluated without overflow."""
    return expit(-np.asarray(z, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class QVector:
    """
    A point of [0, 1]^m. `complement` holds 1 - q computed independently, so
    values close to 1 keep their precision when fed to logarithms.

    Built from margins, it also carries ln q and ln(1 - q) evaluated in log
    space; those stay exact where q or 1 - q underflows.
    """

    values: np.ndarray
    complement: np.ndarray
    log_values: Optional[np.ndarray] = None
    log_complement: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        complement = np.array(self.complement, dtype=np.float64, copy=True).ravel()
        if values.shape != complement.shape:
            raise DataError("q and its complement differ in length")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(complement))):
            raise NumericalError("q contains non-finite values")
        if np.any(values < 0) or np.any(values > 1) or np.any(complement < 0) or np.any(complement > 1):
            raise DataError("q must lie in [0, 1]^m")
        for name, array in (("values", values), ("complement", complement)):
            array.flags.writeable = False
            object.__setattr__(self, name, array)

        if (self.log_values is None) != (self.log_complement is None):
            raise DataError("ln q and ln(1 - q) must be given together")
        if self.log_values is not None:
            for name in ("log_values", "log_complement"):
                logs = np.array(getattr(self, name), dtype=np.float64, copy=True).ravel()
                if logs.shape != values.shape:
                    raise DataError(f"{name} has {logs.size} coordinates, q has {values.size}")
                if np.any(np.isnan(logs)) or np.any(logs > 0):
                    raise NumericalError(f"{name} must be <= 0")
                logs.flags.writeable = False
                object.__setattr__(self, name, logs)

    @classmethod
    def from_values(cls, values: Any) -> "QVector":
        q = np.asarray(values, dtype=np.float64)
        return cls(values=q, complement=1.0 - q)

    @classmethod
    def from_margins(cls, margins: Any) -> "QVector":
        z = np.asarray(margins, dtype=np.float64)
        # ln sigma(z) = -ln(1 + e^z), ln(1 - sigma(z)) = -ln(1 + e^-z)
        return cls(
            values=sigma(z),
            complement=sigma(-z),
            log_values=-np.logaddexp(0.0, z),
            log_complement=-np.logaddexp(0.0, -z),
        )

    @classmethod
    def half(cls, m: int) -> "QVector":
        """q0 = 1/2 * 1_m."""
        return cls.from_values(np.full(m, 0.5))

    def __len__(self) -> int:
        return int(self.values.size)


def _as_q(q: Any) -> QVector:
    return q if isinstance(q, QVector) else QVector.from_values(q)


def _log(x: np.ndarray, other: np.ndarray, diagnostics: Optional[Diagnostics]) -> np.ndarray:
    """ln(x) for x in [0, 1], where other = 1 - x; uses log1p(-other) when x > 1/2."""
    tiny = (x > 0.0) & (x < BOUNDARY_CLAMP)
    if diagnostics is not None:
        diagnostics.clamped += int(np.count_nonzero(tiny))
    lifted = np.where(tiny, BOUNDARY_CLAMP, x)
    with np.errstate(divide="ignore"):
        return np.where(x <= 0.5, np.log(lifted), np.log1p(-other))


def bregman_div(p: Any, q: Any, *, on_infinite: str = "inf", diagnostics: Optional[Diagnostics] = None) -> float:
    """
    D_F(p || q) = sum p_i ln(p_i / q_i) + (1 - p_i) ln((1 - p_i) / (1 - q_i)).

    Terms with a zero weight vanish (0 ln 0 = 0). A nonzero weight against a
    q coordinate of exactly 0 or 1 makes the divergence infinite: returned as
    math.inf, or raised as NumericalError when on_infinite="raise".

    When q carries its own logarithms (QVector.from_margins) those are used
    as is, and the BOUNDARY_CLAMP lift only applies to raw q values.
    """
    if on_infinite not in ("inf", "raise"):
        raise ValueError(f"on_infinite must be 'inf' or 'raise', got {on_infinite!r}")
    p, q = _as_q(p), _as_q(q)
    if len(p) != len(q):
        raise DataError(f"p has {len(p)} coordinates, q has {len(q)}")

    ln_p = _log(p.values, p.complement, None)
    ln_1mp = _log(p.complement, p.values, None)
    if q.log_values is not None:
        ln_q, ln_1mq = q.log_values, q.log_complement
    else:
        ln_q = _log(q.values, q.complement, diagnostics)
        ln_1mq = _log(q.complement, q.values, diagnostics)

    with np.errstate(invalid="ignore"):
        first = np.where(p.values > 0.0, p.values * (ln_p - ln_q), 0.0)
        second = np.where(p.complement > 0.0, p.complement * (ln_1mp - ln_1mq), 0.0)
    total = float(np.sum(first + second))

    if not math.isfinite(total):
        if on_infinite == "raise":
            raise NumericalError("D_F(p || q) is infinite: q hits the boundary where p has mass")
        return math.inf
    return total


def legendre_update(q: Any, r: Any) -> QVector:
    """
    L_F(q, r)_i = q_i e^{-r_i} / (1 - q_i + q_i e^{-r_i}).

    Evaluated with e^{-|r|} only, so large |r| cannot overflow; r = 0 returns
    the coordinate unchanged.
    """
    q = _as_q(q)
    r = np.asarray(r, dtype=np.float64).ravel()
    if r.shape != q.values.shape:
        raise DataError(f"r has {r.size} coordinates, q has {len(q)}")
    if not np.all(np.isfinite(r)):
        raise NumericalError("r contains non-finite values")

    t = np.exp(-np.abs(r))
    shrink = r >= 0.0
    # r >= 0: numerator q t, r < 0: numerator q (both scaled by e^{min(0, r)})
    num = np.where(shrink, q.values * t, q.values)
    num_c = np.where(shrink, q.complement, q.complement * t)
    den = num + num_c

    values = np.where(r == 0.0, q.values, num / den)
    complement = np.where(r == 0.0, q.complement, num_c / den)
    return QVector(values=values, complement=complement)


def q_from_weights(M: MarginMatrix, w: VoteWeights) -> QVector:
    """q_i = sigma(sum_v rho_v (M_v pi_v)_i); y_i is already folded into M_v."""
    return QVector.from_margins(M.vote_margins(w))


def logistic_sum(margins: Any) -> float:
    """sum ln(1 + exp(-z_i)) without the a/m factor of the risk."""
    return float(np.sum(np.logaddexp(0.0, -np.asarray(margins, dtype=np.float64))))


def objective(M: MarginMatrix, w: VoteWeights) -> float:
    """
    The training objective, computed twice: as D_F(0 || q) and as the direct
    logistic sum. Returns the latter; disagreement beyond OBJECTIVE_RTOL is an
    internal-consistency failure.
    """
    margins = M.vote_margins(w)
    direct = logistic_sum(margins)
    divergence = bregman_div(np.zeros(M.m), QVector.from_margins(margins))
    if not math.isclose(divergence, direct, rel_tol=OBJECTIVE_RTOL, abs_tol=0.0):
        raise NumericalError(f"D_F(0 || q) = {divergence!r} disagrees with the logistic sum {direct!r}")
    return direct
