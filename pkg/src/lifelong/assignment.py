"""Soft assignment of a task to representative models plus a virtual
outlier slot.

The assignment minimises a linear cost over the probability simplex with
an l1 shaping term, solved by ADMM: an unconstrained soft-threshold step,
a Euclidean projection onto the simplex, and a dual ascent step.  The
projected iterate is returned, so the output is always feasible.  The
cost of the virtual slot is the outlier weight derived from the ratio of
the nearest representative distance to the total distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sparse_code import soft_threshold
from .tasks import ConvergenceError

OUTLIER_WEIGHT_CAP = 1e6


@dataclass(frozen=True)
class Assignment:
    """Simplex weights over the known representatives plus the outlier slot."""

    z: np.ndarray
    admm_iters: int
    primal_residual: float

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.ndim != 1 or z.size < 1:
            raise ValueError("assignment must be a non-empty vector")
        if z.min() < -1e-8 or z.max() > 1 + 1e-8:
            raise ValueError("assignment entries must lie in [0, 1]")
        if abs(z.sum() - 1.0) > 1e-6:
            raise ValueError("assignment entries must sum to 1")
        object.__setattr__(self, "z", z)

    @property
    def outlier_probability(self) -> float:
        return float(self.z[-1])

    @property
    def argmax_slot(self) -> int:
        return int(np.argmax(self.z))

    @property
    def picks_outlier(self) -> bool:
        # ties resolve to the first maximal slot, i.e. away from the outlier
        return self.argmax_slot == self.z.size - 1


def representative_distances(decoder: np.ndarray, s_t: np.ndarray,
                             reps: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Squared distances ||D s_k - D s_t||^2 under each representative's
    half-Hessian metric."""
    if len(reps) < 1:
        raise ValueError("need at least one representative")
    d, p = decoder.shape
    s_t = np.asarray(s_t, dtype=float)
    if s_t.shape != (p,):
        raise ValueError(f"code has shape {s_t.shape}, expected ({p},)")
    out = np.empty(len(reps))
    for i, (s_k, omega_k) in enumerate(reps):
        if s_k.shape != (p,) or omega_k.shape != (d, d):
            raise ValueError(f"representative {i} dimensions do not match the decoder")
        diff = decoder @ (s_k - s_t)
        out[i] = max(float(diff @ (omega_k @ diff)), 0.0)
    return out


def outlier_weight(distances: np.ndarray, gamma: float = 1.0,
                   cap: float = OUTLIER_WEIGHT_CAP) -> float:
    """Cost of the virtual slot: -gamma * log(min(d) / sum(d)).

    All-zero distances mean the task is perfectly represented already, so
    the virtual slot gets the cap and is never selected.
    """
    distances = np.asarray(distances, dtype=float)
    if distances.size < 1:
        raise ValueError("need at least one distance")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if distances.min() < 0:
        raise ValueError("distances must be >= 0")
    total = float(distances.sum())
    if total == 0.0:
        return cap
    return float(-gamma * np.log(distances.min() / total))


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {z : z >= 0, sum z = 1} by sorting."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise ValueError("input must be a non-empty vector")
    if not np.isfinite(v).all():
        raise ValueError("input has non-finite entries")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def solve_assignment(distances: np.ndarray, d0: float, lambda2: float,
                     alpha: float, beta: float = 1.0, rho: float = 1.0,
                     max_iter: int = 2000, tol: float = 1e-6) -> Assignment:
    """Minimise lambda2 * <[distances, d0], z> + alpha * ||z||_1 over the
    simplex by ADMM and return the projected (feasible) iterate."""
    distances = np.asarray(distances, dtype=float)
    if distances.min() < 0 or d0 < 0:
        raise ValueError("costs must be >= 0")
    if lambda2 < 0 or alpha < 0:
        raise ValueError("lambda2 and alpha must be >= 0")
    if beta <= 0 or rho <= 0:
        raise ValueError("beta and rho must be > 0")
    cost = np.append(distances, d0)
    n = cost.size
    J = np.full(n, 1.0 / n)
    U = np.zeros(n)
    residual = 0.0
    iters = 0
    for iters in range(1, max_iter + 1):
        z = soft_threshold(J - U / beta, alpha / beta)
        J_prev = J
        J = project_simplex(z + (U - lambda2 * cost) / beta)
        U = U + rho * (z - J)
        residual = float(np.linalg.norm(z - J))
        # the iterates can drift toward the optimum together, so a small
        # gap alone does not certify optimality; require the dual
        # residual (scaled step of the projected block) to settle too
        dual_residual = beta * float(np.linalg.norm(J - J_prev))
        if residual <= tol and dual_residual <= tol:
            break
    if residual > 1e-3:
        raise ConvergenceError(
            f"assignment ADMM stalled at primal residual {residual:.3e} after "
            f"{max_iter} iterations; check beta/rho"
        )
    return Assignment(z=J, admm_iters=iters, primal_residual=residual)
