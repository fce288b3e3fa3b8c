"""Code vector sub-problem: l1-regularised quadratic solved by accelerated
proximal gradient descent.

The smooth part couples three residuals: a Gram-weighted reconstruction of
the task parameter through the decoder, the deviation of the code from the
encoder image of the parameter, and weighted deviations from each
representative code mapped through the decoder.  The code problem is
strongly convex (the encoder term contributes an identity block), so the
minimiser is unique regardless of initialisation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Representative:
    """A stored representative code with the task-side weights it carries."""

    code: np.ndarray          # p
    omega: np.ndarray         # d x d PSD, half-Hessian at the reconstructed point
    weight: float = 0.0       # assignment weight z_k in [0, 1]


@dataclass(frozen=True)
class CodeProblem:
    """Inputs of one code solve, with the decoder held fixed."""

    w: np.ndarray             # d, single-task parameter
    omega: np.ndarray         # d x d PSD
    decoder: np.ndarray       # d x p
    encoder_image: np.ndarray  # p, phi(L w)
    reps: tuple[Representative, ...] = ()
    lambda1: float = 0.0
    lambda2: float = 0.0

    def __post_init__(self):
        d, p = self.decoder.shape
        if self.w.shape != (d,) or self.omega.shape != (d, d):
            raise ValueError("w/omega dimensions do not match the decoder")
        if self.encoder_image.shape != (p,):
            raise ValueError("encoder image length does not match the decoder width")
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be >= 0")
        for rep in self.reps:
            if rep.code.shape != (p,) or rep.omega.shape != (d, d):
                raise ValueError("representative dimensions do not match the decoder")
            if not 0.0 <= rep.weight <= 1.0 + 1e-8:
                raise ValueError("representative weights must lie in [0, 1]")
        object.__setattr__(self, "reps", tuple(self.reps))

    @property
    def code_len(self) -> int:
        return self.decoder.shape[1]


def soft_threshold(v: np.ndarray, tau: float) -> np.ndarray:
    """Proximal map of tau * ||.||_1: shrink each entry toward zero by tau."""
    if tau < 0:
        raise ValueError("tau must be >= 0")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def smooth_objective(prob: CodeProblem, s: np.ndarray) -> float:
    """Value of the smooth part at s (everything except the l1 penalty)."""
    D = prob.decoder
    r = D @ s - prob.w
    val = float(r @ (prob.omega @ r))
    e = s - prob.encoder_image
    val += float(e @ e)
    if prob.lambda2 > 0:
        for rep in prob.reps:
            dr = D @ (s - rep.code)
            val += prob.lambda2 * rep.weight * float(dr @ (rep.omega @ dr))
    return val


def smooth_gradient(prob: CodeProblem, s: np.ndarray) -> np.ndarray:
    """Gradient of the smooth part at s."""
    s = np.asarray(s, dtype=float)
    if s.shape != (prob.code_len,):
        raise ValueError(f"code has shape {s.shape}, expected ({prob.code_len},)")
    D = prob.decoder
    grad = 2.0 * (D.T @ (prob.omega @ (D @ s - prob.w)))
    grad += 2.0 * (s - prob.encoder_image)
    if prob.lambda2 > 0:
        for rep in prob.reps:
            grad += 2.0 * prob.lambda2 * rep.weight * (D.T @ (rep.omega @ (D @ (s - rep.code))))
    return grad


def composite_objective(prob: CodeProblem, s: np.ndarray) -> float:
    return smooth_objective(prob, s) + prob.lambda1 * float(np.abs(s).sum())


def _quadratic_form(prob: CodeProblem):
    """Collapse the smooth part to s'Gs - 2h's + c0 for cheap iterations."""
    D = prob.decoder
    p = prob.code_len
    G = D.T @ prob.omega @ D + np.eye(p)
    h = D.T @ (prob.omega @ prob.w) + prob.encoder_image
    c0 = float(prob.w @ (prob.omega @ prob.w)) + float(prob.encoder_image @ prob.encoder_image)
    if prob.lambda2 > 0:
        for rep in prob.reps:
            B = D.T @ rep.omega @ D
            coef = prob.lambda2 * rep.weight
            G += coef * B
            Bs = B @ rep.code
            h += coef * Bs
            c0 += coef * float(rep.code @ Bs)
    G = (G + G.T) / 2
    return G, h, c0


def _name_nonfinite_term(prob: CodeProblem, s: np.ndarray) -> str:
    D = prob.decoder
    r = D @ s - prob.w
    if not np.isfinite(r @ (prob.omega @ r)):
        return "decoder reconstruction term"
    e = s - prob.encoder_image
    if not np.isfinite(e @ e):
        return "encoder coupling term"
    for k, rep in enumerate(prob.reps):
        dr = D @ (s - rep.code)
        if not np.isfinite(dr @ (rep.omega @ dr)):
            return f"representative term k={k}"
    return "l1 term"


def encode_task(prob: CodeProblem, tol: float = 1e-6, max_iter: int = 5000,
                init: np.ndarray | None = None,
                trace_out: list | None = None) -> np.ndarray:
    """Minimise the composite code objective by monotone accelerated
    proximal gradient descent with a halving line search.

    Starts from the encoder image (or `init`), keeps the accepted
    objective non-increasing, and stops when the relative objective
    change falls below `tol` or `max_iter` iterations are reached.  The
    objective test is paired with a prox-gradient residual test at the
    same `tol`: the smooth part is 2-strongly convex (the encoder term
    contributes an identity block), so the residual norm bounds the
    distance to the unique minimiser and certifies coordinate accuracy
    the objective alone cannot resolve.  `trace_out`, when given,
    collects the accepted objective values.
    """
    G, h, c0 = _quadratic_form(prob)
    lam1 = prob.lambda1

    def f(s):
        return float(s @ (G @ s)) - 2.0 * float(h @ s) + c0

    def F(s):
        return f(s) + lam1 * float(np.abs(s).sum())

    def grad_f(s):
        return 2.0 * (G @ s - h)

    x = (prob.encoder_image if init is None else np.asarray(init, dtype=float))
    x = x.astype(float).copy()
    if x.shape != (prob.code_len,):
        raise ValueError("init has the wrong length")
    y = x.copy()
    Fx = F(x)
    if trace_out is not None:
        trace_out.append(Fx)
    if not np.isfinite(Fx):
        raise FloatingPointError(
            f"non-finite code objective at the start ({_name_nonfinite_term(prob, x)})"
        )
    t = 1.0
    step = 1.0
    for _ in range(max_iter):
        gy = grad_f(y)
        fy = f(y)
        while True:
            cand = soft_threshold(y - step * gy, step * lam1)
            diff = cand - y
            bound = fy + float(gy @ diff) + float(diff @ diff) / (2 * step)
            fcand = f(cand)
            if fcand <= bound + 1e-12 * max(1.0, abs(bound)) or step < 1e-18:
                break
            step /= 2
        Fcand = fcand + lam1 * float(np.abs(cand).sum())
        if not np.isfinite(Fcand):
            raise FloatingPointError(
                f"non-finite code objective ({_name_nonfinite_term(prob, cand)})"
            )
        if Fcand <= Fx:
            rel_change = abs(Fx - Fcand) / max(abs(Fx), 1e-12)
            residual = float(np.abs(y - cand).max()) / step
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            y = cand + ((t - 1.0) / t_next) * (cand - x)
            x, Fx, t = cand, Fcand, t_next
            if trace_out is not None:
                trace_out.append(Fx)
            if rel_change < tol and residual <= tol:
                break
        else:
            # acceleration overshot: restart momentum from the best point
            if float(np.linalg.norm(cand - x)) <= 1e-15 * (1.0 + float(np.linalg.norm(x))):
                break
            t = 1.0
            y = x.copy()
    return x
