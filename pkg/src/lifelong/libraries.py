"""The two knowledge libraries and their closed-form online updates.

The feature-learning library is an encoder/decoder pair over task
parameters.  Both halves are refit from running sufficient statistics
each time a task arrives: the decoder from a Kronecker-structured normal
system accumulated in (acc_A, acc_b), the encoder from per-row least
squares accumulated in (acc_M, acc_C).  Columns are kept inside the unit
l2 ball by rescaling after each solve.

The model library is an append-only list of representative codes; codes
never change after admission, so reverse transfer flows only through the
decoder refits.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .assignment import Assignment


@dataclass(frozen=True)
class FeatureLibrary:
    """Encoder/decoder pair plus the accumulators backing their refits."""

    decoder: np.ndarray   # d x p
    encoder: np.ndarray   # p x d
    acc_A: np.ndarray     # dp x dp
    acc_b: np.ndarray     # dp
    acc_M: np.ndarray     # p x d
    acc_C: np.ndarray     # d x d
    tasks_seen: int

    @property
    def d(self) -> int:
        return self.decoder.shape[0]

    @property
    def p(self) -> int:
        return self.decoder.shape[1]


@dataclass(frozen=True)
class RepresentativeRecord:
    code: np.ndarray
    source_task: str
    admitted_at: int


@dataclass(frozen=True)
class ModelLibrary:
    reps: tuple[RepresentativeRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.reps)

    def codes(self) -> list[np.ndarray]:
        return [r.code for r in self.reps]


def init_libraries(d: int, p: int, seed: int) -> FeatureLibrary:
    """Gaussian encoder/decoder with unit-norm columns, zeroed accumulators."""
    if not (1 <= p <= d):
        raise ValueError(f"need 1 <= p <= d, got p={p}, d={d}")
    rng = np.random.default_rng(seed)
    decoder = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, p))
    decoder /= np.linalg.norm(decoder, axis=0, keepdims=True)
    encoder = rng.normal(0.0, 1.0 / np.sqrt(d), size=(p, d))
    encoder /= np.linalg.norm(encoder, axis=0, keepdims=True)
    dp = d * p
    return FeatureLibrary(
        decoder=decoder,
        encoder=encoder,
        acc_A=np.zeros((dp, dp)),
        acc_b=np.zeros(dp),
        acc_M=np.zeros((p, d)),
        acc_C=np.zeros((d, d)),
        tasks_seen=0,
    )


def _clip_columns(mat: np.ndarray) -> np.ndarray:
    """Rescale columns with norm > 1 back onto the unit sphere."""
    norms = np.linalg.norm(mat, axis=0)
    scale = np.where(norms > 1.0, norms, 1.0)
    return mat / scale


def _solve_spd(system: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    """Cholesky solve for the symmetric PSD library systems; a failed
    factorisation is the singularity signal for the mu = 0 case."""
    try:
        chol = np.linalg.cholesky(system)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError(
            f"{what} system is singular; rerun with ridge_mu > 0"
        ) from None
    return np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))


def decoder_contribution(s_t: np.ndarray, omega: np.ndarray,
                         reps_used: Sequence[tuple[np.ndarray, np.ndarray, float]],
                         lambda2: float) -> np.ndarray:
    """One task's additive contribution to acc_A.

    Column-major vectorisation throughout: vec(Omega D s s') =
    (s s' (x) Omega) vec(D), so acc_A collects s s' (x) Omega plus the
    weighted representative-difference terms; the matching acc_b
    contribution is vec(Omega w s') = s (x) (Omega w).
    """
    dA = np.kron(np.outer(s_t, s_t), omega)
    if lambda2 > 0:
        for s_k, omega_k, z_k in reps_used:
            if z_k == 0.0:
                continue
            diff = s_k - s_t
            dA += lambda2 * z_k * np.kron(np.outer(diff, diff), omega_k)
    return dA


def update_decoder(lib: FeatureLibrary, s_t: np.ndarray, omega: np.ndarray,
                   reps_used: Sequence[tuple[np.ndarray, np.ndarray, float]],
                   lambda2: float, w_t: np.ndarray,
                   ridge_mu: float = 1e-6) -> FeatureLibrary:
    """Fold one task into the decoder statistics and refit the decoder.

    Solves (acc_A / T + mu I) vec(D) = acc_b / T with T counting this task,
    then clips columns to the unit ball.  `tasks_seen` is left unchanged;
    the caller bumps it once per task after both library updates.
    """
    d, p = lib.d, lib.p
    if s_t.shape != (p,) or w_t.shape != (d,) or omega.shape != (d, d):
        raise ValueError("task quantities do not match the library dimensions")
    acc_A = lib.acc_A + decoder_contribution(s_t, omega, reps_used, lambda2)
    acc_b = lib.acc_b + np.kron(s_t, omega @ w_t)
    T = lib.tasks_seen + 1
    system = acc_A / T + ridge_mu * np.eye(d * p)
    vec_d = _solve_spd(system, acc_b / T, "decoder")
    # C-contiguous so in-memory and checkpoint-reloaded layouts match bitwise
    decoder = np.ascontiguousarray(_clip_columns(vec_d.reshape((d, p), order="F")))
    return dataclasses.replace(lib, decoder=decoder, acc_A=acc_A, acc_b=acc_b)


def update_encoder(lib: FeatureLibrary, s_t: np.ndarray, w_t: np.ndarray,
                   phi_inverse: Callable[[np.ndarray], np.ndarray],
                   ridge_mu: float = 1e-6) -> FeatureLibrary:
    """Fold one task into the encoder statistics and refit the encoder.

    Solves L (acc_C / T + mu I) = acc_M / T row-wise with T counting this
    task, then clips columns.  The 1/T normalisation mirrors the decoder
    refit and keeps the ridge weight constant relative to the data term;
    without it every fresh task direction enters the encoder undamped and
    the per-task encoder steps never shrink.
    """
    d, p = lib.d, lib.p
    target = np.asarray(phi_inverse(s_t), dtype=float)
    if not np.isfinite(target).all():
        raise ValueError("phi_inverse(s_t) is not finite")
    acc_M = lib.acc_M + np.outer(target, w_t)
    acc_C = lib.acc_C + np.outer(w_t, w_t)
    T = lib.tasks_seen + 1
    system = acc_C / T + ridge_mu * np.eye(d)
    encoder = _clip_columns(_solve_spd(system, acc_M.T / T, "encoder").T)
    return dataclasses.replace(lib, encoder=encoder, acc_M=acc_M, acc_C=acc_C)


def bump_tasks_seen(lib: FeatureLibrary) -> FeatureLibrary:
    return dataclasses.replace(lib, tasks_seen=lib.tasks_seen + 1)


def admit_representative(mlib: ModelLibrary, s_t: np.ndarray,
                         assignment: Assignment, task_id: str,
                         t: int) -> tuple[ModelLibrary, bool]:
    """Append s_t as a new representative when the outlier slot wins.

    The first task always seeds the library.  Ties on the argmax break
    toward not admitting.
    """
    admitted = t == 1 or assignment.picks_outlier
    if not admitted:
        return mlib, False
    code = np.array(s_t, dtype=float, copy=True)
    code.setflags(write=False)
    rec = RepresentativeRecord(code=code, source_task=task_id, admitted_at=t)
    return ModelLibrary(reps=mlib.reps + (rec,)), True


# checkpoint i/o: JSON text, floats serialised with shortest round-trip
# repr (at most 17 significant digits, bit-exact on reload)

def _arr(a: np.ndarray) -> list:
    return a.tolist()


def library_to_dict(flib: FeatureLibrary, mlib: ModelLibrary) -> dict:
    return {
        "d": flib.d,
        "p": flib.p,
        "tasks_seen": flib.tasks_seen,
        "decoder": _arr(flib.decoder),
        "encoder": _arr(flib.encoder),
        "acc_A": _arr(flib.acc_A),
        "acc_b": _arr(flib.acc_b),
        "acc_M": _arr(flib.acc_M),
        "acc_C": _arr(flib.acc_C),
        "representatives": [
            {"code": _arr(r.code), "source_task": r.source_task, "admitted_at": r.admitted_at}
            for r in mlib.reps
        ],
    }


def library_from_dict(payload: dict) -> tuple[FeatureLibrary, ModelLibrary]:
    flib = FeatureLibrary(
        decoder=np.array(payload["decoder"], dtype=float),
        encoder=np.array(payload["encoder"], dtype=float),
        acc_A=np.array(payload["acc_A"], dtype=float),
        acc_b=np.array(payload["acc_b"], dtype=float),
        acc_M=np.array(payload["acc_M"], dtype=float),
        acc_C=np.array(payload["acc_C"], dtype=float),
        tasks_seen=int(payload["tasks_seen"]),
    )
    reps = []
    for item in payload["representatives"]:
        code = np.array(item["code"], dtype=float)
        code.setflags(write=False)
        reps.append(RepresentativeRecord(code=code, source_task=item["source_task"],
                                         admitted_at=int(item["admitted_at"])))
    return flib, ModelLibrary(reps=tuple(reps))


def save_libraries(flib: FeatureLibrary, mlib: ModelLibrary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(library_to_dict(flib, mlib), fh)


def load_libraries(path) -> tuple[FeatureLibrary, ModelLibrary]:
    with open(path, "r", encoding="utf-8") as fh:
        return library_from_dict(json.load(fh))
