"""Hot numeric kernels: vote accumulation, confusion counting, AdamW steps.

Each kernel ships in two implementations: a numba ``@njit`` build and a
pure-numpy fallback. Setting ``STANCEKIT_NO_NUMBA=1`` in the environment
forces the numpy path; the same fallback engages automatically when numba
is not importable. Both paths accumulate floats in the same member/element
order, so results are bitwise identical and artifacts do not depend on
which backend executed. ``benchmarks/bench_kernels.py`` times the two
side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

ENV_FLAG = "STANCEKIT_NO_NUMBA"

# Tie-break codes shared with the ensemble module.
TIE_HIGHEST_WEIGHT = 0
TIE_MAJORITY_LABEL = 1


def _numba_disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


# --- pure-numpy implementations -----------------------------------------


def confusion_counts_numpy(gold_idx: np.ndarray, pred_idx: np.ndarray, n_labels: int) -> np.ndarray:
    """Confusion matrix (rows = gold, columns = predicted) as int64 counts."""
    flat = gold_idx.astype(np.int64) * n_labels + pred_idx.astype(np.int64)
    return np.bincount(flat, minlength=n_labels * n_labels).reshape(n_labels, n_labels)


def vote_batch_numpy(
    member_scores: np.ndarray,
    vote_weights: np.ndarray,
    member_hard: np.ndarray,
    tb_weights: np.ndarray,
    tie_break: int,
    majority_idx: int,
    rel_tol: float,
) -> np.ndarray:
    """Resolve one vote per example over stacked member scores.

    member_scores: (members, examples, labels) float64, one-hot when a member
    carries no score vector. vote_weights scale the accumulated scores
    (all ones for plain majority voting); tb_weights are the weights the
    highest_weight_member tie-break consults. Scores within ``rel_tol``
    (relative to max(1, |top|)) of the top score count as exact ties.
    """
    n_members, n_examples, n_labels = member_scores.shape
    totals = np.zeros((n_examples, n_labels), dtype=np.float64)
    # Fixed member order keeps float accumulation identical to the scalar path.
    for m in range(n_members):
        totals += vote_weights[m] * member_scores[m]
    top = totals.max(axis=1, keepdims=True)
    tied = (top - totals) <= rel_tol * np.maximum(1.0, np.abs(top))
    out = totals.argmax(axis=1).astype(np.int64)
    multi = tied.sum(axis=1) > 1
    if not multi.any():
        return out
    if tie_break == TIE_MAJORITY_LABEL:
        out[multi] = majority_idx
        return out
    rows = np.arange(n_examples)
    best_w = np.full(n_examples, -1.0)
    chosen = np.full(n_examples, -1, dtype=np.int64)
    for m in range(n_members):
        hard = member_hard[m]
        better = multi & tied[rows, hard] & (tb_weights[m] > best_w)
        chosen[better] = hard[better]
        best_w[better] = tb_weights[m]
    resolved = multi & (chosen >= 0)
    out[resolved] = chosen[resolved]
    unresolved = multi & (chosen < 0)
    if unresolved.any():
        # No member backs any tied label: first tied label in label order.
        out[unresolved] = tied[unresolved].argmax(axis=1)
    return out


def adamw_update_numpy(
    param: np.ndarray,
    grad: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    bc1: float,
    bc2: float,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
    weight_decay: float,
) -> None:
    """One decoupled-weight-decay Adam step, in place over flat float64 views.

    bc1/bc2 are the precomputed bias corrections (1 - beta**step); hoisting
    them keeps the numba and numpy paths bitwise identical (float**int
    rounds differently under LLVM's power intrinsic).
    """
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    param -= lr * (m / bc1 / (np.sqrt(v / bc2) + eps) + weight_decay * param)


# --- loop bodies compiled by numba ---------------------------------------


def _confusion_counts_loop(gold_idx, pred_idx, n_labels):
    out = np.zeros((n_labels, n_labels), dtype=np.int64)
    for i in range(gold_idx.shape[0]):
        out[gold_idx[i], pred_idx[i]] += 1
    return out


def _vote_batch_loop(member_scores, vote_weights, member_hard, tb_weights,
                     tie_break, majority_idx, rel_tol):
    n_members, n_examples, n_labels = member_scores.shape
    out = np.empty(n_examples, dtype=np.int64)
    totals = np.zeros(n_labels, dtype=np.float64)
    for n in range(n_examples):
        for l in range(n_labels):
            totals[l] = 0.0
        for m in range(n_members):
            w = vote_weights[m]
            for l in range(n_labels):
                totals[l] += w * member_scores[m, n, l]
        top = totals[0]
        arg = 0
        for l in range(1, n_labels):
            if totals[l] > top:
                top = totals[l]
                arg = l
        tol = rel_tol * max(1.0, abs(top))
        n_tied = 0
        for l in range(n_labels):
            if top - totals[l] <= tol:
                n_tied += 1
        if n_tied == 1:
            out[n] = arg
        elif tie_break == TIE_MAJORITY_LABEL:
            out[n] = majority_idx
        else:
            best_w = -1.0
            chosen = -1
            for m in range(n_members):
                h = member_hard[m, n]
                if top - totals[h] <= tol and tb_weights[m] > best_w:
                    best_w = tb_weights[m]
                    chosen = h
            if chosen >= 0:
                out[n] = chosen
            else:
                for l in range(n_labels):
                    if top - totals[l] <= tol:
                        out[n] = l
                        break
    return out


def _adamw_update_loop(param, grad, m, v, bc1, bc2, lr, beta1, beta2, eps, weight_decay):
    for i in range(param.shape[0]):
        m[i] = m[i] * beta1 + (1.0 - beta1) * grad[i]
        v[i] = v[i] * beta2 + (1.0 - beta2) * grad[i] * grad[i]
        param[i] -= lr * (m[i] / bc1 / (math.sqrt(v[i] / bc2) + eps)
                          + weight_decay * param[i])


try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env-flag path
    numba = None
    HAS_NUMBA = False

if HAS_NUMBA:
    confusion_counts_numba = numba.njit(cache=True)(_confusion_counts_loop)
    vote_batch_numba = numba.njit(cache=True)(_vote_batch_loop)
    adamw_update_numba = numba.njit(cache=True)(_adamw_update_loop)

NUMBA_ENABLED = HAS_NUMBA and not _numba_disabled_by_env()

if NUMBA_ENABLED:
    confusion_counts = confusion_counts_numba
    vote_batch = vote_batch_numba
    adamw_update = adamw_update_numba
else:
    confusion_counts = confusion_counts_numpy
    vote_batch = vote_batch_numpy
    adamw_update = adamw_update_numpy


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
