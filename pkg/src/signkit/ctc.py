"""Cross-entropy, CTC loss (forward-backward in log space) and CTC decoding.

Lattices are (T, C+1) arrays of per-frame log-probabilities with the blank
symbol at index 0; label sequences hold symbols in [1, C].
"""

from __future__ import annotations

from collections import defaultdict
from typing import NamedTuple, Sequence

import numpy as np

from .nn import log_softmax

BLANK = 0
NEG_INF = -np.inf


class LabelOutOfRange(ValueError):
    pass


class CtcResult(NamedTuple):
    loss: float
    grad: np.ndarray
    infeasible: bool


class IsolatedPrediction(NamedTuple):
    symbol: int | None
    multi_symbol: bool

    @property
    def rejected(self) -> bool:
        return self.symbol is None


def cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"{labels.shape[0] if labels.ndim else 0} labels for {n} rows")
    if np.any((labels < 0) | (labels >= c)):
        raise LabelOutOfRange(f"labels must lie in [0, {c})")
    logp = log_softmax(logits)
    rows = np.arange(n)
    loss = -logp[rows, labels].mean()
    grad = np.exp(logp)
    grad[rows, labels] -= 1.0
    return float(loss), grad / n


def _extended(target: Sequence[int]) -> np.ndarray:
    ext = np.zeros(2 * len(target) + 1, dtype=np.int64)
    ext[1::2] = target
    return ext


def min_frames(target: Sequence[int]) -> int:
    """Shortest lattice that can emit ``target`` (repeats need a blank between)."""
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats


def ctc_loss(lattice: np.ndarray, target: Sequence[int]) -> CtcResult:
    """Negative log-probability of ``target`` summed over all alignments.

    The gradient is taken w.r.t. the lattice entries themselves: minus the
    posterior occupancy of each (frame, symbol).
    """
    lp = np.asarray(lattice, dtype=np.float64)
    T, V = lp.shape
    target = [int(s) for s in target]
    if any(s < 1 or s >= V for s in target):
        raise LabelOutOfRange(f"target symbols must lie in [1, {V - 1}]")
    if T < min_frames(target):
        return CtcResult(float("inf"), np.zeros_like(lp), True)

    ext = _extended(target)
    S = len(ext)
    skip = np.zeros(S, dtype=bool)
    if S > 2:
        skip[2:] = (ext[2:] != BLANK) & (ext[2:] != ext[:-2])
    emit = lp[:, ext]  # (T, S)

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha[t] = acc + emit[t]

    # beta[t, s]: log-prob of the remaining frames t+1.. given state s at t
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc

    log_p = alpha[T - 1, S - 1] if S == 1 else np.logaddexp(alpha[T - 1, S - 1], alpha[T - 1, S - 2])
    if not np.isfinite(log_p):
        return CtcResult(float("inf"), np.zeros_like(lp), True)
    occupancy = np.exp(alpha + beta - log_p)
    grad = np.zeros_like(lp)
    np.add.at(grad.T, ext, -occupancy.T)
    return CtcResult(float(-log_p), grad, False)


def ctc_loss_from_logits(logits: np.ndarray, target: Sequence[int]) -> CtcResult:
    """CTC on unnormalized scores; the gradient is w.r.t. the logits."""
    logp = log_softmax(np.asarray(logits, dtype=np.float64))
    res = ctc_loss(logp, target)
    if res.infeasible:
        return res
    # d/dlogits of -log p: softmax * sum(g) - g, where g is the lattice grad; rows of g sum to -1
    grad = res.grad - np.exp(logp) * res.grad.sum(axis=1, keepdims=True)
    return CtcResult(res.loss, grad, False)


def collapse(path: Sequence[int]) -> list[int]:
    out = []
    prev = None
    for s in path:
        if s != prev and s != BLANK:
            out.append(int(s))
        prev = s
    return out


def ctc_greedy_decode(lattice: np.ndarray) -> list[int]:
    return collapse(np.argmax(lattice, axis=1).tolist())


def ctc_beam_search(lattice: np.ndarray, beam_width: int = 5, return_score: bool = False):
    """Prefix beam search in log space.

    Each prefix tracks the probability of ending in blank and in its last
    symbol. After each frame the ``beam_width`` best prefixes survive; ties
    are broken by lexicographic prefix order, so results are deterministic.
    Width 1 is not guaranteed to agree with greedy decoding.
    """
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    lp = np.asarray(lattice, dtype=np.float64)
    T, V = lp.shape
    beams: dict[tuple, tuple[float, float]] = {(): (0.0, NEG_INF)}

    def rank(item):
        prefix, (pb, pnb) = item
        return (-np.logaddexp(pb, pnb), prefix)

    for t in range(T):
        row = lp[t]
        nb = defaultdict(lambda: NEG_INF)
        nnb = defaultdict(lambda: NEG_INF)
        for prefix, (pb, pnb) in beams.items():
            total = np.logaddexp(pb, pnb)
            nb[prefix] = np.logaddexp(nb[prefix], total + row[BLANK])
            last = prefix[-1] if prefix else None
            for c in range(1, V):
                ext = prefix + (c,)
                if c == last:
                    nnb[ext] = np.logaddexp(nnb[ext], pb + row[c])
                    nnb[prefix] = np.logaddexp(nnb[prefix], pnb + row[c])
                else:
                    nnb[ext] = np.logaddexp(nnb[ext], total + row[c])
        merged = {p: (nb[p], nnb[p]) for p in set(nb) | set(nnb)}
        beams = dict(sorted(merged.items(), key=rank)[:beam_width])

    best_prefix, (pb, pnb) = min(beams.items(), key=rank)
    if return_score:
        return list(best_prefix), float(np.logaddexp(pb, pnb))
    return list(best_prefix)


def isolated_prediction(decoded: Sequence[int]) -> IsolatedPrediction:
    """Reduce a decoded sequence to one class: the first symbol, or a reject."""
    if len(decoded) == 0:
        return IsolatedPrediction(None, False)
    return IsolatedPrediction(int(decoded[0]), len(decoded) > 1)

