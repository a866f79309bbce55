"""Failure analysis: hand presence grouped by prediction correctness.

Includes a two-sided Wilcoxon rank-sum (Mann-Whitney U) test with an exact
permutation null for small groups and a tie-corrected normal approximation
otherwise, plus the presence histogram table.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

EXACT_MAX_GROUP = 10


class EmptyGroup(ValueError):
    pass


@dataclass(frozen=True)
class PresenceGroups:
    correct: tuple[float, ...]
    incorrect: tuple[float, ...]

    @property
    def mean_correct(self) -> float | None:
        return float(np.mean(self.correct)) if self.correct else None

    @property
    def mean_incorrect(self) -> float | None:
        return float(np.mean(self.incorrect)) if self.incorrect else None


@dataclass(frozen=True)
class RankSumResult:
    u_statistic: float
    z_score: float
    p_value: float
    method: str  # "exact" or "normal"
    mean_a: float
    mean_b: float
    n_a: int
    n_b: int


@dataclass(frozen=True)
class HistogramBin:
    bin_low: float
    bin_high: float
    count_correct: int
    count_incorrect: int


def group_by_correctness(outcomes: Iterable) -> PresenceGroups:
    correct, incorrect = [], []
    for o in outcomes:
        (correct if o.correct else incorrect).append(float(o.dominant_hand_presence))
    return PresenceGroups(tuple(correct), tuple(incorrect))


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks, tied values sharing the mean of their positions."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(len(v))
    sv = v[order]
    i = 0
    while i < len(v):
        j = i
        while j + 1 < len(v) and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_two_sided(doubled_ranks: np.ndarray, n_a: int, u2_obs: int) -> float:
    """P(|2U - n_a n_b| >= |2U_obs - n_a n_b|) under random assignment of ranks.

    Works on doubled ranks so every quantity stays an integer; the null
    distribution of the rank sum is built by counting subsets of size n_a.
    """
    N = len(doubled_ranks)
    n_b = N - n_a
    r = doubled_ranks.astype(np.int64)
    top = int(r.sum())
    # ways[j, s]: number of j-subsets with doubled rank sum s
    ways = np.zeros((n_a + 1, top + 1), dtype=np.int64)
    ways[0, 0] = 1
    for x in r:
        ways[1:, x:] += ways[:-1, : top + 1 - x].copy()
    sums = np.nonzero(ways[n_a])[0]
    counts = ways[n_a, sums]
    # 2U = 2R - n_a(n_a+1)
    u2 = sums - n_a * (n_a + 1)
    dev = np.abs(u2 - n_a * n_b)
    obs = abs(u2_obs - n_a * n_b)
    return float(counts[dev >= obs].sum() / counts.sum())


def wilcoxon_rank_sum(a: Sequence[float], b: Sequence[float], method: str = "auto") -> RankSumResult:
    """Two-sided rank-sum test of group ``a`` against group ``b``.

    ``method="auto"`` is exact when both groups have at most 10 values and
    otherwise uses the normal approximation with tie-corrected variance and a
    0.5 continuity correction. U is reported for group ``a``.
    """
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if not a or not b:
        raise EmptyGroup("both groups need at least one value")
    if method not in ("auto", "exact", "normal"):
        raise ValueError(f"unknown method {method!r}")
    n_a, n_b = len(a), len(b)
    N = n_a + n_b
    ranks = midranks(a + b)
    doubled = np.rint(2 * ranks).astype(np.int64)
    r2_a = int(doubled[:n_a].sum())
    u2 = r2_a - n_a * (n_a + 1)  # 2U
    u = u2 / 2.0
    mu = n_a * n_b / 2.0

    _, tie_counts = np.unique(a + b, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts))
    var = n_a * n_b / 12.0 * ((N + 1) - (tie_term / (N * (N - 1)) if N > 1 else 0.0))
    sd = math.sqrt(max(var, 0.0))
    dev = abs(u - mu)
    if sd > 0:
        z = math.copysign(max(dev - 0.5, 0.0) / sd, u - mu)
    else:
        z = 0.0

    if method == "auto":
        method = "exact" if max(n_a, n_b) <= EXACT_MAX_GROUP else "normal"
    if method == "exact":
        p = _exact_two_sided(doubled, n_a, u2)
    else:
        p = 1.0 if sd == 0 else math.erfc(abs(z) / math.sqrt(2.0))
    return RankSumResult(
        u_statistic=u, z_score=z, p_value=min(1.0, p), method=method,
        mean_a=float(np.mean(a)), mean_b=float(np.mean(b)), n_a=n_a, n_b=n_b,
    )


def presence_histogram(groups: PresenceGroups, bins: int = 10) -> list[HistogramBin]:
    """Equal-width bins over [0, 1]; the last bin includes 1.0."""
    if bins < 1:
        raise ValueError("bins must be >= 1")

    def counts(values):
        idx = np.minimum(np.floor(np.asarray(values, dtype=np.float64) * bins), bins - 1).astype(int)
        return np.bincount(np.clip(idx, 0, bins - 1), minlength=bins)

    cc, ci = counts(groups.correct), counts(groups.incorrect)
    return [HistogramBin(i / bins, (i + 1) / bins, int(cc[i]), int(ci[i])) for i in range(bins)]


@dataclass
class AnalysisReport:
    n_outcomes: int
    n_correct: int
    n_incorrect: int
    mean_presence_correct: float | None
    mean_presence_incorrect: float | None
    test: RankSumResult | None
    test_skipped_reason: str | None
    histogram: list[HistogramBin] = field(default_factory=list)
    multi_symbol_count: int = 0
    reject_count: int = 0
    presence: str = "dominant-hand"
    sidedness: str = "two-sided"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        d = dict(d)
        d["test"] = RankSumResult(**d["test"]) if d.get("test") else None
        d["histogram"] = [HistogramBin(**h) for h in d.get("histogram", [])]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AnalysisReport":
        return cls.from_dict(json.loads(text))

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count_correct", "count_incorrect"])
        for h in self.histogram:
            w.writerow([repr(h.bin_low), repr(h.bin_high), h.count_correct, h.count_incorrect])
        return buf.getvalue()

    def summary(self) -> str:
        lines = [
            f"outcomes: {self.n_outcomes} ({self.n_correct} correct, {self.n_incorrect} incorrect)",
            f"mean dominant-hand presence, correct:   {_pct(self.mean_presence_correct)}",
            f"mean dominant-hand presence, incorrect: {_pct(self.mean_presence_incorrect)}",
        ]
        if self.test is not None:
            lines.append(
                f"rank-sum ({self.test.method}, two-sided): U={self.test.u_statistic:g} "
                f"z={self.test.z_score:.4f} p={self.test.p_value:.4g}"
            )
        else:
            lines.append(f"rank-sum test skipped: {self.test_skipped_reason}")
        lines.append(f"multi-symbol decodes: {self.multi_symbol_count}, rejects: {self.reject_count}")
        return "\n".join(lines)


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100 * x:.2f}%"


def analysis_report(outcomes: Sequence, bins: int = 10, method: str = "auto") -> AnalysisReport:
    outcomes = list(outcomes)
    groups = group_by_correctness(outcomes)
    test, reason = None, None
    if not groups.correct:
        reason = "no correct predictions"
    elif not groups.incorrect:
        reason = "no incorrect predictions"
    else:
        test = wilcoxon_rank_sum(groups.correct, groups.incorrect, method=method)
    return AnalysisReport(
        n_outcomes=len(outcomes),
        n_correct=len(groups.correct),
        n_incorrect=len(groups.incorrect),
        mean_presence_correct=groups.mean_correct,
        mean_presence_incorrect=groups.mean_incorrect,
        test=test,
        test_skipped_reason=reason,
        histogram=presence_histogram(groups, bins),
        multi_symbol_count=sum(1 for o in outcomes if o.multi_symbol_flag),
        reject_count=sum(1 for o in outcomes if o.predicted_label is None),
    )
