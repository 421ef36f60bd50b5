"""Fixed-tree baseline built from calibrated head accuracies.

The fixed tree is the top-n candidate set over the accuracy matrix, i.e. the
same selection used for dynamic trees with accuracies in place of
probabilities.  Path products of accuracies never increase along a path, so
the top-n set is prefix-closed and maximises the expected number of
accepted draft tokens among all prefix-closed sets of that size.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .candgen import Candidate, CandidateSet, generate_candidates
from .errors import InvalidBudget, MissingCell, RankOutOfRange, ShapeMismatch
from .marginals import AccuracyMatrix


@dataclass(frozen=True)
class FixedTreeSpec:
    candidate_set: CandidateSet
    expected_accept: float  # drafted tokens only; +1 for the bonus token

    def to_json(self) -> dict:
        doc = self.candidate_set.to_json()
        doc["expected_accept"] = self.expected_accept
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "FixedTreeSpec":
        return cls(CandidateSet.from_json(doc), float(doc["expected_accept"]))


def path_accept_prob(acc: AccuracyMatrix, path: Sequence[int]) -> float:
    prob = 1.0
    for j, r in enumerate(path):
        if j >= acc.K or not 1 <= r <= acc.m:
            raise RankOutOfRange(f"path {list(path)} not indexable in a {acc.K}x{acc.m} matrix")
        prob *= acc.acc[j][r - 1]
    return prob


def expected_accept_length(cands: CandidateSet | Iterable[Candidate], acc: AccuracyMatrix) -> float:
    """Expected accepted draft tokens: sum over nodes of the path's acceptance probability.

    Exact when, at each depth, at most one rank is correct and heads are
    independent; then a node is on the accepted path iff every rank along its
    path is the correct one.
    """
    return sum(path_accept_prob(acc, c.path) for c in cands)


def build_fixed_tree(acc: AccuracyMatrix, n: int) -> FixedTreeSpec:
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvalidBudget(f"budget n must be a positive integer, got {n!r}")
    cands = generate_candidates(acc.log_table(), n)
    return FixedTreeSpec(cands, expected_accept_length(cands, acc))


def estimate_accuracy(
    records: Iterable[tuple[int, int, bool]], K: int | None = None, m: int | None = None
) -> AccuracyMatrix:
    """Acceptance frequency per (head, rank) from 1-based ``(k, i, accepted)`` records.

    ``K`` and ``m`` default to the largest head and rank seen.
    """
    trials: dict[tuple[int, int], int] = defaultdict(int)
    hits: dict[tuple[int, int], int] = defaultdict(int)
    for k, i, ok in records:
        if k < 1 or i < 1:
            raise ShapeMismatch(f"record ({k}, {i}) must use 1-based head and rank")
        trials[k, i] += 1
        hits[k, i] += bool(ok)
    if not trials:
        raise MissingCell("no calibration records")
    K = K or max(k for k, _ in trials)
    m = m or max(i for _, i in trials)
    counts = np.zeros((K, m), dtype=np.int64)
    accepts = np.zeros((K, m), dtype=np.int64)
    for (k, i), t in trials.items():
        if k > K or i > m:
            raise ShapeMismatch(f"record ({k}, {i}) outside a {K}x{m} matrix")
        counts[k - 1, i - 1] = t
        accepts[k - 1, i - 1] = hits[k, i]
    return accuracy_from_counts(accepts, counts)


def accuracy_from_counts(accepts: np.ndarray, trials: np.ndarray) -> AccuracyMatrix:
    accepts = np.asarray(accepts)
    trials = np.asarray(trials)
    if accepts.shape != trials.shape or accepts.ndim != 2:
        raise ShapeMismatch("accepts and trials must be matching 2-D arrays")
    missing = np.argwhere(trials <= 0)
    if missing.size:
        r, c = missing[0]
        raise MissingCell("cell never observed", row=int(r) + 1, col=int(c) + 1)
    return AccuracyMatrix((accepts / trials).tolist())
