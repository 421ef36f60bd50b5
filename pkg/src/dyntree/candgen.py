"""Top-n candidate selection over the product of per-head marginals.

A candidate is a path of 1-based head ranks ``(i_1, ..., i_k)`` scored by
``sum_j log p[j][i_j]``, accumulated left to right.  Candidates are totally
ordered by (score descending, depth ascending, path ascending); this is the
"canonical order" used everywhere in the package.

:func:`generate_candidates` grows the set one head at a time with a bounded
min-heap of size ``n``.  :func:`top_n_oracle` sorts the full enumeration and
is the reference it is tested against.
"""

from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, NamedTuple

from .errors import ExplosionCap, InvalidBudget, MalformedCandidates
from .marginals import LogTable, MarginalTable, log_scores

DEFAULT_CAP = 2_000_000


class Candidate(NamedTuple):
    path: tuple[int, ...]
    log_score: float

    @property
    def depth(self) -> int:
        return len(self.path)

    def sort_key(self) -> tuple:
        return (-self.log_score, len(self.path), self.path)


@dataclass(frozen=True)
class CandidateSet:
    """Candidates in canonical order plus the budget that produced them."""

    candidates: tuple[Candidate, ...]
    requested_n: int

    def __post_init__(self):
        ordered = tuple(sorted(self.candidates, key=Candidate.sort_key))
        object.__setattr__(self, "candidates", ordered)
        paths = [c.path for c in ordered]
        if len(set(paths)) != len(paths):
            raise MalformedCandidates("duplicate candidate paths")
        for p in paths:
            if not p or any(r < 1 for r in p):
                raise MalformedCandidates(f"bad path {list(p)}: ranks must be >= 1")

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self) -> Iterator[Candidate]:
        return iter(self.candidates)

    def paths(self) -> set[tuple[int, ...]]:
        return {c.path for c in self.candidates}

    def to_json(self) -> dict:
        return {
            "n": self.requested_n,
            "candidates": [{"path": list(c.path), "log_score": c.log_score} for c in self.candidates],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CandidateSet":
        try:
            cands = tuple(
                Candidate(tuple(int(r) for r in c["path"]), float(c["log_score"]))
                for c in doc["candidates"]
            )
            n = int(doc.get("n", len(cands)))
        except (KeyError, TypeError) as exc:
            raise MalformedCandidates(f"cannot parse candidate set: {exc}") from None
        return cls(cands, n)


def is_prefix_closed(paths: Iterable[tuple[int, ...]]) -> bool:
    present = set(paths)
    return all(len(p) == 1 or p[:-1] in present for p in present)


def _as_log_table(table: MarginalTable | LogTable) -> LogTable:
    return table if isinstance(table, LogTable) else log_scores(table)


def generate_candidates(
    table: MarginalTable | LogTable, n: int, counter: Counter | None = None
) -> CandidateSet:
    """Select the ``n`` best candidates, one head at a time.

    Level ``k`` offers every survivor of level ``k - 1`` to a fresh bounded
    queue together with the ``m`` extensions of each depth-(k-1) survivor.
    Extensions of one parent are offered best rank first and stop at the
    first rejection, since later ranks can only score lower.

    ``counter`` (if given) receives ``offers`` (items presented to a queue)
    and ``pushes`` (items actually inserted).
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise InvalidBudget(f"budget n must be a positive integer, got {n!r}")
    logs = _as_log_table(table)
    K, m = logs.K, logs.m

    # heap entries: (score, -depth, negated path, path); the heap minimum is
    # the worst candidate under the canonical order
    first = logs.rows[0]
    survivors = [(first[i], -1, (-(i + 1),), (i + 1,)) for i in range(min(n, m))]
    offers = pushes = len(survivors)

    for k in range(1, K):
        row = logs.rows[k]
        queue: list[tuple] = []
        size = 0
        # best parents first so the queue threshold rises early
        for item in sorted(survivors, reverse=True):
            offers += 1
            if size < n:
                heapq.heappush(queue, item)
                size += 1
                pushes += 1
            elif item > queue[0]:
                heapq.heapreplace(queue, item)
                pushes += 1
            if item[1] != -k:
                continue
            score, _, neg, path = item
            for i, lp in enumerate(row, 1):
                sc = score + lp
                offers += 1
                if size < n:
                    heapq.heappush(queue, (sc, -k - 1, neg + (-i,), path + (i,)))
                    size += 1
                elif sc < queue[0][0]:
                    break
                else:
                    child = (sc, -k - 1, neg + (-i,), path + (i,))
                    if child > queue[0]:
                        heapq.heapreplace(queue, child)
                    else:
                        break
                pushes += 1
        survivors = queue

    # a child never outranks its parent, so no survivor can lose its prefix
    assert is_prefix_closed(s[3] for s in survivors)
    if counter is not None:
        counter["offers"] += offers
        counter["pushes"] += pushes
    return CandidateSet(tuple(Candidate(s[3], s[0]) for s in survivors), n)


def path_log_score(logs: LogTable, path: tuple[int, ...]) -> float:
    s = 0.0
    for j, r in enumerate(path):
        s += logs.rows[j][r - 1]
    return s


def enumerate_all_candidates(
    table: MarginalTable | LogTable, cap: int = DEFAULT_CAP
) -> list[Candidate]:
    logs = _as_log_table(table)
    K, m = logs.K, logs.m
    total = sum(m**k for k in range(1, K + 1))
    if total > cap:
        raise ExplosionCap(f"{total} candidates exceeds cap {cap}")
    out = []
    for k in range(1, K + 1):
        for path in product(range(1, m + 1), repeat=k):
            out.append(Candidate(path, path_log_score(logs, path)))
    return out


def top_n_oracle(
    table: MarginalTable | LogTable, n: int, cap: int = DEFAULT_CAP
) -> CandidateSet:
    if n < 1:
        raise InvalidBudget(f"budget n must be a positive integer, got {n!r}")
    everything = sorted(enumerate_all_candidates(table, cap), key=Candidate.sort_key)
    return CandidateSet(tuple(everything[:n]), n)
