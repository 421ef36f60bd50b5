"""Per-head marginal tables and calibration accuracy matrices.

A :class:`MarginalTable` holds, for each of ``K`` heads, the ``m`` most likely
tokens and their probabilities, best first.  Row ``k`` (0-based here, 1-based
in messages and candidate paths) is the head that predicts the token ``k + 1``
positions after the current one.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import (
    DuplicateTokenInRow,
    NonIncreasingViolation,
    NotADistribution,
    ProbabilityOutOfRange,
    ShapeMismatch,
    VocabTooSmall,
)

ROW_SUM_SLACK = 1e-9
DIST_SUM_TOL = 1e-6
ACCURACY_FLOOR = 1e-12


def _rectangular(rows: Sequence[Sequence[Any]], what: str) -> tuple[int, int]:
    if len(rows) < 1:
        raise ShapeMismatch(f"{what} must have at least one row")
    width = len(rows[0])
    if width < 1:
        raise ShapeMismatch(f"{what} rows must be non-empty")
    for r, row in enumerate(rows, 1):
        if len(row) != width:
            raise ShapeMismatch(f"{what} row has length {len(row)}, expected {width}", row=r)
    return len(rows), width


@dataclass(frozen=True)
class MarginalTable:
    probs: tuple[tuple[float, ...], ...]
    token_ids: tuple[tuple[int, ...], ...]

    @property
    def K(self) -> int:
        return len(self.probs)

    @property
    def m(self) -> int:
        return len(self.probs[0])

    def to_json(self) -> dict:
        return {
            "K": self.K,
            "m": self.m,
            "probs": [list(r) for r in self.probs],
            "token_ids": [list(r) for r in self.token_ids],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MarginalTable":
        if "probs" not in doc or "token_ids" not in doc:
            raise ShapeMismatch("table JSON needs 'probs' and 'token_ids'")
        table = validate_marginals(doc["probs"], doc["token_ids"])
        if doc.get("K", table.K) != table.K or doc.get("m", table.m) != table.m:
            raise ShapeMismatch(f"declared K/m do not match matrix shape {table.K}x{table.m}")
        return table


@dataclass(frozen=True)
class LogTable:
    rows: tuple[tuple[float, ...], ...]

    @property
    def K(self) -> int:
        return len(self.rows)

    @property
    def m(self) -> int:
        return len(self.rows[0])


@dataclass(frozen=True)
class AccuracyMatrix:
    """Calibrated acceptance rate of each head's rank-i prediction.

    Rows are sorted non-increasing on construction: calibration noise can
    produce rank inversions and sorting keeps the baseline well defined.
    """

    acc: tuple[tuple[float, ...], ...]

    def __init__(self, acc: Sequence[Sequence[float]]):
        _rectangular(acc, "accuracy matrix")
        rows = []
        for r, row in enumerate(acc, 1):
            for c, a in enumerate(row, 1):
                a = float(a)
                if not (0.0 <= a <= 1.0):
                    raise ProbabilityOutOfRange(f"accuracy {a!r} not in [0, 1]", row=r, col=c)
            rows.append(tuple(sorted((float(a) for a in row), reverse=True)))
        object.__setattr__(self, "acc", tuple(rows))

    @property
    def K(self) -> int:
        return len(self.acc)

    @property
    def m(self) -> int:
        return len(self.acc[0])

    def log_table(self) -> LogTable:
        """Log accuracies with zeros clamped to ``ACCURACY_FLOOR``."""
        if any(a <= 0.0 for row in self.acc for a in row):
            warnings.warn(
                f"zero accuracies clamped to {ACCURACY_FLOOR:g} for candidate selection",
                RuntimeWarning,
                stacklevel=2,
            )
        return LogTable(
            tuple(tuple(math.log(max(a, ACCURACY_FLOOR)) for a in row) for row in self.acc)
        )

    def to_json(self) -> dict:
        return {"K": self.K, "m": self.m, "probs": [list(r) for r in self.acc]}

    @classmethod
    def from_json(cls, doc: dict) -> "AccuracyMatrix":
        mat = cls(doc["probs"])
        if doc.get("K", mat.K) != mat.K or doc.get("m", mat.m) != mat.m:
            raise ShapeMismatch(f"declared K/m do not match matrix shape {mat.K}x{mat.m}")
        return mat


def validate_marginals(
    probs: Sequence[Sequence[float]], token_ids: Sequence[Sequence[int]]
) -> MarginalTable:
    """Check every table invariant and return an immutable table.

    Cells are scanned row-major and the first violation raises, naming its
    1-based (row, col).
    """
    K, m = _rectangular(probs, "probs")
    K2, m2 = _rectangular(token_ids, "token_ids")
    if (K, m) != (K2, m2):
        raise ShapeMismatch(f"probs is {K}x{m} but token_ids is {K2}x{m2}")

    p_rows = []
    id_rows = []
    for r in range(K):
        seen: set[int] = set()
        prev = math.inf
        p_row = []
        id_row = []
        for c in range(m):
            p = float(probs[r][c])
            if not (0.0 < p <= 1.0):
                raise ProbabilityOutOfRange(f"probability {p!r} not in (0, 1]", row=r + 1, col=c + 1)
            if p > prev:
                raise NonIncreasingViolation(
                    f"{p!r} follows smaller value {prev!r}", row=r + 1, col=c + 1
                )
            tok = token_ids[r][c]
            if isinstance(tok, bool) or int(tok) != tok or tok < 0:
                raise ShapeMismatch(f"token id {tok!r} is not a non-negative integer", row=r + 1, col=c + 1)
            tok = int(tok)
            if tok in seen:
                raise DuplicateTokenInRow(f"token {tok} repeated", row=r + 1, col=c + 1)
            seen.add(tok)
            prev = p
            p_row.append(p)
            id_row.append(tok)
        if math.fsum(p_row) > 1.0 + ROW_SUM_SLACK:
            raise ProbabilityOutOfRange(f"row sums to {math.fsum(p_row)!r} > 1", row=r + 1)
        p_rows.append(tuple(p_row))
        id_rows.append(tuple(id_row))
    return MarginalTable(tuple(p_rows), tuple(id_rows))


def top_m_rows(full_dists: Sequence[Sequence[float]] | np.ndarray, m: int) -> MarginalTable:
    """Keep the ``m`` most likely tokens of each head distribution.

    Ties are broken towards the smaller token id.
    """
    rows = [np.asarray(d, dtype=np.float64) for d in full_dists]
    if not rows:
        raise ShapeMismatch("need at least one distribution")
    probs = []
    ids = []
    for r, dist in enumerate(rows, 1):
        if dist.ndim != 1:
            raise ShapeMismatch("each distribution must be a vector", row=r)
        if dist.size < m:
            raise VocabTooSmall(f"vocabulary of {dist.size} < m={m}", row=r)
        if np.any(dist < 0) or not np.all(np.isfinite(dist)) or abs(dist.sum() - 1.0) > DIST_SUM_TOL:
            raise NotADistribution(f"entries must be non-negative and sum to 1 (sum={dist.sum()!r})", row=r)
        # lexsort: last key is primary
        order = np.lexsort((np.arange(dist.size), -dist))[:m]
        probs.append(dist[order].tolist())
        ids.append(order.tolist())
    return validate_marginals(probs, ids)


def log_scores(table: MarginalTable) -> LogTable:
    return LogTable(tuple(tuple(math.log(p) for p in row) for row in table.probs))
