import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyntree.errors import (
    DuplicateTokenInRow,
    NonIncreasingViolation,
    NotADistribution,
    ProbabilityOutOfRange,
    ShapeMismatch,
    VocabTooSmall,
)
from dyntree.marginals import (
    AccuracyMatrix,
    MarginalTable,
    log_scores,
    top_m_rows,
    validate_marginals,
)

from conftest import random_table


def test_single_entry_table():
    t = validate_marginals([[1.0]], [[0]])
    assert (t.K, t.m) == (1, 1)


def test_default_shape_table(rng):
    t = random_table(rng, 4, 32)
    assert (t.K, t.m) == (4, 32)


def test_non_increasing_violation_names_cell():
    with pytest.raises(NonIncreasingViolation) as exc:
        validate_marginals([[0.3, 0.5]], [[0, 1]])
    assert (exc.value.row, exc.value.col) == (1, 2)
    assert "row 1, col 2" in str(exc.value)


@pytest.mark.parametrize(
    "probs, ids, err",
    [
        ([[0.0]], [[0]], ProbabilityOutOfRange),
        ([[1.5]], [[0]], ProbabilityOutOfRange),
        ([[0.6, 0.5]], [[0, 1]], ProbabilityOutOfRange),  # row sum > 1
        ([[0.5, 0.4]], [[3, 3]], DuplicateTokenInRow),
        ([[0.5, 0.4], [0.5]], [[0, 1], [0]], ShapeMismatch),
        ([[0.5]], [[0], [1]], ShapeMismatch),
        ([], [], ShapeMismatch),
        ([[0.5]], [[-1]], ShapeMismatch),
    ],
)
def test_validation_errors(probs, ids, err):
    with pytest.raises(err):
        validate_marginals(probs, ids)


def test_first_violation_wins():
    # row 1 is fine, row 2 has both a range error at col 1 and an order error later
    with pytest.raises(ProbabilityOutOfRange) as exc:
        validate_marginals([[0.5, 0.2], [0.0, 0.1]], [[0, 1], [0, 1]])
    assert (exc.value.row, exc.value.col) == (2, 1)


def test_top_m_rows_examples():
    t = top_m_rows([[0.1, 0.7, 0.2]], 2)
    assert t.probs == ((0.7, 0.2),) and t.token_ids == ((1, 2),)
    t = top_m_rows([[0.5, 0.5]], 2)
    assert t.probs == ((0.5, 0.5),) and t.token_ids == ((0, 1),)


def test_top_m_rows_uniform_matches_full_sort():
    dist = [1 / 64] * 64
    t = top_m_rows([dist], 32)
    # brute force: sort (prob desc, id asc) over the whole vector
    ref = sorted(range(64), key=lambda i: (-dist[i], i))[:32]
    assert list(t.token_ids[0]) == ref == list(range(32))
    assert all(p == 1 / 64 for p in t.probs[0])


def test_top_m_rows_errors():
    with pytest.raises(VocabTooSmall):
        top_m_rows([[0.5, 0.5]], 3)
    with pytest.raises(NotADistribution):
        top_m_rows([[0.5, 0.4]], 1)
    with pytest.raises(NotADistribution):
        top_m_rows([[1.5, -0.5]], 1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=4, max_size=12), st.randoms(use_true_random=False))
def test_top_m_rows_permutation_invariant(weights, rnd):
    w = np.asarray(weights, dtype=float) + 1e-3
    dist = w / w.sum()
    m = len(dist) // 2
    base = top_m_rows([dist], m)
    perm = list(range(len(dist)))
    rnd.shuffle(perm)
    permuted = dist[perm]
    got = top_m_rows([permuted], m)
    # map permuted ids back to original ids: permuted[j] = dist[perm[j]]
    assert list(got.probs[0]) == list(base.probs[0])
    # tie-break is by id, so within a tie group the chosen ids can differ, but
    # the multiset of probabilities is identical and untied ids coincide
    for p, i_base, j in zip(base.probs[0], base.token_ids[0], got.token_ids[0]):
        if list(dist).count(p) == 1:
            assert perm[j] == i_base


def test_log_scores_examples():
    assert log_scores(validate_marginals([[1.0]], [[0]])).rows == ((0.0,),)
    rows = log_scores(validate_marginals([[0.5, 0.25]], [[0, 1]])).rows
    assert rows[0][0] == pytest.approx(-0.6931471805599453, abs=1e-15)
    assert rows[0][1] == pytest.approx(-1.3862943611198906, abs=1e-15)


def test_log_scores_default_shape(rng):
    t = random_table(rng, 4, 32)
    logs = log_scores(t)
    ref = np.log(np.asarray(t.probs))
    np.testing.assert_allclose(np.asarray(logs.rows), ref, rtol=0, atol=1e-15)
    for row in logs.rows:
        assert all(a >= b for a, b in zip(row, row[1:]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 4), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_table_invariants_and_log_roundtrip(K, m, seed):
    t = random_table(np.random.default_rng(seed), K, m)
    for row in t.probs:
        assert all(a >= b for a, b in zip(row, row[1:]))
    for row, lrow in zip(t.probs, log_scores(t).rows):
        for p, lp in zip(row, lrow):
            assert abs(math.exp(lp) - p) <= 1e-12 * p


def test_table_json_roundtrip(rng):
    t = random_table(rng, 3, 5)
    doc = json.loads(json.dumps(t.to_json()))
    assert MarginalTable.from_json(doc) == t
    doc["K"] = 7
    with pytest.raises(ShapeMismatch):
        MarginalTable.from_json(doc)


def test_accuracy_matrix_sorts_rows_and_checks_range():
    acc = AccuracyMatrix([[0.2, 0.7, 0.1]])
    assert acc.acc == ((0.7, 0.2, 0.1),)
    with pytest.raises(ProbabilityOutOfRange):
        AccuracyMatrix([[1.2]])
    doc = acc.to_json()
    assert "token_ids" not in doc
    assert AccuracyMatrix.from_json(doc) == acc


def test_accuracy_log_table_clamps_zero():
    acc = AccuracyMatrix([[0.5, 0.0]])
    with pytest.warns(RuntimeWarning):
        logs = acc.log_table()
    assert logs.rows[0][1] == math.log(1e-12)
