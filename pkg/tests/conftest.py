import numpy as np
import pytest

from dyntree.drafttree import DraftTree
from dyntree.marginals import validate_marginals


def random_table(rng, K, m, ties=False):
    """Valid random MarginalTable; ``ties=True`` draws from a coarse grid so equal scores occur."""
    probs, ids = [], []
    for _ in range(K):
        if ties:
            row = rng.integers(1, 4, size=m) / (4.0 * m)
        else:
            row = rng.dirichlet(np.full(m + 3, 0.7))[:m]
            row = np.maximum(row, 1e-9)
        probs.append(sorted(row.tolist(), reverse=True))
        ids.append(rng.permutation(m + 5)[:m].tolist())
    return validate_marginals(probs, ids)


def random_tree_and_preds(rng, max_nodes=65, K=4, vocab=6):
    """Random breadth-first tree with a small vocabulary so sibling tokens collide."""
    parents, ranks, tokens, depth = [-1], [0], [int(rng.integers(vocab))], [0]
    next_rank: dict[int, int] = {}
    size = int(rng.integers(1, max_nodes + 1))
    frontier = [0]
    for i in range(1, size):
        choices = [p for p in frontier if depth[p] < K]
        if not choices:
            break
        # bias towards early (shallow) parents so trees stay bushy
        p = choices[int(rng.integers(min(len(choices), 4)))]
        parents.append(p)
        next_rank[p] = next_rank.get(p, 0) + int(rng.integers(1, 3))
        ranks.append(next_rank[p])
        tokens.append(int(rng.integers(vocab)))
        depth.append(depth[p] + 1)
        frontier.append(i)
    order = sorted(range(len(parents)), key=lambda i: (depth[i], i))
    # relabel into breadth-first order keeping parents before children
    pos = {old: new for new, old in enumerate(order)}
    tree = DraftTree.from_parents(
        [-1 if parents[o] < 0 else pos[parents[o]] for o in order],
        [ranks[o] for o in order],
        [tokens[o] for o in order],
    )
    kids = tree.children()
    preds = []
    for i in range(len(tree)):
        if kids[i] and rng.random() < 0.8:
            preds.append(tree.nodes[kids[i][int(rng.integers(len(kids[i])))]].token_id)
        else:
            preds.append(int(rng.integers(vocab)))
    return tree, preds


@pytest.fixture
def example_table():
    return validate_marginals([[0.6, 0.4], [0.9, 0.1]], [[10, 11], [20, 21]])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
