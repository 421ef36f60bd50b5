"""Greedy verification of a draft tree.

``preds[i]`` is the base model's argmax next token given the context that
ends at node ``i``.  A child is accepted when its token equals its parent's
prediction; when several children of one parent carry that token, the one
with the smallest head rank wins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .drafttree import DraftTree, retrieval_paths
from .errors import AlignmentMismatch


@dataclass(frozen=True)
class VerificationResult:
    accepted_nodes: tuple[int, ...]
    accepted_tokens: tuple[int, ...]  # drafted tokens, then the bonus token
    bonus_token: int

    @property
    def accepted_count(self) -> int:
        return len(self.accepted_tokens)


def _check(tree: DraftTree, preds: Sequence[int]) -> None:
    if len(preds) != len(tree.nodes):
        raise AlignmentMismatch(f"{len(preds)} predictions for {len(tree.nodes)} nodes")


def _result(tree: DraftTree, preds: Sequence[int], accepted: Sequence[int]) -> VerificationResult:
    drafted = [tree.nodes[i].token_id for i in accepted[1:]]
    bonus = int(preds[accepted[-1]])
    return VerificationResult(tuple(accepted), tuple(drafted) + (bonus,), bonus)


def greedy_verify(tree: DraftTree, preds: Sequence[int]) -> VerificationResult:
    _check(tree, preds)
    kids = tree.children()
    accepted = [0]
    u = 0
    while True:
        want = preds[u]
        # children are stored in ascending head-rank order
        nxt = next((c for c in kids[u] if tree.nodes[c].token_id == want), None)
        if nxt is None:
            break
        accepted.append(nxt)
        u = nxt
    return _result(tree, preds, accepted)


def brute_force_verify(tree: DraftTree, preds: Sequence[int]) -> VerificationResult:
    """Check every root path independently and keep the deepest consistent one.

    A step parent -> v is consistent when v's token equals the parent's
    prediction and no sibling with a smaller head rank also matches.
    """
    _check(tree, preds)
    nodes = tree.nodes

    def step_ok(v: int) -> bool:
        p = nodes[v].parent
        if nodes[v].token_id != preds[p]:
            return False
        return not any(
            s.parent == p and s.head_rank < nodes[v].head_rank and s.token_id == preds[p]
            for s in nodes
        )

    best: tuple[int, ...] = (0,)
    for path in retrieval_paths(tree):
        if all(step_ok(v) for v in path[1:]) and len(path) > len(best):
            best = path
    return _result(tree, preds, best)
