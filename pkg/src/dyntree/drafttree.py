"""Draft trees and the tree-attention buffers derived from them.

Node 0 is the root (the last committed token).  Every other node is one
candidate path; its parent is the node for the path without its last rank.
Nodes are kept in canonical breadth-first order: depth, then parent index,
then head rank.  Parents therefore always precede their children, which is
what keeps the mask lower-triangular.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .candgen import CandidateSet
from .errors import MalformedCandidates, PrefixClosureViolation, RankOutOfRange
from .marginals import MarginalTable

ROOT_TOKEN_UNKNOWN = -1


class Node(NamedTuple):
    parent: int  # -1 for the root
    depth: int
    head_rank: int  # 0 for the root
    token_id: int


@dataclass(frozen=True)
class DraftTree:
    nodes: tuple[Node, ...]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def parents(self) -> list[int]:
        return [nd.parent for nd in self.nodes]

    @property
    def max_depth(self) -> int:
        return max(nd.depth for nd in self.nodes)

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in self.nodes]
        for i, nd in enumerate(self.nodes[1:], 1):
            kids[nd.parent].append(i)
        return kids

    @classmethod
    def from_parents(
        cls,
        parents: Sequence[int],
        head_ranks: Sequence[int],
        token_ids: Sequence[int],
    ) -> "DraftTree":
        """Build a tree from flat arrays, checking the structural invariants.

        Entry 0 describes the root and its parent must be -1.
        """
        if not (len(parents) == len(head_ranks) == len(token_ids)) or not parents:
            raise MalformedCandidates("parents, head_ranks and token_ids must be equal, non-zero length")
        if parents[0] != -1:
            raise MalformedCandidates("node 0 must be the root (parent -1)")
        nodes = [Node(-1, 0, 0, int(token_ids[0]))]
        last_rank: dict[int, int] = {}
        for i in range(1, len(parents)):
            p = parents[i]
            if not 0 <= p < i:
                raise MalformedCandidates(f"node {i} has parent {p}; parents must precede children")
            r = head_ranks[i]
            if r < 1 or r <= last_rank.get(p, 0):
                raise MalformedCandidates(f"children of node {p} must have increasing ranks >= 1")
            last_rank[p] = r
            nodes.append(Node(p, nodes[p].depth + 1, int(r), int(token_ids[i])))
        depths = [nd.depth for nd in nodes]
        if depths != sorted(depths):
            raise MalformedCandidates("nodes must be in breadth-first order")
        return cls(tuple(nodes))


@dataclass(frozen=True)
class TreeBuffers:
    mask: np.ndarray  # (N+1, N+1) bool
    positions: np.ndarray  # (N+1,) int
    paths: tuple[tuple[int, ...], ...]

    def to_json(self) -> dict:
        return {
            "mask": self.mask.astype(int).tolist(),
            "positions": self.positions.tolist(),
            "paths": [list(p) for p in self.paths],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "TreeBuffers":
        return cls(
            np.asarray(doc["mask"], dtype=bool),
            np.asarray(doc["positions"], dtype=np.int64),
            tuple(tuple(p) for p in doc["paths"]),
        )


def build_tree(
    cands: CandidateSet,
    table: MarginalTable,
    root_token: int = ROOT_TOKEN_UNKNOWN,
    counter: Counter | None = None,
) -> DraftTree:
    # Sorting by (depth, path) is the canonical order: depth-1 nodes sort by
    # rank, and by induction parent order at depth d-1 is path order, so
    # (parent index, rank) at depth d is also path order.
    paths = sorted((c.path for c in cands), key=lambda p: (len(p), p))
    index = {(): 0}
    nodes = [Node(-1, 0, 0, root_token)]
    for path in paths:
        if len(path) > table.K:
            raise RankOutOfRange(f"path {list(path)} deeper than K={table.K}")
        rank = path[-1]
        if rank > table.m:
            raise RankOutOfRange(f"rank {rank} in path {list(path)} exceeds m={table.m}")
        parent = index.get(path[:-1])
        if parent is None:
            raise PrefixClosureViolation(f"path {list(path)} present without its prefix {list(path[:-1])}")
        depth = len(path)
        index[path] = len(nodes)
        nodes.append(Node(parent, depth, rank, table.token_ids[depth - 1][rank - 1]))
    if counter is not None:
        counter["tree_nodes"] += len(nodes)
    return DraftTree(tuple(nodes))


def retrieval_paths(tree: DraftTree, counter: Counter | None = None) -> tuple[tuple[int, ...], ...]:
    out: list[tuple[int, ...]] = []
    steps = 0
    for i, nd in enumerate(tree.nodes):
        # parent's path is already built (topological order)
        path = (0,) if i == 0 else out[nd.parent] + (i,)
        steps += len(path)
        out.append(path)
    if counter is not None:
        counter["path_steps"] += steps
    return tuple(out)


def attention_mask(
    tree: DraftTree,
    paths: Sequence[Sequence[int]] | None = None,
    counter: Counter | None = None,
) -> np.ndarray:
    """``mask[i, j]`` is true iff node ``j`` is node ``i`` or one of its ancestors."""
    if paths is None:
        paths = retrieval_paths(tree, counter)
    size = len(tree.nodes)
    rows: list[int] = []
    cols: list[int] = []
    for i, path in enumerate(paths):
        rows.extend([i] * len(path))
        cols.extend(path)
    mask = np.zeros((size, size), dtype=bool)
    mask[rows, cols] = True
    if counter is not None:
        counter["mask_sets"] += len(cols)
    return mask


def position_offsets(tree: DraftTree) -> np.ndarray:
    return np.fromiter((nd.depth for nd in tree.nodes), dtype=np.int64, count=len(tree.nodes))


def prepare_buffers(tree: DraftTree, counter: Counter | None = None) -> TreeBuffers:
    paths = retrieval_paths(tree, counter)
    mask = attention_mask(tree, paths, counter)
    return TreeBuffers(mask, position_offsets(tree), paths)


def parents_from_mask(mask: np.ndarray) -> list[int]:
    """Recover parent indices from an ancestor-or-self mask.

    The parent is the ancestor with the largest index, because ancestors
    appear before descendants.
    """
    parents = []
    for i in range(mask.shape[0]):
        anc = np.flatnonzero(mask[i, :i])
        parents.append(int(anc[-1]) if anc.size else -1)
    return parents


def render_ascii(mask: np.ndarray, include_root: bool = True) -> str:
    m = mask if include_root else mask[1:, 1:]
    return "\n".join("".join("#" if v else "." for v in row) for row in m) + "\n"


def render_pgm(mask: np.ndarray, include_root: bool = True, scale: int = 1) -> bytes:
    """Binary PGM (P5): 0 where attention is allowed, 255 where masked."""
    m = mask if include_root else mask[1:, 1:]
    img = np.where(m, 0, 255).astype(np.uint8)
    if scale > 1:
        img = np.kron(img, np.ones((scale, scale), dtype=np.uint8))
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()
