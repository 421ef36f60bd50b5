"""Desk-scale draft-and-verify simulator.

The base model is an order-1 Markov chain over ``V`` tokens.  Head ``k``
sees the exact ``k``-step-ahead distribution from the current token, mixed
with a uniform distribution by its noise level ``eps_k``, truncated to its
top ``m``.  The base model verifies greedily: the prediction at every tree
node is the argmax of the transition row of that node's token.

Because the chain is order-1 and greedy decoding is deterministic, the
committed text from a start token follows a fixed orbit that quickly cycles.
``restart_every`` re-draws the current token from the seeded stream every
that many steps, playing the role of a fresh prompt; 0 disables restarts.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.stats import binomtest

from .calibration import FixedTreeSpec, accuracy_from_counts, build_fixed_tree
from .candgen import generate_candidates
from .drafttree import DraftTree, build_tree, prepare_buffers
from .errors import BadParam
from .jsonio import load
from .marginals import MarginalTable, top_m_rows
from .verifier import VerificationResult, greedy_verify

TRUTH_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class TruthModel:
    transitions: np.ndarray  # (V, V), row-stochastic
    concentration: float
    seed: int

    @property
    def V(self) -> int:
        return self.transitions.shape[0]

    @property
    def greedy_next(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the smallest token id
        return self.transitions.argmax(axis=1)


def make_truth_model(V: int, concentration: float, seed: int) -> TruthModel:
    """Seeded random transition matrix.

    Recipe (numpy ``default_rng(seed)``): each row is a symmetric
    Dirichlet(``concentration``) draw built from Gamma variates in log space,
    ``log G = log Gamma(a + 1) + log(U) / a`` with ``U = 1 - random()``,
    normalised by a stable softmax; this avoids all-zero rows when ``a`` is
    tiny.  Rows are then mixed with a uniform floor of ``1e-12`` so every
    transition has positive mass.  The Gamma block is drawn before the
    uniform block, both with shape (V, V).
    """
    if not isinstance(V, int) or V < 2:
        raise BadParam(f"V must be an integer >= 2, got {V!r}")
    if not concentration > 0:
        raise BadParam(f"concentration must be positive, got {concentration!r}")
    rng = np.random.default_rng(seed)
    g = rng.gamma(concentration + 1.0, size=(V, V))
    u = 1.0 - rng.random((V, V))
    logw = np.log(g) + np.log(u) / concentration
    logw -= logw.max(axis=1, keepdims=True)
    rows = np.exp(logw)
    rows /= rows.sum(axis=1, keepdims=True)
    rows = (1.0 - TRUTH_FLOOR) * rows + TRUTH_FLOOR / V
    rows.setflags(write=False)
    return TruthModel(rows, float(concentration), seed)


def _check_head(truth: TruthModel, k: int, eps: float) -> None:
    if k < 1:
        raise BadParam(f"head index must be >= 1, got {k}")
    if not 0.0 <= eps <= 1.0:
        raise BadParam(f"head noise must be in [0, 1], got {eps!r}")


def head_distribution(truth: TruthModel, context_token: int, k: int, eps: float) -> np.ndarray:
    """Full vocabulary distribution seen by head ``k`` at ``context_token``."""
    _check_head(truth, k, eps)
    v = np.zeros(truth.V)
    v[context_token] = 1.0
    for _ in range(k):
        v = v @ truth.transitions
    return (1.0 - eps) * v + eps / truth.V


def head_marginals(truth: TruthModel, context_token: int, k: int, eps: float, m: int) -> MarginalTable:
    """One-row table: head ``k``'s top ``m`` tokens at ``context_token``."""
    return top_m_rows([head_distribution(truth, context_token, k, eps)], m)


def head_table(truth: TruthModel, context_token: int, noise: Sequence[float], m: int) -> MarginalTable:
    """All heads at once; same vector-matrix products as :func:`head_distribution`."""
    v = np.zeros(truth.V)
    v[context_token] = 1.0
    dists = []
    for k, eps in enumerate(noise, 1):
        _check_head(truth, k, eps)
        v = v @ truth.transitions
        dists.append((1.0 - eps) * v + eps / truth.V)
    return top_m_rows(dists, m)


@dataclass(frozen=True)
class SimConfig:
    V: int = 256
    K: int = 4
    m: int = 32
    n: int = 64
    steps: int = 2000
    head_noise: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    concentration: float = 0.3
    seed: int = 42
    strategy: str = "dynamic"
    fixed_tree: FixedTreeSpec | None = None
    stream: int = 0
    restart_every: int = 16
    allow_nonmonotone_noise: bool = False

    def __post_init__(self):
        object.__setattr__(self, "head_noise", tuple(float(e) for e in self.head_noise))
        if self.K < 1 or self.m < 1 or self.n < 1 or self.steps < 1:
            raise BadParam("K, m, n and steps must all be >= 1")
        if self.V < 2 or self.m > self.V:
            raise BadParam(f"need 2 <= V and m <= V (V={self.V}, m={self.m})")
        if len(self.head_noise) != self.K:
            raise BadParam(f"head_noise has {len(self.head_noise)} entries, expected K={self.K}")
        if any(not 0.0 <= e <= 1.0 for e in self.head_noise):
            raise BadParam("head noise levels must lie in [0, 1]")
        if not self.allow_nonmonotone_noise and any(
            a > b for a, b in zip(self.head_noise, self.head_noise[1:])
        ):
            raise BadParam("head noise must be non-decreasing in k (set allow_nonmonotone_noise)")
        if self.restart_every < 0:
            raise BadParam("restart_every must be >= 0")
        if self.strategy not in ("dynamic", "fixed"):
            raise BadParam(f"unknown strategy {self.strategy!r}")
        if self.strategy == "fixed":
            if self.fixed_tree is None:
                raise BadParam("fixed strategy needs a fixed_tree")
            for c in self.fixed_tree.candidate_set:
                if c.depth > self.K or max(c.path) > self.m:
                    raise BadParam(f"fixed tree path {list(c.path)} does not fit K={self.K}, m={self.m}")

    @classmethod
    def from_json(cls, doc: dict[str, Any], base_dir: str | Path = ".") -> "SimConfig":
        doc = dict(doc)
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise BadParam(f"unknown config keys: {sorted(unknown)}")
        fixed = doc.get("fixed_tree")
        if isinstance(fixed, str):
            path = Path(fixed)
            if not path.is_absolute():
                path = Path(base_dir) / path
            if not path.exists():
                raise BadParam(f"fixed tree file not found: {path}")
            doc["fixed_tree"] = FixedTreeSpec.from_json(load(path))
        elif isinstance(fixed, dict):
            doc["fixed_tree"] = FixedTreeSpec.from_json(fixed)
        try:
            return cls(**doc)
        except TypeError as exc:
            raise BadParam(str(exc)) from None

    def to_json(self) -> dict[str, Any]:
        out = {
            k: getattr(self, k)
            for k in self.__dataclass_fields__
            if k != "fixed_tree"
        }
        out["head_noise"] = list(self.head_noise)
        if self.fixed_tree is not None:
            out["fixed_tree"] = self.fixed_tree.to_json()
        return out


@dataclass
class SimStats:
    total_steps: int = 0
    total_tokens: int = 0
    histogram: list[int] = field(default_factory=list)  # index = accepted_count
    candgen_offers: list[int] = field(default_factory=list, repr=False)

    @property
    def tokens_per_step(self) -> float:
        return self.total_tokens / self.total_steps if self.total_steps else 0.0

    def to_json(self) -> dict[str, Any]:
        offers = self.candgen_offers or [0]
        return {
            "total_steps": self.total_steps,
            "total_tokens": self.total_tokens,
            "tokens_per_step": self.tokens_per_step,
            "histogram": list(self.histogram),
            "candgen_offers_mean": sum(offers) / len(offers),
            "candgen_offers_max": max(offers),
        }


@dataclass(frozen=True)
class StepOutcome:
    result: VerificationResult
    tree: DraftTree
    offers: int  # candidate-generation queue offers (0 for the fixed tree)


class Simulator:
    """Decode loop state shared across steps of one configuration."""

    def __init__(self, config: SimConfig, truth: TruthModel | None = None):
        self.config = config
        self.truth = truth or make_truth_model(config.V, config.concentration, config.seed)
        self._greedy = self.truth.greedy_next
        self._tables: dict[int, MarginalTable] = {}
        self._steps: dict[int, StepOutcome] = {}

    def table(self, context: int) -> MarginalTable:
        t = self._tables.get(context)
        if t is None:
            t = head_table(self.truth, context, self.config.head_noise, self.config.m)
            self._tables[context] = t
        return t

    def greedy_chain(self, context: int, length: int) -> list[int]:
        out = []
        tok = context
        for _ in range(length):
            tok = int(self._greedy[tok])
            out.append(tok)
        return out

    def node_predictions(self, tree: DraftTree) -> list[int]:
        # order-1 truth: the realized context of a node ends in its own token
        return [int(self._greedy[nd.token_id]) for nd in tree.nodes]

    def decode_step(self, current: int) -> tuple[StepOutcome, int]:
        """One draft-and-verify step from ``current``; returns the outcome and the new current token."""
        out = self._steps.get(current)
        if out is None:
            cfg = self.config
            table = self.table(current)
            counter: Counter = Counter()
            if cfg.strategy == "dynamic":
                cands = generate_candidates(table, cfg.n, counter)
            else:
                cands = cfg.fixed_tree.candidate_set
            tree = build_tree(cands, table, root_token=current)
            prepare_buffers(tree)
            result = greedy_verify(tree, self.node_predictions(tree))
            out = StepOutcome(result, tree, counter["offers"])
            self._steps[current] = out
        return out, out.result.accepted_tokens[-1]

    def run(self, on_step=None) -> SimStats:
        cfg = self.config
        rng = np.random.default_rng([cfg.seed, 0x5EED, cfg.stream])
        stats = SimStats(histogram=[0] * (cfg.K + 2))
        current = 0
        for step in range(cfg.steps):
            if step == 0 or (cfg.restart_every and step % cfg.restart_every == 0):
                current = int(rng.integers(cfg.V))
            if on_step is not None:
                on_step(self, current)
            out, current = self.decode_step(current)
            count = out.result.accepted_count
            stats.total_steps += 1
            stats.total_tokens += count
            stats.histogram[count] += 1
            stats.candgen_offers.append(out.offers)
        return stats


def run_simulation(config: SimConfig, truth: TruthModel | None = None) -> SimStats:
    return Simulator(config, truth).run()


def collect_calibration(config: SimConfig, truth: TruthModel | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run ``config`` and count, per (head, rank), how often the head's token
    matched the greedy continuation.  Returns ``(accepts, trials)`` arrays of
    shape (K, m)."""
    K, m = config.K, config.m
    accepts = np.zeros((K, m), dtype=np.int64)
    trials = np.zeros((K, m), dtype=np.int64)

    def record(sim: Simulator, current: int) -> None:
        table = sim.table(current)
        truth_chain = sim.greedy_chain(current, K)
        trials[:] += 1
        for k in range(K):
            for i, tok in enumerate(table.token_ids[k]):
                if tok == truth_chain[k]:
                    accepts[k, i] += 1

    Simulator(config, truth).run(on_step=record)
    return accepts, trials


@dataclass(frozen=True)
class PairedRun:
    seed: int
    dynamic: float
    fixed: float
    fixed_expected_accept: float


def compare_dynamic_fixed(
    config: SimConfig, seeds: Sequence[int], calibration_steps: int | None = None
) -> list[PairedRun]:
    """Dynamic vs calibrated fixed tree, paired per seed.

    For each seed the fixed tree is calibrated on a disjoint decode stream
    (``stream=1``) of the same truth model; both strategies are then
    evaluated on stream 0.
    """
    runs = []
    for s in seeds:
        base = replace(config, seed=s, strategy="dynamic", fixed_tree=None, stream=0)
        truth = make_truth_model(base.V, base.concentration, s)
        calib = replace(base, stream=1, steps=calibration_steps or base.steps)
        fixed_spec = build_fixed_tree(accuracy_from_counts(*collect_calibration(calib, truth)), base.n)
        dyn = run_simulation(base, truth)
        fix = run_simulation(replace(base, strategy="fixed", fixed_tree=fixed_spec), truth)
        runs.append(PairedRun(s, dyn.tokens_per_step, fix.tokens_per_step, fixed_spec.expected_accept))
    return runs


def sign_test_pvalue(runs: Sequence[PairedRun]) -> float:
    """One-sided sign test that dynamic beats fixed; ties are dropped."""
    wins = sum(r.dynamic > r.fixed for r in runs)
    losses = sum(r.dynamic < r.fixed for r in runs)
    if wins + losses == 0:
        return 1.0
    return float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)


def mean(xs: Sequence[float]) -> float:
    return math.fsum(xs) / len(xs)
