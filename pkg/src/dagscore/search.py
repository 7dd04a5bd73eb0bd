"""Structure search: greedy DAG + predictor hill climbing, MC^3 over
decomposable graphs, and exhaustive scoring of small graph spaces.

Scores are log marginal likelihood plus a model-space log prior. Infeasible
graphs (a family or clique too large for the sample) score -inf and are
never selected, but they don't stop the search.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DagscoreError
from .fractional import FractionalConfig
from .graphs import (
    Dag,
    DecomposableGraph,
    all_dags,
    all_decomposable,
    decomposable_from_masks,
    fingerprint,
    members,
    validate_dag,
)
from .mnw import DesignMatrix, PredictorPool, ResponseMatrix
from .scorer import ScoreCache, SubsetScorer

MIN_IMPROVEMENT = 1e-9


@dataclass(frozen=True)
class ModelPrior:
    """Prior over graph structures.

    ``edge_binomial`` treats each of the possible edges as present
    independently with probability ``edge_prob``; when no probability is given
    it defaults to 2/(q-1) (q expected edges), capped at 1/2.
    """

    kind: str = "edge_binomial"
    edge_prob: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("uniform", "edge_binomial"):
            raise DagscoreError(f"unknown model prior {self.kind!r}")
        if self.edge_prob is not None and not 0.0 < self.edge_prob < 1.0:
            raise DagscoreError(f"edge_prob must lie in (0, 1), got {self.edge_prob}")

    def prob(self, q: int) -> float:
        if self.edge_prob is not None:
            return self.edge_prob
        return 0.5 if q <= 2 else min(0.5, 2.0 / (q - 1))

    def log_prior(self, n_edges: int, q: int) -> float:
        if self.kind == "uniform":
            return 0.0
        rho = self.prob(q)
        max_edges = q * (q - 1) // 2
        return n_edges * math.log(rho) + (max_edges - n_edges) * math.log1p(-rho)

    def to_json(self, q: int) -> dict:
        return {"kind": self.kind, "edge_prob": None if self.kind == "uniform" else self.prob(q)}


@dataclass
class SearchResult:
    best_graph: object
    best_predictors: tuple[int, ...]
    best_score: float
    best_log_ml: float
    trace: list = field(default_factory=list)
    visited: int = 0
    edge_frequencies: Optional[np.ndarray] = None
    modal_graph: Optional[object] = None
    acceptance_rate: Optional[float] = None
    samples: list = field(default_factory=list)
    visit_counts: dict = field(default_factory=dict)
    cache: dict = field(default_factory=dict)


def _threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("DAGSCORE_THREADS", "1") or 1)
    return max(1, threads)


class _ScorerPool:
    """One SubsetScorer (and cache) per predictor subset."""

    def __init__(self, Y: ResponseMatrix, Z: PredictorPool, config: FractionalConfig):
        self.Y, self.Z, self.config = Y, Z, config
        self._scorers: dict[tuple[int, ...], Optional[SubsetScorer]] = {}

    def get(self, preds: tuple[int, ...]) -> Optional[SubsetScorer]:
        if preds in self._scorers:
            return self._scorers[preds]
        try:
            scorer = SubsetScorer(self.Y, self.Z.design(preds), self.config)
        except DagscoreError:
            scorer = None  # rank deficient design or improper fraction
        return self._scorers.setdefault(preds, scorer)

    def cache_stats(self) -> dict:
        hits = misses = entries = 0
        for s in self._scorers.values():
            if s is not None:
                hits += s.cache.hits
                misses += s.cache.misses
                entries += len(s.cache)
        return {"designs": len(self._scorers), "entries": entries, "hits": hits, "misses": misses}


def _descendants(q: int, children: Sequence[int], start: int, skip_edge=None) -> int:
    seen = 0
    stack = [start]
    while stack:
        u = stack.pop()
        kids = children[u]
        if skip_edge is not None and u == skip_edge[0]:
            kids &= ~(1 << skip_edge[1])
        for w in members(kids & ~seen):
            seen |= 1 << w
            stack.append(w)
    return seen


def _random_dag(q: int, max_parents: int, rho: float, rng) -> list[int]:
    order = rng.permutation(q)
    masks = [0] * q
    for a in range(q):
        for b in range(a + 1, q):
            i, j = int(order[a]), int(order[b])
            if bin(masks[j]).count("1") < max_parents and rng.random() < rho:
                masks[j] |= 1 << i
    return masks


def greedy_dag_search(
    Y: ResponseMatrix,
    Z: Optional[PredictorPool],
    config: FractionalConfig,
    prior: ModelPrior,
    max_parents: Optional[int] = None,
    max_predictors: int = 0,
    restarts: int = 1,
    seed: int = 0,
    threads: Optional[int] = None,
) -> SearchResult:
    """Best-improvement hill climbing over (DAG, predictor subset).

    One neighbourhood holds every legal edge addition, deletion and reversal
    plus every single predictor addition or removal. The best strictly
    improving move (ties to the smallest move descriptor) is applied until
    none is left. Restart 0 starts from the empty DAG with no predictors;
    later restarts start from random sparse DAGs. Deterministic given seed.
    """
    n, q = Y.n, Y.q
    if Z is None:
        Z = PredictorPool.empty(n)
    if Z.n != n:
        raise DagscoreError(f"Y has {n} rows but the predictor pool has {Z.n}")
    max_predictors = min(max_predictors, Z.p_star)
    if max_parents is None:
        max_parents = max(0, min(q - 1, n - max_predictors - 2))
    if not max_parents < n - max_predictors - 1:
        raise DagscoreError(
            f"max_parents={max_parents} violates the sparsity bound "
            f"max_parents < n - max_predictors - 1 = {n - max_predictors - 1}"
        )
    if restarts < 1:
        raise DagscoreError("restarts must be >= 1")
    pool = _ScorerPool(Y, Z, config.with_common_p(max_predictors))
    n_threads = _threads(threads)
    executor = ThreadPoolExecutor(n_threads) if n_threads > 1 else None
    rho = prior.prob(q)

    best = None
    visited = 0
    all_traces = []
    try:
        for r in range(restarts):
            rng = np.random.default_rng([seed, r])
            parents = [0] * q if r == 0 else _random_dag(q, max_parents, rho, rng)
            preds: tuple[int, ...] = ()
            result = _climb(pool, parents, preds, prior, max_parents, max_predictors, executor, r)
            visited += result["visited"]
            all_traces.extend(result["trace"])
            if best is None or result["score"] > best["score"]:
                best = result
    finally:
        if executor is not None:
            executor.shutdown()

    dag = validate_dag([members(m) for m in best["parents"]], Y.labels)
    out = SearchResult(
        best_graph=dag,
        best_predictors=best["preds"],
        best_score=best["score"],
        best_log_ml=best["log_ml"],
        trace=all_traces,
        visited=visited,
        cache=pool.cache_stats(),
    )
    return out


def _climb(pool, parents, preds, prior, max_parents, max_predictors, executor, restart):
    q = pool.Y.q
    n_pred = pool.Z.p_star
    scorer = pool.get(preds)
    locs = [scorer.local_dag_score(j, parents[j]) for j in range(q)]
    n_edges = sum(bin(m).count("1") for m in parents)
    score = math.fsum(locs) + prior.log_prior(n_edges, q)
    trace = [{"restart": restart, "iteration": 0, "move": "start", "score": score}]
    visited = 1
    it = 0
    while True:
        it += 1
        children = [0] * q
        for j in range(q):
            for i in members(parents[j]):
                children[i] |= 1 << j
        desc = [_descendants(q, children, v) for v in range(q)]
        candidates = []

        def edge_candidate(move, changes, new_edges):
            def run():
                new_locs = list(locs)
                for j, mask in changes:
                    new_locs[j] = scorer.local_dag_score(j, mask)
                return math.fsum(new_locs) + prior.log_prior(new_edges, q), None
            return move, run

        for i in range(q):
            for j in range(q):
                if i == j:
                    continue
                has_ij = parents[j] >> i & 1
                has_ji = parents[i] >> j & 1
                if has_ij:
                    candidates.append(
                        edge_candidate(("delete", i, j), [(j, parents[j] & ~(1 << i))], n_edges - 1)
                    )
                    if bin(parents[i]).count("1") < max_parents:
                        if not _descendants(q, children, i, skip_edge=(i, j)) >> j & 1:
                            candidates.append(
                                edge_candidate(
                                    ("reverse", i, j),
                                    [(j, parents[j] & ~(1 << i)), (i, parents[i] | (1 << j))],
                                    n_edges,
                                )
                            )
                elif not has_ji:
                    if bin(parents[j]).count("1") < max_parents and not desc[j] >> i & 1:
                        candidates.append(
                            edge_candidate(("add", i, j), [(j, parents[j] | (1 << i))], n_edges + 1)
                        )

        def pred_candidate(move, new_preds):
            def run():
                s = pool.get(new_preds)
                if s is None:
                    return -math.inf, None
                new_locs = [s.local_dag_score(j, parents[j]) for j in range(q)]
                return math.fsum(new_locs) + prior.log_prior(n_edges, q), new_locs
            return move, run

        for k in range(n_pred):
            if k in preds:
                candidates.append(
                    pred_candidate(("drop_predictor", k), tuple(x for x in preds if x != k))
                )
            elif len(preds) < max_predictors:
                candidates.append(
                    pred_candidate(("add_predictor", k), tuple(sorted(preds + (k,))))
                )

        if executor is not None:
            evaluated = list(executor.map(lambda c: c[1](), candidates))
        else:
            evaluated = [c[1]() for c in candidates]
        visited += len(candidates)

        best_move, best_val, best_locs = None, score + MIN_IMPROVEMENT, None
        for (move, _), (val, new_locs) in zip(candidates, evaluated):
            if val > best_val or (val == best_val and best_move is not None and move < best_move):
                best_move, best_val, best_locs = move, val, new_locs
        if best_move is None:
            break

        kind = best_move[0]
        if kind == "add":
            _, i, j = best_move
            parents[j] |= 1 << i
            n_edges += 1
            locs[j] = scorer.local_dag_score(j, parents[j])
        elif kind == "delete":
            _, i, j = best_move
            parents[j] &= ~(1 << i)
            n_edges -= 1
            locs[j] = scorer.local_dag_score(j, parents[j])
        elif kind == "reverse":
            _, i, j = best_move
            parents[j] &= ~(1 << i)
            parents[i] |= 1 << j
            locs[j] = scorer.local_dag_score(j, parents[j])
            locs[i] = scorer.local_dag_score(i, parents[i])
        else:
            k = best_move[1]
            preds = (
                tuple(x for x in preds if x != k)
                if kind == "drop_predictor"
                else tuple(sorted(preds + (k,)))
            )
            scorer = pool.get(preds)
            locs = best_locs
        score = math.fsum(locs) + prior.log_prior(n_edges, q)
        trace.append(
            {"restart": restart, "iteration": it, "move": _describe(best_move), "score": score}
        )

    return {
        "parents": list(parents),
        "preds": preds,
        "score": score,
        "log_ml": math.fsum(locs),
        "trace": trace,
        "visited": visited,
    }


def _describe(move) -> str:
    kind = move[0]
    if kind in ("add", "delete", "reverse"):
        return f"{kind} {move[1] + 1}->{move[2] + 1}"
    return f"{kind} {move[1] + 1}"


# -- MC^3 over decomposable graphs --------------------------------------------


def mc3_decomposable(
    Y: ResponseMatrix,
    X: DesignMatrix,
    config: FractionalConfig,
    prior: ModelPrior,
    iterations: int,
    temperature: float = 1.0,
    seed: int = 0,
    score_fn: Optional[Callable[[DecomposableGraph], float]] = None,
    thin: Optional[int] = None,
) -> SearchResult:
    """Metropolis-Hastings over decomposable graphs.

    Each step proposes toggling one uniformly chosen vertex pair; proposals
    that break chordality are rejected. The target is
    exp((log m_G(Y) + log prior(G)) / temperature). ``score_fn`` replaces the
    data score (used with a constant stub in tests). ``thin`` keeps every
    thin-th state in ``samples``.
    """
    if temperature <= 0:
        raise DagscoreError("temperature must be positive")
    if iterations < 0:
        raise DagscoreError("iterations must be >= 0")
    q = Y.q
    if score_fn is None:
        scorer = SubsetScorer(Y, X, config)

        def score_fn(g):
            return scorer.decomposable(g).log_ml
    else:
        scorer = None

    pairs = [(i, j) for i in range(q) for j in range(i + 1, q)]
    rng = np.random.default_rng(seed)
    nbrs = tuple([0] * q)
    g = decomposable_from_masks(nbrs)
    known: dict[tuple[int, ...], float] = {}

    def target(graph):
        key = graph.neighbor_masks
        if key not in known:
            known[key] = score_fn(graph) + prior.log_prior(graph.n_edges, q)
        return known[key]

    current = target(g)
    counts: dict[tuple[int, ...], int] = {}
    edge_counts = np.zeros((q, q))
    accepted = 0
    samples = []
    for it in range(iterations):
        if pairs:
            i, j = pairs[int(rng.integers(len(pairs)))]
            u = rng.random()
            prop = list(nbrs)
            prop[i] ^= 1 << j
            prop[j] ^= 1 << i
            g2 = decomposable_from_masks(prop)
            if g2 is not None:
                t2 = target(g2)
                if t2 > -math.inf and (
                    current == -math.inf or math.log(u) < (t2 - current) / temperature
                ):
                    g, nbrs, current = g2, g2.neighbor_masks, t2
                    accepted += 1
        counts[nbrs] = counts.get(nbrs, 0) + 1
        for a, b in g.edges():
            edge_counts[a, b] += 1
            edge_counts[b, a] += 1
        if thin and (it + 1) % thin == 0:
            samples.append(nbrs)

    if counts:
        modal_key = min(counts, key=lambda k: (-counts[k], k))
    else:
        modal_key = nbrs
    best_key = max(known, key=lambda k: (known[k], tuple(-x for x in k)))
    best_graph = decomposable_from_masks(best_key)
    freq = edge_counts / iterations if iterations else edge_counts
    out = SearchResult(
        best_graph=best_graph,
        best_predictors=tuple(range(X.p)),
        best_score=known[best_key],
        best_log_ml=known[best_key] - prior.log_prior(best_graph.n_edges, q),
        visited=len(counts),
        edge_frequencies=freq,
        modal_graph=decomposable_from_masks(modal_key),
        acceptance_rate=accepted / iterations if iterations else 0.0,
        samples=samples,
        visit_counts=counts,
        cache=scorer.cache.stats() if scorer is not None else {},
    )
    return out


# -- exhaustive ---------------------------------------------------------------


@dataclass
class ScoreRow:
    graph: object
    log_ml: float
    log_prior: float
    log_post: float
    valid: bool
    class_id: int


@dataclass
class ScoreTable:
    mode: str
    rows: list
    n_classes: int
    cache: dict = field(default_factory=dict)


def exhaustive_small(
    Y: ResponseMatrix,
    X: DesignMatrix,
    config: FractionalConfig,
    prior: ModelPrior,
    mode: str = "dag",
    cache: Optional[ScoreCache] = None,
) -> ScoreTable:
    """Score every DAG (or decomposable graph) on q <= 5 vertices.

    Rows come back sorted by log posterior, best first, ties in enumeration
    order. DAGs get a Markov equivalence class id from their fingerprint;
    undirected graphs are each their own class.
    """
    q = Y.q
    if q > 5:
        raise DagscoreError(f"exhaustive scoring is limited to q <= 5, got q={q}")
    if mode not in ("dag", "decomposable"):
        raise DagscoreError(f"unknown mode {mode!r}")
    scorer = SubsetScorer(Y, X, config, cache)
    rows = []
    classes: dict = {}
    graphs = all_dags(q) if mode == "dag" else all_decomposable(q)
    for g in graphs:
        if mode == "dag":
            rep = scorer.dag(g)
            cls = classes.setdefault(fingerprint(g), len(classes))
        else:
            rep = scorer.decomposable(g)
            cls = classes.setdefault(g.neighbor_masks, len(classes))
        lp = prior.log_prior(g.n_edges, q)
        rows.append(ScoreRow(g, rep.log_ml, lp, rep.log_ml + lp, rep.valid, cls))
    order = sorted(range(len(rows)), key=lambda k: (-rows[k].log_post, k))
    return ScoreTable(mode, [rows[k] for k in order], len(classes), scorer.cache.stats())
