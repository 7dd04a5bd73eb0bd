"""Graph marginal likelihoods built from subset scores.

A DAG scores as sum_j [log m(Y_fa(j)) - log m(Y_pa(j))]; a decomposable graph
as sum over cliques minus sum over separators. All terms are fractional subset
marginals, so both share one cache keyed by vertex bitmask.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .fractional import FractionalConfig, FractionParams, SubsetScore, subset_score_from_ete
from .graphs import Dag, DecomposableGraph, mask_of, members
from .mnw import DesignMatrix, ResponseMatrix, SufficientStats, compute_stats


class ScoreCache:
    """Write-once map from vertex-subset bitmask to SubsetScore.

    Safe for concurrent use; two threads racing on the same key may both
    compute the value, but only the first insert is kept.
    """

    def __init__(self):
        self._data: dict[int, SubsetScore] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self):
        return len(self._data)

    def __contains__(self, key: int) -> bool:
        return key in self._data

    def get_or_compute(self, key: int, compute: Callable[[], SubsetScore]) -> SubsetScore:
        found = self._data.get(key)
        if found is not None:
            with self._lock:
                self.hits += 1
            return found
        value = compute()
        with self._lock:
            self.misses += 1
            return self._data.setdefault(key, value)

    def stats(self) -> dict:
        return {"entries": len(self._data), "hits": self.hits, "misses": self.misses}


@dataclass
class ScoreReport:
    log_ml: float
    valid: bool
    mode: str
    per_vertex: list = field(default_factory=list)
    per_clique: list = field(default_factory=list)
    per_separator: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def to_json(self, graph: Union[Dag, DecomposableGraph]) -> dict:
        out = {
            "graph": graph.to_json(),
            "mode": self.mode,
            "log_ml": json_num(self.log_ml),
            "valid": self.valid,
            "violations": self.violations,
        }
        if self.mode == "dag":
            out["per_vertex"] = [
                {"vertex": j + 1, "log_ml_family": json_num(f), "log_ml_parents": json_num(p)}
                for j, f, p in self.per_vertex
            ]
        else:
            out["per_clique"] = [
                {"vertices": [v + 1 for v in c], "log_ml": json_num(s)} for c, s in self.per_clique
            ]
            out["per_separator"] = [
                {"vertices": [v + 1 for v in c], "log_ml": json_num(s)} for c, s in self.per_separator
            ]
        return out


def json_num(x: float):
    return x if math.isfinite(x) else None


class SubsetScorer:
    """Fractional subset scores for one (Y, X, config), memoized in a ScoreCache."""

    def __init__(
        self,
        Y: ResponseMatrix,
        X: DesignMatrix,
        config: FractionalConfig,
        cache: Optional[ScoreCache] = None,
        stats: Optional[SufficientStats] = None,
    ):
        self.Y, self.X, self.config = Y, X, config
        self.stats = stats if stats is not None else compute_stats(Y, X)
        self.params: FractionParams = config.resolve(Y.n, X.p, Y.q)
        self.cache = cache if cache is not None else ScoreCache()

    @property
    def bound(self) -> int:
        """Subsets must have fewer than n - p vertices."""
        return self.params.n - self.params.p

    def score_mask(self, mask: int) -> SubsetScore:
        return self.cache.get_or_compute(
            mask, lambda: subset_score_from_ete(self.stats.ete, members(mask), self.params)
        )

    def score(self, J) -> SubsetScore:
        return self.score_mask(mask_of(J))

    def local_dag_score(self, j: int, parent_mask: int) -> float:
        """log m(Y_j | Y_pa), or -inf when the family is infeasible."""
        fam = self.score_mask(parent_mask | (1 << j))
        pa = self.score_mask(parent_mask)
        if not (fam.valid and pa.valid):
            return -math.inf
        return fam.log_ml - pa.log_ml

    def dag(self, d: Dag) -> ScoreReport:
        if d.q != self.params.q:
            raise ValueError(f"DAG has {d.q} vertices but Y has {self.params.q} columns")
        per_vertex, violations = [], []
        total, valid = 0.0, True
        for j in range(d.q):
            pa_mask = d.parent_masks[j]
            fam = self.score_mask(pa_mask | (1 << j))
            pa = self.score_mask(pa_mask)
            per_vertex.append((j, fam.log_ml, pa.log_ml))
            if fam.valid and pa.valid:
                total += fam.log_ml - pa.log_ml
            else:
                valid = False
                violations.append(self._violation(j + 1, "family", fam if not fam.valid else pa))
        return ScoreReport(total if valid else -math.inf, valid, "dag", per_vertex, violations=violations)

    def decomposable(self, g: DecomposableGraph) -> ScoreReport:
        per_c, per_s, violations = [], [], []
        total, valid = 0.0, True
        for c in g.cliques:
            s = self.score(c)
            per_c.append((c, s.log_ml))
            if s.valid:
                total += s.log_ml
            else:
                valid = False
                violations.append(self._violation([v + 1 for v in c], "clique", s))
        for sep in g.separators:
            s = self.score(sep)
            per_s.append((sep, s.log_ml))
            if s.valid:
                total -= s.log_ml
            else:
                valid = False
                violations.append(self._violation([v + 1 for v in sep], "separator", s))
        return ScoreReport(
            total if valid else -math.inf, valid, "decomposable",
            per_clique=per_c, per_separator=per_s, violations=violations,
        )

    def _violation(self, where, what: str, s: SubsetScore) -> dict:
        return {
            "where": where,
            "kind": what,
            "required_bound": self.bound,
            "actual_size": len(s.subset),
            "reason": s.reason,
        }


def dag_log_ml(
    d: Dag,
    config: FractionalConfig,
    Y: ResponseMatrix,
    X: DesignMatrix,
    cache: Optional[ScoreCache] = None,
) -> ScoreReport:
    """Fractional marginal likelihood of a DAG model.

    Infeasible families (|fa(j)| >= n - p) give ``valid=False`` with the
    violations listed; nothing is raised. A cache passed in must only ever
    be used with this same (Y, X, config).
    """
    return SubsetScorer(Y, X, config, cache).dag(d)


def decomposable_log_ml(
    g: DecomposableGraph,
    config: FractionalConfig,
    Y: ResponseMatrix,
    X: DesignMatrix,
    cache: Optional[ScoreCache] = None,
) -> ScoreReport:
    return SubsetScorer(Y, X, config, cache).decomposable(g)
