"""Synthetic data from a covariate-adjusted Gaussian DAG model.

Each response is drawn given its parents:
``y_j = Z_S alpha_j + Y_pa(j) gamma_j + eps_j`` with ``eps_j ~ N(0, 1/lambda_j)``,
visiting vertices in topological order. A positive lambda for every vertex
makes the implied error precision s.p.d. by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DagscoreError, DataIOError
from .graphs import Dag, members, validate_dag
from .io import write_csv_matrix
from .mnw import PredictorPool, ResponseMatrix


@dataclass
class SimSpec:
    n: int
    q: int
    p_star: int
    p_true: int
    true_dag: Dag
    true_predictors: Optional[tuple[int, ...]] = None
    coef_scale: float = 1.0
    lambdas: Optional[tuple[float, ...]] = None
    gammas: Optional[dict] = None  # (parent, child) -> weight, 0-based
    effect_prob: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.q < 1 or self.p_star < 0:
            raise DagscoreError("n and q must be positive and p_star non-negative")
        if not 0 <= self.p_true <= self.p_star:
            raise DagscoreError(f"p_true={self.p_true} must lie in 0..p_star={self.p_star}")
        if self.true_dag.q != self.q:
            raise DagscoreError("true_dag must have q vertices")
        if self.true_predictors is not None:
            tp = tuple(sorted(set(self.true_predictors)))
            if len(tp) != self.p_true or (tp and not 0 <= tp[0] <= tp[-1] < self.p_star):
                raise DagscoreError("true_predictors must be p_true distinct indices in range")
            self.true_predictors = tp
        if self.lambdas is not None:
            if len(self.lambdas) != self.q or min(self.lambdas) <= 0:
                raise DagscoreError("lambdas must be q positive precisions")
        if self.gammas is not None:
            edges = set(self.true_dag.edges())
            for e in self.gammas:
                if tuple(e) not in edges:
                    raise DagscoreError(f"gamma given for non-edge {e[0] + 1}->{e[1] + 1}")
        if not 0.0 <= self.effect_prob <= 1.0:
            raise DagscoreError("effect_prob must lie in [0, 1]")

    @classmethod
    def from_json(cls, doc: dict) -> "SimSpec":
        """Build from a JSON document; vertex and predictor ids there are 1-based."""
        try:
            q = int(doc["q"])
            dag_doc = doc.get("true_dag", "chain")
            if dag_doc == "chain":
                dag = validate_dag([[j - 1] if j else [] for j in range(q)])
            elif dag_doc == "empty":
                dag = validate_dag([[] for _ in range(q)])
            else:
                dag = validate_dag([[i - 1 for i in pa] for pa in dag_doc])
            tp = doc.get("true_predictors")
            gam = doc.get("gammas")
            return cls(
                n=int(doc["n"]),
                q=q,
                p_star=int(doc.get("p_star", 0)),
                p_true=int(doc.get("p_true", 0)),
                true_dag=dag,
                true_predictors=None if tp is None else tuple(k - 1 for k in tp),
                coef_scale=float(doc.get("coef_scale", 1.0)),
                lambdas=None if doc.get("lambdas") is None else tuple(map(float, doc["lambdas"])),
                gammas=None if gam is None else {(int(i) - 1, int(j) - 1): float(w) for i, j, w in gam},
                effect_prob=float(doc.get("effect_prob", 1.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DagscoreError(f"invalid simulation spec: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "q": self.q,
            "p_star": self.p_star,
            "p_true": self.p_true,
            "true_dag": [[i + 1 for i in pa] for pa in self.true_dag.parents],
            "true_predictors": None
            if self.true_predictors is None
            else [k + 1 for k in self.true_predictors],
            "coef_scale": self.coef_scale,
            "lambdas": None if self.lambdas is None else list(self.lambdas),
            "gammas": None
            if self.gammas is None
            else [[i + 1, j + 1, w] for (i, j), w in sorted(self.gammas.items())],
            "effect_prob": self.effect_prob,
        }


@dataclass
class SimulatedData:
    Y: ResponseMatrix
    Z: PredictorPool
    predictors: tuple[int, ...]
    alpha: np.ndarray  # (p_true, q) coefficients of the true predictors
    gammas: dict
    lambdas: np.ndarray
    dag: Dag
    seed: int
    spec: SimSpec = field(repr=False, default=None)

    def truth_json(self) -> dict:
        return {
            "seed": self.seed,
            "spec": self.spec.to_json() if self.spec is not None else None,
            "true_dag": [[i + 1 for i in pa] for pa in self.dag.parents],
            "true_predictors": [k + 1 for k in self.predictors],
            "alpha": [[float(v) for v in row] for row in self.alpha],
            "gammas": [[i + 1, j + 1, float(w)] for (i, j), w in sorted(self.gammas.items())],
            "lambdas": [float(v) for v in self.lambdas],
        }


def _coef(rng, scale: float) -> float:
    return scale * float(rng.choice((-1.0, 1.0))) * float(rng.uniform(0.5, 1.0))


def simulate(spec: SimSpec, seed: int) -> SimulatedData:
    rng = np.random.default_rng(seed)
    n, q = spec.n, spec.q
    Z = rng.standard_normal((n, spec.p_star))
    eps = rng.standard_normal((n, q))
    if spec.true_predictors is None:
        preds = tuple(sorted(int(k) for k in rng.choice(spec.p_star, spec.p_true, replace=False)))
    else:
        preds = tuple(spec.true_predictors)
    alpha = np.zeros((len(preds), q))
    for a in range(len(preds)):
        for j in range(q):
            if rng.random() < spec.effect_prob:
                alpha[a, j] = _coef(rng, spec.coef_scale)
    gammas = {}
    for i, j in sorted(spec.true_dag.edges()):
        gammas[(i, j)] = (
            spec.gammas[(i, j)] if spec.gammas and (i, j) in spec.gammas else _coef(rng, spec.coef_scale)
        )
    lambdas = np.ones(q) if spec.lambdas is None else np.asarray(spec.lambdas, dtype=float)
    y = np.zeros((n, q))
    zs = Z[:, list(preds)]
    for j in spec.true_dag.order:
        mean = zs @ alpha[:, j]
        for i in members(spec.true_dag.parent_masks[j]):
            mean = mean + gammas[(i, j)] * y[:, i]
        y[:, j] = mean + eps[:, j] / np.sqrt(lambdas[j])
    Y = ResponseMatrix(y, tuple(f"y{j + 1}" for j in range(q)))
    pool = PredictorPool(Z, tuple(f"z{k + 1}" for k in range(spec.p_star)))
    return SimulatedData(Y, pool, preds, alpha, gammas, lambdas, spec.true_dag, seed, spec)


def write_simulation(data: SimulatedData, out_dir) -> dict:
    """Write Y.csv, Z.csv and truth.json into out_dir; return the file paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataIOError(f"cannot create {out}: {exc.strerror}") from exc
    paths = {"y": out / "Y.csv", "z": out / "Z.csv", "truth": out / "truth.json"}
    write_csv_matrix(paths["y"], data.Y.values, data.Y.labels)
    write_csv_matrix(paths["z"], data.Z.values, data.Z.labels)
    try:
        paths["truth"].write_text(json.dumps(data.truth_json(), indent=2) + "\n")
    except OSError as exc:
        raise DataIOError(f"cannot write {paths['truth']}: {exc.strerror}") from exc
    return {k: str(v) for k, v in paths.items()}
