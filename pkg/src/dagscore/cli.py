"""Command-line entry point: ``dagscore {score,search,simulate,enumerate}``.

Every command writes one JSON report (stdout by default). Timing, host and
cache counters live under ``meta``; everything else is a deterministic
function of the ``config`` echo. Exit status: 0 success, 1 validation error,
2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from typing import Optional, Sequence

from . import __version__
from .errors import DagscoreError, DataIOError
from .fractional import FractionalConfig
from .graphs import check_decomposable, parse_dag_text, parse_ug_text
from .io import format_float, ingest, read_text, write_json
from .mnw import DesignMatrix, PredictorPool
from .scorer import SubsetScorer, json_num
from .search import ModelPrior, exhaustive_small, greedy_dag_search, mc3_decomposable
from .simulate import SimSpec, simulate, write_simulation

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
Q_MAX = 5


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; here 2 means I/O, so raise instead."""

    def error(self, message):
        raise DagscoreError(message)


def _index_list(text: Optional[str]) -> Optional[tuple[int, ...]]:
    """'1,4,7' (1-based) -> (0, 3, 6)."""
    if text is None:
        return None
    text = text.strip()
    if not text:
        return ()
    try:
        idx = [int(t) for t in text.split(",")]
    except ValueError:
        raise DagscoreError(f"cannot parse predictor list {text!r}") from None
    if min(idx) < 1:
        raise DagscoreError("predictor indices are 1-based")
    if len(set(idx)) != len(idx):
        raise DagscoreError(f"duplicate predictor index in {text!r}")
    return tuple(sorted(i - 1 for i in idx))


def _design(Z: PredictorPool, preds: Optional[tuple[int, ...]]) -> tuple[DesignMatrix, tuple]:
    preds = preds or ()
    if preds and preds[-1] >= Z.p_star:
        raise DagscoreError(
            f"predictor {preds[-1] + 1} out of range (pool has {Z.p_star} predictors)"
        )
    return Z.design(preds), preds


def _prior(args) -> ModelPrior:
    return ModelPrior(args.prior, args.edge_prob)


def _frac_json(frac: FractionalConfig, n: int, p: int, q: int) -> dict:
    params = frac.resolve(n, p, q)
    return {"setting": frac.describe(), "a_d": params.a_d, "n0": params.n0, "n": n, "p": p}


def _pred_json(Z: PredictorPool, preds) -> list:
    return [{"index": k + 1, "label": Z.labels[k]} for k in preds]


def _common_config(args) -> dict:
    return {
        "y": args.y,
        "z": args.z,
        "frac": args.frac,
        "seed": args.seed,
    }


# -- commands -----------------------------------------------------------------


def cmd_score(args) -> tuple[dict, dict]:
    Y, Z = ingest(args.y, args.z)
    frac = FractionalConfig.parse(args.frac)
    X, preds = _design(Z, _index_list(args.predictors))
    text = read_text(args.graph)
    if args.decomposable:
        graph = check_decomposable(parse_ug_text(text, Y.q))
    else:
        graph = parse_dag_text(text, Y.q)
    scorer = SubsetScorer(Y, X, frac)
    rep = scorer.decomposable(graph) if args.decomposable else scorer.dag(graph)
    config = _common_config(args) | {
        "predictors": [k + 1 for k in preds],
        "graph": args.graph,
        "decomposable": args.decomposable,
    }
    result = rep.to_json(graph) | {
        "predictors": _pred_json(Z, preds),
        "fraction": _frac_json(frac, Y.n, X.p, Y.q),
    }
    return {"config": config, "result": result}, scorer.cache.stats()


def cmd_search(args) -> tuple[dict, dict]:
    Y, Z = ingest(args.y, args.z)
    frac = FractionalConfig.parse(args.frac)
    prior = _prior(args)
    config = _common_config(args) | {
        "mode": args.mode,
        "prior": prior.to_json(Y.q),
    }
    if args.mode == "greedy":
        res = greedy_dag_search(
            Y, Z, frac, prior,
            max_parents=args.max_parents,
            max_predictors=args.max_predictors,
            restarts=args.restarts,
            seed=args.seed,
        )
        config |= {
            "max_parents": args.max_parents,
            "max_predictors": args.max_predictors,
            "restarts": args.restarts,
        }
        result = {
            "best_graph": res.best_graph.to_json(),
            "best_predictors": _pred_json(Z, res.best_predictors),
            "best_score": json_num(res.best_score),
            "best_log_ml": json_num(res.best_log_ml),
            "log_prior": prior.log_prior(res.best_graph.n_edges, Y.q),
            "visited": res.visited,
            "trace": [t | {"score": json_num(t["score"])} for t in res.trace],
        }
    else:
        X, preds = _design(Z, _index_list(args.predictors))
        res = mc3_decomposable(
            Y, X, frac, prior,
            iterations=args.iterations,
            temperature=args.temperature,
            seed=args.seed,
        )
        config |= {
            "predictors": [k + 1 for k in preds],
            "iterations": args.iterations,
            "temperature": args.temperature,
        }
        result = {
            "best_graph": res.best_graph.to_json(),
            "modal_graph": res.modal_graph.to_json(),
            "best_predictors": _pred_json(Z, preds),
            "best_score": json_num(res.best_score),
            "best_log_ml": json_num(res.best_log_ml),
            "log_prior": prior.log_prior(res.best_graph.n_edges, Y.q),
            "visited": res.visited,
            "acceptance_rate": res.acceptance_rate,
            "edge_frequencies": [[float(v) for v in row] for row in res.edge_frequencies],
        }
    return {"config": config, "result": result}, res.cache


def cmd_simulate(args) -> tuple[dict, dict]:
    try:
        doc = json.loads(read_text(args.spec))
    except json.JSONDecodeError as exc:
        raise DagscoreError(f"{args.spec}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise DagscoreError(f"{args.spec}: simulation spec must be a JSON object")
    spec = SimSpec.from_json(doc)
    data = simulate(spec, args.seed)
    files = write_simulation(data, args.out_dir)
    config = {"spec": spec.to_json(), "seed": args.seed, "out_dir": args.out_dir}
    result = {"files": files, "truth": data.truth_json()}
    return {"config": config, "result": result}, {}


def cmd_enumerate(args) -> tuple[dict, dict]:
    Y, Z = ingest(args.y, args.z)
    if not 1 <= args.q_max <= Q_MAX:
        raise DagscoreError(f"--q-max must lie in 1..{Q_MAX}, got {args.q_max}")
    if Y.q > args.q_max:
        raise DagscoreError(f"Y has q={Y.q} columns, more than --q-max={args.q_max}")
    frac = FractionalConfig.parse(args.frac)
    prior = _prior(args)
    X, preds = _design(Z, _index_list(args.predictors))
    table = exhaustive_small(Y, X, frac, prior, args.mode)
    rows, classes = [], {}
    for rank, row in enumerate(table.rows, start=1):
        rows.append({
            "rank": rank,
            "class": row.class_id + 1,
            "graph": row.graph.to_json(),
            "log_ml": json_num(row.log_ml),
            "log_prior": row.log_prior,
            "log_post": json_num(row.log_post),
            "valid": row.valid,
        })
        classes.setdefault(row.class_id + 1, []).append(rank)
    config = _common_config(args) | {
        "predictors": [k + 1 for k in preds],
        "mode": args.mode,
        "q_max": args.q_max,
        "prior": prior.to_json(Y.q),
        "csv": args.csv,
    }
    result = {
        "mode": args.mode,
        "n_graphs": len(rows),
        "n_classes": table.n_classes,
        "rows": rows,
        "classes": [{"class": c, "ranks": r} for c, r in sorted(classes.items())],
    }
    if args.csv:
        _write_table_csv(args.csv, table)
    return {"config": config, "result": result}, table.cache


def _write_table_csv(path, table) -> None:
    def fmt(x):
        return format_float(x) if x is not None and x == x and abs(x) != float("inf") else ""

    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "class", "graph", "log_ml", "log_prior", "log_post", "valid"])
            for rank, row in enumerate(table.rows, start=1):
                graph = row.graph.to_text().strip().replace("\n", "; ")
                w.writerow([
                    rank, row.class_id + 1, graph,
                    fmt(row.log_ml), fmt(row.log_prior), fmt(row.log_post),
                    str(row.valid).lower(),
                ])
    except OSError as exc:
        raise DataIOError(f"cannot write {path}: {exc.strerror}") from exc


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dagscore", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"dagscore {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("--y", required=True, help="response CSV (header row required)")
        sp.add_argument("--z", help="predictor pool CSV")
        sp.add_argument("--frac", default="recommended", help="recommended | a_d=F,n0=K")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="-", help="JSON report path ('-' for stdout)")

    def prior_args(sp):
        sp.add_argument("--prior", choices=("uniform", "edge_binomial"), default="edge_binomial")
        sp.add_argument("--edge-prob", type=float, default=None,
                        help="edge probability (default min(1/2, 2/(q-1)))")

    s = sub.add_parser("score", help="score one DAG or decomposable graph")
    data_args(s)
    s.add_argument("--predictors", help="1-based predictor columns of Z, e.g. 1,4,7")
    s.add_argument("--graph", required=True, help="graph file ('j: parents' or 'i -- j' lines)")
    s.add_argument("--decomposable", action="store_true", help="graph file is undirected")

    s = sub.add_parser("search", help="greedy DAG search or MC3 over decomposable graphs")
    data_args(s)
    prior_args(s)
    s.add_argument("--mode", choices=("greedy", "mc3"), default="greedy")
    s.add_argument("--max-parents", type=int, default=None)
    s.add_argument("--max-predictors", type=int, default=0)
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--iterations", type=int, default=10000, help="MC3 steps")
    s.add_argument("--temperature", type=float, default=1.0)
    s.add_argument("--predictors", help="fixed design for mc3 (1-based)")

    s = sub.add_parser("simulate", help="draw synthetic data from a covariate-adjusted DAG")
    s.add_argument("--spec", required=True, help="simulation spec JSON")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--out", default="-", help="JSON report path ('-' for stdout)")

    s = sub.add_parser("enumerate", help="score every graph on q <= 5 vertices")
    data_args(s)
    prior_args(s)
    s.add_argument("--predictors", help="1-based predictor columns of Z")
    s.add_argument("--q-max", type=int, default=Q_MAX)
    s.add_argument("--mode", choices=("dag", "decomposable"), default="dag")
    s.add_argument("--csv", help="also write the score table as CSV")
    return p


COMMANDS = {
    "score": cmd_score,
    "search": cmd_search,
    "simulate": cmd_simulate,
    "enumerate": cmd_enumerate,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        body, cache = COMMANDS[args.command](args)
        report = {"command": args.command, "version": __version__} | body
        report["meta"] = {
            "elapsed_seconds": time.perf_counter() - t0,
            "host": platform.node(),
            "python": platform.python_version(),
            "threads": int(os.environ.get("DAGSCORE_THREADS", "1") or 1),
            "cache": cache,
        }
        write_json(args.out, report)
    except DagscoreError as exc:
        print(f"dagscore: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DataIOError, OSError) as exc:
        print(f"dagscore: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main() -> None:
    sys.exit(run())
