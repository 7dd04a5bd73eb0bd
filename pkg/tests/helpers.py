"""Shared data generators for the test suite."""

from __future__ import annotations

import numpy as np

from dagscore.mnw import DesignMatrix, MnwHyper, ResponseMatrix


def random_data(rng, n: int, q: int, p: int = 0, corr: bool = True):
    """Y (n x q) and an intercept-plus-p-predictor design, generic position."""
    z = rng.standard_normal((n, p))
    y = rng.standard_normal((n, q))
    if corr and q > 1:
        y = y @ np.linalg.cholesky(random_spd(rng, q)).T
    if p:
        y = y + z @ rng.normal(size=(p, q))
    return ResponseMatrix(y), DesignMatrix.from_predictors(z)


def random_spd(rng, k: int, ridge: float = 0.5) -> np.ndarray:
    a = rng.standard_normal((k, k))
    return a @ a.T + ridge * np.eye(k)


def random_hyper(rng, p1: int, q: int, extra_dof: float = 1.5) -> MnwHyper:
    return MnwHyper(
        rng.standard_normal((p1, q)), random_spd(rng, p1), q - 1 + extra_dof, random_spd(rng, q)
    )


def random_chordal(rng, q: int, density: float = 0.5) -> np.ndarray:
    """Adjacency of a random chordal graph: random elimination game fill-in."""
    a = rng.random((q, q)) < density
    a = np.triu(a, 1)
    a = a | a.T
    order = rng.permutation(q)
    eliminated = np.zeros(q, dtype=bool)
    for v in order:
        later = np.flatnonzero(a[v] & ~eliminated)
        for i in later:
            for j in later:
                if i != j:
                    a[i, j] = True
        eliminated[v] = True
    return a.astype(int)


# -- CLI -----------------------------------------------------------------------------


def report_schema() -> dict:
    import json
    from importlib import resources

    return json.loads(resources.files("dagscore").joinpath("schema/report.schema.json").read_text())


def run_cli(capsys, *argv):
    """Run the CLI in-process; return (exit code, parsed stdout or None, stderr)."""
    import json

    from dagscore.cli import run

    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 and out.strip() else None), err


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.Draft202012Validator(report_schema()).validate(report)


def strip_meta(report: dict) -> dict:
    return {k: v for k, v in report.items() if k != "meta"}
