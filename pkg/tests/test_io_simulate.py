from __future__ import annotations

import filecmp

import numpy as np
import pytest

from dagscore.errors import DagscoreError, DataIOError
from dagscore.graphs import validate_dag
from dagscore.io import ingest, read_csv_matrix, write_csv_matrix
from dagscore.simulate import SimSpec, simulate, write_simulation


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_well_formed_csv(tmp_path):
    Y, Z = ingest(write(tmp_path, "y.csv", "a,b\n1,2\n3,4\n5,6\n"))
    assert (Y.n, Y.q) == (3, 2) and Y.labels == ("a", "b")
    assert Z.p_star == 0 and Z.n == 3


@pytest.mark.parametrize(
    "text,match",
    [
        ("a,b\n", "no data rows"),
        ("", "missing header"),
        ("a,a\n1,2\n", "duplicate"),
        ("a,b\n1,2\n3\n", "line 3: expected 2 fields"),
        ("a,b\n1,2\n3,x\n", r"line 3: cannot parse 'x' in column 2 \(b\)"),
        ("a,b\n1,2\n3,nan\n", r"row 2, column 2"),
        ("a,b\n1,inf\n", r"row 1, column 2"),
    ],
)
def test_csv_errors(tmp_path, text, match):
    with pytest.raises(DataIOError, match=match):
        read_csv_matrix(write(tmp_path, "y.csv", text))


def test_row_count_mismatch(tmp_path):
    y = write(tmp_path, "y.csv", "a\n1\n2\n")
    z = write(tmp_path, "z.csv", "z\n1\n")
    with pytest.raises(DataIOError, match="row count mismatch"):
        ingest(y, z)


def test_missing_file(tmp_path):
    with pytest.raises(DataIOError, match="cannot open"):
        ingest(tmp_path / "nope.csv")


def test_float_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((20, 3)) * 10.0 ** rng.integers(-300, 300, (20, 3))
    write_csv_matrix(tmp_path / "m.csv", vals, ["a", "b", "c"])
    back, labels = read_csv_matrix(tmp_path / "m.csv")
    assert np.array_equal(back, vals) and labels == ("a", "b", "c")


def test_simulate_write_ingest_round_trip(tmp_path):
    spec = SimSpec(n=30, q=4, p_star=5, p_true=2, true_dag=validate_dag([[], [0], [1], [1]]))
    data = simulate(spec, seed=3)
    files = write_simulation(data, tmp_path / "sim")
    Y, Z = ingest(files["y"], files["z"])
    assert np.array_equal(Y.values, data.Y.values)
    assert np.array_equal(Z.values, data.Z.values)


def test_simulate_is_seeded(tmp_path):
    spec = SimSpec(n=25, q=3, p_star=4, p_true=1, true_dag=validate_dag([[], [0], [1]]))
    a = write_simulation(simulate(spec, 9), tmp_path / "a")
    b = write_simulation(simulate(spec, 9), tmp_path / "b")
    for key in ("y", "z", "truth"):
        assert filecmp.cmp(a[key], b[key], shallow=False)
    c = simulate(spec, 10)
    assert not np.array_equal(c.Y.values, simulate(spec, 9).Y.values)


def test_null_model_uncorrelated():
    spec = SimSpec(n=20_000, q=3, p_star=0, p_true=0, true_dag=validate_dag([[], [0], [1]]),
                   coef_scale=0.0)
    y = simulate(spec, 1).Y.values
    corr = np.corrcoef(y.T)
    assert np.all(np.abs(corr[np.triu_indices(3, 1)]) < 0.03)
    assert np.allclose(y.std(axis=0), 1.0, atol=0.03)


def test_no_effects_regression_f_near_one():
    spec = SimSpec(n=200, q=3, p_star=4, p_true=0, true_dag=validate_dag([[]] * 3))
    fs = []
    for seed in range(40):
        d = simulate(spec, seed)
        z = np.column_stack([np.ones(200), d.Z.values])
        for j in range(3):
            y = d.Y.values[:, j]
            beta, *_ = np.linalg.lstsq(z, y, rcond=None)
            rss1 = np.sum((y - z @ beta) ** 2)
            rss0 = np.sum((y - y.mean()) ** 2)
            fs.append(((rss0 - rss1) / 4) / (rss1 / (200 - 5)))
    assert np.mean(fs) == pytest.approx(1.0, abs=0.2)


def test_simulated_conditionals_follow_dag():
    # y2 | y1 has the drawn gamma as regression slope and 1/lambda as variance
    spec = SimSpec(n=50_000, q=2, p_star=0, p_true=0, true_dag=validate_dag([[], [0]]),
                   lambdas=(1.0, 4.0), gammas={(0, 1): 0.7})
    d = simulate(spec, 2)
    y = d.Y.values
    slope = np.polyfit(y[:, 0], y[:, 1], 1)[0]
    resid = y[:, 1] - slope * y[:, 0]
    assert slope == pytest.approx(0.7, abs=0.01)
    assert resid.var() == pytest.approx(0.25, rel=0.03)


def test_spec_json_round_trip():
    doc = {"n": 50, "q": 3, "p_star": 6, "p_true": 2, "true_dag": [[], [1], [1, 2]],
           "true_predictors": [2, 5], "coef_scale": 0.5, "lambdas": [1, 2, 3],
           "gammas": [[1, 2, 0.4]], "effect_prob": 0.5}
    spec = SimSpec.from_json(doc)
    assert spec.true_predictors == (1, 4)
    assert SimSpec.from_json(spec.to_json()).to_json() == spec.to_json()
    assert SimSpec.from_json({"n": 10, "q": 4}).true_dag.n_edges == 3


@pytest.mark.parametrize("doc", [
    {"q": 3},
    {"n": 10, "q": 2, "p_star": 1, "p_true": 2},
    {"n": 10, "q": 2, "gammas": [[2, 1, 0.5]]},
    {"n": 10, "q": 2, "lambdas": [1, -1]},
])
def test_spec_validation(doc):
    with pytest.raises(DagscoreError):
        SimSpec.from_json(doc)
