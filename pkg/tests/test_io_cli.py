import json
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynpersuasion import ModelSpec, ModelValidationError, Polynomial, load_model
from dynpersuasion.cli import main
from dynpersuasion.fixtures import FIXTURES, load_fixture
from dynpersuasion.io import ModelFileError, dump_model, jsonable, model_from_dict, read_csv, write_csv

QUARTIC_P_MINUS = 0.12203552699077277


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, (json.loads(out) if code == 0 else None), err


# ------------------------------------------------------------------ io


def test_bundled_models(fixtures):
    m = fixtures["two_action"]
    assert m.agent_payoff["1"].coeffs == pytest.approx((-0.5, 0.75))
    assert m.principal_payoff["1"].coeffs == pytest.approx((-0.5, 1.5))
    m = fixtures["three_action"]
    assert m.agent_payoff["3"].coeffs == pytest.approx((-3.0, 14 / 3), abs=1e-15)
    assert m.principal_payoff["3"].coeffs == (3.0,)
    q = fixtures["quartic"].principal_payoff["0"]
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(q(x), 10 * (-3.5 * (x - 0.5) ** 4 + (x - 0.5) ** 2) + 1 / 8, atol=1e-12)
    assert fixtures["common_payoff"].p_a0 == 0.2


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "actions": ["a"],\n  "f_P": {"a": [0]},\n  "f_a": {"a": [0]},\n'
                   '  "r": 1,\n  "sigma": 1,\n  "p0": 1.2\n}\n')
    with pytest.raises(ModelValidationError, match="line 7") as exc:
        load_model(bad)
    assert exc.value.field == "p0"
    bad.write_text('{"actions": ["a"], "f_P": {"a": [0]}}')
    with pytest.raises(ModelFileError, match="r"):
        load_model(bad)
    bad.write_text('{"actions": ["a"],\n "f_P": {"a": [0]},\n "f_a": {"a": ["x/0"]}, "r": 1, "sigma": 1, "p0": 0.5}')
    with pytest.raises(ModelFileError, match="line 3"):
        load_model(bad)
    bad.write_text('{"actions": ["a"], "f_P": {"a": [0]}, "f_a": {"a": [0]}, "r": 1, "sigma": 1, "p0": 0.5, "zz": 1}')
    with pytest.raises(ModelFileError, match="unknown"):
        load_model(bad)
    bad.write_text("{ not json")
    with pytest.raises(ModelFileError, match="line 1"):
        load_model(bad)


def test_fraction_strings():
    m = model_from_dict({"actions": ["a"], "f_P": {"a": ["14/3", "-3"]}, "f_a": {"a": [0]},
                         "r": "1/2", "sigma": 1, "p0": "5/8"})
    assert m.principal_payoff["a"].coeffs[0] == 14 / 3
    assert m.r == 0.5 and m.p0 == 0.625


@pytest.mark.parametrize("name", FIXTURES)
def test_fixture_round_trip(tmp_path, name):
    m = load_fixture(name)
    dump_model(m, tmp_path / "m.json")
    assert load_model(tmp_path / "m.json") == m


c = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(c, min_size=1, max_size=4), min_size=1, max_size=3), st.floats(0.01, 0.99),
       st.floats(0.01, 0.99), st.floats(0.01, 10), st.floats(0.01, 10))
def test_round_trip_property(tmp_path_factory, coeffs, p0, pa0, r, sigma):
    acts = [str(i) for i in range(len(coeffs))]
    fp = {a: Polynomial(cs) for a, cs in zip(acts, coeffs)}
    fa = {a: Polynomial(cs[::-1]) for a, cs in zip(acts, coeffs)}
    m = ModelSpec(acts, fp, fa, r, sigma, p0, pa0)
    path = tmp_path_factory.mktemp("rt") / "m.json"
    dump_model(m, path)
    assert load_model(path) == m


def test_csv_round_trip(tmp_path):
    data = np.column_stack([np.linspace(0, 1, 7), np.pi * np.arange(7)])
    path = write_csv(tmp_path / "x.csv", ("p", "v"), data)
    header, back = read_csv(path)
    assert header == ["p", "v"]
    assert np.array_equal(back, data)
    assert "," in path.read_text().splitlines()[1]


def test_jsonable():
    out = jsonable({"a": np.float64(np.inf), "b": np.arange(2), "c": (np.bool_(True), float("nan"))})
    assert out == {"a": None, "b": [0, 1], "c": [True, None]}


# ------------------------------------------------------------------ cli


def test_cli_solve_closed(tmp_path, capsys):
    code, res, _ = run(["solve", "--fixture", "two_action", "--rsigma2", "4", "--method", "closed",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    (lo, hi), = res["funding_region"]
    assert lo == 0.0 and hi == pytest.approx(2 / 3)
    info = json.loads((tmp_path / "two_action_value.json").read_text())
    assert info["method"] == "closed"
    header, data = read_csv(tmp_path / "two_action_value.csv")
    assert header == ["p", "u", "v", "funding_flag"]
    assert data.shape[1] == 4


def test_cli_solve_fd(tmp_path, capsys):
    code, res, _ = run(["solve", "--fixture", "quartic", "--method", "fd", "--grid", "1001",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    info = json.loads((tmp_path / "quartic_value.json").read_text())
    assert info["residual"] <= 1e-6 and info["n_points"] == 1001


def test_cli_sweep_quartic(tmp_path, capsys):
    code, res, _ = run(["sweep", "--fixture", "quartic", "--prior", "0.5", "--rsigma2", "1,0.25,0.0625",
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    for row in res["rows"]:
        assert row["P_minus"] < row["p_minus"] and row["p_plus"] < row["P_plus"]
        assert row["P_minus"] == pytest.approx(QUARTIC_P_MINUS, abs=1e-9)
    header, _ = read_csv(tmp_path / "quartic_sweep.csv")
    assert header == ["r_sigma2", "p_minus", "p_plus", "P_minus", "P_plus", "value", "sup_gap"]


def test_cli_envelope_concave(tmp_path, capsys):
    code, res, _ = run(["envelope", "--fixture", "concave", "--out", str(tmp_path)], capsys)
    assert code == 0
    _, data = read_csv(tmp_path / "concave_envelope.csv")
    assert np.abs(data[:, 1] - data[:, 2]).max() <= 1e-12


def test_cli_equilibrium_and_simulate(tmp_path, capsys):
    code, res, _ = run(["equilibrium", "--fixture", "three_action", "--out", str(tmp_path)], capsys)
    assert code == 0 and res["long_run"] == pytest.approx([0.5, 0.75])
    code, res, _ = run(["simulate", "--fixture", "three_action", "--paths", "200", "--seed", "4",
                        "--store-paths", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert res["n_paths"] == 200
    header, rows = read_csv(tmp_path / "three_action_paths.csv")
    assert header == ["path", "t", "p"] and rows.shape[1] == 3


def test_cli_fixtures_and_model_file(tmp_path, capsys):
    code, res, _ = run(["fixtures", "--out", str(tmp_path)], capsys)
    assert code == 0 and len(res["written"]) == len(FIXTURES)
    code, res, _ = run(["equilibrium", "--model", str(tmp_path / "two_action.json"), "--rsigma2", "4",
                        "--out", str(tmp_path)], capsys)
    assert code == 0 and res["long_run"] == pytest.approx([0.0, 2 / 3])


def test_cli_output_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DYNPERSUASION_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = run(["envelope", "--fixture", "two_action"], capsys)
    assert code == 0
    assert (tmp_path / "env" / "two_action_envelope.csv").exists()


@pytest.mark.parametrize("name", FIXTURES)
def test_cli_validate(tmp_path, capsys, name):
    code, res, _ = run(["validate", "--fixture", name, "--grid", "2001", "--out", str(tmp_path)], capsys)
    assert code == 0 and res["passed"]


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"actions": ["a"], "f_P": {"a": [0]}, "f_a": {"a": [0]}, "r": 1, "sigma": 1, "p0": 1.2}')
    code, _, err = run(["solve", "--model", str(bad), "--out", str(tmp_path)], capsys)
    assert code == 2 and err.startswith("error code=invalid_input exit=2:")
    assert err.count("\n") == 1
    code, _, err = run(["solve", "--fixture", "quartic", "--method", "closed", "--out", str(tmp_path)], capsys)
    assert code == 3 and "code=solver_failure" in err
    code, _, err = run(["solve", "--model", str(tmp_path / "missing.json"), "--out", str(tmp_path)], capsys)
    assert code == 4 and "code=io_error" in err
    code, _, err = run(["sweep", "--fixture", "two_action", "--rsigma2", "1,2", "--out", str(tmp_path)], capsys)
    assert code == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--fixture", "two_action", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit):
        main(["solve", "--fixture", "two_action", "--grid", "1000"])
    with pytest.raises(SystemExit):
        main(["equilibrium", "--fixture", "two_action", "--prior", "1.5"])


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "dynpersuasion", "envelope", "--fixture", "two_action",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["persuasion"] == [0.0, 1.0]
