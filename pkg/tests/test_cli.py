import json

import numpy as np
import pytest

from kernel_r2.cli import load_csv, main, write_csv
from kernel_r2.errors import ConstantColumn, MissingValue, ParseError, ValidationError
from kernel_r2.simgen import gen_heteroscedastic, gen_so3


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_csv_round_trip(tmp_path):
    s = gen_so3(12, 0.3, 1)
    path = tmp_path / "so3.csv"
    xcols, ycols = write_csv(path, s)
    back = load_csv(path, xcols, ycols, y_kind="rotation")
    np.testing.assert_array_equal(back.x, s.x)
    np.testing.assert_array_equal(back.y, s.y)


def test_csv_defaults_and_standardize(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,y\n1,2,3\n2,4,5\n3,7,9\n")
    s = load_csv(path)
    assert s.x.shape == (3, 2) and s.y[:, 0].tolist() == [3, 5, 9]
    z = load_csv(path, "a", "y", standardize=True)
    np.testing.assert_allclose(z.x.std(), 1.0)


def test_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n2,\n")
    with pytest.raises(MissingValue) as info:
        load_csv(path)
    assert info.value.row == 3 and info.value.column == "y"
    path.write_text("x,y\n1,2\n2,abc\n")
    with pytest.raises(ParseError):
        load_csv(path)
    path.write_text("x,y\n1,2\n1,3\n")
    with pytest.raises(ConstantColumn):
        load_csv(path, standardize=True)
    with pytest.raises(ValidationError):
        load_csv(path, "nope")


def test_estimate_from_csv(tmp_path, capsys):
    s = gen_heteroscedastic(80, 0.0, 3)
    path = tmp_path / "h.csv"
    write_csv(path, s)
    code, out, _ = run(["estimate", "--input", str(path), "--method", "knn"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == "estimate" and doc["n"] == 80
    assert doc["config"]["method"] == ["knn"] and doc["result"]["d_hat"] > 0.1


def test_test_and_power_reports(tmp_path, capsys):
    code, out, _ = run(["test", "--scenario", "heteroscedastic", "--n", "50",
                        "--permutations", "19", "--method", "knn,xi", "--seed", "4"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert set(doc["results"]) == {"knn", "xi"}
    code, out, _ = run(["power", "--scenario", "heteroscedastic", "--n", "30", "--replications",
                        "1", "--permutations", "9", "--lambda-grid", "0,1", "--method", "xi",
                        "--format", "csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "lambda,statistic,power,se" and len(lines) == 3


def test_oracle_subcommand(tmp_path, capsys):
    path = tmp_path / "joint.json"
    path.write_text(json.dumps({"x_labels": ["a", "b"], "y_points": [-1, 1],
                                "probs": [[0.4, 0.1], [0.1, 0.4]]}))
    code, out, _ = run(["oracle", "--input", str(path), "--kernel-y", "brownian"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["d"] == pytest.approx(0.36) and doc["d_alt"] == pytest.approx(0.36)


def test_bench_small_grid(capsys):
    code, out, _ = run(["bench", "--method", "knn", "--n-grid", "30,60", "--repeats", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert [t["n"] for t in doc["timings"]] == [30, 60] and doc["slope"] is not None


@pytest.mark.parametrize("argv", [
    ["estimate"],
    ["estimate", "--scenario", "heteroscedastic", "--method", "bogus"],
    ["estimate", "--scenario", "heteroscedastic", "--k", "0"],
    ["test", "--scenario", "heteroscedastic", "--alpha", "2"],
    ["estimate", "--scenario", "heteroscedastic", "--format", "csv"],
    ["frobnicate"],
])
def test_invalid_config_exit_code(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "ValidationError"


def test_runtime_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n2,\n")
    code, _, err = run(["estimate", "--input", str(path)], capsys)
    assert code == 1
    doc = json.loads(err)
    assert doc["error"] == "MissingValue" and doc["row"] == 3


def test_output_file_and_worker_independence(tmp_path, capsys):
    base = ["test", "--scenario", "so3", "--n", "40", "--permutations", "15", "--seed", "7"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(base + ["--output", str(a)]) == 0
    assert main(base + ["--output", str(b), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()
