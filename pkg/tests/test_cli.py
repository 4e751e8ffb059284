import io

import numpy as np
import pytest

from conftest import quartic_cycle, refuted_three, two_node
from minsum.cli import check_problem_file, main
from minsum.io import format_problem, parse_problem, read_certificate, read_trace_csv


def run(argv):
    buf = io.StringIO()
    code = main([str(a) for a in argv], buf)
    return code, buf.getvalue()


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, prob in (("two", two_node()), ("refuted", refuted_three()), ("quartic", quartic_cycle())):
        paths[name] = tmp_path / f"{name}.txt"
        paths[name].write_text(format_problem(prob))
    return paths


def test_check_two_node(files):
    code, text = run(["check", files["two"]])
    assert code == 0 and "PASS" in text
    ok, report = check_problem_file(files["two"])
    assert ok and "satisfied" in report


def test_check_is_deterministic(files):
    assert run(["check", files["two"]]) == run(["check", files["two"]])


def test_certify_refutation(files):
    code, text = run(["certify", files["refuted"]])
    assert code == 1 and "lambda* = 1.2" in text


def test_certify_writes_reloadable_json(files, tmp_path):
    code, text = run(["certify", files["two"], "--out", tmp_path / "c.json"])
    assert code == 0 and "lambda = 0.5" in text
    assert read_certificate(tmp_path / "c.json").lam == pytest.approx(0.5)


def test_certify_sampled(files):
    code, text = run(["certify", files["quartic"], "--lam", "0.6", "--box=-3,3", "--samples", "256"])
    assert code == 0 and "evidence" in text


def test_solve_missing_file():
    assert run(["solve", "/no/such/file.txt"])[0] == 2


def test_unknown_flag(files):
    assert run(["solve", files["two"], "--bogus"])[0] == 2


def test_solve_writes_trace(files, tmp_path):
    code, text = run(["solve", files["two"], "--trace-out", tmp_path / "t.csv", "--full-x"])
    assert code == 0 and "converged" in text
    cols = read_trace_csv(tmp_path / "t.csv")
    assert cols["x_0"][-1] == pytest.approx(2 / 3)
    assert np.isnan(cols["err_weighted"][0]) and cols["err_weighted"][-1] < 1e-12


def test_solve_general(files):
    code, text = run(["solve", files["quartic"], "--grid-points", "513"])
    assert code == 0 and "x = " in text


def test_solve_non_dominant_aborts(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("n 3\nA 1 1 1\nA 2 2 1\nA 3 3 1\nA 1 2 0.9\nA 2 3 0.9\nA 1 3 0.9\nb 1 1\n")
    assert run(["solve", p])[0] == 1


def test_solve_bad_x0(files):
    assert run(["solve", files["two"], "--x0", "1,2,3"])[0] == 2


def test_exact(files):
    code, text = run(["exact", files["two"]])
    assert code == 0 and "0.666666666667 -0.333333333333" in text and "residual" in text


def test_tree(files, tmp_path):
    code, text = run(["tree", files["quartic"], "--root", "1", "--depth", "2", "--edges-out", tmp_path / "e.txt",
                      "--grid-points", "513"])
    assert code == 0 and text.startswith("projected tree nodes: 5")
    lines = [ln.split() for ln in (tmp_path / "e.txt").read_text().splitlines()[1:]]
    assert len(lines) == 4 and lines[0][2] == "1"
    assert run(["tree", files["two"], "--root", "3", "--depth", "1"])[0] == 2
    assert run(["tree", files["quartic"], "--root", "1", "--depth", "30", "--max-nodes", "10"])[0] == 2


def test_bound(files):
    code, text = run(["bound", files["two"]])
    assert code == 0 and text.startswith("t,err_weighted,bound_value,satisfied")
    assert run(["bound", files["quartic"], "--kind", "general_simplified"])[0] == 2
    assert run(["bound", files["refuted"]])[0] == 1


def test_gen(tmp_path):
    out = tmp_path / "g.txt"
    assert run(["gen", "--n", "10", "--lambda-target", "0.7", "--seed", "3", "-o", out])[0] == 0
    assert parse_problem(out).n == 10
    assert run(["gen", "--n", "3", "--degree", "3"])[0] == 2


def test_check_multiple_files(files):
    code, text = run(["check", files["two"], files["quartic"], "--grid-points", "513", "--jobs", "2"])
    assert code == 0 and text.count("PASS") == 2
    assert run(["check", files["two"], "/no/such/file"])[0] == 2
