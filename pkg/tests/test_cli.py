from __future__ import annotations

import json

import pytest

from policydd.cli import main
from policydd.model import load_policy

from conftest import TWO_RULE_TEXT


@pytest.fixture
def two_rule_file(tmp_path):
    path = tmp_path / "two_rule.txt"
    path.write_text(TWO_RULE_TEXT)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_anchor(capsys):
    code, out, _ = run(capsys, "bound", "--n", 1000, "--d", 10)
    assert code == 0
    assert "f = 2.808e26" in out and "old = 1.019e33" in out


def test_bound_json_exact(capsys):
    code, out, _ = run(capsys, "bound", "--n", 100, "--s", 20, "--u", 40, "--d", 5,
                       "--narrow-widths", 2, "--format", "json")
    data = json.loads(out)
    assert code == 0 and data["t"] == 40 and data["strict"] is False
    assert isinstance(data["f"], str) and int(data["f"]) > int(data["g"])


def test_bound_field_widths(capsys):
    code, out, _ = run(capsys, "bound", "--n", 10, "--field-widths", 8, 8, 2, "--format", "json")
    assert code == 0 and json.loads(out)["narrow_widths"] == [2]


def test_resolve_two_rule(capsys, two_rule_file):
    code, out, _ = run(capsys, "resolve", two_rule_file, 50, 100)
    assert (code, out.strip()) == (0, "0")
    code, out, _ = run(capsys, "resolve", two_rule_file, 115, 100, "--format", "json")
    assert json.loads(out) == {"packet": [115, 100], "decision": 1, "rule": 2}


def test_build_reports_leaves(capsys, two_rule_file, tmp_path):
    out_json = tmp_path / "d.json"
    code, out, _ = run(capsys, "build", two_rule_file, "--out", out_json, "--dot", tmp_path / "d.dot",
                       "--format", "json")
    assert code == 0 and json.loads(out)["leaf_count"] == 5
    assert json.loads(out_json.read_text())["leaf_count"] == 5
    assert (tmp_path / "d.dot").read_text().startswith("digraph")


def test_metrics(capsys, two_rule_file):
    code, out, _ = run(capsys, "metrics", two_rule_file, "--format", "json")
    assert code == 0 and json.loads(out)["allprob"]["value"] == 0.0
    code, out, _ = run(capsys, "metrics", two_rule_file, "--format", "csv")
    assert out.splitlines()[0] == "field,width,narrow,oneprob,allprob"


def test_minimize_shadowed(capsys, tmp_path):
    src = tmp_path / "sh.txt"
    src.write_text("fields: x:8 y:8\n[0,200] [0,200] -> accept\n[10,20] [10,20] -> accept\n")
    out, report = tmp_path / "sh.min.txt", tmp_path / "r.json"
    code, _, _ = run(capsys, "minimize", src, "--out", out, "--report", report)
    assert code == 0
    assert load_policy(out).n == 1
    data = json.loads(report.read_text())
    assert data["kept"] == [1] and data["verification"] == "leafwise+exhaustive"


def test_minimize_budget_exit_code(capsys, tmp_path):
    lines = ["fields: x:6"] + [f"[{i},{i + 1}] -> {i % 2}" for i in range(0, 40, 2)]
    lines += [f"* -> {(i + 1) % 2}" for i in range(10)]
    src = tmp_path / "big.txt"
    src.write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, "minimize", src, "--budget-nodes", 3)
    assert code == 2 and "budget" in err


def test_worst_case(capsys, tmp_path):
    path = tmp_path / "wc.txt"
    code, out, _ = run(capsys, "worst-case", "--n", 3, "--d", 2, "--out", path, "--check")
    assert code == 0 and "leaf_count = 13, f = 13" in out
    assert load_policy(path).n == 3


def test_generate_manifest_and_seed(capsys, tmp_path):
    code, _, err = run(capsys, "generate", "--n", 4, "--fields", "a:4", "b:3", "--count", 3,
                       "--seed", 11, "--out-dir", tmp_path / "g")
    assert code == 0 and "seed: 11" in err
    manifest = json.loads((tmp_path / "g" / "manifest.json").read_text())
    assert manifest["seed"] == 11 and len(manifest["files"]) == 3
    first = (tmp_path / "g" / "policy_00000.txt").read_text()
    run(capsys, "generate", "--n", 4, "--fields", "a:4", "b:3", "--count", 3,
        "--seed", 11, "--out-dir", tmp_path / "h")
    assert (tmp_path / "h" / "policy_00000.txt").read_text() == first


def test_generate_synthesizes_seed(capsys):
    code, _, err = run(capsys, "generate", "--n", 2, "--d", 2, "--width", 3)
    assert code == 0 and err.startswith("seed: ")


def test_sweep_out_dir(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "--out-dir", tmp_path)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "sweep_a.csv", "sweep_b.csv", "sweep_c.csv", "sweep_d.csv", "sweep_summary.json"]


def test_fuzz_small(capsys, tmp_path):
    code, out, err = run(capsys, "fuzz", "--count", 20, "--seed", 1, "--out", tmp_path / "f.json")
    assert code == 0 and "seed: 1" in err and "0 violations" in out
    assert json.loads((tmp_path / "f.json").read_text())["count"] == 20


@pytest.mark.parametrize("argv", [
    ["resolve", "MISSING", "1"],
    ["bound", "--d", "2"],
    ["generate", "--n", "2", "--d", "2", "--width", "1", "--seed", "1"],
])
def test_validation_exit_code(capsys, argv):
    assert main(argv) == 1


def test_validation_exit_on_bad_packet(capsys, two_rule_file):
    assert main(["resolve", str(two_rule_file), "300", "1"]) == 1
    assert main(["resolve", str(two_rule_file), "3"]) == 1


def test_syntax_error_exit(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("fields: x:4\n[3,1] -> 1\n")
    assert main(["build", str(bad)]) == 1
    assert "line 2" in capsys.readouterr().err


def test_partition_cap_exit(capsys):
    assert main(["bound", "--n", "100", "--d", "5", "--s", "80"]) == 2


def test_invariant_exit(capsys, two_rule_file, monkeypatch):
    import policydd.cli as cli
    monkeypatch.setattr(cli, "resolve_diagram", lambda d, p: 99)
    assert main(["resolve", str(two_rule_file), "50", "100"]) == 3
    assert "replay policy" in capsys.readouterr().err
