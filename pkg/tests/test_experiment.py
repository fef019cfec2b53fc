from __future__ import annotations

import csv
import io
import json
from collections import defaultdict

import pytest

from policydd.bounds import format_sci, worst_case_policy
from policydd.errors import InvariantViolation
from policydd.experiment import (RESOURCE_SENTINEL, FuzzSpace, SweepSpec, check_policy,
                                 fuzz_validate, rows_to_csv, split_counts, sweep_bounds,
                                 write_sweep)
from policydd.generator import GeneratorConfig, generate_policy
from policydd.model import FieldSchema


@pytest.fixture(scope="module")
def datasets():
    return sweep_bounds()


def _by_n(rows):
    out = defaultdict(list)
    for r in rows:
        out[r["n"]].append(int(r["g"]))
    return out


def test_split_counts():
    assert split_counts(100, 0.2, 0.4) == (20, 40, 40)
    assert split_counts(10, 0.25, 0.25) == (2, 6, 2)   # half-even rounding, rest to t
    with pytest.raises(ValueError):
        split_counts(10, 0.7, 0.7)


def test_dataset_a_anchor_shape(datasets):
    rows = datasets["a"]
    assert [r["n"] for r in rows] == list(range(100, 1001, 100))
    assert all(int(r["f"]) <= int(r["old_bound"]) for r in rows)
    assert all(r["f"] == r["g"] for r in rows)


def test_dataset_orderings(datasets):
    for key in ("b", "c", "d"):
        for n, values in _by_n(datasets[key]).items():
            assert all(a >= b for a, b in zip(values, values[1:])), (key, n, values)
    for values in _by_n(datasets["b"]).values():
        assert all(a > b for a, b in zip(values, values[1:]))


def test_dataset_sizes(datasets):
    assert {k: len(v) for k, v in datasets.items()} == {"a": 10, "b": 50, "c": 30, "d": 40}
    assert all(r["strict"] == "false" for r in datasets["d"])


def test_sentinel_row():
    spec = SweepSpec(big_n=(200,), small_n=(200,), oneprob_levels=(0.5,), partition_cap=60)
    rows = sweep_bounds(spec)["d"]
    assert rows[0]["g"] == RESOURCE_SENTINEL and rows[0]["status"] == "resource_error"


def test_csv_has_header_and_params(datasets, tmp_path):
    text = rows_to_csv(datasets["b"])
    lines = text.splitlines()
    assert lines[0].startswith("# s, t, u")
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    rows = list(reader)
    assert len(rows) == 50 and {"n", "d", "s", "t", "u", "f", "g"} <= set(rows[0])
    paths = write_sweep(datasets, tmp_path)
    assert len(paths) == 4
    assert json.loads((tmp_path / "sweep_summary.json").read_text())["rows"]["c"] == 30
    assert rows_to_csv(sweep_bounds()["c"]) == rows_to_csv(datasets["c"])


def test_fuzz_report_and_determinism():
    a = fuzz_validate(150, seed=4)
    b = fuzz_validate(150, seed=4)
    assert a.count == 150 and a.violations == 0 and a.mismatches == 0
    assert a.per_config == b.per_config
    assert a.g_checked > 0
    assert all(v["max_f_ratio"] <= 1 for v in a.per_config.values())


def test_fuzz_parallel_matches_serial():
    a = fuzz_validate(60, seed=2, chunk=20)
    b = fuzz_validate(60, seed=2, chunk=20, workers=2)
    assert a.per_config == b.per_config


def test_worst_case_ratio_is_one():
    for n, d in [(3, 2), (4, 3), (6, 2)]:
        case = check_policy(worst_case_policy(n, d))
        assert case.f_ratio == 1.0


def test_all_match_batch_one_leaf():
    schema = FieldSchema.uniform(5, 3)
    for seed in range(25):
        p = generate_policy(GeneratorConfig(30, schema, 0.0, 1.0, seed=seed))
        assert check_policy(p).leaves == 1


def test_violation_carries_replay(monkeypatch):
    import policydd.experiment as ex
    monkeypatch.setattr(ex, "f_bound", lambda n, d: 0)
    with pytest.raises(InvariantViolation) as info:
        check_policy(worst_case_policy(2, 2))
    assert info.value.replay.startswith("fields:")


def test_fuzz_space_limits():
    space = FuzzSpace(n_max=3, d_max=2, width_max=3, total_bits_max=6)
    report = fuzz_validate(40, seed=1, space=space)
    assert report.exhaustive_checked == 40
