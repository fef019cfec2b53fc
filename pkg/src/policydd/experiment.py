"""Bound sweeps (plot-ready CSV) and fuzz validation of the size bounds."""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .bounds import BoundParams, f_bound, format_sci, g_bound, old_bound
from .diagram import build_diagram, leaf_count, resolve_batch
from .errors import InvariantViolation, PartitionCapExceeded
from .generator import GeneratorConfig, derive_seed, generate_policy
from .metrics import narrow_last_order, rule_profile
from .model import FieldSchema, Policy, format_policy
from .packets import EXHAUSTIVE_LIMIT_BITS, all_packets, decisions

log = logging.getLogger(__name__)

RESOURCE_SENTINEL = "RESOURCE_LIMIT"

CSV_COLUMNS = ("dataset", "series", "n", "d", "s", "t", "u", "narrow_widths",
               "f", "g", "old_bound", "g_sci", "strict", "status")

HEADER_NOTE = ("# s, t, u are expected counts n*oneprob, n*(1-oneprob-allprob), "
               "n*allprob; s and u rounded to nearest, remainder to t")


def split_counts(n: int, oneprob, allprob) -> tuple[int, int, int]:
    """Expected singleton / ordinary / all-match counts; remainder goes to ``t``."""
    one = Fraction(str(oneprob)) * n
    alls = Fraction(str(allprob)) * n
    s, u = round(one), round(alls)
    t = n - s - u
    if t < 0:
        raise ValueError(f"oneprob + allprob exceeds 1 for n={n}")
    return s, t, u


@dataclass
class SweepSpec:
    wide_d: int = 5
    big_n: Sequence[int] = tuple(range(100, 1001, 100))
    small_n: Sequence[int] = tuple(range(10, 101, 10))
    allprob_levels: Sequence[float] = (0.0, 0.2, 0.4, 0.6, 0.8)
    narrow_allprob: float = 0.4
    narrow_width: int = 2
    narrow_counts: Sequence[int] = (0, 1, 2)
    oneprob_levels: Sequence[float] = (0.0, 0.2, 0.4, 0.6)
    oneprob_allprob: float = 0.4
    oneprob_narrow: int = 1
    partition_cap: int | None = 60


def _row(dataset, series, params: BoundParams, partition_cap, with_old=False):
    row = {"dataset": dataset, "series": series, "n": params.n, "d": params.d,
           "s": params.s, "t": params.t, "u": params.u,
           "narrow_widths": " ".join(map(str, params.narrow_widths)),
           "f": str(f_bound(params.n, params.d)),
           "old_bound": str(old_bound(params.n, params.d)) if with_old else "",
           "strict": str(params.strict).lower(), "status": "ok"}
    try:
        g = g_bound(params, partition_cap)
        row["g"] = str(g)
        row["g_sci"] = format_sci(g)
    except PartitionCapExceeded:
        row["g"] = row["g_sci"] = RESOURCE_SENTINEL
        row["status"] = "resource_error"
    return row


def sweep_bounds(spec: SweepSpec | None = None) -> dict[str, list[dict]]:
    """Four bound-comparison datasets, keyed "a" to "d"."""
    spec = spec or SweepSpec()
    d = spec.wide_d
    out: dict[str, list[dict]] = {"a": [], "b": [], "c": [], "d": []}
    for n in spec.big_n:
        out["a"].append(_row("a", "f_vs_old", BoundParams(0, n, 0, d), spec.partition_cap,
                             with_old=True))
    for p in spec.allprob_levels:
        for n in spec.big_n:
            s, t, u = split_counts(n, 0, p)
            out["b"].append(_row("b", f"allprob={p:g}", BoundParams(s, t, u, d),
                                 spec.partition_cap))
    for k in spec.narrow_counts:
        label = f"{d - k}wide+{k}narrow"
        for n in spec.big_n:
            s, t, u = split_counts(n, 0, spec.narrow_allprob)
            out["c"].append(_row("c", label,
                                 BoundParams(s, t, u, d, (spec.narrow_width,) * k),
                                 spec.partition_cap))
    for q in spec.oneprob_levels:
        for n in spec.small_n:
            s, t, u = split_counts(n, q, spec.oneprob_allprob)
            out["d"].append(_row("d", f"oneprob={q:g}",
                                 BoundParams(s, t, u, d,
                                             (spec.narrow_width,) * spec.oneprob_narrow),
                                 spec.partition_cap))
    return out


def rows_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(HEADER_NOTE + "\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row.get(k, "") for k in CSV_COLUMNS})
    return buf.getvalue()


def write_sweep(datasets: dict[str, list[dict]], out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, rows in datasets.items():
        path = os.path.join(out_dir, f"sweep_{name}.csv")
        with open(path, "w") as fh:
            fh.write(rows_to_csv(rows))
        paths.append(path)
    summary = {name: len(rows) for name, rows in datasets.items()}
    with open(os.path.join(out_dir, "sweep_summary.json"), "w") as fh:
        json.dump({"rows": summary, "files": paths}, fh, indent=2)
    return paths


# -- fuzzing --------------------------------------------------------------------------


@dataclass(frozen=True)
class FuzzSpace:
    """Where fuzz policies are drawn from."""

    n_max: int = 50
    d_max: int = 5
    width_min: int = 2
    width_max: int = 10
    total_bits_max: int = 16
    oneprob_levels: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 1.0)
    allprob_levels: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    cell_models: tuple[str, ...] = ("cell", "rule")
    exhaustive_bits: int = EXHAUSTIVE_LIMIT_BITS


@dataclass
class FuzzCase:
    seed: int
    config_key: str
    n: int
    d: int
    leaves: int
    f: int
    g: int | None
    exhaustive: bool

    @property
    def f_ratio(self) -> float:
        return self.leaves / self.f

    @property
    def g_ratio(self) -> float | None:
        return None if self.g is None else self.leaves / self.g


@dataclass
class FuzzReport:
    count: int = 0
    violations: int = 0
    mismatches: int = 0
    exhaustive_checked: int = 0
    g_checked: int = 0
    seconds: float = 0.0
    per_config: dict = field(default_factory=dict)

    def add(self, case: FuzzCase) -> None:
        self.count += 1
        self.exhaustive_checked += case.exhaustive
        entry = self.per_config.setdefault(case.config_key, {
            "cases": 0, "max_f_ratio": 0.0, "max_g_ratio": None})
        entry["cases"] += 1
        entry["max_f_ratio"] = max(entry["max_f_ratio"], case.f_ratio)
        if case.g is not None:
            self.g_checked += 1
            prev = entry["max_g_ratio"]
            entry["max_g_ratio"] = case.g_ratio if prev is None else max(prev, case.g_ratio)

    def to_dict(self) -> dict:
        return asdict(self)


def check_policy(policy: Policy, field_order=None, exhaustive_bits=EXHAUSTIVE_LIMIT_BITS,
                 seed: int = 0, config_key: str = "") -> FuzzCase:
    """Build, bound-check and (when small enough) exhaustively resolve one policy.

    Raises ``InvariantViolation`` carrying the policy text on any failure.
    """
    order = narrow_last_order(policy) if field_order is None else tuple(field_order)
    diagram = build_diagram(policy, order)
    leaves = leaf_count(diagram)
    f = f_bound(policy.n, policy.d)
    replay = format_policy(policy)
    if leaves > f:
        raise InvariantViolation(f"leaf count {leaves} exceeds f={f}", replay=replay)
    g = None
    if field_order is None:
        profile = rule_profile(policy)
        if profile is not None:
            try:
                g = g_bound(profile)
            except PartitionCapExceeded:
                g = None
            if g is not None and leaves > g:
                raise InvariantViolation(
                    f"leaf count {leaves} exceeds g={g} for {profile}", replay=replay)
    exhaustive = policy.schema.total_bits <= exhaustive_bits
    if exhaustive:
        packets = all_packets(policy.schema, exhaustive_bits)
        if not np.array_equal(resolve_batch(diagram, packets), decisions(policy, packets)):
            raise InvariantViolation("diagram and policy disagree on some packet",
                                     replay=replay)
    return FuzzCase(seed, config_key, policy.n, policy.d, leaves, f, g, exhaustive)


def _draw_case(space: FuzzSpace, seed: int) -> tuple[str, Policy]:
    rng = random.Random(seed)
    n = rng.randint(1, space.n_max)
    d = rng.randint(1, space.d_max)
    while True:
        widths = [rng.randint(space.width_min, space.width_max) for _ in range(d)]
        if sum(widths) <= space.total_bits_max:
            break
    oneprob = rng.choice(space.oneprob_levels)
    allprob = rng.choice([a for a in space.allprob_levels if a + oneprob <= 1.0 + 1e-9])
    model = rng.choice(space.cell_models)
    schema = FieldSchema(tuple(f"f{k + 1}" for k in range(d)), tuple(widths))
    cfg = GeneratorConfig(n, schema, oneprob, allprob, seed=derive_seed(seed, "policy"),
                          cell_model=model)
    key = f"{model}:one={oneprob:g}:all={allprob:g}:d={d}"
    return key, generate_policy(cfg)


def _run_chunk(args):
    space, seeds = args
    cases = []
    for seed in seeds:
        key, policy = _draw_case(space, seed)
        cases.append(check_policy(policy, exhaustive_bits=space.exhaustive_bits,
                                  seed=seed, config_key=key))
    return cases


def fuzz_validate(count: int, seed: int = 0, space: FuzzSpace | None = None,
                  workers: int = 1, chunk: int = 200) -> FuzzReport:
    """Generate ``count`` policies and check every bound and resolution.

    Results are merged in seed order, so the report does not depend on
    ``workers``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    space = space or FuzzSpace()
    seeds = [derive_seed(seed, "fuzz", i) for i in range(count)]
    chunks = [(space, seeds[i:i + chunk]) for i in range(0, count, chunk)]
    report = FuzzReport()
    t0 = time.monotonic()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, chunks))
    else:
        results = [_run_chunk(c) for c in chunks]
    for cases in results:
        for case in cases:
            report.add(case)
    report.seconds = time.monotonic() - t0
    log.info("fuzzed %d policies in %.1fs", report.count, report.seconds)
    return report
