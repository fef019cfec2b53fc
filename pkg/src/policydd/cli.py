"""Command-line entry point: ``policydd <subcommand> ...``.

Exit status: 0 ok, 1 validation error, 2 budget exhausted, 3 invariant violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import secrets
import sys
from dataclasses import fields

from .bounds import (BoundParams, f_bound, format_sci, g_bound, is_narrow, old_bound,
                     worst_case_policy)
from .diagram import (build_diagram, diagram_to_dict, diagram_to_dot, leaf_count,
                      leaf_report, resolve_diagram)
from .errors import (InvariantViolation, PolicyDDError, ResourceBudgetExceeded,
                     ValidationError)
from .experiment import FuzzSpace, fuzz_validate, rows_to_csv, sweep_bounds, write_sweep
from .generator import CELL_MODELS, GeneratorConfig, generate_batch, generate_policy
from .metrics import compute_metrics, narrow_last_order
from .minimizer import minimize_policy
from .model import FieldSchema, format_policy, load_policy, resolve_first_match

log = logging.getLogger("policydd")

EXIT_OK, EXIT_VALIDATION, EXIT_BUDGET, EXIT_INVARIANT = 0, 1, 2, 3


def _emit(args, data, text=None, rows=None):
    """Write ``data`` in the requested format to stdout."""
    fmt = args.format
    if fmt == "json":
        print(json.dumps(data, indent=2, sort_keys=False))
    elif fmt == "csv":
        rows = rows if rows is not None else [data]
        buf = io.StringIO()
        cols = list(rows[0].keys()) if rows else []
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _flat(v) for k, v in row.items()})
        sys.stdout.write(buf.getvalue())
    else:
        print(text if text is not None else json.dumps(data, indent=2))


def _flat(v):
    if isinstance(v, (list, tuple)):
        return " ".join(map(str, v))
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True)
    return v


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
    print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _field_order(policy, spec):
    if spec is None:
        return None
    if spec == "narrow-last":
        return narrow_last_order(policy)
    order = []
    for tok in spec.split(","):
        tok = tok.strip()
        if tok.isdigit():
            order.append(int(tok))
        else:
            try:
                order.append(policy.schema.names.index(tok))
            except ValueError:
                raise ValidationError(f"unknown field {tok!r} in --field-order") from None
    return order


# -- subcommands ----------------------------------------------------------------------


def cmd_build(args):
    policy = load_policy(args.policy)
    diagram = build_diagram(policy, _field_order(policy, args.field_order))
    leaves = leaf_report(diagram)
    data = diagram_to_dict(diagram)
    report = [{"path": [str(iv) for iv in e.path], "rules_in_play": list(e.rules_in_play),
               "decision": e.decision} for e in leaves]
    if args.out:
        _write(args.out, json.dumps(data, indent=2) + "\n")
    if args.dot:
        _write(args.dot, diagram_to_dot(diagram))
    names = policy.schema.names
    lines = [f"leaves: {len(leaves)}"]
    for e in leaves:
        cells = " ".join(f"{names[k]}={iv}" for k, iv in enumerate(e.path))
        lines.append(f"  {cells}  rules={list(e.rules_in_play)}  -> {e.decision}")
    _emit(args, {"leaf_count": len(leaves), "leaves": report,
                 **({} if args.out else {"diagram": data})},
          "\n".join(lines), rows=report)
    return EXIT_OK


def cmd_resolve(args):
    policy = load_policy(args.policy)
    packet = tuple(args.packet)
    policy.schema.check_packet(packet)
    diagram = build_diagram(policy, _field_order(policy, args.field_order))
    via_diagram = resolve_diagram(diagram, packet)
    via_policy, index = resolve_first_match(policy, packet)
    if via_diagram != via_policy:
        raise InvariantViolation(
            f"diagram says {via_diagram}, first match says {via_policy} for {packet}",
            replay=format_policy(policy))
    _emit(args, {"packet": list(packet), "decision": via_policy, "rule": index},
          str(via_policy))
    return EXIT_OK


def cmd_metrics(args):
    policy = load_policy(args.policy)
    m = compute_metrics(policy, args.narrow_threshold)
    rows = [{"field": f.name, "width": f.width, "narrow": f.narrow,
             "oneprob": float(f.oneprob), "allprob": float(f.allprob)} for f in m.per_field]
    lines = [f"n={m.n} d={m.d} oneprob={float(m.oneprob):.4f} "
             f"allprob={float(m.allprob):.4f} fieldwidth={m.fieldwidth}",
             f"{'field':<12}{'width':>6}{'narrow':>8}{'oneprob':>10}{'allprob':>10}"]
    for r in rows:
        lines.append(f"{r['field']:<12}{r['width']:>6}{str(r['narrow']):>8}"
                     f"{r['oneprob']:>10.4f}{r['allprob']:>10.4f}")
    _emit(args, m.to_dict(), "\n".join(lines), rows=rows)
    return EXIT_OK


def cmd_bound(args):
    widths = tuple(args.narrow_widths or ())
    if args.field_widths:
        # classify given widths; narrow ones go nearest the leaves
        n = args.n if args.n is not None else (args.s or 0) + (args.t or 0) + (args.u or 0)
        narrow = [w for w in args.field_widths if is_narrow(w, n, args.narrow_threshold)]
        widths = tuple(reversed(narrow)) + widths
        if args.d is None:
            args.d = len(args.field_widths)
    if args.d is None:
        raise ValidationError("--d is required")
    if args.s is None and args.t is None and args.u is None:
        if args.n is None:
            raise ValidationError("give --n or some of --s/--t/--u")
        params = BoundParams(0, args.n, 0, args.d, widths)
    else:
        s, u = args.s or 0, args.u or 0
        t = args.t if args.t is not None else (args.n - s - u if args.n is not None else 0)
        params = BoundParams(s, t, u, args.d, widths)
        if args.n is not None and params.n != args.n:
            raise ValidationError(f"s + t + u = {params.n} but --n {args.n}")
    n, d = params.n, params.d
    f, old = f_bound(n, d), old_bound(n, d)
    g = g_bound(params, args.partition_cap)
    data = {"n": n, "d": d, "s": params.s, "t": params.t, "u": params.u,
            "narrow_widths": list(params.narrow_widths),
            "f": str(f), "g": str(g), "old_bound": str(old),
            "f_sci": format_sci(f), "g_sci": format_sci(g), "old_sci": format_sci(old),
            "strict": params.strict}
    text = f"f = {format_sci(f)}\nold = {format_sci(old)}"
    if (params.s, params.u, params.narrow_widths) != (0, 0, ()):
        text += f"\ng = {format_sci(g)}" + ("" if params.strict else " (not strict)")
    _emit(args, data, text)
    return EXIT_OK


def cmd_worst_case(args):
    policy = worst_case_policy(args.n, args.d, args.width)
    text = format_policy(policy)
    if args.out:
        _write(args.out, text)
    leaves = leaf_count(build_diagram(policy)) if args.check else None
    data = {"n": args.n, "d": args.d, "f": str(f_bound(args.n, args.d)),
            "leaf_count": leaves, "policy": None if args.out else text}
    out = text if not args.out else f"wrote {args.out}"
    if leaves is not None:
        out += f"\nleaf_count = {leaves}, f = {f_bound(args.n, args.d)}"
    _emit(args, data, out)
    return EXIT_OK


def _schema_from_args(args) -> FieldSchema:
    if args.fields:
        names, widths = [], []
        for spec in args.fields:
            name, _, w = spec.partition(":")
            if not w.isdigit():
                raise ValidationError(f"field spec {spec!r} should look like name:width")
            names.append(name)
            widths.append(int(w))
        return FieldSchema(tuple(names), tuple(widths))
    return FieldSchema.uniform(args.d, args.width)


def cmd_generate(args):
    seed = _seed(args)
    schema = _schema_from_args(args)
    cfg = GeneratorConfig(args.n, schema, args.oneprob, args.allprob, args.accept_fraction,
                          seed, args.cell_model)
    if args.count < 1:
        raise ValidationError("--count must be >= 1")
    batch = generate_batch(cfg, args.count) if args.count > 1 else [(seed, generate_policy(cfg))]
    files = []
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        for i, (s, pol) in enumerate(batch):
            path = os.path.join(args.out_dir, f"policy_{i:05d}.txt")
            _write(path, format_policy(pol))
            files.append({"file": path, "seed": s})
        config = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "schema"}
        config.update(fields=list(schema.names), widths=list(schema.widths))
        manifest = {"seed": seed, "config": config,
                    "count": len(batch), "files": files}
        _write(os.path.join(args.out_dir, "manifest.json"), json.dumps(manifest, indent=2))
        _emit(args, manifest, f"wrote {len(batch)} policies to {args.out_dir}", rows=files)
    else:
        text = "\n".join(format_policy(p) for _, p in batch)
        _emit(args, {"seed": seed, "policies": [format_policy(p) for _, p in batch]}, text)
    return EXIT_OK


def cmd_minimize(args):
    policy = load_policy(args.policy)
    result = minimize_policy(policy, args.allow_default_fallthrough,
                             args.budget_nodes, args.budget_seconds)
    out = args.out or os.path.splitext(args.policy)[0] + ".min.txt"
    _write(out, format_policy(result.policy))
    report = {"input": args.policy, "output": out, "original_size": policy.n,
              "minimized_size": result.size, "kept": list(result.kept),
              "removed": [i for i in range(1, policy.n + 1) if i not in result.kept],
              "allow_default_fallthrough": args.allow_default_fallthrough,
              "verification": result.verification,
              "solver_nodes": result.stats.nodes,
              "solver_seconds": round(result.stats.seconds, 6)}
    if args.report:
        _write(args.report, json.dumps(report, indent=2) + "\n")
    _emit(args, report, f"kept {result.size} of {policy.n} rules: {list(result.kept)}\n"
                        f"wrote {out} (verified: {result.verification})")
    return EXIT_OK


def cmd_sweep(args):
    datasets = sweep_bounds()
    rows = [r for rs in datasets.values() for r in rs]
    if args.out_dir:
        paths = write_sweep(datasets, args.out_dir)
        _emit(args, {"files": paths, "rows": {k: len(v) for k, v in datasets.items()}},
              "\n".join(f"wrote {p}" for p in paths), rows=rows)
    elif args.format == "text":
        print(rows_to_csv(rows), end="")
    else:
        _emit(args, datasets, rows=rows)
    return EXIT_OK


def cmd_fuzz(args):
    seed = _seed(args)
    space = FuzzSpace(n_max=args.n_max, d_max=args.d_max, width_max=args.width_max,
                      total_bits_max=args.total_bits_max)
    report = fuzz_validate(args.count, seed, space, workers=args.workers)
    data = report.to_dict()
    data["seed"] = seed
    if args.out:
        _write(args.out, json.dumps(data, indent=2) + "\n")
    rows = [{"config": k, **v} for k, v in sorted(report.per_config.items())]
    _emit(args, data, f"{report.count} policies, 0 violations, "
                      f"{report.exhaustive_checked} exhaustively resolved, "
                      f"{report.g_checked} checked against g ({report.seconds:.1f}s)",
          rows=rows)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="PRNG seed (printed if omitted)")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="policydd",
                                description="First-match policy decision diagrams and size bounds.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("build", cmd_build, "build the diagram of a policy; print its leaves")
    sp.add_argument("policy")
    sp.add_argument("--field-order", help="comma-separated names/indices, or 'narrow-last'")
    sp.add_argument("--out", help="write diagram JSON here")
    sp.add_argument("--dot", help="write Graphviz DOT here")

    sp = add("resolve", cmd_resolve, "decision for one packet")
    sp.add_argument("policy")
    sp.add_argument("packet", type=int, nargs="+", help="field values in schema order")
    sp.add_argument("--field-order")

    sp = add("metrics", cmd_metrics, "oneprob, allprob, fieldwidth")
    sp.add_argument("policy")
    sp.add_argument("--narrow-threshold", type=int, default=None)

    sp = add("bound", cmd_bound, "evaluate f, g and the old bound")
    sp.add_argument("--n", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--s", type=int, help="singleton rules")
    sp.add_argument("--t", type=int, help="ordinary rules")
    sp.add_argument("--u", type=int, help="all-match rules")
    sp.add_argument("--narrow-widths", type=int, nargs="*", help="narrow field widths")
    sp.add_argument("--field-widths", type=int, nargs="*",
                    help="all field widths; narrow ones are detected")
    sp.add_argument("--narrow-threshold", type=int, default=None)
    sp.add_argument("--partition-cap", type=int, default=60)

    sp = add("worst-case", cmd_worst_case, "policy reaching f(n, d) leaves")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--width", type=int)
    sp.add_argument("--out")
    sp.add_argument("--check", action="store_true", help="build it and report the leaf count")

    sp = add("generate", cmd_generate, "random policies")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--d", type=int, default=5)
    sp.add_argument("--width", type=int, default=8)
    sp.add_argument("--fields", nargs="*", help="name:width specs (overrides --d/--width)")
    sp.add_argument("--oneprob", type=float, default=0.0)
    sp.add_argument("--allprob", type=float, default=0.0)
    sp.add_argument("--accept-fraction", type=float, default=0.5)
    sp.add_argument("--cell-model", choices=CELL_MODELS, default="cell")
    sp.add_argument("--count", type=int, default=1)
    sp.add_argument("--out-dir")

    sp = add("minimize", cmd_minimize, "smallest equivalent rule subset")
    sp.add_argument("policy")
    sp.add_argument("--out", help="pruned policy file (default: <policy>.min.txt)")
    sp.add_argument("--report", help="JSON report file")
    sp.add_argument("--budget-nodes", type=int, default=None)
    sp.add_argument("--budget-seconds", type=float, default=None)
    sp.add_argument("--allow-default-fallthrough", action="store_true",
                    help="let a leaf fall to an equal default decision")

    sp = add("sweep", cmd_sweep, "bound-comparison datasets (a)-(d) as CSV")
    sp.add_argument("--out-dir")

    sp = add("fuzz", cmd_fuzz, "check bounds and resolution on random policies")
    sp.add_argument("--count", type=int, default=10000)
    sp.add_argument("--n-max", type=int, default=50)
    sp.add_argument("--d-max", type=int, default=5)
    sp.add_argument("--width-max", type=int, default=10)
    sp.add_argument("--total-bits-max", type=int, default=16)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", help="JSON report file")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        if exc.replay:
            print("replay policy:\n" + exc.replay, file=sys.stderr)
        return EXIT_INVARIANT
    except ResourceBudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        if exc.best_known is not None:
            print(f"best known: {exc.best_known}", file=sys.stderr)
        return EXIT_BUDGET
    except (PolicyDDError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
