"""oneprob, allprob and fieldwidth in a single pass over the policy."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .bounds import BoundParams, is_narrow
from .model import Interval, Policy


@dataclass(frozen=True)
class FieldMetrics:
    name: str
    width: int
    narrow: bool
    oneprob: Fraction
    allprob: Fraction


@dataclass(frozen=True)
class PolicyMetrics:
    n: int
    d: int
    oneprob: Fraction
    allprob: Fraction
    fieldwidth: int
    narrow_fields: tuple[str, ...]
    per_field: tuple[FieldMetrics, ...]

    def to_dict(self) -> dict:
        def frac(x):
            return {"value": float(x), "exact": f"{x.numerator}/{x.denominator}"}

        return {
            "n": self.n,
            "d": self.d,
            "oneprob": frac(self.oneprob),
            "allprob": frac(self.allprob),
            "fieldwidth": self.fieldwidth,
            "narrow_fields": list(self.narrow_fields),
            "per_field": [
                {"name": f.name, "width": f.width, "narrow": f.narrow,
                 "oneprob": frac(f.oneprob), "allprob": frac(f.allprob)}
                for f in self.per_field
            ],
        }


def cell_kind(iv: Interval, domain_max: int) -> str:
    """``"all"``, ``"one"`` or ``"ordinary"`` for one rule/field cell."""
    if iv.lo == 0 and iv.hi == domain_max:
        return "all"
    if iv.lo == iv.hi:
        return "one"
    return "ordinary"


def narrow_field_indices(policy: Policy, threshold: int | None = None) -> list[int]:
    return [k for k, w in enumerate(policy.schema.widths)
            if is_narrow(w, policy.n, threshold)]


def compute_metrics(policy: Policy, narrow_threshold: int | None = None) -> PolicyMetrics:
    schema = policy.schema
    n, d = policy.n, policy.d
    ones = [0] * d
    alls = [0] * d
    maxes = [schema.max_value(k) for k in range(d)]
    for rule in policy.rules:
        for k, iv in enumerate(rule.predicate):
            kind = cell_kind(iv, maxes[k])
            if kind == "one":
                ones[k] += 1
            elif kind == "all":
                alls[k] += 1
    narrow = set(narrow_field_indices(policy, narrow_threshold))
    per_field = tuple(
        FieldMetrics(schema.names[k], schema.widths[k], k in narrow,
                     Fraction(ones[k], n), Fraction(alls[k], n))
        for k in range(d)
    )
    cells = n * d
    return PolicyMetrics(
        n=n,
        d=d,
        oneprob=Fraction(sum(ones), cells),
        allprob=Fraction(sum(alls), cells),
        fieldwidth=sum(schema.widths[k] for k in sorted(narrow)),
        narrow_fields=tuple(schema.names[k] for k in sorted(narrow)),
        per_field=per_field,
    )


def narrow_last_order(policy: Policy, threshold: int | None = None) -> tuple[int, ...]:
    """Field order with wide fields first and narrow fields nearest the leaves."""
    narrow = narrow_field_indices(policy, threshold)
    wide = [k for k in range(policy.d) if k not in narrow]
    return tuple(wide + narrow)


def rule_profile(policy: Policy, narrow: Sequence[int] | None = None,
                 threshold: int | None = None) -> BoundParams | None:
    """Uniform-kind profile of ``policy``, or None if some rule mixes kinds.

    A rule counts as a singleton (all-match, ordinary) when every wide field
    holds that kind of interval. Narrow fields are excluded: the bound only
    multiplies by their domain sizes. The narrow widths are ordered as they
    appear from the leaves upward under ``narrow_last_order``.
    """
    if narrow is None:
        narrow = narrow_field_indices(policy, threshold)
    narrow = list(narrow)
    wide = [k for k in range(policy.d) if k not in narrow]
    schema = policy.schema
    counts = {"one": 0, "ordinary": 0, "all": 0}
    for rule in policy.rules:
        kinds = {cell_kind(rule.predicate[k], schema.max_value(k)) for k in wide}
        if len(kinds) > 1:
            return None
        kind = kinds.pop() if kinds else "ordinary"
        counts[kind] += 1
    return BoundParams(counts["one"], counts["ordinary"], counts["all"], policy.d,
                       tuple(schema.widths[k] for k in reversed(narrow)))
