from __future__ import annotations

from fractions import Fraction

from hypothesis import given, strategies as st

from policydd.bounds import BoundParams, worst_case_policy
from policydd.metrics import compute_metrics, narrow_last_order, rule_profile
from policydd.model import FieldSchema, Interval, Policy, Rule

from conftest import policies


def test_all_domain_policy():
    schema = FieldSchema.uniform(3, 4)
    p = Policy(schema, tuple(Rule((Interval(0, 15),) * 3, 1) for _ in range(4)))
    m = compute_metrics(p)
    assert (m.allprob, m.oneprob) == (1, 0)


def test_worst_case_metrics():
    for n in (2, 5, 9):
        p = worst_case_policy(n, 3, width=8)
        m = compute_metrics(p)
        assert m.oneprob == Fraction(1, n)
        assert m.allprob == 0


def test_two_rule_metrics(two_rule):
    m = compute_metrics(two_rule)
    assert (m.oneprob, m.allprob, m.fieldwidth) == (0, 0, 0)
    assert m.to_dict()["oneprob"]["exact"] == "0/1"


def test_fieldwidth_and_narrow_order():
    schema = FieldSchema(("a", "proto", "b", "flag"), (8, 2, 8, 1))
    rules = tuple(Rule((Interval(i, i + 3), Interval(0, 1), Interval(i, 200), Interval(0, 0)),
                       i % 2) for i in range(5))
    p = Policy(schema, rules)
    m = compute_metrics(p)
    assert m.narrow_fields == ("proto", "flag")
    assert m.fieldwidth == 3
    assert narrow_last_order(p) == (0, 2, 1, 3)
    # the narrow field nearest the leaves is listed first
    assert rule_profile(p) == BoundParams(0, 5, 0, 4, (1, 2))


def test_rule_profile_mixed_kinds_is_none():
    schema = FieldSchema.uniform(2, 4)
    p = Policy(schema, (Rule((Interval(3, 3), Interval(1, 9)), 1),))
    assert rule_profile(p) is None


@given(policies(), st.randoms(use_true_random=False))
def test_metrics_invariant_under_permutation(policy, rng):
    base = compute_metrics(policy)
    rules = list(policy.rules)
    rng.shuffle(rules)
    perm = list(range(policy.d))
    rng.shuffle(perm)
    schema = FieldSchema(tuple(policy.schema.names[k] for k in perm),
                         tuple(policy.schema.widths[k] for k in perm))
    rules = tuple(Rule(tuple(r.predicate[k] for k in perm), r.decision) for r in rules)
    other = compute_metrics(Policy(schema, rules, policy.default_decision))
    assert (other.oneprob, other.allprob, other.fieldwidth) == \
        (base.oneprob, base.allprob, base.fieldwidth)
    assert 0 <= base.oneprob <= 1 and 0 <= base.allprob <= 1
