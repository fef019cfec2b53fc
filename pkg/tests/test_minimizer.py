from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings, strategies as st

from policydd.errors import ResourceBudgetExceeded
from policydd.minimizer import (LeafFormula, PolicyFormula, brute_force_minimum,
                                build_leaf_expression, build_policy_formula, greedy_minimal,
                                min_one_sat, minimize_policy, normalize_expression)
from policydd.model import ACCEPT, DISCARD, FieldSchema, Interval, Policy, Rule, parse_policy
from policydd.packets import equivalent

from conftest import policies

SHADOWED = parse_policy("""\
fields: x:8 y:8
[0,200] [0,200] -> accept
[10,20] [10,20] -> accept
""")


def _leaf(accept, discard, fallthrough=False):
    idx = sorted(accept + discard)
    return build_leaf_expression(idx, [ACCEPT if i in accept else DISCARD for i in idx],
                                 fallthrough)


def test_worked_expression_one():
    leaf = _leaf([3, 13], [7])
    assert leaf.terms == ((3, True), (7, False), (13, True))
    assert normalize_expression(leaf.render(latex=True)) == \
        normalize_expression(r"x_3 \lor (\lnot x_7 \land (x_{13}) )")


def test_worked_expression_two():
    leaf = _leaf([3, 13, 23], [7, 10, 17])
    expected = (r"x_3 \lor ( \lnot x_7 \land (\lnot x_{10} \land ( x_{13} \lor ( \lnot x_{17}"
             r" \land (x_{23})))))")
    assert normalize_expression(leaf.render(latex=True)) == normalize_expression(expected)
    assert leaf.render() == "x3 ∨ (¬x7 ∧ (¬x10 ∧ (x13 ∨ " \
                            "(¬x17 ∧ (x23)))))"


def test_single_rule_expression():
    leaf = build_leaf_expression([5], [ACCEPT])
    assert leaf.render() == "x5"


def test_leaf_formula_invariants():
    with pytest.raises(ValueError):
        LeafFormula(((2, True), (1, False)))
    with pytest.raises(ValueError):
        LeafFormula(((2, False),))


def test_leaf_semantics_truth_table():
    leaf = _leaf([3, 13], [7])
    for bits in itertools.product([0, 1], repeat=3):
        present = {i for i, b in zip((3, 7, 13), bits) if b}
        expected = bool(bits[0] or (not bits[1] and bits[2]))
        assert leaf.evaluate(present) == expected


def test_min_one_sat_single_leaf():
    formula = PolicyFormula(13, (_leaf([3, 13], [7]),))
    assert min_one_sat(formula).kept == (3,)


def test_shadowed_policy():
    formula = build_policy_formula(SHADOWED)
    assert formula.evaluate({1}) and not formula.evaluate({2})
    result = minimize_policy(SHADOWED)
    assert result.kept == (1,)
    assert result.policy.n == 1
    assert brute_force_minimum(SHADOWED, allow_default_fallthrough=False) == (1,)


def test_two_rule_cannot_shrink(two_rule):
    formula = build_policy_formula(two_rule)
    assert not formula.evaluate({1}) and not formula.evaluate({2})
    assert formula.evaluate({1, 2})
    assert minimize_policy(two_rule).kept == (1, 2)
    assert brute_force_minimum(two_rule, allow_default_fallthrough=False) == (1, 2)


def test_single_rule_policy():
    p = Policy(FieldSchema.uniform(2, 3), (Rule((Interval(1, 4),) * 2, ACCEPT),))
    assert build_policy_formula(p).render() == "(x1)"
    assert minimize_policy(p).kept == (1,)


def test_greedy_can_get_stuck_above_minimum():
    # rules 1 and 2 tile rule 3; removing one at a time from the end keeps 1 and 2
    p = parse_policy("fields: x:4\n[0,4] -> 1\n[5,9] -> 1\n[0,9] -> 1\n")
    assert greedy_minimal(p, allow_default_fallthrough=False) == (1, 2)
    assert brute_force_minimum(p, allow_default_fallthrough=False) == (3,)
    assert minimize_policy(p).kept == (3,)


def test_fallthrough_mode_drops_rules_equal_to_default():
    p = parse_policy("fields: x:4\ndefault: discard\n[0,3] -> discard\n[4,9] -> accept\n")
    assert minimize_policy(p).kept == (1, 2)
    relaxed = minimize_policy(p, allow_default_fallthrough=True)
    assert relaxed.kept == (2,) == brute_force_minimum(p, allow_default_fallthrough=True)
    assert equivalent(p, relaxed.policy)


def test_budget_exceeded_reports_best_known():
    rules = tuple(Rule((Interval(i, i + 1),), i % 2) for i in range(0, 40, 2))
    rules += tuple(Rule((Interval(0, 63),), (i + 1) % 2) for i in range(10))
    p = Policy(FieldSchema(("x",), (6,)), rules)
    with pytest.raises(ResourceBudgetExceeded) as info:
        minimize_policy(p, budget_nodes=3)
    assert info.value.best_known is not None


def test_original_assignment_satisfies():
    p = parse_policy("fields: a:3 b:3\n[0,5] * -> 1\n2 [1,6] -> 0\n* [3,3] -> 1\n")
    f = build_policy_formula(p)
    assert f.evaluate(range(1, p.n + 1))


@settings(max_examples=200)
@given(policies(max_n=7, max_bits=8), st.booleans())
def test_minimizer_matches_brute_force(policy, fallthrough):
    result = minimize_policy(policy, allow_default_fallthrough=fallthrough)
    oracle = brute_force_minimum(policy, allow_default_fallthrough=fallthrough)
    assert result.size == len(oracle)
    assert result.kept == oracle           # identical tie-break
    assert equivalent(policy, result.policy)
    assert result.size <= len(greedy_minimal(policy, fallthrough))
    assert build_policy_formula(policy, fallthrough).evaluate(range(1, policy.n + 1))


@given(policies(max_n=6, max_bits=8))
def test_minimizer_is_deterministic(policy):
    assert minimize_policy(policy).kept == minimize_policy(policy).kept
