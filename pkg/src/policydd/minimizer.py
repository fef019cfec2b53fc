"""Minimum equivalent policies via Min-One SAT over leaf expressions.

Each leaf of the annotated diagram yields a chain over the rules in play,
read in rule order: a rule with the leaf's decision (*complying*) adds
``x_i or (...)``, any other (*conflicting*) adds ``not x_i and (...)``. A
chain holds exactly when the first surviving rule in play complies. The
conjunction over leaves keeps every packet's decision unchanged, and the
smallest satisfying set of rules is a minimum policy.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .diagram import build_diagram, leaf_report
from .errors import InvariantViolation, ResourceBudgetExceeded
from .model import Policy
from .packets import all_packets, can_enumerate, match_matrix, winners

BRUTE_FORCE_MAX_RULES = 16

AND, OR, NOT = "\u2227", "\u2228", "\u00ac"


@dataclass(frozen=True)
class LeafFormula:
    """Chain of ``(rule index, complying)`` terms for one leaf.

    ``fallthrough`` is the value of the chain once every rule in play is
    gone; in strict mode it is False (the leaf may not drop to the default).
    """

    terms: tuple[tuple[int, bool], ...]
    fallthrough: bool = False

    def __post_init__(self):
        idx = [i for i, _ in self.terms]
        if not self.terms or not self.terms[0][1]:
            raise ValueError("a leaf formula starts with its complying winner")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ValueError("rule indices must be strictly increasing")

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.terms)

    def evaluate(self, present) -> bool:
        """``present`` is a container of kept 1-based rule indices."""
        for i, complying in self.terms:
            if i in present:
                return complying
        return self.fallthrough

    def render(self, latex: bool = False) -> str:
        def var(i):
            if latex:
                return f"x_{i}" if i < 10 else f"x_{{{i}}}"
            return f"x{i}"

        if latex:
            op_or, op_and, op_not = r" \lor ", r" \land ", r"\lnot "
            bottom = r"\top" if self.fallthrough else r"\bot"
        else:
            op_or, op_and, op_not = f" {OR} ", f" {AND} ", NOT
            bottom = "\u22a4" if self.fallthrough else "\u22a5"
        *head, last = self.terms
        i, complying = last
        if complying:
            text = var(i) if not self.fallthrough else f"{var(i)}{op_or}({bottom})"
        else:
            text = f"{op_not}{var(i)}{op_and}({bottom})"
        for i, complying in reversed(head):
            if complying:
                text = f"{var(i)}{op_or}({text})"
            else:
                text = f"{op_not}{var(i)}{op_and}({text})"
        return text


def build_leaf_expression(rules_in_play: Sequence[int], decisions: Sequence[int],
                          fallthrough: bool = False) -> LeafFormula:
    """Chain for one leaf from its ordered rules in play and their decisions."""
    if not rules_in_play:
        raise ValueError("leaf has no rules in play")
    pairs = sorted(zip(rules_in_play, decisions))
    winner = pairs[0][1]
    return LeafFormula(tuple((i, dec == winner) for i, dec in pairs), fallthrough)


@dataclass(frozen=True)
class PolicyFormula:
    n: int
    leaves: tuple[LeafFormula, ...]

    def evaluate(self, present) -> bool:
        present = set(present)
        return all(leaf.evaluate(present) for leaf in self.leaves)

    def distinct_leaves(self) -> tuple[LeafFormula, ...]:
        return tuple(dict.fromkeys(self.leaves))

    def render(self, latex: bool = False) -> str:
        joiner = r" \land " if latex else f" {AND} "
        return joiner.join(f"({leaf.render(latex)})" for leaf in self.distinct_leaves())


def build_policy_formula(policy: Policy, allow_default_fallthrough: bool = False,
                         field_order=None) -> PolicyFormula:
    diagram = build_diagram(policy, field_order)
    leaves = []
    for entry in leaf_report(diagram):
        decisions = [policy.rule(i).decision for i in entry.rules_in_play]
        fall = allow_default_fallthrough and entry.decision == policy.default_decision
        leaves.append(build_leaf_expression(entry.rules_in_play, decisions, fall))
    return PolicyFormula(policy.n, tuple(leaves))


# -- solver ---------------------------------------------------------------------------


@dataclass
class SolverStats:
    nodes: int = 0
    seconds: float = 0.0


@dataclass
class MinimizationResult:
    kept: tuple[int, ...]
    policy: Policy | None = None
    stats: SolverStats = field(default_factory=SolverStats)
    verification: str = "none"

    @property
    def size(self) -> int:
        return len(self.kept)


_UNKNOWN, _TRUE, _FALSE = 0, 1, 2


class _Search:
    def __init__(self, formula: PolicyFormula, budget_nodes, budget_seconds):
        self.n = formula.n
        self.chains = [leaf for leaf in formula.distinct_leaves()]
        self.watch = [[] for _ in range(self.n + 1)]
        for c, leaf in enumerate(self.chains):
            for i in leaf.variables:
                self.watch[i].append(c)
        self.budget_nodes = budget_nodes
        self.deadline = None if budget_seconds is None else time.monotonic() + budget_seconds
        self.stats = SolverStats()
        self.best: tuple[int, ...] | None = None

    def _tick(self):
        self.stats.nodes += 1
        if self.budget_nodes is not None and self.stats.nodes > self.budget_nodes:
            raise ResourceBudgetExceeded(
                f"node budget {self.budget_nodes} exhausted", best_known=self.best)
        if self.deadline is not None and self.stats.nodes % 256 == 0 \
                and time.monotonic() > self.deadline:
            raise ResourceBudgetExceeded("time budget exhausted", best_known=self.best)

    def _scan(self, leaf, value):
        """Chain status and forced assignments.

        Status is 'sat', 'conflict', 'open', or 'free' (open, but satisfied
        once every undecided rule is left out).
        """
        forced = []
        terms = leaf.terms
        for pos, (i, complying) in enumerate(terms):
            v = value[i]
            if v == _FALSE:
                continue
            if v == _TRUE:
                return ("sat" if complying else "conflict"), forced
            if not complying:
                # a present conflicting rule would win the leaf
                forced.append((i, _FALSE))
                continue
            # first undecided complying rule: can the chain be satisfied without it?
            rest = leaf.fallthrough
            for j, comp_j in terms[pos + 1:]:
                vj = value[j]
                if vj == _TRUE:
                    rest = comp_j
                    break
                if vj == _UNKNOWN and comp_j:
                    rest = None  # depends on later choices
                    break
            if rest is False:
                forced.append((i, _TRUE))
                return "open", forced
            return ("free" if self._free(terms, pos, value, leaf.fallthrough) else "open"), forced
        return ("sat" if leaf.fallthrough else "conflict"), forced

    @staticmethod
    def _free(terms, pos, value, fallthrough):
        for j, comp_j in terms[pos:]:
            if value[j] == _TRUE:
                return comp_j
        return fallthrough

    def _propagate(self, value, trail, start_vars):
        queue = list(start_vars)
        while queue:
            var = queue.pop()
            for c in self.watch[var]:
                status, forced = self._scan(self.chains[c], value)
                if status == "conflict":
                    return False
                for i, val in forced:
                    if value[i] == _UNKNOWN:
                        value[i] = val
                        trail.append(i)
                        queue.append(i)
                    elif value[i] != val:
                        return False
        return True

    def _costly_chains(self, value):
        return [leaf for leaf in self.chains if self._scan(leaf, value)[0] == "open"]

    def _lower_bound(self, value, count_true):
        # greedy packing of open chains with disjoint candidate sets
        used = set()
        extra = 0
        for leaf in self._costly_chains(value):
            cand = {i for i, comp in leaf.terms if comp and value[i] == _UNKNOWN}
            if cand and not cand & used:
                used |= cand
                extra += 1
        return count_true + extra

    def solve(self, limit: int, prefer_present: bool):
        """DFS over rule indices; returns a kept tuple of size <= ``limit`` or None.

        With ``prefer_present`` the first solution found within ``limit`` is
        the lexicographically smallest one of its size.
        """
        value = [_UNKNOWN] * (self.n + 1)
        trail = []
        if not self._propagate(value, trail, range(1, self.n + 1)):
            raise InvariantViolation("formula is unsatisfiable")
        found = None

        def count():
            return sum(1 for i in range(1, self.n + 1) if value[i] == _TRUE)

        def rec(var, limit):
            nonlocal found
            self._tick()
            while var <= self.n and value[var] != _UNKNOWN:
                var += 1
            if self._lower_bound(value, count()) > limit:
                return False
            if var > self.n:
                if self.chains and not all(self._scan(l, value)[0] == "sat"
                                           for l in self.chains):
                    return False
                found = tuple(i for i in range(1, self.n + 1) if value[i] == _TRUE)
                return True
            for choice in ((_TRUE, _FALSE) if prefer_present else (_FALSE, _TRUE)):
                mark = len(trail)
                value[var] = choice
                trail.append(var)
                if self._propagate(value, trail, [var]) and rec(var + 1, limit):
                    return True
                while len(trail) > mark:
                    value[trail.pop()] = _UNKNOWN
            return False

        rec(1, limit)
        return found


def min_one_sat(formula: PolicyFormula, budget_nodes: int | None = None,
                budget_seconds: float | None = None) -> MinimizationResult:
    """Exact minimum-cardinality satisfying set of present rules.

    Phase one shrinks an incumbent by branch and bound (absent first); phase
    two recovers the lexicographically smallest set of that size.
    """
    search = _Search(formula, budget_nodes, budget_seconds)
    t0 = time.monotonic()
    best = tuple(range(1, formula.n + 1))
    search.best = best
    while len(best) > 0:
        better = search.solve(len(best) - 1, prefer_present=False)
        if better is None:
            break
        best = better
        search.best = best
    tie = search.solve(len(best), prefer_present=True)
    if tie is None or len(tie) != len(best):
        raise InvariantViolation("tie-break search lost the optimum")
    search.stats.seconds = time.monotonic() - t0
    if not formula.evaluate(tie):
        raise InvariantViolation(f"solver returned non-satisfying set {tie}")
    return MinimizationResult(tie, stats=search.stats)


# -- policy-level API -----------------------------------------------------------


def _compress_columns(policy: Policy):
    """Distinct match vectors (bitmask per packet) with their multiplicities.

    Packets with equal match vectors are interchangeable for any subset of
    rules, so checking each distinct vector once is exhaustive.
    """
    packets = all_packets(policy.schema)
    mm = match_matrix(policy, packets)
    weights = (np.uint64(1) << np.arange(policy.n, dtype=np.uint64))
    masks = (mm.astype(np.uint64) * weights[:, None]).sum(axis=0, dtype=np.uint64)
    return np.unique(masks)


def _first_bit_index(masks: np.ndarray, n: int) -> np.ndarray:
    """0-based index of the lowest set bit, ``n`` where the mask is zero."""
    out = np.full(masks.shape, n, dtype=np.int64)
    remaining = masks.copy()
    for i in range(n):
        bit = np.uint64(1) << np.uint64(i)
        hit = (remaining & bit) != 0
        out[hit] = i
        remaining[hit] = 0
    return out


def _subset_checker(policy: Policy, allow_default_fallthrough: bool):
    n = policy.n
    cols = _compress_columns(policy)
    dec = np.array([r.decision for r in policy.rules] + [policy.default_decision],
                   dtype=np.int64)
    orig_first = _first_bit_index(cols, n)
    reference = dec[orig_first]
    matched = orig_first < n

    def ok(kept: Iterable[int]) -> bool:
        mask = np.uint64(0)
        for i in kept:
            mask |= np.uint64(1) << np.uint64(i - 1)
        first = _first_bit_index(cols & mask, n)
        if not np.array_equal(dec[first], reference):
            return False
        if not allow_default_fallthrough and not np.all(first[matched] < n):
            return False
        return True

    return ok


def brute_force_minimum(policy: Policy, allow_default_fallthrough: bool = True) -> tuple[int, ...]:
    """Smallest (then lexicographically first) packet-equivalent rule subset.

    With ``allow_default_fallthrough=False`` a subset must also keep every
    originally matched packet matched, mirroring the strict leaf semantics.
    """
    if policy.n > BRUTE_FORCE_MAX_RULES:
        raise ResourceBudgetExceeded(
            f"brute force limited to {BRUTE_FORCE_MAX_RULES} rules, policy has {policy.n}")
    ok = _subset_checker(policy, allow_default_fallthrough)
    for size in range(0, policy.n + 1):
        for kept in combinations(range(1, policy.n + 1), size):
            if ok(kept):
                return kept
    raise InvariantViolation("the full policy failed its own equivalence check")


def greedy_minimal(policy: Policy, allow_default_fallthrough: bool = True) -> tuple[int, ...]:
    """Drop redundant rules one at a time, last rule first, until none is redundant."""
    if policy.n > 63:
        raise ResourceBudgetExceeded("greedy check supports at most 63 rules")
    ok = _subset_checker(policy, allow_default_fallthrough)
    kept = list(range(1, policy.n + 1))
    changed = True
    while changed:
        changed = False
        for i in reversed(kept):
            trial = [k for k in kept if k != i]
            if ok(trial):
                kept = trial
                changed = True
                break
    return tuple(kept)


def _leafwise_equivalent(policy: Policy, pruned_kept: Sequence[int],
                         allow_default_fallthrough: bool) -> bool:
    keep = set(pruned_kept)
    for entry in leaf_report(build_diagram(policy)):
        survivors = [i for i in entry.rules_in_play if i in keep]
        if survivors:
            if policy.rule(survivors[0]).decision != entry.decision:
                return False
        elif not (allow_default_fallthrough and policy.default_decision == entry.decision):
            return False
    return True


def minimize_policy(policy: Policy, allow_default_fallthrough: bool = False,
                    budget_nodes: int | None = None,
                    budget_seconds: float | None = None) -> MinimizationResult:
    formula = build_policy_formula(policy, allow_default_fallthrough)
    result = min_one_sat(formula, budget_nodes, budget_seconds)
    pruned = policy.subset(result.kept)
    if not _leafwise_equivalent(policy, result.kept, allow_default_fallthrough):
        raise InvariantViolation("pruned policy changes a leaf decision")
    mode = "leafwise"
    if can_enumerate(policy.schema):
        packets = all_packets(policy.schema)
        before, after = winners(policy, packets), winners(pruned, packets)
        dec_before = np.array([policy.default_decision] + [r.decision for r in policy.rules])
        dec_after = np.array([pruned.default_decision] + [r.decision for r in pruned.rules])
        if not np.array_equal(dec_before[before], dec_after[after]):
            raise InvariantViolation("pruned policy differs on some packet")
        if not allow_default_fallthrough and np.any((before > 0) & (after == 0)):
            raise InvariantViolation("pruned policy lets a matched packet fall to the default")
        mode = "leafwise+exhaustive"
    result.policy = pruned
    result.verification = mode
    return result


def normalize_expression(text: str) -> list[str]:
    """Token list of a rendered expression, ignoring whitespace and brace style."""
    text = re.sub(r"_\{(\d+)\}", r"_\1", text)
    return re.findall(r"\\[A-Za-z]+|x_?\d+|[()]|\S", text)
