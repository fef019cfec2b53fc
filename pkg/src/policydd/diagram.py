"""Fully expanded decision diagrams annotated with rules in play.

A rule is *in play* at a node when at least one packet matching it passes
through that node. Diagrams are kept as trees (no subgraph sharing) so that
leaf counts can be compared against the worst-case size bounds.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import InvariantViolation, SchemaError, ValidationError
from .model import Interval, Policy, Rule, subtract_all


class DiagramNode:
    """Internal node (tests ``field``) or terminal (``field is None``)."""

    __slots__ = ("field", "level", "edges", "rules_in_play", "decision", "_lows")

    def __init__(self, field: int | None, level: int, rules_in_play=None, decision=None):
        self.field = field
        self.level = level
        self.edges: list[DiagramEdge] = []
        self.rules_in_play: list[int] = list(rules_in_play or [])
        self.decision = decision
        self._lows = None

    @property
    def is_terminal(self) -> bool:
        return self.field is None

    def copy(self) -> DiagramNode:
        dup = DiagramNode(self.field, self.level, self.rules_in_play, self.decision)
        dup.edges = [DiagramEdge(e.label, e.target.copy()) for e in self.edges]
        return dup

    def __repr__(self) -> str:
        kind = "terminal" if self.is_terminal else f"field={self.field}"
        return f"<DiagramNode {kind} rules={self.rules_in_play} edges={len(self.edges)}>"


class DiagramEdge:
    __slots__ = ("label", "target")

    def __init__(self, label: Interval, target: DiagramNode):
        self.label = label
        self.target = target

    @property
    def rules_in_play(self) -> list[int]:
        return self.target.rules_in_play


def _new_node(field_order: Sequence[int], level: int, **kw) -> DiagramNode:
    if level == len(field_order):
        return DiagramNode(None, level, **kw)
    return DiagramNode(field_order[level], level, **kw)


def _fresh_path(rule: Rule, rule_index: int, field_order: Sequence[int], level: int) -> DiagramNode:
    """Chain of nodes below ``level`` carrying only ``rule``."""
    node = _new_node(field_order, level, rules_in_play=[rule_index])
    if node.is_terminal:
        node.decision = rule.decision
    else:
        node.edges.append(DiagramEdge(rule.predicate[node.field],
                                      _fresh_path(rule, rule_index, field_order, level + 1)))
    return node


def add_new_rule(rule: Rule, rule_index: int, node: DiagramNode,
                 field_order: Sequence[int]) -> None:
    """Insert ``rule`` into the subtree at ``node`` (in place).

    Uncovered parts of the rule's interval get fresh paths; edges that the
    rule partially overlaps are split, copying the subtree for every
    remainder, and the rule is pushed into the overlapping part.
    """
    rip = node.rules_in_play
    if rule_index not in rip:
        bisect.insort(rip, rule_index)
    node._lows = None
    if node.is_terminal:
        # lowest index in play wins; insertion order n..1 makes this a plain overwrite
        if rip[0] == rule_index:
            node.decision = rule.decision
        return

    want = rule.predicate[node.field]
    existing = list(node.edges)
    for gap in subtract_all(want, [e.label for e in existing]):
        node.edges.append(DiagramEdge(gap, _fresh_path(rule, rule_index, field_order,
                                                       node.level + 1)))
    for edge in existing:
        label = edge.label
        if label.hi < want.lo or want.hi < label.lo:
            continue
        if want.lo <= label.lo and label.hi <= want.hi:
            add_new_rule(rule, rule_index, edge.target, field_order)
            continue
        common = label.intersect(want)
        for rest in label.minus(want):
            node.edges.append(DiagramEdge(rest, edge.target.copy()))
        edge.label = common
        add_new_rule(rule, rule_index, edge.target, field_order)


@dataclass
class Diagram:
    root: DiagramNode
    field_order: tuple[int, ...]
    policy: Policy

    @property
    def default_decision(self) -> int:
        return self.policy.default_decision

    def nodes(self) -> Iterator[DiagramNode]:
        """Depth-first preorder, edges in ascending label order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(e.target for e in reversed(node.edges))

    def terminals(self) -> Iterator[DiagramNode]:
        return (n for n in self.nodes() if n.is_terminal)


def check_field_order(policy: Policy, field_order: Sequence[int] | None) -> tuple[int, ...]:
    d = policy.d
    if field_order is None:
        return tuple(range(d))
    order = tuple(int(k) for k in field_order)
    if sorted(order) != list(range(d)):
        raise ValidationError(f"field order {order} is not a permutation of 0..{d - 1}")
    return order


def _finalize(node: DiagramNode) -> None:
    stack = [node]
    while stack:
        v = stack.pop()
        v.edges.sort(key=lambda e: e.label.lo)
        v._lows = [e.label.lo for e in v.edges]
        stack.extend(e.target for e in v.edges)


def build_diagram(policy: Policy, field_order: Sequence[int] | None = None) -> Diagram:
    """Build the annotated diagram by inserting rules from last to first."""
    if policy.n == 0:
        raise ValidationError("cannot build a diagram for a policy with no rules")
    order = check_field_order(policy, field_order)
    root = _new_node(order, 0)
    for index in range(policy.n, 0, -1):
        add_new_rule(policy.rule(index), index, root, order)
    _finalize(root)
    diagram = Diagram(root, order, policy)
    for t in diagram.terminals():
        winner = policy.rule(t.rules_in_play[0])
        if t.decision != winner.decision:
            raise InvariantViolation(
                f"terminal decision {t.decision} differs from rule {t.rules_in_play[0]}"
            )
    return diagram


def resolve_diagram(diagram: Diagram, packet: Sequence[int]) -> int:
    """Walk one edge per field; packets without a path get the default decision."""
    diagram.policy.schema.check_packet(packet)
    node = diagram.root
    while not node.is_terminal:
        lows = node._lows
        if lows is None:
            _finalize(node)
            lows = node._lows
        pos = bisect.bisect_right(lows, packet[node.field]) - 1
        if pos < 0 or packet[node.field] > node.edges[pos].label.hi:
            return diagram.default_decision
        node = node.edges[pos].target
    return node.decision


def resolve_batch(diagram: Diagram, packets: np.ndarray) -> np.ndarray:
    """Vectorised ``resolve_diagram`` over a ``(P, d)`` packet array."""
    packets = np.asarray(packets, dtype=np.int64)
    if packets.ndim != 2 or packets.shape[1] != diagram.policy.d:
        raise SchemaError(f"packet array shape {packets.shape} does not fit the schema")
    out = np.full(len(packets), diagram.default_decision, dtype=np.int64)
    stack = [(diagram.root, np.arange(len(packets)))]
    while stack:
        node, idx = stack.pop()
        if not len(idx):
            continue
        if node.is_terminal:
            out[idx] = node.decision
            continue
        values = packets[idx, node.field]
        lows = np.array([e.label.lo for e in node.edges], dtype=np.int64)
        his = np.array([e.label.hi for e in node.edges], dtype=np.int64)
        order = np.argsort(lows)
        lows, his = lows[order], his[order]
        pos = np.searchsorted(lows, values, side="right") - 1
        ok = pos >= 0
        ok[ok] &= values[ok] <= his[pos[ok]]
        for j, e in enumerate(order):
            sel = idx[ok & (pos == j)]
            if len(sel):
                stack.append((node.edges[e].target, sel))
    return out


@dataclass(frozen=True)
class LeafEntry:
    path: tuple[Interval, ...]  # indexed by schema field, not by diagram level
    rules_in_play: tuple[int, ...]
    decision: int


def leaf_report(diagram: Diagram) -> list[LeafEntry]:
    d = len(diagram.field_order)
    out = []

    def walk(node, path):
        if node.is_terminal:
            out.append(LeafEntry(tuple(path), tuple(node.rules_in_play), node.decision))
            return
        for e in sorted(node.edges, key=lambda e: e.label.lo):
            path[node.field] = e.label
            walk(e.target, path)
        path[node.field] = None

    walk(diagram.root, [None] * d)
    return out


def leaf_count(diagram: Diagram) -> int:
    count = 0
    stack = [diagram.root]
    while stack:
        node = stack.pop()
        if node.is_terminal:
            count += 1
        else:
            stack.extend(e.target for e in node.edges)
    return count


def root_edges(diagram: Diagram) -> list[tuple[Interval, tuple[int, ...]]]:
    return [(e.label, tuple(e.rules_in_play))
            for e in sorted(diagram.root.edges, key=lambda e: e.label.lo)]


# -- export ---------------------------------------------------------------------


def diagram_to_dict(diagram: Diagram) -> dict:
    schema = diagram.policy.schema
    ids = {}
    nodes, edges = [], []
    for node in diagram.nodes():
        ids[id(node)] = len(ids)
    for node in diagram.nodes():
        entry = {"id": ids[id(node)], "rules_in_play": list(node.rules_in_play)}
        if node.is_terminal:
            entry["decision"] = node.decision
        else:
            entry["field"] = schema.names[node.field]
        nodes.append(entry)
        for e in node.edges:
            edges.append({"source": ids[id(node)], "target": ids[id(e.target)],
                          "label": [e.label.lo, e.label.hi]})
    return {
        "field_order": [schema.names[k] for k in diagram.field_order],
        "default": diagram.default_decision,
        "leaf_count": leaf_count(diagram),
        "nodes": nodes,
        "edges": edges,
    }


def diagram_to_json(diagram: Diagram, **kwargs) -> str:
    return json.dumps(diagram_to_dict(diagram), **kwargs)


def diagram_to_dot(diagram: Diagram) -> str:
    """Graphviz text, node numbering in deterministic preorder."""
    data = diagram_to_dict(diagram)
    lines = ["digraph decision_diagram {", "  node [shape=ellipse];"]
    for node in data["nodes"]:
        rip = ",".join(map(str, node["rules_in_play"]))
        if "decision" in node:
            lines.append(f'  n{node["id"]} [shape=box, label="{node["decision"]}\\n{{{rip}}}"];')
        else:
            lines.append(f'  n{node["id"]} [label="{node["field"]}\\n{{{rip}}}"];')
    for e in data["edges"]:
        lo, hi = e["label"]
        lines.append(f'  n{e["source"]} -> n{e["target"]} [label="[{lo},{hi}]"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
