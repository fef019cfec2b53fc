"""Exhaustive packet enumeration over small schemas, vectorised with numpy."""

from __future__ import annotations

import numpy as np

from .errors import ResourceBudgetExceeded
from .model import FieldSchema, Policy

# Total packet-space size above which exhaustive checks refuse to run.
EXHAUSTIVE_LIMIT_BITS = 20


def can_enumerate(schema: FieldSchema, limit_bits: int = EXHAUSTIVE_LIMIT_BITS) -> bool:
    return schema.total_bits <= limit_bits


def all_packets(schema: FieldSchema, limit_bits: int = EXHAUSTIVE_LIMIT_BITS) -> np.ndarray:
    """Every packet of the schema as a ``(2**total_bits, d)`` int64 array, row-major."""
    if not can_enumerate(schema, limit_bits):
        raise ResourceBudgetExceeded(
            f"packet space of {schema.total_bits} bits exceeds the {limit_bits}-bit limit"
        )
    axes = [np.arange(1 << w, dtype=np.int64) for w in schema.widths]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def match_matrix(policy: Policy, packets: np.ndarray) -> np.ndarray:
    """Boolean ``(n, P)`` matrix: entry ``[i, p]`` is rule ``i+1`` matching packet ``p``."""
    out = np.ones((policy.n, len(packets)), dtype=bool)
    for i, rule in enumerate(policy.rules):
        row = out[i]
        for k, iv in enumerate(rule.predicate):
            col = packets[:, k]
            row &= (col >= iv.lo) & (col <= iv.hi)
    return out


def winners(policy: Policy, packets: np.ndarray) -> np.ndarray:
    """1-based index of the first matching rule per packet, 0 where none matches."""
    win = np.zeros(len(packets), dtype=np.int64)
    for i in range(policy.n, 0, -1):
        rule = policy.rules[i - 1]
        mask = np.ones(len(packets), dtype=bool)
        for k, iv in enumerate(rule.predicate):
            col = packets[:, k]
            mask &= (col >= iv.lo) & (col <= iv.hi)
        win[mask] = i
    return win


def decisions(policy: Policy, packets: np.ndarray) -> np.ndarray:
    """First-match decision per packet."""
    table = np.array([policy.default_decision] + [r.decision for r in policy.rules],
                     dtype=np.int64)
    return table[winners(policy, packets)]


def decision_table(policy: Policy) -> np.ndarray:
    return decisions(policy, all_packets(policy.schema))


def equivalent(a: Policy, b: Policy) -> bool:
    """Same decision for every packet (exhaustive; schemas must match)."""
    if a.schema != b.schema:
        return False
    packets = all_packets(a.schema)
    return bool(np.array_equal(decisions(a, packets), decisions(b, packets)))
