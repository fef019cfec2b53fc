"""Worst-case leaf counts of first-match decision diagrams.

All arithmetic is exact Python integers; ``format_sci`` exists only for
display. Three bounds are provided:

* ``old_bound(n, d) = (2n - 1) ** d``, the branching-factor-only bound;
* ``f_bound(n, d)``, the rules-in-play recurrence
  ``f(n, d) = 2 * sum(f(i, d-1) for i in 1..n-1) + f(n, d-1)``
  with ``f(n, 1) = 2n - 1`` and ``f(1, d) = 1``;
* ``g_bound(params)``, the refinement for ``s`` singleton rules,
  ``t`` ordinary rules and ``u`` all-match rules, plus narrow fields.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, localcontext
from typing import Iterator, Sequence

from .errors import PartitionCapExceeded, ValidationError
from .model import ACCEPT, DISCARD, FieldSchema, Interval, Policy, Rule

DEFAULT_PARTITION_CAP = 60


def old_bound(n: int, d: int) -> int:
    _check_nd(n, d)
    return (2 * n - 1) ** d


def _check_nd(n, d, allow_zero_n=False):
    if n < (0 if allow_zero_n else 1) or d < 1:
        raise ValidationError(f"need n >= 1 and d >= 1, got n={n}, d={d}")


class _FTable:
    """Rows ``f(., d)`` for ``n < width`` with prefix sums, grown on demand.

    Writers hold the lock and publish complete tables; readers never see a
    half-built row.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._rows: list[list[int]] = []
        self._prefix: list[list[int]] = []
        self._build(64, 12)

    def _build(self, width: int, depth: int) -> None:
        # level 0 is the leaf level: one leaf whenever some rule is in play
        rows = [[0] + [1] * (width - 1)]
        while len(rows) <= depth:
            below = rows[-1]
            row, acc = [0] * width, 0
            for m in range(1, width):
                acc += below[m - 1]
                row[m] = 2 * acc + below[m]
            rows.append(row)
        prefix = []
        for row in rows:
            acc, ps = 0, []
            for v in row:
                acc += v
                ps.append(acc)
            prefix.append(ps)
        self._prefix, self._rows = prefix, rows

    def _ensure(self, n: int, d: int) -> None:
        rows = self._rows
        if d < len(rows) and n < len(rows[0]):
            return
        with self._lock:
            rows = self._rows
            if d < len(rows) and n < len(rows[0]):
                return
            width = max(len(rows[0]), 1)
            while width <= n:
                width *= 2
            self._build(width, max(d, len(rows) - 1))

    def value(self, n: int, d: int) -> int:
        self._ensure(n, d)
        return self._rows[d][n]

    def range_sum(self, lo: int, hi: int, d: int) -> int:
        """``sum(f(i, d) for i in lo..hi)``; empty when ``hi < lo``."""
        if hi < lo:
            return 0
        self._ensure(hi, d)
        ps = self._prefix[d]
        return ps[hi] - (ps[lo - 1] if lo > 0 else 0)


_F = _FTable()


def f_bound(n: int, d: int) -> int:
    """Exact rules-in-play worst-case leaf count; ``f(0, d) = 0``."""
    _check_nd(n, d, allow_zero_n=True)
    return _F.value(n, d)


def f_bound_recursive(n: int, d: int, _memo=None) -> int:
    """Direct transcription of the recurrence with its stated base cases.

    Independent of the tabulated ``f_bound``; used to cross-check it.
    """
    memo = {} if _memo is None else _memo
    if n == 0:
        return 0
    if d == 0:
        return 1
    if d == 1:
        return 2 * n - 1
    if n == 1:
        return 1
    key = (n, d)
    if key not in memo:
        memo[key] = 2 * sum(f_bound_recursive(i, d - 1, memo) for i in range(1, n)) \
            + f_bound_recursive(n, d - 1, memo)
    return memo[key]


# -- partitions -------------------------------------------------------------------


def partitions(s: int, largest: int | None = None) -> Iterator[tuple[int, ...]]:
    """Unordered integer partitions of ``s``, each with parts in descending order.

    ``partitions(0)`` yields the single empty partition.
    """
    if largest is None:
        largest = s
    if s == 0:
        yield ()
        return
    for first in range(min(s, largest), 0, -1):
        for rest in partitions(s - first, first):
            yield (first,) + rest


def partition_count(s: int) -> int:
    # Euler's pentagonal recurrence
    p = [1] + [0] * s
    for m in range(1, s + 1):
        k, total = 1, 0
        while True:
            g1 = k * (3 * k - 1) // 2
            if g1 > m:
                break
            sign = 1 if k % 2 else -1
            total += sign * p[m - g1]
            g2 = k * (3 * k + 1) // 2
            if g2 <= m:
                total += sign * p[m - g2]
            k += 1
        p[m] = total
    return p[s]


# -- refined bound --------------------------------------------------------------


@dataclass(frozen=True)
class BoundParams:
    """Rule profile for ``g_bound``.

    ``d`` counts every field, narrow ones included. ``narrow_widths`` are the
    bit widths of the narrow fields, which sit nearest the leaves.
    """

    s: int
    t: int
    u: int
    d: int
    narrow_widths: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "narrow_widths", tuple(self.narrow_widths))
        if min(self.s, self.t, self.u) < 0:
            raise ValidationError(f"negative rule counts in {self}")
        if self.n < 1:
            raise ValidationError("need at least one rule")
        if self.d < 1:
            raise ValidationError("need d >= 1")
        if len(self.narrow_widths) > self.d:
            raise ValidationError("more narrow fields than fields")
        if any(w < 1 for w in self.narrow_widths):
            raise ValidationError("narrow widths must be positive")

    @classmethod
    def ordinary(cls, n: int, d: int) -> BoundParams:
        return cls(0, n, 0, d)

    @property
    def n(self) -> int:
        return self.s + self.t + self.u

    @property
    def wide_depth(self) -> int:
        return self.d - len(self.narrow_widths)

    @property
    def strict(self) -> bool:
        """False once narrow fields are involved: the product bound is not tight."""
        return not self.narrow_widths


def is_narrow(width: int, n: int, threshold: int | None = None) -> bool:
    """A field is narrow when its domain cannot hold the maximum branching factor.

    ``threshold`` overrides the branching factor ``2n - 1``.
    """
    limit = 2 * n - 1 if threshold is None else threshold
    return (1 << width) < limit


def _wide_g(s: int, t: int, u: int, depth: int) -> int:
    """Partition-max recurrence over ``depth`` wide levels.

    At each level the ``t`` ordinary rules contribute side edges with
    ``0 .. t-1`` of them in play (plus the ``u`` all-matches), bounded by
    ``f``; the central edge with all ``t + u`` rules is cut by the singleton
    groups of a partition of ``s`` into ``a + 1`` plain pieces and ``a``
    pieces that also carry a group. Singleton and all-match rules keep their
    kind at lower levels.
    """
    memo: dict[tuple[int, int], int] = {}

    def g(s_, d_):
        if s_ + t + u == 0:
            return 0
        if d_ == 0:
            return 1
        key = (s_, d_)
        if key in memo:
            return memo[key]
        side = 2 * _F.range_sum(u, u + t - 1, d_ - 1)
        plain = g(0, d_ - 1)
        # best[m]: max over partitions of m of sum(plain + g(part)) -- an
        # exact, polynomial evaluation of the max over all partitions
        best = [0] * (s_ + 1)
        for m in range(1, s_ + 1):
            best[m] = max(plain + g(k, d_ - 1) + best[m - k] for k in range(1, m + 1))
        memo[key] = side + plain + best[s_]
        return memo[key]

    return g(s, depth)


def g_bound(params: BoundParams, partition_cap: int | None = DEFAULT_PARTITION_CAP) -> int:
    """Refined worst-case leaf count for the given rule profile.

    Wide levels use the partition-max recurrence; the narrow levels below
    multiply the result by ``2 ** w`` each.
    """
    if partition_cap is not None and params.s > partition_cap:
        raise PartitionCapExceeded(
            f"s={params.s} exceeds the partition cap {partition_cap} "
            f"({partition_count(params.s)} partitions)"
        )
    value = _wide_g(params.s, params.t, params.u, params.wide_depth)
    for w in params.narrow_widths:
        value <<= w
    return value


def g_bound_enumerated(params: BoundParams) -> int:
    """Same bound, taking the max by explicitly enumerating every partition.

    Exponential in ``s``; the reference for ``g_bound`` on small profiles.
    """
    s, t, u = params.s, params.t, params.u
    memo, f_memo = {}, {}

    def g(s_, d_):
        if s_ + t + u == 0:
            return 0
        if d_ == 0:
            return 1
        if (s_, d_) not in memo:
            side = 2 * sum(f_bound_recursive(i + u, d_ - 1, f_memo) for i in range(t))
            plain = g(0, d_ - 1)
            memo[(s_, d_)] = side + max(
                (len(p) + 1) * plain + sum(g(part, d_ - 1) for part in p)
                for p in partitions(s_)
            )
        return memo[(s_, d_)]

    value = g(s, params.wide_depth)
    for w in params.narrow_widths:
        value *= 2 ** w
    return value


# -- constructions ------------------------------------------------------------------


def worst_case_policy(n: int, d: int, width: int | None = None) -> Policy:
    """Nested policy reaching ``f(n, d)`` leaves: rule ``k`` is ``[k, 2n-k]`` everywhere.

    Decisions alternate accept/discard starting with accept.
    """
    _check_nd(n, d)
    need = (2 * n - 1).bit_length()
    if width is None:
        width = need
    if width < need:
        raise ValidationError(f"{width}-bit fields cannot hold {2 * n - 1}")
    schema = FieldSchema.uniform(d, width)
    rules = tuple(
        Rule((Interval(k, 2 * n - k),) * d, ACCEPT if k % 2 else DISCARD)
        for k in range(1, n + 1)
    )
    return Policy(schema, rules, DISCARD)


def singleton_split_regions(intervals: Sequence[Interval]) -> list[Interval]:
    """Regions of constant membership cut out of one field by ``intervals``.

    Only covered regions count; their number is the root branching factor
    of the one-field diagram built from these intervals.
    """
    cuts = sorted({iv.lo for iv in intervals} | {iv.hi + 1 for iv in intervals})
    regions = []
    for lo, nxt in zip(cuts, cuts[1:]):
        hi = nxt - 1
        if any(iv.lo <= lo and hi <= iv.hi for iv in intervals):
            regions.append(Interval(lo, hi))
    return regions


def singleton_split_edges(intervals: Sequence[Interval]) -> int:
    return len(singleton_split_regions(intervals))


# -- display ------------------------------------------------------------------------


def format_sci(value: int, digits: int = 4) -> str:
    """``2.808e26``-style rendering, rounded half-even to ``digits`` significant digits."""
    if value == 0:
        return "0"
    with localcontext() as ctx:
        ctx.prec = max(digits + 5, len(str(abs(value))) + 2)
        dec = Decimal(value)
        exp = dec.adjusted()
        q = Decimal(1).scaleb(exp - digits + 1)
        rounded = dec.quantize(q, rounding=ROUND_HALF_EVEN)
        if rounded.adjusted() != exp:
            exp = rounded.adjusted()
        mant = rounded.scaleb(-exp)
        return f"{mant:.{digits - 1}f}e{exp}"
