"""Packets, intervals, rules and first-match policies.

Rule indices exposed by this package are 1-based, matching the usual way
firewall rules are numbered. Decisions are small integers; ``ACCEPT`` and
``DISCARD`` are named aliases, any other non-negative integer is a valid
(tagged) action.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import PolicySyntaxError, SchemaError, ValidationError

DISCARD = 0
ACCEPT = 1

DECISION_NAMES = {"discard": DISCARD, "accept": ACCEPT, "deny": DISCARD, "allow": ACCEPT}

Packet = tuple  # d-tuple of non-negative ints, in schema field order


def parse_decision(token: str | int) -> int:
    if isinstance(token, int) and not isinstance(token, bool):
        if token < 0:
            raise ValidationError(f"decision must be non-negative, got {token}")
        return token
    text = str(token).strip().lower()
    if text in DECISION_NAMES:
        return DECISION_NAMES[text]
    if text.isdigit():
        return int(text)
    raise ValidationError(f"unknown decision {token!r}")


@dataclass(frozen=True)
class Interval:
    """Closed integer interval ``[lo, hi]``."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.hi < 0:
            raise ValidationError(f"interval bounds must be non-negative: [{self.lo},{self.hi}]")
        if self.lo > self.hi:
            raise ValidationError(f"interval has lo > hi: [{self.lo},{self.hi}]")

    def __contains__(self, value: int) -> bool:
        return self.lo <= value <= self.hi

    def __len__(self) -> int:
        return self.hi - self.lo + 1

    def __str__(self) -> str:
        return f"[{self.lo},{self.hi}]"

    @property
    def is_singleton(self) -> bool:
        return self.lo == self.hi

    def intersect(self, other: Interval) -> Interval | None:
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else None

    def overlaps(self, other: Interval) -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def minus(self, other: Interval) -> list[Interval]:
        """Parts of ``self`` not covered by ``other`` (0, 1 or 2 intervals)."""
        if not self.overlaps(other):
            return [self]
        out = []
        if self.lo < other.lo:
            out.append(Interval(self.lo, other.lo - 1))
        if other.hi < self.hi:
            out.append(Interval(other.hi + 1, self.hi))
        return out


def subtract_all(interval: Interval, covers: Iterable[Interval]) -> list[Interval]:
    """Maximal sub-intervals of ``interval`` not covered by any of ``covers``."""
    out = []
    cursor, hi = interval.lo, interval.hi
    for c in sorted(covers, key=lambda iv: iv.lo):
        if c.hi < cursor:
            continue
        if c.lo > hi:
            break
        if c.lo > cursor:
            out.append(Interval(cursor, c.lo - 1))
        cursor = max(cursor, c.hi + 1)
        if cursor > hi:
            return out
    out.append(Interval(cursor, hi))
    return out


@dataclass(frozen=True)
class FieldSchema:
    """Ordered packet fields; field ``k`` has domain ``[0, 2**widths[k] - 1]``."""

    names: tuple[str, ...]
    widths: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "widths", tuple(self.widths))
        if not self.names:
            raise SchemaError("schema needs at least one field")
        if len(self.names) != len(self.widths):
            raise SchemaError("names and widths differ in length")
        if len(set(self.names)) != len(self.names):
            raise SchemaError(f"duplicate field names in {self.names}")
        for name, w in zip(self.names, self.widths):
            if not isinstance(w, int) or w < 1:
                raise SchemaError(f"field {name!r} needs a positive bit width, got {w!r}")
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.-]*", name):
                raise SchemaError(f"bad field name {name!r}")

    @classmethod
    def uniform(cls, d: int, width: int, prefix: str = "x") -> FieldSchema:
        return cls(tuple(f"{prefix}{k + 1}" for k in range(d)), (width,) * d)

    @property
    def d(self) -> int:
        return len(self.names)

    def domain(self, k: int) -> Interval:
        return Interval(0, (1 << self.widths[k]) - 1)

    def max_value(self, k: int) -> int:
        return (1 << self.widths[k]) - 1

    @property
    def total_bits(self) -> int:
        return sum(self.widths)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"no field named {name!r}") from None

    def check_packet(self, packet: Sequence[int]) -> None:
        if len(packet) != self.d:
            raise SchemaError(f"packet has {len(packet)} values, schema has {self.d} fields")
        for k, v in enumerate(packet):
            if not 0 <= v <= self.max_value(k):
                raise SchemaError(f"value {v} outside domain of field {self.names[k]!r}")


@dataclass(frozen=True)
class Rule:
    predicate: tuple[Interval, ...]
    decision: int

    def __post_init__(self):
        object.__setattr__(self, "predicate", tuple(self.predicate))

    def check(self, schema: FieldSchema) -> None:
        if len(self.predicate) != schema.d:
            raise SchemaError(
                f"rule has {len(self.predicate)} intervals, schema has {schema.d} fields"
            )
        for k, iv in enumerate(self.predicate):
            if iv.hi > schema.max_value(k):
                raise SchemaError(
                    f"interval {iv} outside domain {schema.domain(k)} of field {schema.names[k]!r}"
                )


def matches(rule: Rule, packet: Sequence[int]) -> bool:
    if len(packet) != len(rule.predicate):
        raise SchemaError(
            f"packet has {len(packet)} values, rule has {len(rule.predicate)} fields"
        )
    return all(iv.lo <= v <= iv.hi for iv, v in zip(rule.predicate, packet))


@dataclass(frozen=True)
class Policy:
    schema: FieldSchema
    rules: tuple[Rule, ...]
    default_decision: int = DISCARD

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        for rule in self.rules:
            rule.check(self.schema)

    @property
    def n(self) -> int:
        return len(self.rules)

    @property
    def d(self) -> int:
        return self.schema.d

    def rule(self, index: int) -> Rule:
        """Rule by 1-based index."""
        return self.rules[index - 1]

    def subset(self, kept: Iterable[int]) -> Policy:
        """Policy keeping only the given 1-based rule indices, order preserved."""
        keep = set(kept)
        return Policy(
            self.schema,
            tuple(r for i, r in enumerate(self.rules, 1) if i in keep),
            self.default_decision,
        )


def resolve_first_match(policy: Policy, packet: Sequence[int]) -> tuple[int, int | None]:
    """Return ``(decision, 1-based winning rule index)`` or ``(default, None)``."""
    policy.schema.check_packet(packet)
    for i, rule in enumerate(policy.rules, 1):
        if all(iv.lo <= v <= iv.hi for iv, v in zip(rule.predicate, packet)):
            return rule.decision, i
    return policy.default_decision, None


# -- routing tables -----------------------------------------------------------


class RouteKind(enum.IntEnum):
    """Tie-break order among equal-length prefixes (lower value wins)."""

    STATIC = 0
    EIGRP = 1
    OSPF = 2
    ISIS = 3
    RIP = 4
    DEFAULT = 5

    @classmethod
    def parse(cls, value: str | RouteKind) -> RouteKind:
        if isinstance(value, RouteKind):
            return value
        try:
            return cls[str(value).upper()]
        except KeyError:
            raise ValidationError(f"unknown route kind {value!r}") from None


@dataclass(frozen=True)
class RouteEntry:
    """A prefix route on one field; ``other_fields`` covers the rest in order."""

    field_index: int
    base: int
    prefix_len: int
    other_fields: tuple[Interval, ...] = ()
    kind: RouteKind = RouteKind.STATIC
    decision: int = ACCEPT

    def __post_init__(self):
        object.__setattr__(self, "other_fields", tuple(self.other_fields))
        object.__setattr__(self, "kind", RouteKind.parse(self.kind))

    @classmethod
    def from_cidr(cls, cidr: str, kind="static", decision: int = ACCEPT, field_index: int = 0,
                  other_fields: Sequence[Interval] = ()) -> RouteEntry:
        import ipaddress

        net = ipaddress.IPv4Network(cidr, strict=True)
        return cls(field_index, int(net.network_address), net.prefixlen,
                   tuple(other_fields), RouteKind.parse(kind), decision)

    def prefix_interval(self, width: int) -> Interval:
        if not 0 <= self.prefix_len <= width:
            raise ValidationError(f"prefix length {self.prefix_len} outside 0..{width}")
        span = 1 << (width - self.prefix_len)
        if self.base % span:
            raise ValidationError(
                f"base {self.base} is not aligned to a /{self.prefix_len} prefix"
            )
        if self.base + span - 1 > (1 << width) - 1:
            raise ValidationError(f"prefix base {self.base} outside {width}-bit domain")
        return Interval(self.base, self.base + span - 1)

    def to_rule(self, schema: FieldSchema) -> Rule:
        if not 0 <= self.field_index < schema.d:
            raise SchemaError(f"prefix field index {self.field_index} outside schema")
        if len(self.other_fields) != schema.d - 1:
            raise SchemaError(
                f"route has {len(self.other_fields)} other fields, schema needs {schema.d - 1}"
            )
        pred = list(self.other_fields)
        pred.insert(self.field_index, self.prefix_interval(schema.widths[self.field_index]))
        return Rule(tuple(pred), self.decision)


def routes_to_first_match(entries: Sequence[RouteEntry], schema: FieldSchema) -> Policy:
    """Order routes so first match reproduces longest-prefix-then-kind precedence."""
    if not entries:
        raise ValidationError("no route entries")
    field_index = entries[0].field_index
    if any(e.field_index != field_index for e in entries):
        raise ValidationError("route entries disagree on the prefix field")
    ordered = sorted(entries, key=lambda e: (-e.prefix_len, e.kind))
    return Policy(schema, tuple(e.to_rule(schema) for e in ordered), DISCARD)


def best_match_route(entries: Sequence[RouteEntry], schema: FieldSchema,
                     packet: Sequence[int]) -> int:
    """Router-style resolution: longest prefix, then route kind, else discard.

    Returns the decision. Serves as the reference for ``routes_to_first_match``.
    """
    schema.check_packet(packet)
    best = None
    for pos, e in enumerate(entries):
        if matches(e.to_rule(schema), packet):
            key = (-e.prefix_len, e.kind, pos)
            if best is None or key < best[0]:
                best = (key, e)
    return DISCARD if best is None else best[1].decision


# -- text format ----------------------------------------------------------------

def _parse_cell(tok: str, schema: FieldSchema, k: int, line_no: int, col: int) -> Interval:
    if tok == "*":
        return schema.domain(k)
    m = re.fullmatch(r"\[\s*(\d+)\s*,\s*(\d+)\s*\]", tok)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
    elif tok.isdigit():
        lo = hi = int(tok)
    else:
        raise PolicySyntaxError(f"bad interval {tok!r}", line_no, col)
    if lo > hi:
        raise PolicySyntaxError(f"interval {tok} has lo > hi", line_no, col)
    if hi > schema.max_value(k):
        raise PolicySyntaxError(
            f"interval {tok} outside domain {schema.domain(k)} of field {schema.names[k]!r}",
            line_no, col,
        )
    return Interval(lo, hi)


def parse_policy(text: str) -> Policy:
    """Parse the line-oriented policy format.

    ::

        fields: x:8 y:8
        default: discard
        [10,110] [90,190] -> 0
        *        7        -> accept

    ``*`` is the full field domain and a bare ``v`` means ``[v,v]``.
    ``#`` starts a comment.
    """
    schema = None
    default = DISCARD
    rules = []
    seen_default = False
    for line_no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        if schema is None:
            if not stripped.startswith("fields:"):
                raise PolicySyntaxError("expected 'fields:' header", line_no, indent + 1)
            names, widths = [], []
            body = stripped[len("fields:"):]
            offset = indent + len("fields:")
            for m in re.finditer(r"\S+", body):
                tok = m.group(0)
                name, sep, width = tok.partition(":")
                if not sep or not width.isdigit():
                    raise PolicySyntaxError(f"bad field spec {tok!r}, want name:width",
                                            line_no, offset + m.start() + 1)
                names.append(name)
                widths.append(int(width))
            try:
                schema = FieldSchema(tuple(names), tuple(widths))
            except SchemaError as exc:
                raise PolicySyntaxError(str(exc), line_no, indent + 1) from None
            continue
        if stripped.startswith("default:"):
            if rules or seen_default:
                raise PolicySyntaxError("'default:' must precede rules and appear once",
                                        line_no, indent + 1)
            try:
                default = parse_decision(stripped[len("default:"):].strip())
            except ValidationError as exc:
                raise PolicySyntaxError(str(exc), line_no, indent + 1) from None
            seen_default = True
            continue
        lhs, arrow, rhs = line.partition("->")
        if not arrow:
            raise PolicySyntaxError("rule line needs '-> <decision>'", line_no, indent + 1)
        try:
            decision = parse_decision(rhs.strip())
        except ValidationError as exc:
            raise PolicySyntaxError(str(exc), line_no, len(lhs) + 3) from None
        cells = []
        for m in re.finditer(r"\[[^\]]*\]|\S+", lhs):
            cells.append((m.group(0), m.start() + 1))
        if len(cells) != schema.d:
            raise PolicySyntaxError(
                f"rule has {len(cells)} intervals, schema has {schema.d} fields",
                line_no, indent + 1,
            )
        pred = tuple(_parse_cell(tok, schema, k, line_no, col)
                     for k, (tok, col) in enumerate(cells))
        rules.append(Rule(pred, decision))
    if schema is None:
        raise PolicySyntaxError("missing 'fields:' header", 1, 1)
    if not rules:
        raise PolicySyntaxError("policy has no rules")
    return Policy(schema, tuple(rules), default)


def _format_cell(iv: Interval, schema: FieldSchema, k: int) -> str:
    if iv == schema.domain(k):
        return "*"
    if iv.is_singleton:
        return str(iv.lo)
    return str(iv)


def format_policy(policy: Policy) -> str:
    s = policy.schema
    lines = ["fields: " + " ".join(f"{n}:{w}" for n, w in zip(s.names, s.widths)),
             f"default: {policy.default_decision}"]
    for rule in policy.rules:
        cells = " ".join(_format_cell(iv, s, k) for k, iv in enumerate(rule.predicate))
        lines.append(f"{cells} -> {rule.decision}")
    return "\n".join(lines) + "\n"


def policy_to_dict(policy: Policy) -> dict:
    s = policy.schema
    return {
        "schema": [{"name": n, "width": w} for n, w in zip(s.names, s.widths)],
        "default": policy.default_decision,
        "rules": [
            {"predicate": [[iv.lo, iv.hi] for iv in r.predicate], "decision": r.decision}
            for r in policy.rules
        ],
    }


def policy_from_dict(data: dict) -> Policy:
    try:
        schema = FieldSchema(tuple(f["name"] for f in data["schema"]),
                             tuple(int(f["width"]) for f in data["schema"]))
        rules = tuple(
            Rule(tuple(Interval(int(lo), int(hi)) for lo, hi in r["predicate"]),
                 parse_decision(r["decision"]))
            for r in data["rules"]
        )
        return Policy(schema, rules, parse_decision(data.get("default", DISCARD)))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed policy JSON: {exc}") from None


def policy_to_json(policy: Policy, **kwargs) -> str:
    return json.dumps(policy_to_dict(policy), **kwargs)


def policy_from_json(text: str) -> Policy:
    return policy_from_dict(json.loads(text))


def load_policy(path) -> Policy:
    """Read a policy from a text-format or ``.json`` file."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json") or text.lstrip().startswith("{"):
        return policy_from_json(text)
    return parse_policy(text)
