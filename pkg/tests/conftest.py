from __future__ import annotations

import pytest
from hypothesis import settings, strategies as st

from policydd.model import FieldSchema, Interval, Policy, Rule, parse_policy

settings.register_profile("default", max_examples=150, deadline=None)
settings.load_profile("default")

TWO_RULE_TEXT = """\
fields: x:8 y:8
default: discard
[10,110] [90,190] -> 0
[20,120] [80,180] -> 1
"""


@pytest.fixture
def two_rule():
    return parse_policy(TWO_RULE_TEXT)


@st.composite
def intervals(draw, width):
    maxv = (1 << width) - 1
    lo = draw(st.integers(0, maxv))
    hi = draw(st.integers(lo, maxv))
    return Interval(lo, hi)


@st.composite
def schemas(draw, max_d=3, max_width=4, max_bits=10):
    d = draw(st.integers(1, max_d))
    widths = draw(st.lists(st.integers(1, max_width), min_size=d, max_size=d)
                  .filter(lambda ws: sum(ws) <= max_bits))
    return FieldSchema(tuple(f"f{k}" for k in range(d)), tuple(widths))


@st.composite
def policies(draw, max_n=6, max_d=3, max_width=4, max_bits=10, decisions=(0, 1)):
    schema = draw(schemas(max_d, max_width, max_bits))
    n = draw(st.integers(1, max_n))
    rules = []
    for _ in range(n):
        pred = tuple(draw(intervals(w)) for w in schema.widths)
        rules.append(Rule(pred, draw(st.sampled_from(decisions))))
    default = draw(st.sampled_from(decisions))
    return Policy(schema, tuple(rules), default)


# acceptance criteria report their outcome here; printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
