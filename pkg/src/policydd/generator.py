"""Random policies with controlled singleton / all-match proportions.

Two cell models are supported:

``cell``
    every (rule, field) cell is drawn independently: All with probability
    ``allprob``, otherwise a singleton with probability
    ``oneprob / (1 - allprob)``, otherwise a proper interval. The
    unconditional singleton rate is therefore ``oneprob``.
``rule``
    each rule draws one kind (all-match, singleton, ordinary) with the same
    probabilities and uses it in every field. Policies from this model have
    a uniform-kind profile, which is what ``g_bound`` describes.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace

from .bounds import worst_case_policy
from .errors import ValidationError
from .model import ACCEPT, DISCARD, FieldSchema, Interval, Policy, Rule

CELL_MODELS = ("cell", "rule")


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    schema: FieldSchema
    oneprob: float = 0.0
    allprob: float = 0.0
    accept_fraction: float = 0.5
    seed: int = 0
    cell_model: str = "cell"
    default_decision: int = DISCARD

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("generator needs n >= 1")
        for name in ("oneprob", "allprob", "accept_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} outside [0, 1]")
        if self.oneprob + self.allprob > 1.0 + 1e-12:
            raise ValidationError("oneprob + allprob must not exceed 1")
        if self.cell_model not in CELL_MODELS:
            raise ValidationError(f"cell_model must be one of {CELL_MODELS}")
        if self.oneprob + self.allprob < 1.0 - 1e-12 and min(self.schema.widths) < 2:
            raise ValidationError(
                "1-bit fields have no proper (non-singleton, non-All) intervals; "
                "use oneprob + allprob = 1 or wider fields"
            )


def derive_seed(seed: int, *path) -> int:
    """Stable 64-bit child seed, used to fan one seed out over a batch."""
    h = hashlib.blake2b(repr((seed,) + path).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def _proper_interval(rng: random.Random, maxv: int) -> Interval:
    while True:
        lo = rng.randint(0, maxv)
        hi = rng.randint(lo, maxv)
        if lo != hi and not (lo == 0 and hi == maxv):
            return Interval(lo, hi)


def _cell(rng, kind, maxv):
    if kind == "all":
        return Interval(0, maxv)
    if kind == "one":
        v = rng.randint(0, maxv)
        return Interval(v, v)
    return _proper_interval(rng, maxv)


def _kind(rng, cfg):
    r = rng.random()
    if r < cfg.allprob:
        return "all"
    # conditional singleton rate so the unconditional one equals oneprob
    rest = 1.0 - cfg.allprob
    if rest > 0 and rng.random() < cfg.oneprob / rest:
        return "one"
    return "ordinary"


def generate_policy(config: GeneratorConfig) -> Policy:
    rng = random.Random(config.seed)
    schema = config.schema
    maxes = [schema.max_value(k) for k in range(schema.d)]
    rules = []
    for _ in range(config.n):
        if config.cell_model == "rule":
            kind = _kind(rng, config)
            pred = tuple(_cell(rng, kind, m) for m in maxes)
        else:
            pred = tuple(_cell(rng, _kind(rng, config), m) for m in maxes)
        decision = ACCEPT if rng.random() < config.accept_fraction else DISCARD
        rules.append(Rule(pred, decision))
    return Policy(schema, tuple(rules), config.default_decision)


def generate_batch(config: GeneratorConfig, count: int) -> list[tuple[int, Policy]]:
    """``count`` policies with seeds derived from ``config.seed``."""
    out = []
    for i in range(count):
        seed = derive_seed(config.seed, i)
        out.append((seed, generate_policy(replace(config, seed=seed))))
    return out


def generate_worst_case(n: int, d: int, width: int | None = None) -> Policy:
    return worst_case_policy(n, d, width)
