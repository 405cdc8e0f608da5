"""Synthetic examinee populations: raw health attributes, item bits, responses.

Generation is a single seeded stream: per record, every attribute is sampled
in declaration order, binarized through the threshold table into the item
vector, and a response vector plus improvement bit are drawn. Records with
identical (X, Y, z) triples collapse into one weighted examinee type.

The shipped attribute set models Japanese health-checkup screening data
(blood glucose, HbA1c, blood pressure, urine protein, eGFR, visit and
treatment history). Response and improvement probabilities are configurable
defaults, not estimates from any survey.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (
    ExamineeType,
    InputError,
    ItemUniverse,
    MethodUniverse,
    Population,
)

RESAMPLE_CAP = 1_000_000


class GenerationError(RuntimeError):
    """Raised when sampling cannot produce a value (signals a bad attribute spec)."""


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, sd) restricted to [lo, hi] by rejection."""

    name: str
    lo: float
    hi: float
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise InputError(f"{self.name}: lo must be < hi")
        if not self.sd > 0:
            raise InputError(f"{self.name}: sd must be > 0")


@dataclass(frozen=True)
class Categorical:
    """Finite value table sampled by inverse CDF; covers Bernoulli bits as {0,1}."""

    name: str
    table: tuple[tuple[float, float], ...]  # (value, probability) rows

    def __post_init__(self) -> None:
        total = sum(p for _, p in self.table)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"{self.name}: probabilities sum to {total}, expected 1")
        if any(not 0.0 <= p <= 1.0 for _, p in self.table):
            raise InputError(f"{self.name}: probabilities must lie in [0, 1]")

    @staticmethod
    def bernoulli(name: str, p_one: float) -> "Categorical":
        return Categorical(name, ((0.0, 1.0 - p_one), (1.0, p_one)))


AttributeSpec = TruncatedNormal | Categorical


@dataclass(frozen=True)
class RawRecord:
    """One sampled examinee before binarization."""

    values: Mapping[str, float]

    def __getitem__(self, attr: str) -> float:
        try:
            return self.values[attr]
        except KeyError:
            raise InputError(f"raw record is missing attribute {attr!r}") from None


@dataclass(frozen=True)
class Predicate:
    """Single-item test over raw attributes.

    Ops: ``ge`` (value >= threshold), ``lt`` (value < threshold), ``eq``
    (value == threshold), ``band`` (threshold <= value < upper), ``bit``
    (the attribute is already a 0/1 draw).
    """

    op: str
    attr: str
    value: float = 0.0
    upper: float = 0.0

    def __post_init__(self) -> None:
        if self.op not in ("ge", "lt", "eq", "band", "bit"):
            raise InputError(f"unknown predicate op {self.op!r}")

    def evaluate(self, raw: RawRecord) -> int:
        v = raw[self.attr]
        if self.op == "ge":
            return int(v >= self.value)
        if self.op == "lt":
            return int(v < self.value)
        if self.op == "eq":
            return int(v == self.value)
        if self.op == "band":
            return int(self.value <= v < self.upper)
        return int(v)


@dataclass(frozen=True)
class ThresholdTable:
    """Ordered item-id/predicate pairs; the order is the item-vector order."""

    entries: tuple[tuple[int, Predicate], ...]

    def __post_init__(self) -> None:
        ids = [i for i, _ in self.entries]
        if len(set(ids)) != len(ids):
            raise InputError("threshold table defines an item more than once")

    @property
    def item_ids(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    def validate_against(self, items: ItemUniverse) -> None:
        if self.item_ids != items.items:
            raise InputError("threshold table does not cover the item universe exactly once")


@dataclass(frozen=True)
class GenConfig:
    """Record count, seed, and the response/improvement probabilities."""

    n: int
    seed: int
    methods: MethodUniverse = field(default_factory=lambda: default_method_universe())
    response_probs: Mapping[int, float] = field(
        default_factory=lambda: dict(DEFAULT_RESPONSE_PROBS)
    )
    improvement_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.n < 0:
            raise InputError("record count must be >= 0")
        if not 0.0 <= self.improvement_prob <= 1.0:
            raise InputError("improvement probability must lie in [0, 1]")
        if self.response_probs.get(self.methods.methods[0], 0.0) != 0.0:
            raise InputError("the no-suggestion method always has response probability 0")
        for m, p in self.response_probs.items():
            if m not in self.methods:
                raise InputError(f"response probability for unknown method {m}")
            if not 0.0 <= p <= 1.0:
                raise InputError(f"response probability for method {m} must lie in [0, 1]")


def sample_raw(specs: Iterable[AttributeSpec], rng: random.Random) -> RawRecord:
    """Draw one raw record, consuming the stream in spec declaration order."""
    values: dict[str, float] = {}
    for spec in specs:
        if isinstance(spec, TruncatedNormal):
            for _ in range(RESAMPLE_CAP):
                v = rng.gauss(spec.mean, spec.sd)
                if spec.lo <= v <= spec.hi:
                    break
            else:
                raise GenerationError(
                    f"{spec.name}: exceeded {RESAMPLE_CAP} rejection resamples"
                )
            values[spec.name] = v
        else:
            u = rng.random()
            acc = 0.0
            chosen = spec.table[-1][0]
            for value, p in spec.table:
                acc += p
                if u < acc:
                    chosen = value
                    break
            values[spec.name] = chosen
    return RawRecord(values=values)


def binarize(raw: RawRecord, tbl: ThresholdTable) -> tuple[int, ...]:
    """Evaluate every item predicate on one raw record."""
    return tuple(pred.evaluate(raw) for _, pred in tbl.entries)


def sample_response(cfg: GenConfig, rng: random.Random) -> tuple[tuple[int, ...], int]:
    """Draw the response vector (method 0 pinned to 0) and the improvement bit."""
    y = [0] * len(cfg.methods)
    for idx, m in enumerate(cfg.methods.methods):
        if idx == 0:
            continue
        p = cfg.response_probs.get(m, 0.0)
        y[idx] = int(rng.random() < p)
    z = int(rng.random() < cfg.improvement_prob)
    return tuple(y), z


def generate_population(
    cfg: GenConfig,
    specs: Iterable[AttributeSpec] | None = None,
    tbl: ThresholdTable | None = None,
) -> Population:
    """Draw ``cfg.n`` records and aggregate identical (X, Y, z) triples.

    Weights count the collapsed records, so they always sum to ``cfg.n``.
    Type ids follow first occurrence; the whole result is a pure function of
    the seed.
    """
    specs = tuple(specs) if specs is not None else default_attribute_specs()
    tbl = tbl if tbl is not None else default_threshold_table()
    items = ItemUniverse(tbl.item_ids)
    tbl.validate_against(items)

    rng = random.Random(cfg.seed)
    weights: dict[tuple[tuple[int, ...], tuple[int, ...], int], int] = {}
    for _ in range(cfg.n):
        raw = sample_raw(specs, rng)
        x = binarize(raw, tbl)
        y, z = sample_response(cfg, rng)
        key = (x, y, z)
        weights[key] = weights.get(key, 0) + 1

    types = tuple(
        ExamineeType(id=i, weight=w, x=x, y=y, z=z)
        for i, ((x, y, z), w) in enumerate(weights.items())
    )
    return Population(items=items, methods=cfg.methods, types=types)


def default_item_universe() -> ItemUniverse:
    return ItemUniverse(tuple(range(49)))


def default_method_universe() -> MethodUniverse:
    """No suggestion, mail, telephone, mail and telephone."""
    return MethodUniverse(methods=(0, 1, 2, 3), costs=(0, 200, 500, 700))


DEFAULT_RESPONSE_PROBS: tuple[tuple[int, float], ...] = ((1, 0.3), (2, 0.5), (3, 0.6))


def default_attribute_specs() -> tuple[AttributeSpec, ...]:
    """The shipped screening attributes with their marginal distributions."""
    return (
        Categorical.bernoulli("health_checkup_history", 0.551),
        TruncatedNormal("fasting_blood_glucose", 20, 600, 97.78, 21.8),
        Categorical(
            "casual_blood_glucose",
            ((120, 0.889), (130, 0.039), (170, 0.052), (210, 0.020)),
        ),
        TruncatedNormal("hba1c", 3, 20, 5.19, 0.73),
        TruncatedNormal("diastolic_bp", 30, 150, 75.45, 12.15),
        TruncatedNormal("systolic_bp", 60, 300, 120.63, 17.11),
        Categorical(
            "urine_protein",
            ((1, 0.853), (2, 0.100), (3, 0.034), (4, 0.010), (5, 0.003)),
        ),
        TruncatedNormal("egfr", 1, 500, 79.56, 14.54),
        Categorical.bernoulli("diabetes_medical_history", 0.170),
        Categorical.bernoulli("diabetes_treatment_ongoing", 0.112),
        Categorical.bernoulli("diabetes_visit_this_year", 0.112),
        Categorical.bernoulli("diabetes_visit_previous_year", 0.112),
        Categorical.bernoulli("diabetes_visit_two_years_back", 0.112),
        Categorical.bernoulli("diabetes_no_visit_after_checkup", 0.888),
        Categorical.bernoulli("diabetes_treatment_interruption", 0.058),
        Categorical.bernoulli("diabetes_medication", 0.081),
        Categorical.bernoulli("hypertension_visit_this_year", 0.132),
        Categorical.bernoulli("hypertension_visit_previous_year", 0.132),
        Categorical.bernoulli("hypertension_visit_after_checkup", 0.132),
        Categorical.bernoulli("hypertension_treatment_interruption", 0.164),
        Categorical.bernoulli("medical_institution_visit", 0.294),
    )


def default_threshold_table() -> ThresholdTable:
    """Item definitions for the 49-item universe."""
    ge = lambda attr, v: Predicate("ge", attr, v)
    lt = lambda attr, v: Predicate("lt", attr, v)
    eq = lambda attr, v: Predicate("eq", attr, v)
    band = lambda attr, lo, hi: Predicate("band", attr, lo, hi)
    bit = lambda attr: Predicate("bit", attr)

    entries: list[tuple[int, Predicate]] = [
        (0, bit("health_checkup_history")),
        (1, ge("fasting_blood_glucose", 126)),
        (2, ge("fasting_blood_glucose", 130)),
        (3, ge("casual_blood_glucose", 126)),
        (4, ge("casual_blood_glucose", 200)),
        (5, ge("hba1c", 5.6)),
        (6, ge("hba1c", 6.0)),
        (7, ge("hba1c", 6.2)),
        (8, ge("hba1c", 6.5)),
        (9, ge("hba1c", 7.0)),
        (10, ge("hba1c", 8.0)),
        (11, band("hba1c", 6.0, 6.5)),
        (12, ge("diastolic_bp", 90)),
        (13, ge("diastolic_bp", 100)),
        (14, ge("diastolic_bp", 160)),
        (15, ge("systolic_bp", 130)),
        (16, ge("systolic_bp", 140)),
        (17, ge("systolic_bp", 160)),
        (18, eq("urine_protein", 1)),
        (19, eq("urine_protein", 2)),
        (20, eq("urine_protein", 3)),
        (21, ge("urine_protein", 1)),
        (22, ge("urine_protein", 2)),
        (23, ge("urine_protein", 3)),
        (24, ge("urine_protein", 4)),
        (25, lt("egfr", 30)),
        (26, lt("egfr", 45)),
        (27, lt("egfr", 50)),
        (28, lt("egfr", 60)),
        (29, lt("egfr", 90)),
        (30, ge("egfr", 30)),
        (31, band("egfr", 30, 45)),
        (32, band("egfr", 30, 60)),
        (33, band("egfr", 30, 90)),
        (34, band("egfr", 45, 60)),
        (35, band("egfr", 60, 90)),
        (36, bit("diabetes_visit_this_year")),
        (37, bit("diabetes_treatment_ongoing")),
        (38, bit("diabetes_visit_previous_year")),
        (39, bit("diabetes_visit_two_years_back")),
        (40, bit("diabetes_no_visit_after_checkup")),
        (41, bit("hypertension_visit_this_year")),
        (42, bit("hypertension_visit_previous_year")),
        (43, bit("hypertension_visit_after_checkup")),
        (44, bit("diabetes_medication")),
        (45, bit("medical_institution_visit")),
        (46, bit("diabetes_medical_history")),
        (47, bit("diabetes_treatment_interruption")),
        (48, bit("hypertension_treatment_interruption")),
    ]
    return ThresholdTable(entries=tuple(entries))


def default_gen_config(n: int, seed: int) -> GenConfig:
    return GenConfig(n=n, seed=seed)
