"""Shared fixtures and brute-force oracles.

The oracles here deliberately avoid the vectorised code paths: pair sums use
plain loops over ``record_similarity`` and partitions are enumerated
exhaustively.
"""
import itertools
import math

import numpy as np
import pytest

from custseg.core import RETAIL_SCHEMA, FieldSpec, Kind, Record, Role, Schema, make_record
from custseg.similarity import record_similarity

# Cluster id -> (customers, total profit, total revenue) from the retail case study table.
TABLE1 = {
    3: (486, 117256.59, 563643.71),
    1: (5977, 85812.08, 382009.43),
    2: (529, 82169.06, 379789.03),
    0: (902, 51561.46, 263656.00),
}
TABLE1_COUNT_PCT = {3: 6.16, 1: 75.72, 2: 6.70, 0: 11.43}
TABLE1_REVENUE_PCT = {3: 35.47, 1: 24.04, 2: 23.90, 0: 16.59}


def _split_cents(total: float, n: int) -> list[float]:
    cents = round(total * 100)
    base, extra = divmod(cents, n)
    return [(base + (1 if k < extra else 0)) / 100 for k in range(n)]


def table1_fixture():
    """Records and assignment whose per-cluster sums equal the table totals."""
    records, labels = [], {}
    k = 0
    for cid, (count, profit, revenue) in TABLE1.items():
        for p, r in zip(_split_cents(profit, count), _split_cents(revenue, count)):
            k += 1
            rec = make_record(RETAIL_SCHEMA, customer_id=f"T{k:05d}", recency=float(k % 97),
                              total_profit=p, total_revenue=r, top_revenue_department="Grocery")
            records.append(rec)
            labels[rec.id] = cid
    return records, labels


@pytest.fixture(scope="session")
def table1():
    return table1_fixture()


@pytest.fixture
def retail_schema():
    return RETAIL_SCHEMA


def one_field_schema(scale=None, kind=Kind.CONTINUOUS):
    return Schema((FieldSpec("id", Kind.CATEGORICAL, Role.IDENTIFIER),
                   FieldSpec("x", kind, Role.ACTIVE, 1.0, scale)))


def records_1d(values, schema=None):
    schema = schema or one_field_schema()
    return [Record(f"r{i}", (f"r{i}", None if v is None else float(v)))
            for i, v in enumerate(values)]


def mixed_schema():
    return Schema((FieldSpec("id", Kind.CATEGORICAL, Role.IDENTIFIER),
                   FieldSpec("a", Kind.CONTINUOUS, Role.ACTIVE),
                   FieldSpec("b", Kind.CONTINUOUS, Role.ACTIVE, 2.0),
                   FieldSpec("c", Kind.CATEGORICAL, Role.ACTIVE)))


def random_mixed_records(rng: np.random.Generator, n: int, schema=None):
    """Clumpy random data: a few random centres plus noise, and a 3-level category."""
    centres = rng.uniform(0, 100, size=(rng.integers(1, 4), 2))
    recs = []
    for i in range(n):
        c = centres[rng.integers(len(centres))]
        a, b = c + rng.normal(0, rng.uniform(1, 20), 2)
        recs.append(Record(f"r{i}", (f"r{i}", float(a), float(b), "pqr"[rng.integers(3)])))
    return recs


# -- oracles --------------------------------------------------------------------------

def brute_criterion(records, labels, schema, simparams) -> float:
    """Pair-by-pair partition criterion using the scalar similarity."""
    total = 0.0
    pairs = 0
    for i, j in itertools.combinations(range(len(records)), 2):
        s = record_similarity(records[i], records[j], schema, simparams)
        total += s if labels[i] == labels[j] else 1.0 - s
        pairs += 1
    return total / pairs


def partitions(n: int, max_parts: int):
    """All set partitions of range(n) into at most ``max_parts`` blocks (restricted growth)."""
    def rec(prefix, used):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for b in range(min(used + 1, max_parts)):
            yield from rec(prefix + [b], max(used, b + 1))
    yield from rec([0], 1) if n else iter([()])


def best_partition(sim: np.ndarray, max_parts: int):
    """Exhaustive maximiser of the partition criterion given a similarity matrix."""
    n = len(sim)
    iu = np.triu_indices(n, 1)
    s = sim[iu]
    best, arg = -math.inf, None
    for part in partitions(n, max_parts):
        lab = np.asarray(part)
        same = lab[iu[0]] == lab[iu[1]]
        val = float(np.where(same, s, 1.0 - s).sum()) / len(s)
        if val > best + 1e-15:
            best, arg = val, part
    return best, arg


def synth_records(spec):
    """Generate ``spec`` and coerce its rows; returns (records, schema, truth)."""
    from custseg.core import coerce_record
    from custseg.synth import generate
    data = generate(spec)
    schema = spec.schema()
    return [coerce_record(r, schema) for r in data.rows], schema, data.truth


# -- acceptance reporting ----------------------------------------------------------

ACCEPTANCE: dict[int, str] = {}


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
