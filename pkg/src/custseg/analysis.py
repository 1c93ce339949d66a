"""Partition quality and variable importance.

* :func:`partition_condorcet` scores a whole partition: the fraction of
  record pairs that "agree" with it (similar pairs together, dissimilar
  pairs apart), with similarity used as a soft agreement.
* Importance metrics order variables by how strongly they relate to the
  cluster id: chi-square (default), mutual information ("entropy"), a
  per-field Condorcet score, and plain database order.
* :func:`adjusted_rand_index` compares two labelings.

Contingency statistics are accumulated with exact rational arithmetic so
that independent tables score exactly zero.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.stats import rankdata

from .core import (DegenerateClustering, Kind, Record, RecordSetMismatch, Schema)
from .similarity import FieldMatrix, SimilarityParams

CHUNK = 512


class Metric(str, enum.Enum):
    CHI_SQUARE = "chi-square"
    ENTROPY = "entropy"
    CONDORCET = "condorcet"
    DATABASE_ORDER = "database-order"


@dataclass(frozen=True)
class ImportanceEntry:
    field: str
    score: float
    rank: int


@dataclass(frozen=True)
class ImportanceReport:
    metric: Metric
    entries: tuple[ImportanceEntry, ...]

    @property
    def order(self) -> list[str]:
        return [e.field for e in self.entries]

    def score(self, name: str) -> float:
        return next(e.score for e in self.entries if e.field == name)

    def rank(self, name: str) -> int:
        return next(e.rank for e in self.entries if e.field == name)

    def to_csv_rows(self) -> list[list[str]]:
        return [[self.metric.value, e.field, repr(float(e.score)), str(e.rank)]
                for e in self.entries]


IMPORTANCE_HEADER = ["metric", "field", "score", "rank"]


def _report(metric: Metric, names: Sequence[str], scores: Sequence[float]) -> ImportanceReport:
    if not names:
        return ImportanceReport(metric, ())
    scores = [float(s) for s in scores]
    ranks = rankdata([-s for s in scores], method="min").astype(int)
    # stable sort keeps database order among ties
    order = sorted(range(len(names)), key=lambda k: -scores[k])
    return ImportanceReport(metric, tuple(ImportanceEntry(names[k], scores[k], int(ranks[k]))
                                          for k in order))


Assignments = Union[Mapping[str, int], Sequence]


def as_labels(assignment: Assignments) -> dict[str, int]:
    """Accept ``{record_id: cluster_id}`` or a sequence of engine Assignments."""
    if isinstance(assignment, Mapping):
        return dict(assignment)
    return {a.record_id: a.cluster_id for a in assignment}


def labels_for(dataset: Sequence[Record], assignment: Assignments) -> np.ndarray:
    labels = as_labels(assignment)
    try:
        return np.array([labels[r.id] for r in dataset], dtype=np.int64)
    except KeyError as exc:
        raise RecordSetMismatch(f"record {exc.args[0]!r} has no assignment") from None


# -- Condorcet criterion -------------------------------------------------------------

def _pair_agreement(block: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
                    labels: np.ndarray) -> tuple[float, int]:
    """Sum over comparable pairs i<j of s (same cluster) or 1 - s (different)."""
    n = len(labels)
    total = 0.0
    pairs = 0
    cols = np.arange(n)
    for r0 in range(0, n, CHUNK):
        rows = np.arange(r0, min(r0 + CHUNK, n))
        sim, mask = block(rows)
        mask = mask & (cols[None, :] > rows[:, None])
        same = labels[rows][:, None] == labels[None, :]
        agree = np.where(same, sim, 1.0 - sim)
        total += float(agree[mask].sum())
        pairs += int(mask.sum())
    return total, pairs


def condorcet_numerator(fm: FieldMatrix, labels: np.ndarray,
                        dense: Optional[np.ndarray] = None) -> float:
    """Unnormalised partition criterion over all record pairs."""
    def block(rows):
        sim = dense[rows] if dense is not None else fm.block(rows)
        return sim, np.ones_like(sim, dtype=bool)
    return _pair_agreement(block, np.asarray(labels))[0]


def partition_condorcet(dataset: Sequence[Record], assignment: Assignments, schema: Schema,
                        simparams: SimilarityParams) -> float:
    """Condorcet criterion of a partition, normalised by the number of pairs."""
    n = len(dataset)
    if n < 2:
        raise ValueError("partition_condorcet needs at least two records")
    labels = labels_for(dataset, assignment)
    fm = FieldMatrix(dataset, schema, simparams)
    return condorcet_numerator(fm, labels) / (n * (n - 1) / 2)


# -- contingency tables --------------------------------------------------------------

@dataclass(frozen=True)
class ContingencyTable:
    rows: tuple
    cols: tuple
    counts: np.ndarray  # len(rows) x len(cols), integer

    @property
    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def chi_square(self) -> float:
        n = self.total
        if n == 0:
            return 0.0
        rt = [int(x) for x in self.row_totals]
        ct = [int(x) for x in self.col_totals]
        acc = Fraction(0)
        for a, r in enumerate(rt):
            for b, c in enumerate(ct):
                if r == 0 or c == 0:
                    continue
                e = Fraction(r * c, n)
                d = int(self.counts[a, b]) - e
                acc += d * d / e
        return float(acc)

    def mutual_information(self) -> float:
        """Mutual information between row and column variables, in bits."""
        n = self.total
        if n == 0:
            return 0.0
        rt = [int(x) for x in self.row_totals]
        ct = [int(x) for x in self.col_totals]
        acc = 0.0
        for a, r in enumerate(rt):
            for b, c in enumerate(ct):
                o = int(self.counts[a, b])
                if o == 0:
                    continue
                acc += o / n * math.log2(Fraction(o * n, r * c))
        return acc


def _discretize(values: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if not hi > lo:
        return np.zeros(len(values), dtype=np.int64)
    edges = np.linspace(lo, hi, bins + 1)
    return np.clip(np.searchsorted(edges, values, side="right") - 1, 0, bins - 1)


def contingency(dataset: Sequence[Record], assignment: Assignments, schema: Schema,
                field: str, bins: int = 10) -> ContingencyTable:
    """Cross-tabulate a field (binned if continuous) against cluster id; missing values skipped."""
    labels = labels_for(dataset, assignment)
    spec = schema.field(field)
    j = schema.index(field)
    keep = [i for i, r in enumerate(dataset) if r.values[j] is not None]
    clusters = tuple(sorted(set(labels.tolist())))
    col_of = {c: k for k, c in enumerate(clusters)}
    if spec.kind is Kind.CONTINUOUS:
        vals = np.array([dataset[i].values[j] for i in keep], dtype=float)
        levels = _discretize(vals, bins) if len(vals) else np.zeros(0, dtype=np.int64)
        row_keys = tuple(range(int(levels.max()) + 1)) if len(vals) else ()
        row_of = {k: k for k in row_keys}
        level_list = levels.tolist()
    else:
        level_list = [dataset[i].values[j] for i in keep]
        row_keys = tuple(sorted(set(level_list)))
        row_of = {k: a for a, k in enumerate(row_keys)}
    counts = np.zeros((len(row_keys), len(clusters)), dtype=np.int64)
    for lv, i in zip(level_list, keep):
        counts[row_of[lv], col_of[int(labels[i])]] += 1
    return ContingencyTable(row_keys, clusters, counts)


def _require_two_clusters(dataset, assignment):
    labels = labels_for(dataset, assignment)
    if len(set(labels.tolist())) < 2:
        raise DegenerateClustering("importance needs at least two non-empty clusters")


def _table_importance(metric: Metric, stat: str, dataset, assignment, schema, bins):
    _require_two_clusters(dataset, assignment)
    names = [f.name for f in schema.profiled]
    scores = [getattr(contingency(dataset, assignment, schema, name, bins), stat)()
              for name in names]
    return _report(metric, names, scores)


def chi_square_importance(dataset: Sequence[Record], assignment: Assignments, schema: Schema,
                          bins: int = 10) -> ImportanceReport:
    """Chi-square statistic between each variable and the cluster id (default metric)."""
    return _table_importance(Metric.CHI_SQUARE, "chi_square", dataset, assignment, schema, bins)


def entropy_importance(dataset: Sequence[Record], assignment: Assignments, schema: Schema,
                       bins: int = 10) -> ImportanceReport:
    return _table_importance(Metric.ENTROPY, "mutual_information", dataset, assignment,
                             schema, bins)


def condorcet_importance(dataset: Sequence[Record], assignment: Assignments, schema: Schema,
                         simparams: SimilarityParams) -> ImportanceReport:
    """Partition criterion restricted to one field at a time (comparable pairs only)."""
    _require_two_clusters(dataset, assignment)
    labels = labels_for(dataset, assignment)
    names, scores = [], []
    for spec in schema.profiled:
        fm = FieldMatrix(dataset, schema, simparams, fields=[spec])
        total, pairs = _pair_agreement(lambda rows: fm.field_block(0, rows), labels)
        names.append(spec.name)
        scores.append(total / pairs if pairs else 0.0)
    return _report(Metric.CONDORCET, names, scores)


def database_order(schema: Schema) -> ImportanceReport:
    names = [f.name for f in schema.profiled]
    return ImportanceReport(Metric.DATABASE_ORDER,
                            tuple(ImportanceEntry(nm, 0.0, k + 1) for k, nm in enumerate(names)))


def importance(metric: Union[Metric, str], dataset, assignment, schema: Schema,
               simparams: Optional[SimilarityParams] = None, bins: int = 10) -> ImportanceReport:
    metric = Metric(metric)
    if metric is Metric.CHI_SQUARE:
        return chi_square_importance(dataset, assignment, schema, bins)
    if metric is Metric.ENTROPY:
        return entropy_importance(dataset, assignment, schema, bins)
    if metric is Metric.CONDORCET:
        if simparams is None:
            raise ValueError("condorcet importance needs similarity parameters")
        return condorcet_importance(dataset, assignment, schema, simparams)
    return database_order(schema)


# -- adjusted Rand index ----------------------------------------------------------

def _comb2(k: int) -> int:
    return k * (k - 1) // 2


def adjusted_rand_index(labels_a: Mapping, labels_b: Mapping) -> float:
    """Chance-corrected pair-counting agreement between two labelings of the same records."""
    if set(labels_a) != set(labels_b):
        raise RecordSetMismatch("labelings cover different record sets")
    n = len(labels_a)
    if n < 2:
        raise ValueError("adjusted_rand_index needs at least two records")
    keys = list(labels_a)
    cells = Counter((labels_a[k], labels_b[k]) for k in keys)
    index = sum(_comb2(v) for v in cells.values())
    sum_a = sum(_comb2(v) for v in Counter(labels_a[k] for k in keys).values())
    sum_b = sum(_comb2(v) for v in Counter(labels_b[k] for k in keys).values())
    expected = Fraction(sum_a * sum_b, _comb2(n))
    max_index = Fraction(sum_a + sum_b, 2)
    if max_index == expected:
        return 1.0 if index == max_index else 0.0
    return float((index - expected) / (max_index - expected))
