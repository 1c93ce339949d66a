"""Demographic clustering: multi-pass greedy maximisation of the Condorcet criterion.

Pass 1 walks the records in input order, founding a new cluster whenever a
record is not similar enough to any existing one (and capacity remains),
otherwise joining the cluster with the largest summed vote. Later passes
only reassign records; each move changes the global criterion by the vote
difference, so the criterion never decreases after pass 1.

Two scoring modes are available. ``Mode.EXACT`` compares a record to every
member of a cluster. ``Mode.HISTOGRAM`` compares it to per-field binned
distributions, which is what lets the run scale to large files.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .analysis import condorcet_numerator
from .core import (EmptyCluster, EmptyDataset, Kind, Mode, Record, Role, RunParams,
                   Schema, check_schema)
from .similarity import (UNCERTAIN, FieldMatrix, SimilarityParams, cauchy,
                         effective_scale, record_similarity, vote)

log = logging.getLogger(__name__)

#: Above this many records Exact mode computes similarity rows on demand
#: instead of holding the full n x n matrix.
DENSE_LIMIT = 4000


class DegenerateFieldWarning(UserWarning):
    """A continuous active field has zero variance; its base scale falls back to 1.0."""


@dataclass
class ContinuousStats:
    """Binned distribution of a continuous field inside one cluster.

    ``counts`` has ``len(edges) + 1`` slots: an underflow bin, the regular
    bins, and an overflow bin.
    """

    edges: np.ndarray
    counts: np.ndarray
    sum: float = 0.0
    sum_sq: float = 0.0
    missing: int = 0

    @property
    def count(self) -> int:
        return int(self.counts.sum())

    def mean(self) -> float:
        return self.sum / self.count if self.count else math.nan


@dataclass
class CategoricalStats:
    freq: dict[str, int] = field(default_factory=dict)
    missing: int = 0

    @property
    def count(self) -> int:
        return sum(self.freq.values())


FieldStats = Union[ContinuousStats, CategoricalStats]


@dataclass
class ClusterStats:
    cluster_id: int
    size: int
    stats: dict[str, FieldStats]
    members: Optional[list[Record]] = None  # Exact mode only

    @property
    def member_ids(self) -> Optional[list[str]]:
        return None if self.members is None else [r.id for r in self.members]


@dataclass(frozen=True)
class FieldRange:
    min: float
    max: float
    sd: float
    base_scale: float


@dataclass
class ClusterModel:
    schema: Schema
    params: RunParams
    similarity: SimilarityParams
    ranges: dict[str, FieldRange]
    edges: dict[str, np.ndarray]
    clusters: list[ClusterStats] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def display_order(self) -> list[int]:
        """Non-empty cluster ids, largest first (ties: lower id first)."""
        live = [c for c in self.clusters if c.size > 0]
        return [c.cluster_id for c in sorted(live, key=lambda c: (-c.size, c.cluster_id))]

    @property
    def sizes(self) -> list[int]:
        return [c.size for c in self.clusters]

    def cluster(self, cluster_id: int) -> ClusterStats:
        return self.clusters[cluster_id]


@dataclass(frozen=True)
class Assignment:
    record_id: str
    cluster_id: int
    condorcet_value: float
    confidence: float


@dataclass(frozen=True)
class PassTrace:
    pass_no: int
    moves: int
    sizes: tuple[int, ...]
    criterion: Optional[float] = None

    def to_line(self) -> str:
        crit = "" if self.criterion is None else repr(float(self.criterion))
        sizes = ",".join(str(s) for s in self.sizes)
        return f"pass={self.pass_no}\tmoves={self.moves}\tsizes={sizes}\tcriterion={crit}"

    @classmethod
    def from_line(cls, line: str) -> "PassTrace":
        kv = dict(part.split("=", 1) for part in line.rstrip("\n").split("\t"))
        sizes = tuple(int(s) for s in kv["sizes"].split(",") if s)
        crit = float(kv["criterion"]) if kv["criterion"] else None
        return cls(int(kv["pass"]), int(kv["moves"]), sizes, crit)


class RunTrace(list):
    """Per-pass log of a run (a list of :class:`PassTrace`)."""

    @property
    def criteria(self) -> list[Optional[float]]:
        return [p.criterion for p in self]

    def to_text(self) -> str:
        return "".join(p.to_line() + "\n" for p in self)

    @classmethod
    def from_text(cls, text: str) -> "RunTrace":
        return cls(PassTrace.from_line(line) for line in text.splitlines() if line.strip())


class RunResult(NamedTuple):
    model: ClusterModel
    assignments: list[Assignment]
    trace: RunTrace


# -- initialisation ------------------------------------------------------------

def _column(dataset: Sequence[Record], j: int) -> np.ndarray:
    return np.array([r.values[j] for r in dataset if r.values[j] is not None], dtype=float)


def histogram_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    """Equal-width edges over [lo, hi]; a zero-width range gets unit-wide bins centred on it."""
    if not hi > lo:
        # the constant value becomes the midpoint of bin bins // 2
        w = 1.0 / bins
        return lo + (np.arange(bins + 1) - (bins // 2 + 0.5)) * w
    return np.linspace(lo, hi, bins + 1)


def bin_index(edges: np.ndarray, x) -> np.ndarray:
    """Slot of each value: 0 underflow, 1..bins regular, bins + 1 overflow."""
    x = np.asarray(x, dtype=float)
    bins = len(edges) - 1
    idx = np.searchsorted(edges, x, side="right")
    idx = np.where(x == edges[-1], bins, idx)
    return np.where(x > edges[-1], bins + 1, idx)


def representatives(edges: np.ndarray) -> np.ndarray:
    """Value standing in for each slot: bin midpoints, outer edges for overflow slots."""
    mids = 0.5 * (edges[:-1] + edges[1:])
    return np.concatenate([[edges[0]], mids, [edges[-1]]])


def init_model(dataset: Sequence[Record], schema: Schema,
               params: RunParams) -> tuple[ClusterModel, SimilarityParams]:
    """Compute field ranges, default scales and histogram edges for a run."""
    check_schema(schema)
    if len(dataset) == 0:
        raise EmptyDataset()
    ranges: dict[str, FieldRange] = {}
    edges: dict[str, np.ndarray] = {}
    scales: dict[str, float] = {}
    notes: list[str] = []
    for spec in schema.profiled:
        if spec.kind is not Kind.CONTINUOUS:
            continue
        col = _column(dataset, schema.index(spec.name))
        if col.size:
            lo, hi, sd = float(col.min()), float(col.max()), float(col.std())
        else:
            lo, hi, sd = 0.0, 0.0, 0.0
        if spec.similarity_scale is not None:
            base = float(spec.similarity_scale)
        elif sd > 0:
            base = sd / 2.0
        else:
            base = 1.0
            if spec.role is Role.ACTIVE:
                msg = f"DegenerateField({spec.name}): zero variance, base scale set to 1.0"
                notes.append(msg)
                warnings.warn(msg, DegenerateFieldWarning, stacklevel=2)
        ranges[spec.name] = FieldRange(lo, hi, sd, base)
        edges[spec.name] = histogram_edges(lo, hi, params.histogram_bins)
        scales[spec.name] = effective_scale(base, params.accuracy)
    simparams = SimilarityParams(params.accuracy, scales)
    model = ClusterModel(schema, params, simparams, ranges, edges, warnings=notes)
    return model, simparams


# -- scoring against a frozen model -------------------------------------------

def _expected_field_similarity(model: ClusterModel, spec, st: FieldStats, value,
                               drop_value: bool) -> Optional[float]:
    """Mean similarity of ``value`` to the field distribution ``st`` (None if not comparable)."""
    if spec.kind is Kind.CONTINUOUS:
        counts = st.counts.astype(float)
        if drop_value:
            counts[int(bin_index(st.edges, value))] -= 1
        total = counts.sum()
        if total <= 0:
            return None
        reps = representatives(st.edges)
        return float(counts @ cauchy(value - reps, model.similarity.scale(spec.name)) / total)
    total = st.count - (1 if drop_value else 0)
    if total <= 0:
        return None
    hits = st.freq.get(value, 0) - (1 if drop_value else 0)
    return hits / total


def score_record(model: ClusterModel, cluster: ClusterStats, record: Record,
                 exclude_self: bool = False) -> tuple[float, float]:
    """Return ``(sum_vote, mean_similarity)`` of ``record`` against ``cluster``.

    With ``exclude_self`` the record is assumed to be a member and its own
    contribution is removed first.
    """
    size = cluster.size - (1 if exclude_self else 0)
    if size <= 0:
        raise EmptyCluster(f"cluster {cluster.cluster_id} has no members to score against")
    schema = model.schema
    if model.params.mode is Mode.EXACT:
        members = cluster.members
        if exclude_self:
            k = next(i for i, m in enumerate(members) if m.id == record.id)
            members = members[:k] + members[k + 1:]
        sims = np.array([record_similarity(record, m, schema, model.similarity) for m in members])
        return float(vote(sims).sum()), float(sims.mean())

    num = den = 0.0
    for spec in schema.active:
        value = record.values[schema.index(spec.name)]
        if value is None:
            continue
        st = cluster.stats[spec.name]
        e = _expected_field_similarity(model, spec, st, value, exclude_self)
        if e is None:
            continue
        num += spec.weight * e
        den += spec.weight
    mean = num / den if den > 0 else UNCERTAIN
    return size * vote(mean), mean


def condorcet_value(record: Record, own_cluster: ClusterStats, model: ClusterModel) -> float:
    """Mean similarity of a member to the rest of its cluster; 1.0 for a singleton."""
    if own_cluster.size <= 1:
        return 1.0
    return score_record(model, own_cluster, record, exclude_self=True)[1]


def confidence(scores: Sequence[float]) -> float:
    """Margin between the best and runner-up mean similarity, mapped into [0, 1]."""
    if len(scores) == 0:
        raise ValueError("confidence needs at least one cluster score")
    ordered = sorted(scores, reverse=True)
    if len(ordered) == 1:
        return float(min(max(ordered[0], 0.0), 1.0))
    c = (ordered[0] - ordered[1] + 1.0) / 2.0
    return float(min(max(c, 0.0), 1.0))


# -- run-time scorers ------------------------------------------------------------

class _Scorer:
    """Incremental cluster state for one run. Records are addressed by position."""

    def __init__(self, n: int, capacity: int):
        self.labels = np.full(n, -1, dtype=np.int64)
        self.sizes = np.zeros(capacity, dtype=np.int64)

    def add(self, i: int, c: int):
        self.labels[i] = c
        self.sizes[c] += 1

    def remove(self, i: int) -> int:
        c = int(self.labels[i])
        self.labels[i] = -1
        self.sizes[c] -= 1
        return c

    def score(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Sum votes and mean similarities of unassigned record ``i`` to every slot.

        Empty slots get sum vote 0 and mean NaN.
        """
        raise NotImplementedError


class _ExactScorer(_Scorer):
    def __init__(self, fm: FieldMatrix, capacity: int):
        super().__init__(fm.n, capacity)
        self.fm = fm
        self.dense = fm.matrix() if fm.n <= DENSE_LIMIT else None

    def row(self, i: int) -> np.ndarray:
        return self.dense[i] if self.dense is not None else self.fm.row(i)

    def score(self, i):
        row = self.row(i)
        live = self.labels >= 0
        sums = np.bincount(self.labels[live], weights=row[live], minlength=len(self.sizes))
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(self.sizes > 0, sums / self.sizes, np.nan)
        return 2.0 * sums - self.sizes, mean

    def criterion(self) -> float:
        n = self.fm.n
        if n < 2:
            return 1.0
        num = condorcet_numerator(self.fm, self.labels, dense=self.dense)
        return num / (n * (n - 1) / 2)


class _HistogramScorer(_Scorer):
    def __init__(self, fm: FieldMatrix, model: ClusterModel, capacity: int):
        super().__init__(fm.n, capacity)
        self.weights = fm.weights
        self.slots: list[np.ndarray] = []   # slot of each record, -1 if missing
        self.kernels: list[Optional[np.ndarray]] = []  # similarity to each slot (continuous)
        self.counts: list[np.ndarray] = []
        for col, spec, tau in zip(fm.columns, fm.fields, fm.scales):
            if tau is None:
                slots = col
                nslots = int(col.max()) + 1 if col.size and col.max() >= 0 else 1
                self.kernels.append(None)
            else:
                missing = np.isnan(col)
                edges = model.edges[spec.name]
                slots = np.where(missing, -1, bin_index(edges, np.where(missing, edges[0], col)))
                reps = representatives(edges)
                kern = cauchy(np.where(missing, 0.0, col)[:, None] - reps[None, :], tau)
                nslots = len(reps)
                self.kernels.append(kern)
            self.slots.append(slots.astype(np.int64))
            self.counts.append(np.zeros((capacity, nslots)))

    def add(self, i, c):
        super().add(i, c)
        for slots, counts in zip(self.slots, self.counts):
            if slots[i] >= 0:
                counts[c, slots[i]] += 1

    def remove(self, i):
        c = super().remove(i)
        for slots, counts in zip(self.slots, self.counts):
            if slots[i] >= 0:
                counts[c, slots[i]] -= 1
        return c

    def score(self, i):
        cap = len(self.sizes)
        num = np.zeros(cap)
        den = np.zeros(cap)
        for w, slots, kern, counts in zip(self.weights, self.slots, self.kernels, self.counts):
            s = slots[i]
            if s < 0:
                continue
            total = counts.sum(axis=1)
            ok = total > 0
            hits = counts[:, s] if kern is None else counts @ kern[i]
            num[ok] += w * hits[ok] / total[ok]
            den[ok] += w
        mean = np.full(cap, UNCERTAIN)
        np.divide(num, den, out=mean, where=den > 0)
        live = self.sizes > 0
        mean = np.where(live, mean, np.nan)
        sum_vote = np.where(live, self.sizes * (2.0 * np.nan_to_num(mean) - 1.0), 0.0)
        return sum_vote, mean


def _argmax_first(values: np.ndarray, upto: int) -> int:
    return int(np.argmax(values[:upto]))


# -- the run -------------------------------------------------------------------------

def _build_stats(model: ClusterModel, dataset: Sequence[Record], labels: np.ndarray,
                 n_clusters: int) -> list[ClusterStats]:
    schema = model.schema
    nslots = model.params.histogram_bins + 2
    out = []
    for c in range(n_clusters):
        idx = np.flatnonzero(labels == c)
        members = [dataset[i] for i in idx]
        stats: dict[str, FieldStats] = {}
        for spec in schema.profiled:
            j = schema.index(spec.name)
            vals = [r.values[j] for r in members]
            present = [v for v in vals if v is not None]
            missing = len(vals) - len(present)
            if spec.kind is Kind.CONTINUOUS:
                edges = model.edges[spec.name]
                arr = np.asarray(present, dtype=float)
                counts = np.bincount(bin_index(edges, arr), minlength=nslots).astype(np.int64)
                stats[spec.name] = ContinuousStats(edges, counts, float(arr.sum()),
                                                   float((arr * arr).sum()), missing)
            else:
                freq: dict[str, int] = {}
                for v in present:
                    freq[v] = freq.get(v, 0) + 1
                stats[spec.name] = CategoricalStats(dict(sorted(freq.items())), missing)
        keep = members if model.params.mode is Mode.EXACT else None
        out.append(ClusterStats(c, len(members), stats, keep))
    return out


def run(dataset: Sequence[Record], schema: Schema, params: RunParams) -> RunResult:
    """Cluster ``dataset``; deterministic given record order, schema and params."""
    model, simparams = init_model(dataset, schema, params)
    fm = FieldMatrix(dataset, schema, simparams)
    cap = params.max_clusters
    exact = params.mode is Mode.EXACT
    scorer = _ExactScorer(fm, cap) if exact else _HistogramScorer(fm, model, cap)
    n = len(dataset)
    trace = RunTrace()

    def record_pass(pass_no, moves):
        crit = scorer.criterion() if exact else None
        sizes = tuple(int(s) for s in scorer.sizes[:n_created])
        trace.append(PassTrace(pass_no, moves, sizes, crit))
        log.debug("pass %d: moves=%d sizes=%s criterion=%s", pass_no, moves, sizes, crit)

    # pass 1: seeding
    n_created = 0
    for i in range(n):
        if n_created == 0:
            c = 0
            n_created = 1
        else:
            sum_vote, mean = scorer.score(i)
            if np.nanmax(mean[:n_created]) < params.similarity_threshold and n_created < cap:
                c = n_created
                n_created += 1
            else:
                c = _argmax_first(sum_vote, n_created)
        scorer.add(i, c)
    record_pass(1, n)

    # refinement passes: reassignment only
    for pass_no in range(2, params.max_passes + 1):
        moves = 0
        for i in range(n):
            old = scorer.remove(i)
            sum_vote, _ = scorer.score(i)
            c = _argmax_first(sum_vote, n_created)
            scorer.add(i, c)
            moves += c != old
        record_pass(pass_no, moves)
        if moves == 0:
            break

    labels = scorer.labels.copy()
    assignments = []
    for i, rec in enumerate(dataset):
        own = scorer.remove(i)
        _, mean = scorer.score(i)
        scorer.add(i, own)
        cv = 1.0 if np.isnan(mean[own]) else float(mean[own])
        others = [float(mean[c]) for c in range(n_created) if c != own and scorer.sizes[c] > 0]
        assignments.append(Assignment(rec.id, own, cv, confidence([cv] + others)))

    model.clusters = _build_stats(model, dataset, labels, n_created)
    return RunResult(model, assignments, trace)


def assign_new(model: ClusterModel, records: Sequence[Record]) -> list[Assignment]:
    """Score records against a frozen model: argmax sum vote, no threshold, no spawning."""
    live = sorted((c for c in model.clusters if c.size > 0), key=lambda c: c.cluster_id)
    if not live:
        raise EmptyCluster("model has no non-empty clusters")
    if model.params.mode is Mode.EXACT:
        votes, means = _exact_scores(model, live, records)
    else:
        scored = [[score_record(model, c, rec) for c in live] for rec in records]
        votes = np.array([[s[0] for s in row] for row in scored]).reshape(len(records), len(live))
        means = np.array([[s[1] for s in row] for row in scored]).reshape(len(records), len(live))
    out = []
    for i, rec in enumerate(records):
        # argmax keeps the first maximum, i.e. the lowest cluster id
        k = int(np.argmax(votes[i]))
        mine = float(means[i, k])
        others = [float(m) for j, m in enumerate(means[i]) if j != k]
        out.append(Assignment(rec.id, live[k].cluster_id, mine, confidence([mine] + others)))
    return out


def _exact_scores(model: ClusterModel, live: Sequence[ClusterStats],
                  records: Sequence[Record], chunk: int = 512):
    """Sum votes and mean similarities of ``records`` against every live cluster."""
    members = [m for c in live for m in c.members]
    owner = np.repeat(np.arange(len(live)), [len(c.members) for c in live])
    sizes = np.bincount(owner, minlength=len(live)).astype(float)
    fm = FieldMatrix(list(records) + members, model.schema, model.similarity)
    cols = np.arange(len(records), len(records) + len(members))
    means = np.empty((len(records), len(live)))
    for lo in range(0, len(records), chunk):
        rows = np.arange(lo, min(lo + chunk, len(records)))
        sims = fm.block(rows, cols)
        for k in range(len(live)):
            means[rows, k] = sims[:, owner == k].sum(axis=1) / sizes[k]
    return sizes * (2.0 * means - 1.0), means
