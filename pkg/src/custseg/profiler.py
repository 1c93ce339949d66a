"""Cluster profiling on shareholder-value variables.

Clusters are aggregated on revenue and profit, ranked by total profit,
placed in a value quadrant (per-capita revenue vs per-capita cost, each
compared with the whole customer base) and given a strategy note.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .analysis import Assignments, labels_for
from .core import Kind, Record, Role, Schema, SchemaError

CROSS_SELL_GAP = 0.25

RETENTION = "retention"
CROSS_SELL = "cross-sell/up-sell pair"
WAIT_AND_SEE = "wait and see (insufficient behavioral evidence)"
COST_REDUCTION = "cost reduction / deprioritize"
DEVELOP = "develop (up-sell)"


class ValueClass(str, enum.Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"
    NEGATIVE = "Negative"


@dataclass(frozen=True)
class ProfileSpec:
    revenue_field: str
    profit_field: str

    def check(self, schema: Schema) -> None:
        for name in (self.revenue_field, self.profit_field):
            if name not in schema.names:
                raise SchemaError(f"profile field {name!r} is not in the schema")
            if schema.field(name).kind is not Kind.CONTINUOUS:
                raise SchemaError(f"profile field {name!r} must be continuous")


@dataclass(frozen=True)
class ClusterProfile:
    cluster_id: int
    customer_count: int
    total_profit: float
    total_revenue: float
    customer_count_pct: float
    total_revenue_pct: float
    per_capita_revenue: float
    per_capita_cost: float
    rank: int = 0
    value_class: Optional[ValueClass] = None
    strategy: str = ""


@dataclass(frozen=True)
class UniverseAggregates:
    total_customers: int
    total_revenue: float
    total_profit: float
    per_capita_revenue: float
    per_capita_cost: float


def classify_quadrant(p: ClusterProfile, u: UniverseAggregates) -> ValueClass:
    """Quadrant from per-capita revenue and cost; equality with the average is not high."""
    if p.customer_count <= 0:
        raise ValueError("cannot classify an empty cluster")
    high_rev = p.per_capita_revenue > u.per_capita_revenue
    high_cost = p.per_capita_cost > u.per_capita_cost
    if high_rev:
        return ValueClass.MEDIUM if high_cost else ValueClass.HIGH
    return ValueClass.NEGATIVE if high_cost else ValueClass.LOW


def cross_sell_pairs(profiles: Sequence[ClusterProfile],
                     gap: float = CROSS_SELL_GAP) -> list[tuple[int, int]]:
    """Clusters adjacent in per-capita revenue whose values differ by less than ``gap``.

    The difference is relative to the larger of the two per-capita revenues.
    """
    ordered = sorted(profiles, key=lambda p: (-p.per_capita_revenue, p.cluster_id))
    pairs = []
    for a, b in zip(ordered, ordered[1:]):
        top = max(abs(a.per_capita_revenue), abs(b.per_capita_revenue))
        if top == 0 or abs(a.per_capita_revenue - b.per_capita_revenue) / top < gap:
            pairs.append((a.cluster_id, b.cluster_id))
    return pairs


def recommend(profiles: Sequence[ClusterProfile], gap: float = CROSS_SELL_GAP) -> dict[int, str]:
    """Strategy note per cluster id; several notes are joined with ``"; "``."""
    notes: dict[int, list[str]] = {p.cluster_id: [] for p in profiles}
    for p in profiles:
        if p.rank == 1:
            notes[p.cluster_id].append(RETENTION)
    for a, b in cross_sell_pairs(profiles, gap):
        notes[a].append(f"{CROSS_SELL} with cluster {b}")
        notes[b].append(f"{CROSS_SELL} with cluster {a}")
    for p in profiles:
        out = notes[p.cluster_id]
        if p.value_class is ValueClass.MEDIUM:
            out.append(WAIT_AND_SEE)
        elif p.value_class is ValueClass.NEGATIVE:
            out.append(COST_REDUCTION)
        elif p.value_class is ValueClass.HIGH and RETENTION not in out:
            out.append(RETENTION)
        elif p.value_class is ValueClass.LOW and not out:
            out.append(DEVELOP)
    return {cid: "; ".join(v) for cid, v in notes.items()}


def profile(dataset: Sequence[Record], assignment: Assignments, schema: Schema,
            spec: ProfileSpec, gap: float = CROSS_SELL_GAP
            ) -> tuple[list[ClusterProfile], UniverseAggregates]:
    """Aggregate revenue and profit per non-empty cluster; returns profiles in rank order."""
    spec.check(schema)
    labels = labels_for(dataset, assignment)
    jr, jp = schema.index(spec.revenue_field), schema.index(spec.profit_field)
    rev: dict[int, list[float]] = {}
    prof: dict[int, list[float]] = {}
    for rec, c in zip(dataset, labels.tolist()):
        r, p = rec.values[jr], rec.values[jp]
        if r is None or p is None:
            raise ValueError(f"record {rec.id!r} lacks revenue or profit")
        rev.setdefault(c, []).append(r)
        prof.setdefault(c, []).append(p)

    n = len(dataset)
    all_rev = math.fsum(v for vs in rev.values() for v in vs)
    all_prof = math.fsum(v for vs in prof.values() for v in vs)
    universe = UniverseAggregates(n, all_rev, all_prof, all_rev / n, (all_rev - all_prof) / n)

    profiles = []
    for c in sorted(rev):
        count = len(rev[c])
        tr, tp = math.fsum(rev[c]), math.fsum(prof[c])
        profiles.append(ClusterProfile(
            cluster_id=c, customer_count=count, total_profit=tp, total_revenue=tr,
            customer_count_pct=100.0 * count / n,
            total_revenue_pct=100.0 * tr / all_rev if all_rev else 0.0,
            per_capita_revenue=tr / count, per_capita_cost=(tr - tp) / count))
    profiles.sort(key=lambda p: (-p.total_profit, p.cluster_id))
    profiles = [replace(p, rank=k + 1, value_class=classify_quadrant(p, universe))
                for k, p in enumerate(profiles)]
    strategies = recommend(profiles, gap)
    return [replace(p, strategy=strategies[p.cluster_id]) for p in profiles], universe


PROFILE_HEADER = ["cluster_rank", "cluster_id", "customer_count", "total_profit",
                  "total_revenue", "customer_count_pct", "total_revenue_pct",
                  "value_class", "strategy"]


def profile_rows(profiles: Sequence[ClusterProfile]) -> list[list[str]]:
    return [[str(p.rank), str(p.cluster_id), str(p.customer_count), f"{p.total_profit:.2f}",
             f"{p.total_revenue:.2f}", f"{p.customer_count_pct:.2f}",
             f"{p.total_revenue_pct:.2f}", p.value_class.value if p.value_class else "",
             p.strategy] for p in profiles]


def format_profile_table(profiles: Sequence[ClusterProfile]) -> str:
    cols = ["RANK", "ID", "COUNT", "TOTAL PROFIT", "TOTAL REVENUE", "COUNT (%)", "REV. (%)",
            "CLASS"]
    rows = [r[:8] for r in profile_rows(profiles)]
    widths = [max(len(c), *(len(r[k]) for r in rows)) if rows else len(c)
              for k, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


# -- per-variable distributions ----------------------------------------------------

@dataclass
class VariableProfile:
    """Cluster-vs-universe distribution of one variable over shared bins.

    For continuous fields ``bins`` holds ``(lo, hi)`` edges; for categorical
    fields each bin is ``(category, category)``.
    """

    field: str
    supplementary: bool
    bins: list[tuple]
    universe: np.ndarray
    clusters: dict[int, np.ndarray] = field(default_factory=dict)

    def to_csv_rows(self) -> list[list[str]]:
        rows = []
        flag = "1" if self.supplementary else "0"
        for cid, props in self.clusters.items():
            for (lo, hi), cp, up in zip(self.bins, props, self.universe):
                rows.append([str(cid), self.field, _fmt_edge(lo), _fmt_edge(hi),
                             repr(float(cp)), repr(float(up)), flag])
        return rows


HISTOGRAM_HEADER = ["cluster_id", "field", "bin_lo", "bin_hi", "cluster_prop",
                    "universe_prop", "supplementary_flag"]


def _fmt_edge(v) -> str:
    return v if isinstance(v, str) else repr(float(v))


def _proportions(slots: np.ndarray, nbins: int) -> np.ndarray:
    counts = np.bincount(slots, minlength=nbins).astype(float)
    total = counts.sum()
    return counts / total if total else counts


def cluster_variable_profile(dataset: Sequence[Record], assignment: Assignments,
                             schema: Schema, field: str, bins: int = 10) -> VariableProfile:
    """Binned distribution of ``field`` in each cluster and in the universe (missing skipped)."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    spec = schema.field(field)
    labels = labels_for(dataset, assignment)
    j = schema.index(field)
    present = [i for i, r in enumerate(dataset) if r.values[j] is not None]
    vals = [dataset[i].values[j] for i in present]
    if spec.kind is Kind.CONTINUOUS:
        arr = np.asarray(vals, dtype=float)
        lo = float(arr.min()) if arr.size else 0.0
        hi = float(arr.max()) if arr.size else 0.0
        if hi > lo:
            edges = np.linspace(lo, hi, bins + 1)
            slots = np.clip(np.searchsorted(edges, arr, side="right") - 1, 0, bins - 1)
            bin_list = [(float(edges[k]), float(edges[k + 1])) for k in range(bins)]
        else:
            slots = np.zeros(len(arr), dtype=np.int64)
            bin_list = [(lo, hi)]
    else:
        cats = sorted(set(vals))
        code = {c: k for k, c in enumerate(cats)}
        slots = np.array([code[v] for v in vals], dtype=np.int64)
        bin_list = [(c, c) for c in cats]
    nb = len(bin_list)
    own = labels[present]
    out = VariableProfile(field, spec.role is Role.SUPPLEMENTARY, bin_list,
                          _proportions(slots, nb))
    for c in sorted(set(labels.tolist())):
        out.clusters[c] = _proportions(slots[own == c], nb)
    return out
