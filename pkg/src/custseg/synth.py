"""Seeded synthetic customer files with planted segments, and recovery scoring."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .analysis import adjusted_rand_index, as_labels
from .core import FieldSpec, Kind, RecordSetMismatch, Role, Schema
from .io import format_number


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentSpec:
    name: str
    proportion: float
    continuous: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    categorical: Mapping[str, Mapping[str, float]] = field(default_factory=dict)


@dataclass(frozen=True)
class SynthSpec:
    n_records: int
    segments: tuple[SegmentSpec, ...]
    seed: int = 0
    id_field: str = "customer_id"
    clip_fields: tuple[str, ...] = ()
    supplementary: tuple[str, ...] = ()

    @property
    def continuous_fields(self) -> list[str]:
        return list(self.segments[0].continuous) if self.segments else []

    @property
    def categorical_fields(self) -> list[str]:
        return list(self.segments[0].categorical) if self.segments else []

    @property
    def header(self) -> list[str]:
        return [self.id_field] + self.continuous_fields + self.categorical_fields

    def schema(self) -> Schema:
        """Continuous fields active, categorical fields supplementary, unless overridden."""
        fields = [FieldSpec(self.id_field, Kind.CATEGORICAL, Role.IDENTIFIER)]
        for name in self.continuous_fields:
            role = Role.SUPPLEMENTARY if name in self.supplementary else Role.ACTIVE
            fields.append(FieldSpec(name, Kind.CONTINUOUS, role))
        for name in self.categorical_fields:
            fields.append(FieldSpec(name, Kind.CATEGORICAL, Role.SUPPLEMENTARY))
        return Schema(tuple(fields))


def validate(spec: SynthSpec) -> None:
    """Raise :class:`SpecError` naming the first broken invariant."""
    if not spec.segments:
        raise SpecError("spec needs at least one segment")
    if int(spec.n_records) != spec.n_records or spec.n_records < len(spec.segments):
        raise SpecError("n_records must be an integer >= number of segments")
    if spec.seed < 0:
        raise SpecError("seed must be unsigned")
    total = math.fsum(s.proportion for s in spec.segments)
    if abs(total - 1.0) > 1e-9:
        raise SpecError(f"segment proportions must sum to 1 (got {total:g})")
    cont = set(spec.continuous_fields)
    cats = set(spec.categorical_fields)
    for s in spec.segments:
        if not 0.0 < s.proportion <= 1.0:
            raise SpecError(f"segment {s.name!r}: proportion must lie in (0, 1]")
        if set(s.continuous) != cont or set(s.categorical) != cats:
            raise SpecError(f"segment {s.name!r}: field set differs from the first segment")
        for name, (mean, sd) in s.continuous.items():
            if not sd > 0:
                raise SpecError(f"segment {s.name!r}: sd of {name!r} must be > 0")
        for name, weights in s.categorical.items():
            w = list(weights.values())
            if not w or any(x < 0 for x in w) or sum(w) <= 0:
                raise SpecError(f"segment {s.name!r}: weights of {name!r} must be "
                                "non-negative and not all zero")


def allocate(n: int, proportions: Sequence[float]) -> list[int]:
    """Largest-remainder rounding of ``n * proportions`` to integers summing to ``n``."""
    exact = [n * p for p in proportions]
    counts = [math.floor(x) for x in exact]
    short = n - sum(counts)
    order = sorted(range(len(exact)), key=lambda k: (-(exact[k] - counts[k]), k))
    for k in order[:short]:
        counts[k] += 1
    return counts


@dataclass
class SynthData:
    header: list[str]
    rows: list[list[str]]
    truth: dict[str, str]

    def write(self, out_dir) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        data, truth = out / "data.csv", out / "truth.csv"
        with open(data, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header)
            w.writerows(self.rows)
        with open(truth, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "segment"])
            w.writerows(self.truth.items())
        return data, truth


def generate(spec: SynthSpec) -> SynthData:
    """Draw records per segment, shuffle them, and number them ``S000001...``."""
    validate(spec)
    rng = np.random.default_rng(spec.seed)
    sizes = allocate(spec.n_records, [s.proportion for s in spec.segments])
    cont, cats = spec.continuous_fields, spec.categorical_fields
    drawn: list[tuple[str, list[str]]] = []
    for seg, size in zip(spec.segments, sizes):
        cols = []
        for name in cont:
            mean, sd = seg.continuous[name]
            x = rng.normal(mean, sd, size)
            if name in spec.clip_fields:
                x = np.maximum(x, 0.0)
            cols.append([format_number(round(float(v), 2) + 0.0) for v in x])
        for name in cats:
            labels = list(seg.categorical[name])
            w = np.array([seg.categorical[name][k] for k in labels], dtype=float)
            picks = rng.choice(len(labels), size=size, p=w / w.sum())
            cols.append([labels[k] for k in picks])
        for i in range(size):
            drawn.append((seg.name, [c[i] for c in cols]))
    order = rng.permutation(len(drawn))
    rows, truth = [], {}
    for k, idx in enumerate(order, 1):
        seg_name, values = drawn[idx]
        rid = f"S{k:06d}"
        rows.append([rid] + values)
        truth[rid] = seg_name
    return SynthData(spec.header, rows, truth)


# -- bundled specs ---------------------------------------------------------------------

DEPARTMENTS = ("Grocery", "Apparel", "Electronics", "Home", "Toys")


def table1_like(n_records: int = 8000, seed: int = 7) -> SynthSpec:
    """Four segments shaped like the retail case study's cluster profile.

    Count shares are 6.16 / 75.72 / 6.70 / 11.43 percent and per-capita
    revenue and profit follow the observed per-capita cluster values.
    """
    def seg(name, share, recency, profit, revenue, dept):
        return SegmentSpec(name, share / 100.0, {
            "recency": (recency, 6.0),
            "total_profit": (profit, 0.08 * profit),
            "total_revenue": (revenue, 0.08 * revenue),
        }, {"top_revenue_department": dict(zip(DEPARTMENTS, dept))})

    segments = (
        seg("best", 6.16, 12.0, 117256.59 / 486, 563643.71 / 486, (1, 2, 6, 3, 1)),
        seg("mass", 75.72, 45.0, 85812.08 / 5977, 382009.43 / 5977, (6, 2, 1, 1, 2)),
        seg("upper", 6.70, 20.0, 82169.06 / 529, 379789.03 / 529, (2, 3, 4, 3, 1)),
        seg("lapsed", 11.43, 90.0, 51561.46 / 902, 263656.0 / 902, (4, 2, 1, 2, 3)),
    )
    # proportions above are rounded percentages; renormalise so they sum to 1
    total = sum(s.proportion for s in segments)
    segments = tuple(SegmentSpec(s.name, s.proportion / total, s.continuous, s.categorical)
                     for s in segments)
    return SynthSpec(n_records, segments, seed,
                     clip_fields=("recency", "total_profit", "total_revenue"))


def planted_gaussians(n_records: int = 2000, seed: int = 42, separation: float = 6.0,
                      sd: float = 1.0, noise: bool = False) -> SynthSpec:
    """Four equal Gaussian segments on three fields.

    Centroids sit on alternate cube corners, so every pair of segments is
    ``separation * sd`` apart in two coordinates. With ``noise`` a
    supplementary field drawn identically in every segment is added.
    """
    corners = ((0, 0, 0), (1, 0, 1), (0, 1, 1), (1, 1, 0))
    base = 10.0 * sd
    segments = []
    for k, corner in enumerate(corners):
        cont = {f"x{d + 1}": (base + separation * sd * c, sd) for d, c in enumerate(corner)}
        if noise:
            cont["noise"] = (50.0, 10.0)
        segments.append(SegmentSpec(f"g{k}", 0.25, cont,
                                    {"channel": {"web": 1.0, "store": 1.0}}))
    return SynthSpec(n_records, tuple(segments), seed,
                     supplementary=("noise",) if noise else ())


BUNDLED = {"table1-like": table1_like, "planted-4": planted_gaussians}


def spec_from_dict(d: Mapping) -> SynthSpec:
    try:
        segments = tuple(
            SegmentSpec(s["name"], float(s["proportion"]),
                        {k: (float(v[0]), float(v[1])) for k, v in s.get("continuous", {}).items()},
                        {k: {c: float(w) for c, w in v.items()}
                         for k, v in s.get("categorical", {}).items()})
            for s in d["segments"])
        return SynthSpec(int(d["n_records"]), segments, int(d.get("seed", 0)),
                         d.get("id_field", "customer_id"), tuple(d.get("clip_fields", ())),
                         tuple(d.get("supplementary", ())))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise SpecError(f"malformed synth spec: {exc!r}") from None


def load_spec(source: str) -> SynthSpec:
    """A bundled spec name or a path to a JSON spec file."""
    if source in BUNDLED:
        return BUNDLED[source]()
    try:
        d = json.loads(Path(source).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise SpecError(f"cannot read synth spec {source!r}: {exc}") from None
    spec = spec_from_dict(d)
    validate(spec)
    return spec


def read_truth(path) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return {r[0]: r[1] for r in rows[1:] if r}


# -- evaluation ----------------------------------------------------------------------

@dataclass
class Confusion:
    clusters: list[int]
    segments: list[str]
    counts: np.ndarray  # clusters x segments


@dataclass
class Evaluation:
    ari: float
    non_empty_clusters: int
    confusion: Confusion


def evaluate(assignments, truth: Mapping[str, str]) -> Evaluation:
    labels = as_labels(assignments)
    if set(labels) != set(truth):
        raise RecordSetMismatch("assignments and truth cover different ids")
    ari = adjusted_rand_index(labels, dict(truth))
    clusters = sorted(set(labels.values()))
    segments = sorted(set(truth.values()))
    ci = {c: k for k, c in enumerate(clusters)}
    si = {s: k for k, s in enumerate(segments)}
    counts = np.zeros((len(clusters), len(segments)), dtype=np.int64)
    for rid, c in labels.items():
        counts[ci[c], si[truth[rid]]] += 1
    return Evaluation(ari, len(clusters), Confusion(clusters, segments, counts))
