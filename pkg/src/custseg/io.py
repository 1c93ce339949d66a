"""File formats: input CSV, cleansing, the fixed-width assignment file, models and reports."""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .analysis import IMPORTANCE_HEADER, ImportanceReport
from .core import (ArityMismatch, EmptyIdentifier, Kind, Mode, Record, Role, RunParams,
                   Schema, SegmentationError, UnparseableNumber, coerce_record)
from .engine import (Assignment, CategoricalStats, ClusterModel, ClusterStats,
                     ContinuousStats, FieldRange, RunTrace)
from .profiler import (HISTOGRAM_HEADER, PROFILE_HEADER, ClusterProfile, VariableProfile,
                       profile_rows)
from .similarity import SimilarityParams


class IoFailure(SegmentationError):
    pass


class MissingHeaderField(SegmentationError):
    def __init__(self, name: str):
        super().__init__(f"CSV header lacks field {name!r}")
        self.name = name


class LayoutMismatch(SegmentationError):
    pass


class IdentifierTooWide(SegmentationError):
    def __init__(self, ident: str):
        super().__init__(f"identifier {ident!r} exceeds {ID_WIDTH} characters")
        self.ident = ident


class FieldTooWide(SegmentationError):
    pass


class ModelFormatError(SegmentationError):
    pass


# -- CSV ---------------------------------------------------------------------------------

class MalformedRow(list):
    """A CSV row whose length disagrees with its header; cleansing drops it."""


def format_number(v: float) -> str:
    """Shortest round-tripping text for a finite float, without a trailing ``.0``."""
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def read_csv(path, schema: Schema) -> list[list[str]]:
    """Read a headed CSV and return rows realigned to schema order.

    Columns not named in the schema are ignored.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise MissingHeaderField(schema.names[0])
            header = [h.strip() for h in header]
            pos = {}
            for name in schema.names:
                if name not in header:
                    raise MissingHeaderField(name)
                pos[name] = header.index(name)
            rows: list[list[str]] = []
            for raw in reader:
                if not raw or (len(raw) == 1 and not raw[0].strip()):
                    continue
                if len(raw) != len(header):
                    rows.append(MalformedRow(raw))
                else:
                    rows.append([raw[pos[name]] for name in schema.names])
            return rows
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def record_to_row(record: Record, schema: Schema) -> list[str]:
    out = []
    for v, spec in zip(record.values, schema.fields):
        if v is None:
            out.append("")
        elif isinstance(v, str):
            out.append(v)
        else:
            out.append(format_number(v))
    return out


def write_csv(path, records: Iterable[Record], schema: Schema) -> int:
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema.names)
        for rec in records:
            w.writerow(record_to_row(rec, schema))
            n += 1
    return n


# -- cleansing -----------------------------------------------------------------------

DROP_REASONS = ("missing_active", "unparseable", "duplicate_id", "arity_mismatch")


@dataclass(frozen=True)
class CleansingRules:
    drop_missing_active: bool = True
    drop_duplicates: bool = True


@dataclass
class CleansingReport:
    rows_read: int = 0
    rows_kept: int = 0
    reasons: dict[str, int] = field(default_factory=lambda: {r: 0 for r in DROP_REASONS})
    missing: dict[str, int] = field(default_factory=dict)

    @property
    def rows_dropped(self) -> int:
        return self.rows_read - self.rows_kept

    def to_text(self) -> str:
        lines = [f"rows_read {self.rows_read}", f"rows_kept {self.rows_kept}",
                 f"rows_dropped {self.rows_dropped}"]
        lines += [f"dropped.{r} {self.reasons[r]}" for r in DROP_REASONS]
        lines += [f"missing.{k} {v}" for k, v in self.missing.items()]
        return "\n".join(lines) + "\n"


def cleanse(rows: Iterable[Sequence[str]], schema: Schema,
            rules: Optional[CleansingRules] = None) -> tuple[list[Record], CleansingReport]:
    """Coerce rows, dropping bad arity, unparseable, missing-active and duplicate-id rows."""
    rules = rules or CleansingRules()
    report = CleansingReport(missing={f.name: 0 for f in schema.profiled})
    active = [schema.index(f.name) for f in schema.active]
    seen: set[str] = set()
    kept: list[Record] = []
    for raw in rows:
        report.rows_read += 1
        if isinstance(raw, MalformedRow) or len(raw) != len(schema.fields):
            report.reasons["arity_mismatch"] += 1
            continue
        try:
            rec = coerce_record(raw, schema)
        except (UnparseableNumber, EmptyIdentifier):
            report.reasons["unparseable"] += 1
            continue
        except ArityMismatch:
            report.reasons["arity_mismatch"] += 1
            continue
        for spec in schema.profiled:
            if rec.values[schema.index(spec.name)] is None:
                report.missing[spec.name] += 1
        if rules.drop_missing_active and any(rec.values[j] is None for j in active):
            report.reasons["missing_active"] += 1
            continue
        if rules.drop_duplicates:
            if rec.id in seen:
                report.reasons["duplicate_id"] += 1
                continue
            seen.add(rec.id)
        kept.append(rec)
    report.rows_kept = len(kept)
    return kept, report


def load_records(path, schema: Schema) -> tuple[list[Record], CleansingReport]:
    return cleanse(read_csv(path, schema), schema)


# -- fixed-width assignment file ---------------------------------------------------------

ID_WIDTH = 16
CLUSTER_WIDTH = 4
PROB_WIDTH = 8
NUM_WIDTH = 14
CAT_WIDTH = 16


@dataclass(frozen=True)
class Column:
    name: str
    width: int
    justification: str  # "left" | "right"
    format: str         # "id" | "int" | "prob" | "num" | "cat"


@dataclass(frozen=True)
class FixedWidthLayout:
    columns: tuple[Column, ...]

    @property
    def width(self) -> int:
        return sum(c.width for c in self.columns)

    @classmethod
    def for_schema(cls, schema: Schema) -> "FixedWidthLayout":
        ident = schema.fields[schema.identifier_index].name
        cols = [Column(ident, ID_WIDTH, "left", "id"),
                Column("cluster_id", CLUSTER_WIDTH, "right", "int"),
                Column("condorcet_value", PROB_WIDTH, "right", "prob"),
                Column("confidence", PROB_WIDTH, "right", "prob")]
        for f in schema.profiled:
            if f.kind is Kind.CONTINUOUS:
                cols.append(Column(f.name, NUM_WIDTH, "right", "num"))
            else:
                cols.append(Column(f.name, CAT_WIDTH, "left", "cat"))
        return cls(tuple(cols))


def _fixed_line(rec: Record, a: Assignment, schema: Schema) -> str:
    if len(rec.id) > ID_WIDTH:
        raise IdentifierTooWide(rec.id)
    parts = [rec.id.ljust(ID_WIDTH), f"{a.cluster_id:>{CLUSTER_WIDTH}d}",
             f"{a.condorcet_value:.6f}", f"{a.confidence:.6f}"]
    if len(parts[1]) > CLUSTER_WIDTH:
        raise FieldTooWide(f"cluster id {a.cluster_id}")
    for f in schema.profiled:
        v = rec.values[schema.index(f.name)]
        if f.kind is Kind.CONTINUOUS:
            text = " " * NUM_WIDTH if v is None else f"{v:>{NUM_WIDTH}.2f}"
            if len(text) > NUM_WIDTH:
                raise FieldTooWide(f"{f.name}={v!r} does not fit {NUM_WIDTH} columns")
        else:
            text = ("" if v is None else v[:CAT_WIDTH]).ljust(CAT_WIDTH)
        parts.append(text)
    return "".join(parts)


def write_fixed_width(records: Sequence[Record], assignments: Sequence[Assignment],
                      schema: Schema, path) -> FixedWidthLayout:
    """One ASCII line per record: id, cluster, condorcet value, confidence, then fields."""
    layout = FixedWidthLayout.for_schema(schema)
    by_id = {a.record_id: a for a in assignments}
    lines = []
    for rec in records:
        try:
            a = by_id[rec.id]
        except KeyError:
            raise SegmentationError(f"record {rec.id!r} has no assignment") from None
        lines.append(_fixed_line(rec, a, schema))
    try:
        data = "".join(line + "\n" for line in lines).encode("ascii")
    except UnicodeEncodeError as exc:
        raise IoFailure(f"non-ASCII content cannot be written: {exc}") from None
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    return layout


def read_fixed_width(path, schema: Schema) -> tuple[list[Record], list[Assignment]]:
    layout = FixedWidthLayout.for_schema(schema)
    try:
        text = Path(path).read_bytes().decode("ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    records, assignments = [], []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, 1):
        if len(line) != layout.width:
            raise LayoutMismatch(f"line {lineno}: width {len(line)} != {layout.width}")
        pos = 0
        fields = {}
        for col in layout.columns:
            fields[col.name] = line[pos:pos + col.width]
            pos += col.width
        ident = fields[layout.columns[0].name].rstrip()
        try:
            cid = int(fields["cluster_id"])
            cv = float(fields["condorcet_value"])
            conf = float(fields["confidence"])
        except ValueError:
            raise LayoutMismatch(f"line {lineno}: malformed assignment columns") from None
        values = []
        for f in schema.fields:
            if f.role is Role.IDENTIFIER:
                values.append(ident)
            elif f.kind is Kind.CONTINUOUS:
                tok = fields[f.name].strip()
                try:
                    values.append(float(tok) if tok else None)
                except ValueError:
                    raise LayoutMismatch(f"line {lineno}: bad number in {f.name}") from None
            else:
                tok = fields[f.name].rstrip()
                values.append(tok if tok else None)
        records.append(Record(ident, tuple(values)))
        assignments.append(Assignment(ident, cid, cv, conf))
    return records, assignments


# -- model serialization -------------------------------------------------------------

MODEL_MAGIC = "custseg-model"
MODEL_VERSION = 1


def schema_hash(schema: Schema) -> str:
    return hashlib.sha256(schema.to_text().encode("utf-8")).hexdigest()[:16]


def _line(tag: str, *payload) -> str:
    return " ".join([tag] + [json.dumps(p, sort_keys=True, separators=(",", ":"))
                             for p in payload])


def dump_model(model: ClusterModel) -> str:
    schema = model.schema
    p = model.params
    out = [f"{MODEL_MAGIC} {MODEL_VERSION} {schema_hash(schema)}",
           _line("schema", schema.to_text()),
           _line("params", {"max_clusters": p.max_clusters, "max_passes": p.max_passes,
                            "accuracy": p.accuracy,
                            "similarity_threshold": p.similarity_threshold,
                            "histogram_bins": p.histogram_bins, "mode": p.mode.value,
                            "seed": p.seed})]
    for name, rng in model.ranges.items():
        out.append(_line("field", name, asdict(rng), model.similarity.effective_scales[name],
                         [float(e) for e in model.edges[name]]))
    for w in model.warnings:
        out.append(_line("warning", w))
    for c in model.clusters:
        out.append(_line("cluster", c.cluster_id, c.size))
        for name, st in c.stats.items():
            if isinstance(st, ContinuousStats):
                out.append(_line("cont", name, {"counts": [int(k) for k in st.counts],
                                                "sum": st.sum, "sum_sq": st.sum_sq,
                                                "missing": st.missing}))
            else:
                out.append(_line("cat", name, {"freq": st.freq, "missing": st.missing}))
        for m in c.members or ():
            out.append(_line("member", list(m.values)))
        out.append("end")
    return "\n".join(out) + "\n"


def load_model(text: str) -> ClusterModel:
    lines = text.splitlines()
    if not lines:
        raise ModelFormatError("empty model file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != MODEL_MAGIC:
        raise ModelFormatError("not a model file")
    if int(head[1]) != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {head[1]}")
    schema = params = None
    ranges, edges, scales, notes = {}, {}, {}, []
    clusters: list[ClusterStats] = []
    cur: Optional[ClusterStats] = None
    for line in lines[1:]:
        tag, _, rest = line.partition(" ")
        args = json.loads(f"[{','.join(_split_json(rest))}]") if rest else []
        if tag == "schema":
            schema = Schema.from_text(args[0])
        elif tag == "params":
            params = RunParams(**args[0])
        elif tag == "field":
            name, rng, eff, e = args
            ranges[name] = FieldRange(**rng)
            scales[name] = eff
            edges[name] = np.array(e, dtype=float)
        elif tag == "warning":
            notes.append(args[0])
        elif tag == "cluster":
            cur = ClusterStats(args[0], args[1], {},
                               [] if params.mode is Mode.EXACT else None)
        elif tag == "cont":
            d = args[1]
            cur.stats[args[0]] = ContinuousStats(edges[args[0]],
                                                 np.array(d["counts"], dtype=np.int64),
                                                 d["sum"], d["sum_sq"], d["missing"])
        elif tag == "cat":
            cur.stats[args[0]] = CategoricalStats(dict(args[1]["freq"]), args[1]["missing"])
        elif tag == "member":
            vals = tuple(args[0])
            cur.members.append(Record(vals[schema.identifier_index], vals))
        elif tag == "end":
            clusters.append(cur)
            cur = None
        else:
            raise ModelFormatError(f"unknown model line tag {tag!r}")
    if schema is None or params is None:
        raise ModelFormatError("model lacks schema or params")
    if schema_hash(schema) != head[2]:
        raise ModelFormatError("schema hash mismatch")
    model = ClusterModel(schema, params, SimilarityParams(params.accuracy, scales), ranges,
                         edges, clusters, notes)
    return model


def _split_json(rest: str) -> list[str]:
    """Split space-separated JSON documents (none of ours contain a bare top-level space)."""
    dec = json.JSONDecoder()
    out, pos = [], 0
    while pos < len(rest):
        while pos < len(rest) and rest[pos] == " ":
            pos += 1
        if pos >= len(rest):
            break
        _, end = dec.raw_decode(rest, pos)
        out.append(rest[pos:end])
        pos = end
    return out


def save_model(model: ClusterModel, path) -> None:
    try:
        Path(path).write_text(dump_model(model), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_model(path) -> ClusterModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    try:
        return load_model(text)
    except (ValueError, KeyError, TypeError, AttributeError) as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc


# -- reports ------------------------------------------------------------------------

def _write_table(path: Path, header: list[str], rows: list[list[str]]) -> int:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return len(rows)


def write_reports(profiles: Optional[Sequence[ClusterProfile]],
                  importance: Optional[ImportanceReport],
                  histograms: Optional[Sequence[VariableProfile]],
                  trace: Optional[RunTrace], out_dir,
                  cleansing: Optional[CleansingReport] = None) -> dict[str, int]:
    """Write whichever reports are given; returns ``{file name: data rows}``."""
    out = Path(out_dir)
    manifest: dict[str, int] = {}
    try:
        os.makedirs(out, exist_ok=True)
        if profiles is not None:
            manifest["profiles.csv"] = _write_table(out / "profiles.csv", PROFILE_HEADER,
                                                    profile_rows(profiles))
        if importance is not None:
            manifest["importance.csv"] = _write_table(out / "importance.csv",
                                                      IMPORTANCE_HEADER,
                                                      importance.to_csv_rows())
        if histograms is not None:
            rows = [r for h in histograms for r in h.to_csv_rows()]
            manifest["histograms.csv"] = _write_table(out / "histograms.csv",
                                                      HISTOGRAM_HEADER, rows)
        if trace is not None:
            (out / "trace.log").write_text(trace.to_text(), encoding="utf-8")
            manifest["trace.log"] = len(trace)
        if cleansing is not None:
            text = cleansing.to_text()
            (out / "cleansing.txt").write_text(text, encoding="utf-8")
            manifest["cleansing.txt"] = len(text.splitlines())
    except OSError as exc:
        raise IoFailure(f"{out_dir}: {exc}") from exc
    return manifest
