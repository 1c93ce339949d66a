"""Domain types, schema validation and record coercion.

A value stored in a :class:`Record` is one of ``float`` (a finite number),
``str`` (a category) or ``None`` (missing).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

Value = Union[float, str, None]


class SegmentationError(Exception):
    """Base class for every error raised by this package."""


class ArityMismatch(SegmentationError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} values, got {got}")
        self.expected = expected
        self.got = got


class UnparseableNumber(SegmentationError):
    def __init__(self, field: str, token: str):
        super().__init__(f"field {field!r}: cannot parse {token!r} as a number")
        self.field = field
        self.token = token


class EmptyIdentifier(SegmentationError):
    def __init__(self):
        super().__init__("identifier is empty")


class KindMismatch(SegmentationError):
    pass


class EmptyDataset(SegmentationError):
    def __init__(self):
        super().__init__("dataset is empty")


class EmptyCluster(SegmentationError):
    pass


class DegenerateClustering(SegmentationError):
    pass


class RecordSetMismatch(SegmentationError):
    pass


class SchemaError(SegmentationError):
    pass


class Kind(str, enum.Enum):
    CONTINUOUS = "continuous"
    CATEGORICAL = "categorical"


class Role(str, enum.Enum):
    IDENTIFIER = "identifier"
    ACTIVE = "active"
    SUPPLEMENTARY = "supplementary"


class Mode(str, enum.Enum):
    EXACT = "exact"
    HISTOGRAM = "histogram"


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: Kind
    role: Role
    weight: float = 1.0
    similarity_scale: Optional[float] = None

    @property
    def is_continuous(self) -> bool:
        return self.kind is Kind.CONTINUOUS


@dataclass(frozen=True)
class Schema:
    """Ordered field declarations. Declaration order is the database order."""

    fields: tuple[FieldSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(self.fields))

    def __len__(self):
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.fields]

    def index(self, name: str) -> int:
        for i, f in enumerate(self.fields):
            if f.name == name:
                return i
        raise KeyError(name)

    def field(self, name: str) -> FieldSpec:
        return self.fields[self.index(name)]

    @property
    def identifier_index(self) -> int:
        for i, f in enumerate(self.fields):
            if f.role is Role.IDENTIFIER:
                return i
        raise SchemaError("schema has no identifier field")

    @property
    def active(self) -> list[FieldSpec]:
        return [f for f in self.fields if f.role is Role.ACTIVE]

    @property
    def profiled(self) -> list[FieldSpec]:
        """Active and supplementary fields, in declaration order."""
        return [f for f in self.fields if f.role is not Role.IDENTIFIER]

    def to_text(self) -> str:
        """Canonical one-line-per-field rendering (``name kind role weight scale``)."""
        lines = []
        for f in self.fields:
            scale = "-" if f.similarity_scale is None else repr(float(f.similarity_scale))
            lines.append(f"{f.name} {f.kind.value} {f.role.value} {float(f.weight)!r} {scale}")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "Schema":
        fields = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            fields.append(parse_field_line(line))
        return cls(tuple(fields))


def parse_field_line(line: str) -> FieldSpec:
    """Parse ``name kind role [weight] [scale]``; ``-`` leaves an optional slot unset."""
    parts = line.split()
    if not 3 <= len(parts) <= 5:
        raise SchemaError(f"bad field declaration: {line!r}")
    name, kind, role = parts[:3]
    try:
        kind_ = Kind(kind.lower())
        role_ = Role(role.lower())
    except ValueError as exc:
        raise SchemaError(f"bad field declaration {line!r}: {exc}") from None
    weight = 1.0
    scale = None
    try:
        if len(parts) > 3 and parts[3] != "-":
            weight = float(parts[3])
        if len(parts) > 4 and parts[4] != "-":
            scale = float(parts[4])
    except ValueError:
        raise SchemaError(f"bad number in field declaration: {line!r}") from None
    return FieldSpec(name, kind_, role_, weight, scale)


@dataclass(frozen=True)
class Violation:
    field: Optional[str]
    reason: str

    def __str__(self):
        return self.reason if self.field is None else f"{self.field}: {self.reason}"


def validate_schema(schema: Schema) -> list[Violation]:
    """Check the schema invariants. An empty list means the schema is valid."""
    out: list[Violation] = []
    seen: set[str] = set()
    for f in schema.fields:
        if f.name in seen:
            out.append(Violation(f.name, "duplicate field name"))
        seen.add(f.name)
        if f.role is Role.ACTIVE and not (f.weight > 0 and math.isfinite(f.weight)):
            out.append(Violation(f.name, "active field weight must be > 0"))
        if f.similarity_scale is not None:
            if f.kind is not Kind.CONTINUOUS:
                out.append(Violation(f.name, "similarity scale on a categorical field"))
            elif not (f.similarity_scale > 0 and math.isfinite(f.similarity_scale)):
                out.append(Violation(f.name, "similarity scale must be > 0"))

    identifiers = [f for f in schema.fields if f.role is Role.IDENTIFIER]
    if len(identifiers) == 0:
        out.append(Violation(None, "no identifier"))
    elif len(identifiers) > 1:
        for f in identifiers[1:]:
            out.append(Violation(f.name, "multiple identifiers"))
    if not any(f.role is Role.ACTIVE for f in schema.fields):
        out.append(Violation(None, "no active fields"))
    return out


def check_schema(schema: Schema) -> Schema:
    """Raise :class:`SchemaError` listing every violation, else return ``schema``."""
    problems = validate_schema(schema)
    if problems:
        raise SchemaError("; ".join(str(p) for p in problems))
    return schema


@dataclass(frozen=True)
class Record:
    id: str
    values: tuple[Value, ...]

    def __getitem__(self, i: int) -> Value:
        return self.values[i]


@dataclass(frozen=True)
class RunParams:
    max_clusters: int = 4
    max_passes: int = 3
    accuracy: float = 0.5
    similarity_threshold: float = 0.5
    histogram_bins: int = 64
    mode: Mode = Mode.HISTOGRAM
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if int(self.max_clusters) != self.max_clusters or self.max_clusters < 1:
            raise ValueError("max_clusters must be a positive integer")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ValueError("max_passes must be a positive integer")
        if not 0.0 < self.accuracy < 1.0:
            raise ValueError("accuracy must lie in (0, 1)")
        if not 0.0 <= self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must lie in [0, 1]")
        if int(self.histogram_bins) != self.histogram_bins or self.histogram_bins < 1:
            raise ValueError("histogram_bins must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be an unsigned integer")


def parse_number(token: str) -> Optional[float]:
    """Parse a period-decimal real; empty (after trimming) is missing."""
    token = token.strip()
    if not token:
        return None
    # float() also accepts "nan", "inf", "1_000" and unicode digits
    if token.lower().lstrip("+-") in ("nan", "inf", "infinity") or "_" in token:
        raise ValueError(token)
    x = float(token)
    if not math.isfinite(x):
        raise ValueError(token)
    return x


def coerce_record(raw: Sequence[str], schema: Schema) -> Record:
    """Turn one row of strings (schema order) into a typed :class:`Record`."""
    if len(raw) != len(schema.fields):
        raise ArityMismatch(len(schema.fields), len(raw))
    values: list[Value] = []
    for token, spec in zip(raw, schema.fields):
        if spec.kind is Kind.CONTINUOUS and spec.role is not Role.IDENTIFIER:
            try:
                values.append(parse_number(token))
            except ValueError:
                raise UnparseableNumber(spec.name, token) from None
        else:
            text = token.strip()
            values.append(text if text else None)
    ident = values[schema.identifier_index]
    if ident is None:
        raise EmptyIdentifier()
    return Record(str(ident), tuple(values))


def make_record(schema: Schema, **values: Value) -> Record:
    """Build a record by field name; convenient for tests and demos."""
    row = []
    for f in schema.fields:
        v = values.get(f.name)
        if v is not None and f.kind is Kind.CONTINUOUS and f.role is not Role.IDENTIFIER:
            v = float(v)
        row.append(v)
    ident = row[schema.identifier_index]
    if ident is None:
        raise EmptyIdentifier()
    row[schema.identifier_index] = str(ident)
    return Record(str(ident), tuple(row))


RETAIL_SCHEMA = Schema((
    FieldSpec("customer_id", Kind.CATEGORICAL, Role.IDENTIFIER),
    FieldSpec("recency", Kind.CONTINUOUS, Role.ACTIVE),
    FieldSpec("total_profit", Kind.CONTINUOUS, Role.ACTIVE),
    FieldSpec("total_revenue", Kind.CONTINUOUS, Role.ACTIVE),
    FieldSpec("top_revenue_department", Kind.CATEGORICAL, Role.SUPPLEMENTARY),
))
"""The four-variable customer schema used by the retail case study."""
