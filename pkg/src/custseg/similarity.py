"""Pairwise similarity between values and records, and the vote transform.

Continuous fields use the Cauchy kernel ``tau**2 / (tau**2 + d**2)``, which
is 1 at distance 0 and exactly 0.5 at ``d == tau``. Categorical fields
match on exact string equality. Record similarity is the weighted mean over
the active fields where both records have a value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import FieldSpec, Kind, KindMismatch, Record, Role, Schema, Value

UNCERTAIN = 0.5


def effective_scale(base_scale: float, accuracy: float) -> float:
    """Map a base scale through the accuracy setting.

    accuracy 0.5 leaves the scale alone; higher accuracy shrinks it (stricter
    matching) and lower accuracy inflates it.
    """
    if not base_scale > 0:
        raise ValueError("base_scale must be > 0")
    if not 0.0 < accuracy < 1.0:
        raise ValueError("accuracy must lie in (0, 1)")
    return base_scale * (1.0 - accuracy) / accuracy


@dataclass(frozen=True)
class SimilarityParams:
    accuracy: float
    effective_scales: dict[str, float] = field(default_factory=dict)

    def scale(self, name: str) -> float:
        return self.effective_scales[name]


def cauchy(d, tau):
    d = np.asarray(d, dtype=float)
    t2 = tau * tau
    return t2 / (t2 + d * d)


def _check_kind(spec: FieldSpec, v: Value):
    if v is None:
        return
    if spec.kind is Kind.CONTINUOUS:
        if isinstance(v, str) or isinstance(v, bool):
            raise KindMismatch(f"field {spec.name!r} is continuous, got {v!r}")
    elif not isinstance(v, str):
        raise KindMismatch(f"field {spec.name!r} is categorical, got {v!r}")


def field_similarity(spec: FieldSpec, a: Value, b: Value,
                     params: SimilarityParams) -> Optional[float]:
    """Similarity of two values of one field, or ``None`` if either is missing."""
    _check_kind(spec, a)
    _check_kind(spec, b)
    if a is None or b is None:
        return None
    if spec.kind is Kind.CATEGORICAL:
        return 1.0 if a == b else 0.0
    tau = params.scale(spec.name)
    d = abs(float(a) - float(b))
    t2 = tau * tau
    return t2 / (t2 + d * d)


def record_similarity(r1: Record, r2: Record, schema: Schema,
                      params: SimilarityParams) -> float:
    num = 0.0
    den = 0.0
    for i, spec in enumerate(schema.fields):
        if spec.role is not Role.ACTIVE:
            continue
        s = field_similarity(spec, r1.values[i], r2.values[i], params)
        if s is None:
            continue
        num += spec.weight * s
        den += spec.weight
    if den == 0.0:
        return UNCERTAIN
    return num / den


def vote(s):
    """Similar-minus-dissimilar vote: maps [0, 1] onto [-1, 1]."""
    return 2.0 * s - 1.0


class FieldMatrix:
    """Column-encoded fields of a dataset for vectorised similarity blocks.

    Continuous columns hold floats with NaN for missing; categorical columns
    hold integer codes with -1 for missing.
    """

    def __init__(self, records: Sequence[Record], schema: Schema,
                 params: SimilarityParams, fields: Optional[Sequence[FieldSpec]] = None):
        self.fields = list(schema.active if fields is None else fields)
        self.n = len(records)
        self.weights = np.array([f.weight for f in self.fields], dtype=float)
        self.columns: list[np.ndarray] = []
        self.scales: list[Optional[float]] = []
        for f in self.fields:
            j = schema.index(f.name)
            if f.kind is Kind.CONTINUOUS:
                col = np.array([np.nan if r.values[j] is None else r.values[j] for r in records],
                               dtype=float)
                self.scales.append(params.scale(f.name))
            else:
                codes: dict[str, int] = {}
                col = np.array([-1 if r.values[j] is None else codes.setdefault(r.values[j], len(codes))
                                for r in records], dtype=np.int64)
                self.scales.append(None)
            self.columns.append(col)

    def field_block(self, k: int, rows, cols=None) -> tuple[np.ndarray, np.ndarray]:
        """Similarity and comparability mask of field ``k`` for ``rows x cols``."""
        col = self.columns[k]
        a = col[rows][:, None]
        b = (col if cols is None else col[cols])[None, :]
        if self.scales[k] is None:
            mask = (a >= 0) & (b >= 0)
            sim = ((a == b) & mask).astype(float)
        else:
            mask = ~(np.isnan(a) | np.isnan(b))
            with np.errstate(invalid="ignore"):
                sim = cauchy(a - b, self.scales[k])
            sim = np.where(mask, sim, 0.0)
        return sim, mask

    def block(self, rows, cols=None) -> np.ndarray:
        """Record similarity for ``rows x cols`` (all columns by default)."""
        rows = np.atleast_1d(np.asarray(rows))
        ncols = self.n if cols is None else len(cols)
        num = np.zeros((len(rows), ncols))
        den = np.zeros((len(rows), ncols))
        for k, w in enumerate(self.weights):
            sim, mask = self.field_block(k, rows, cols)
            num += w * sim
            den += w * mask
        out = np.full_like(num, UNCERTAIN)
        np.divide(num, den, out=out, where=den > 0)
        return out

    def row(self, i: int) -> np.ndarray:
        return self.block([i])[0]

    def matrix(self) -> np.ndarray:
        return self.block(np.arange(self.n))
