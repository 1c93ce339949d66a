import math

import pytest
from hypothesis import given, strategies as st

from custseg.core import (RETAIL_SCHEMA, ArityMismatch, EmptyIdentifier, FieldSpec, Kind, Record,
                          Role, RunParams, Schema, SchemaError, UnparseableNumber, check_schema,
                          coerce_record, validate_schema)


def test_retail_schema_is_valid():
    assert validate_schema(RETAIL_SCHEMA) == []
    assert RETAIL_SCHEMA.names == ["customer_id", "recency", "total_profit", "total_revenue",
                                  "top_revenue_department"]


def test_two_identifiers_violation():
    schema = Schema(RETAIL_SCHEMA.fields + (FieldSpec("alt_id", Kind.CATEGORICAL, Role.IDENTIFIER),))
    reasons = [v.reason for v in validate_schema(schema)]
    assert "multiple identifiers" in reasons


def test_no_active_fields_violation():
    schema = Schema((FieldSpec("id", Kind.CATEGORICAL, Role.IDENTIFIER),
                     FieldSpec("x", Kind.CONTINUOUS, Role.SUPPLEMENTARY)))
    assert [v.reason for v in validate_schema(schema)] == ["no active fields"]


def test_every_violation_listed_in_field_order():
    schema = Schema((FieldSpec("x", Kind.CONTINUOUS, Role.ACTIVE, 0.0),
                     FieldSpec("y", Kind.CONTINUOUS, Role.ACTIVE, 1.0, -2.0),
                     FieldSpec("x", Kind.CATEGORICAL, Role.SUPPLEMENTARY, 1.0, 3.0)))
    got = [(v.field, v.reason) for v in validate_schema(schema)]
    assert got == [("x", "active field weight must be > 0"),
                   ("y", "similarity scale must be > 0"),
                   ("x", "duplicate field name"),
                   ("x", "similarity scale on a categorical field"),
                   (None, "no identifier")]
    assert validate_schema(schema) == validate_schema(schema)
    with pytest.raises(SchemaError):
        check_schema(schema)


def test_weight_ignored_for_non_active_roles():
    schema = Schema(RETAIL_SCHEMA.fields[:-1]
                    + (FieldSpec("dept", Kind.CATEGORICAL, Role.SUPPLEMENTARY, 0.0),))
    assert validate_schema(schema) == []


def test_coerce_direct_parse():
    rec = coerce_record(["C001", "12", "500.25", "2300.00", "Grocery"], RETAIL_SCHEMA)
    assert rec == Record("C001", ("C001", 12.0, 500.25, 2300.0, "Grocery"))


def test_coerce_empty_is_missing():
    rec = coerce_record(["C002", "", "10", "20", "Toys"], RETAIL_SCHEMA)
    assert rec.values[1] is None


def test_coerce_trims_categories():
    rec = coerce_record(["  C9 ", "1", "2", "3", "  Home Goods "], RETAIL_SCHEMA)
    assert rec.id == "C9"
    assert rec.values[-1] == "Home Goods"
    assert coerce_record(["C9", "1", "2", "3", "   "], RETAIL_SCHEMA).values[-1] is None


def test_coerce_unparseable():
    with pytest.raises(UnparseableNumber) as info:
        coerce_record(["C003", "abc", "10", "20", "Toys"], RETAIL_SCHEMA)
    assert (info.value.field, info.value.token) == ("recency", "abc")


@pytest.mark.parametrize("token", ["nan", "inf", "-Infinity", "1,5", "1_000"])
def test_coerce_rejects_non_finite_and_foreign_formats(token):
    with pytest.raises(UnparseableNumber):
        coerce_record(["C004", token, "10", "20", "Toys"], RETAIL_SCHEMA)


def test_coerce_identifier_and_arity_errors():
    with pytest.raises(EmptyIdentifier):
        coerce_record(["  ", "1", "10", "20", "Toys"], RETAIL_SCHEMA)
    with pytest.raises(ArityMismatch):
        coerce_record(["C1", "1"], RETAIL_SCHEMA)


@given(st.lists(st.one_of(st.floats(allow_nan=True, allow_infinity=True).map(repr),
                          st.text(max_size=6)), min_size=3, max_size=3))
def test_accepted_numbers_are_finite(tokens):
    try:
        rec = coerce_record(["id1"] + tokens + ["Toys"], RETAIL_SCHEMA)
    except UnparseableNumber:
        return
    for v in rec.values[1:4]:
        assert v is None or math.isfinite(v)


def test_schema_text_round_trip_keeps_order():
    schema = Schema((RETAIL_SCHEMA.fields[3], RETAIL_SCHEMA.fields[0],
                     FieldSpec("w", Kind.CONTINUOUS, Role.ACTIVE, 2.5, 7.0)))
    again = Schema.from_text(schema.to_text())
    assert again == schema
    assert again.names == ["total_revenue", "customer_id", "w"]


@pytest.mark.parametrize("kwargs", [dict(max_clusters=0), dict(max_passes=0),
                                    dict(accuracy=0.0), dict(accuracy=1.0),
                                    dict(similarity_threshold=1.5), dict(histogram_bins=0),
                                    dict(seed=-1)])
def test_run_params_invariants(kwargs):
    with pytest.raises(ValueError):
        RunParams(**kwargs)


def test_run_params_defaults():
    p = RunParams()
    assert (p.max_clusters, p.max_passes, p.accuracy, p.similarity_threshold) == (4, 3, 0.5, 0.5)
    assert p.histogram_bins == 64
