"""Customer segmentation with Condorcet-criterion (demographic) clustering.

Typical use::

    from custseg import io, engine, profiler
    records, report = io.load_records("customers.csv", schema)
    result = engine.run(records, schema, RunParams())
    profiles, universe = profiler.profile(records, result.assignments, schema,
                                          ProfileSpec("total_revenue", "total_profit"))
"""
from .core import (FieldSpec, Kind, Mode, RETAIL_SCHEMA, Record, Role, RunParams, Schema,
                   SegmentationError, coerce_record, make_record, validate_schema)
from .engine import Assignment, ClusterModel, RunResult, run
from .profiler import ProfileSpec
from .similarity import SimilarityParams

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ClusterModel", "FieldSpec", "Kind", "Mode", "RETAIL_SCHEMA", "ProfileSpec",
    "Record", "Role", "RunParams", "RunResult", "Schema", "SegmentationError",
    "SimilarityParams", "coerce_record", "make_record", "run", "validate_schema",
]
