"""
Which variables drive the clusters?
===================================

Four ways to order variables: chi-square, mutual information, a per-field
Condorcet score, and plain declaration order. A noise field drawn the same
way in every segment should land at the bottom.
"""

from custseg.analysis import Metric, as_labels, importance
from custseg.core import RunParams, coerce_record
from custseg.engine import init_model, run
from custseg.profiler import cluster_variable_profile
from custseg.synth import generate, planted_gaussians

spec = planted_gaussians(n_records=2000, seed=42, noise=True)
data = generate(spec)
schema = spec.schema()
records = [coerce_record(row, schema) for row in data.rows]
result = run(records, schema, RunParams())
labels = as_labels(result.assignments)
_, simparams = init_model(records, schema, RunParams())

for metric in Metric:
    report = importance(metric, records, labels, schema, simparams)
    print(f"{metric.value:>15}:",
          ", ".join(f"{e.field}(#{e.rank}, {e.score:.3g})" for e in report.entries))

###############################################################################
# Cluster vs universe distribution of one variable, ten shared bins.

vp = cluster_variable_profile(records, labels, schema, "x1", bins=10)
print("\nbin            universe " + " ".join(f"c{c:<5}" for c in vp.clusters))
for k, (lo, hi) in enumerate(vp.bins):
    row = " ".join(f"{vp.clusters[c][k]:.3f} " for c in vp.clusters)
    print(f"[{lo:5.2f},{hi:5.2f})  {vp.universe[k]:.3f}    {row}")
