"""
Profiling clusters by shareholder value
=======================================

The four-cluster retail case study only publishes per-cluster totals. We
rebuild records whose sums match those totals and run the profiler on them:
shares, profit rank, value quadrant and a strategy note per cluster.
"""

from custseg.core import RETAIL_SCHEMA, make_record
from custseg.profiler import ProfileSpec, format_profile_table, profile

# cluster id -> (customers, total profit, total revenue)
totals = {3: (486, 117256.59, 563643.71), 1: (5977, 85812.08, 382009.43),
          2: (529, 82169.06, 379789.03), 0: (902, 51561.46, 263656.00)}

records, labels = [], {}
for cid, (n, profit, revenue) in totals.items():
    for k in range(n):
        # spread each total evenly; the last record absorbs the rounding
        p = round(profit / n, 2) if k < n - 1 else round(profit - round(profit / n, 2) * (n - 1), 2)
        r = round(revenue / n, 2) if k < n - 1 else round(revenue - round(revenue / n, 2) * (n - 1), 2)
        rec = make_record(RETAIL_SCHEMA, customer_id=f"{cid}-{k}", recency=30.0,
                          total_profit=p, total_revenue=r)
        records.append(rec)
        labels[rec.id] = cid

profiles, universe = profile(records, labels, RETAIL_SCHEMA,
                             ProfileSpec("total_revenue", "total_profit"))
print(format_profile_table(profiles))
print(f"\nper-capita revenue {universe.per_capita_revenue:.2f}, "
      f"per-capita cost {universe.per_capita_cost:.2f}")
for p in profiles:
    print(f"cluster {p.cluster_id}: {p.strategy}")
