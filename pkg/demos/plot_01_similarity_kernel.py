"""
How similar are two customers?
==============================

Continuous fields are compared with a Cauchy kernel whose scale sets the
distance at which two values count as "half similar". The accuracy knob
shrinks or stretches that scale.
"""

import numpy as np

from custseg.core import RETAIL_SCHEMA, make_record
from custseg.similarity import (SimilarityParams, effective_scale, field_similarity,
                                record_similarity, vote)

field = RETAIL_SCHEMA.field("recency")

# kernel values at a few distances for a base scale of 10 days
for accuracy in (0.2, 0.5, 0.8):
    tau = effective_scale(10.0, accuracy)
    params = SimilarityParams(accuracy, {"recency": tau})
    sims = [field_similarity(field, 0.0, d, params) for d in (0, 5, 10, 20, 40)]
    print(f"accuracy {accuracy}: scale {tau:6.2f}  s(d) =", np.round(sims, 3))

###############################################################################
# Whole records: the weighted mean over active fields that both records have.
# The supplementary department field is ignored.

params = SimilarityParams(0.5, {"recency": 10.0, "total_profit": 50.0, "total_revenue": 200.0})
alice = make_record(RETAIL_SCHEMA, customer_id="alice", recency=3, total_profit=120,
                    total_revenue=900, top_revenue_department="Toys")
bob = make_record(RETAIL_SCHEMA, customer_id="bob", recency=12, total_profit=80,
                  total_revenue=1000, top_revenue_department="Home")
carol = make_record(RETAIL_SCHEMA, customer_id="carol", recency=200, total_profit=None,
                    total_revenue=50)

for a, b in [(alice, bob), (alice, carol), (bob, carol)]:
    s = record_similarity(a, b, RETAIL_SCHEMA, params)
    print(f"{a.id:>5} vs {b.id:<5}  similarity {s:.3f}  vote {vote(s):+.3f}")
