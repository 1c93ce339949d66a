"""
The command-line pipeline end to end
====================================

synth -> cleanse -> cluster -> profile, then scoring new customers against
the saved model. Everything lands in a temporary directory.
"""

import tempfile
from pathlib import Path

from custseg.cli import main

work = Path(tempfile.mkdtemp(prefix="custseg-demo-"))
config = work / "retail.cfg"
config.write_text("""\
[schema]
customer_id categorical identifier
recency continuous active
total_profit continuous active
total_revenue continuous active
top_revenue_department categorical supplementary

[params]
max_clusters = 4
max_passes = 3
accuracy = 0.5

[profile]
revenue_field = total_revenue
profit_field = total_profit
""")

steps = [
    ["synth", "--spec", "table1-like", "--out", str(work / "synth")],
    ["cleanse", "--config", str(config), "--in", str(work / "synth" / "data.csv"),
     "--out", str(work / "clean.csv"), "--report", str(work / "cleansing.txt")],
    ["cluster", "--config", str(config), "--in", str(work / "clean.csv"),
     "--out-flat", str(work / "assignments.txt"), "--out-model", str(work / "model.txt"),
     "--trace", str(work / "trace.log")],
    ["profile", "--config", str(config), "--in", str(work / "clean.csv"),
     "--assignments", str(work / "assignments.txt"), "--out", str(work / "reports")],
    ["score", "--model", str(work / "model.txt"), "--in", str(work / "clean.csv"),
     "--out", str(work / "scored.txt")],
]
for argv in steps:
    print(f"\n$ custseg {' '.join(argv[:1])} ...")
    code = main(argv)
    assert code == 0, code

print("\nfirst line of the assignment file:")
print(repr((work / "assignments.txt").read_text().splitlines()[0]))
print("artifacts:", sorted(str(p.relative_to(work)) for p in work.rglob("*") if p.is_file()))
