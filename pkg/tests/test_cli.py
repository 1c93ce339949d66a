import csv
import json

import pytest

from custseg.analysis import as_labels
from custseg.cli import ConfigError, main, parse_config
from custseg.core import Mode, RunParams
from custseg.engine import run
from custseg.io import read_fixed_width, read_model

from conftest import TABLE1_COUNT_PCT, TABLE1_REVENUE_PCT, table1_fixture

SCHEMA_BLOCK = """\
[schema]
customer_id categorical identifier
recency continuous active
total_profit continuous active
total_revenue continuous active
top_revenue_department categorical supplementary
"""
PROFILE_BLOCK = """\
[profile]
revenue_field = total_revenue
profit_field = total_profit
"""


def config(tmp_path, params="", name="cfg.txt"):
    p = tmp_path / name
    p.write_text(SCHEMA_BLOCK + "[params]\n" + params + PROFILE_BLOCK)
    return str(p)


@pytest.fixture(scope="module")
def table1_like(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--spec", "table1-like", "--out", str(out)]) == 0
    return out


def cluster(tmp_path, cfg, data, tag="a"):
    flat, model, trace = (str(tmp_path / f"{tag}.{ext}") for ext in ("flat", "model", "trace"))
    code = main(["cluster", "--config", cfg, "--in", str(data), "--out-flat", flat,
                 "--out-model", model, "--trace", trace])
    return code, flat, model, trace


def test_parse_config():
    cfg = parse_config("# comment\n" + SCHEMA_BLOCK + "[params]\nmax_clusters = 6\nmode = Exact\n"
                       + PROFILE_BLOCK)
    assert cfg.params == RunParams(max_clusters=6, mode=Mode.EXACT)
    assert cfg.profile.revenue_field == "total_revenue"
    assert len(cfg.schema.active) == 3
    for bad in ("[params]\ncolour = red\n", "[params]\naccuracy = 1.5\n", "[weird]\n",
                "[params]\nmax_clusters\n", "[profile]\nrevenue_field = total_revenue\n",
                "[profile]\nrevenue_field = x\nprofit_field = total_profit\n"):
        with pytest.raises(ConfigError):
            parse_config(SCHEMA_BLOCK + bad)
    with pytest.raises(ConfigError):
        parse_config("[schema]\nid categorical identifier\n")


def test_synth(tmp_path, capsys):
    assert main(["synth", "--spec", "planted-4", "--out", str(tmp_path / "a")]) == 0
    assert sorted(p.name for p in (tmp_path / "a").iterdir()) == ["data.csv", "truth.csv"]
    assert main(["synth", "--spec", "planted-4", "--out", str(tmp_path / "b")]) == 0
    for name in ("data.csv", "truth.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    spec = {"n_records": 10, "segments": [
        {"name": "a", "proportion": 0.5, "continuous": {"x": [0, 1]}},
        {"name": "b", "proportion": 0.4, "continuous": {"x": [5, 1]}}]}
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(spec))
    capsys.readouterr()
    assert main(["synth", "--spec", str(p), "--out", str(tmp_path / "c")]) == 2
    assert "proportions must sum to 1" in capsys.readouterr().err


def test_usage_errors_exit_2():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["synth", "--spec", "planted-4"]) == 2


def test_cleanse(tmp_path):
    cfg = config(tmp_path)
    src = tmp_path / "in.csv"
    with open(src, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["total_revenue", "customer_id", "recency", "total_profit",
                    "top_revenue_department"])
        w.writerow(["100", "C1", "3", "20", "Toys"])
        w.writerow(["200", "C2", "", "20", "Home"])
        w.writerow(["300", "C3", "5", "twenty", "Home"])
        w.writerow(["400", "C4", "7", "40", ""])
    out, rep = tmp_path / "out.csv", tmp_path / "rep.txt"
    assert main(["cleanse", "--config", cfg, "--in", str(src), "--out", str(out),
                 "--report", str(rep)]) == 0
    text = rep.read_text()
    assert "rows_read 4" in text and "rows_dropped 2" in text
    lines = out.read_text().splitlines()
    assert lines == ["customer_id,recency,total_profit,total_revenue,top_revenue_department",
                     "C1,3,20,100,Toys", "C4,7,40,400,"]
    out2 = tmp_path / "out2.csv"
    assert main(["cleanse", "--config", cfg, "--in", str(out), "--out", str(out2),
                 "--report", str(rep)]) == 0
    assert out2.read_bytes() == out.read_bytes()
    assert "rows_dropped 0" in rep.read_text()
    assert main(["cleanse", "--config", str(tmp_path / "nope.txt"), "--in", str(src),
                 "--out", str(out), "--report", str(rep)]) == 2


def test_cluster_table1_like(tmp_path, table1_like, capsys):
    code, flat, model, trace = cluster(tmp_path, config(tmp_path), table1_like / "data.csv")
    assert code == 0
    stdout = capsys.readouterr().out
    assert stdout.startswith("clusters: 4\n")
    schema = read_model(model).schema
    _, assignments = read_fixed_width(flat, schema)
    assert len(assignments) == 8000
    assert len({a.cluster_id for a in assignments}) == 4
    assert open(trace).read().startswith("pass=1\t")


def test_cluster_single_cluster_and_bad_input(tmp_path, table1_like):
    cfg = config(tmp_path, "max_clusters = 1\n")
    code, flat, model, _ = cluster(tmp_path, cfg, table1_like / "data.csv")
    assert code == 0
    _, assignments = read_fixed_width(flat, read_model(model).schema)
    assert {a.cluster_id for a in assignments} == {0}
    assert cluster(tmp_path, cfg, tmp_path / "missing.csv")[0] == 2
    (tmp_path / "binary.csv").write_bytes(b"\xff\xfe\x00")
    assert cluster(tmp_path, cfg, tmp_path / "binary.csv")[0] == 2


def write_table1(tmp_path):
    from custseg.core import RETAIL_SCHEMA
    from custseg.engine import Assignment
    from custseg.io import write_csv, write_fixed_width
    records, labels = table1_fixture()
    data = tmp_path / "t1.csv"
    write_csv(data, records, RETAIL_SCHEMA)
    flat = tmp_path / "t1.flat"
    write_fixed_width(records, [Assignment(r.id, labels[r.id], 1.0, 1.0) for r in records],
                      RETAIL_SCHEMA, flat)
    return data, flat


def test_profile_table1(tmp_path, capsys):
    data, flat = write_table1(tmp_path)
    out = tmp_path / "rep"
    assert main(["profile", "--config", config(tmp_path), "--in", str(data),
                 "--assignments", str(flat), "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    ids = []
    for line, rank in zip(lines[1:], range(1, 5)):
        cells = line.split()
        assert int(cells[0]) == rank
        cid = int(cells[1])
        ids.append(cid)
        assert abs(float(cells[5]) - TABLE1_COUNT_PCT[cid]) <= 0.01
        assert abs(float(cells[6]) - TABLE1_REVENUE_PCT[cid]) <= 0.01
    assert ids == [3, 1, 2, 0]
    assert sorted(p.name for p in out.iterdir()) == ["histograms.csv", "importance.csv",
                                                     "profiles.csv"]
    imp = list(csv.DictReader(open(out / "importance.csv")))
    assert {r["metric"] for r in imp} == {"chi-square"}

    assert main(["profile", "--config", config(tmp_path), "--in", str(data),
                 "--assignments", str(flat), "--out", str(out), "--importance", "entropy"]) == 0
    imp = list(csv.DictReader(open(out / "importance.csv")))
    assert {r["metric"] for r in imp} == {"entropy"}


def test_profile_rejects_bad_assignments(tmp_path):
    data, flat = write_table1(tmp_path)
    # cluster 3 is outside [0, max_clusters) when max_clusters = 3
    cfg = config(tmp_path, "max_clusters = 3\n")
    assert main(["profile", "--config", cfg, "--in", str(data), "--assignments", str(flat),
                 "--out", str(tmp_path / "r")]) == 2
    lines = flat.read_text().splitlines(keepends=True)
    flat.write_text("".join(lines[:-1]))
    assert main(["profile", "--config", config(tmp_path), "--in", str(data),
                 "--assignments", str(flat), "--out", str(tmp_path / "r")]) == 2


def test_score_reproduces_exact_run(tmp_path):
    assert main(["synth", "--spec", "planted-4", "--out", str(tmp_path / "s")]) == 0
    data = tmp_path / "s" / "data.csv"
    cfg = tmp_path / "p.txt"
    cfg.write_text("[schema]\ncustomer_id categorical identifier\nx1 continuous active\n"
                   "x2 continuous active\nx3 continuous active\n"
                   "channel categorical supplementary\n[params]\nmode = exact\n")
    code, flat, model, _ = cluster(tmp_path, str(cfg), data)
    assert code == 0
    scored = tmp_path / "scored.flat"
    assert main(["score", "--model", model, "--in", str(data), "--out", str(scored)]) == 0
    schema = read_model(model).schema
    _, trained = read_fixed_width(flat, schema)
    _, again = read_fixed_width(scored, schema)
    assert as_labels(trained) == as_labels(again)

    # the input lacks a field the model's schema needs
    other = tmp_path / "other.csv"
    other.write_text("customer_id,x1,x2\nA,1,2\n")
    assert main(["score", "--model", model, "--in", str(other), "--out", str(scored)]) == 2
    bad_model = tmp_path / "bad.model"
    bad_model.write_text("garbage\n")
    assert main(["score", "--model", str(bad_model), "--in", str(data),
                 "--out", str(scored)]) == 2


def test_score_sole_member(tmp_path):
    from custseg.core import RETAIL_SCHEMA, make_record
    from custseg.engine import assign_new
    recs = [make_record(RETAIL_SCHEMA, customer_id=f"C{i}", recency=float(r), total_profit=p,
                        total_revenue=v)
            for i, (r, p, v) in enumerate([(1, 10, 100), (1, 11, 101), (300, 5000, 90000)])]
    res = run(recs, RETAIL_SCHEMA, RunParams(mode=Mode.EXACT, similarity_threshold=0.9))
    sole = next(c for c in res.model.clusters if c.size == 1)
    probe = make_record(RETAIL_SCHEMA, customer_id="new", recency=300, total_profit=5000,
                        total_revenue=90000)
    (a,) = assign_new(res.model, [probe])
    assert a.cluster_id == sole.cluster_id
    assert a.condorcet_value == 1.0


def test_pipeline_is_byte_deterministic(tmp_path):
    def pipeline(root):
        root.mkdir()
        cfg = config(root)
        assert main(["synth", "--spec", "table1-like", "--out", str(root / "s")]) == 0
        assert main(["cleanse", "--config", cfg, "--in", str(root / "s" / "data.csv"),
                     "--out", str(root / "clean.csv"), "--report", str(root / "rep.txt")]) == 0
        code, flat, _, _ = cluster(root, cfg, root / "clean.csv")
        assert code == 0
        assert main(["profile", "--config", cfg, "--in", str(root / "clean.csv"),
                     "--assignments", flat, "--out", str(root / "reports")]) == 0
        return {p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*"))
                if p.is_file() and p.name != "cfg.txt"}
    a = pipeline(tmp_path / "one")
    b = pipeline(tmp_path / "two")
    assert len(a) == 10
    assert a == b
