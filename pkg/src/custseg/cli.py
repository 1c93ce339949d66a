"""Command-line pipeline: synth -> cleanse -> cluster -> profile, plus frozen-model scoring.

Every subcommand exits 0 on success and 2 on a usage, configuration or data
error (the message goes to standard error).
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import analysis, engine, io, profiler, synth
from .core import RunParams, Schema, SchemaError, SegmentationError, check_schema, parse_field_line
from .profiler import ProfileSpec

PARAM_TYPES = {"max_clusters": int, "max_passes": int, "accuracy": float,
               "similarity_threshold": float, "histogram_bins": int, "mode": str, "seed": int}
PROFILE_KEYS = ("revenue_field", "profit_field")


class ConfigError(SegmentationError):
    pass


@dataclass(frozen=True)
class Config:
    schema: Schema
    params: RunParams
    profile: Optional[ProfileSpec]


def parse_config(text: str) -> Config:
    """Parse the ``[schema]`` / ``[params]`` / ``[profile]`` key-value format.

    Blank lines and lines starting with ``#`` are ignored.
    """
    section = None
    fields = []
    params: dict = {}
    prof: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("schema", "params", "profile"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if section is None:
            raise ConfigError(f"line {lineno}: content outside a section")
        if section == "schema":
            try:
                fields.append(parse_field_line(line))
            except SchemaError as exc:
                raise ConfigError(f"line {lineno}: {exc}") from None
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if section == "params":
            if key not in PARAM_TYPES:
                raise ConfigError(f"line {lineno}: unknown parameter {key!r}")
            try:
                params[key] = PARAM_TYPES[key](value.lower() if key == "mode" else value)
            except ValueError:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
        else:
            if key not in PROFILE_KEYS:
                raise ConfigError(f"line {lineno}: unknown profile key {key!r}")
            prof[key] = value
    schema = Schema(tuple(fields))
    try:
        check_schema(schema)
        run_params = RunParams(**params)
    except (SchemaError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    spec = None
    if prof:
        missing = [k for k in PROFILE_KEYS if k not in prof]
        if missing:
            raise ConfigError(f"[profile] lacks {', '.join(missing)}")
        spec = ProfileSpec(prof["revenue_field"], prof["profit_field"])
        try:
            spec.check(schema)
        except SchemaError as exc:
            raise ConfigError(str(exc)) from None
    return Config(schema, run_params, spec)


def load_config(path) -> Config:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _warn_drops(report: io.CleansingReport, what: str):
    if report.rows_dropped:
        reasons = ", ".join(f"{k}={v}" for k, v in report.reasons.items() if v)
        print(f"{what}: dropped {report.rows_dropped} of {report.rows_read} rows ({reasons})",
              file=sys.stderr)


# -- subcommands ----------------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = synth.load_spec(args.spec)
    data = synth.generate(spec)
    paths = data.write(args.out)
    print(f"wrote {len(data.rows)} records to {paths[0]} and truth to {paths[1]}")
    return 0


def cmd_cleanse(args) -> int:
    cfg = load_config(args.config)
    records, report = io.cleanse(io.read_csv(args.input, cfg.schema), cfg.schema)
    io.write_csv(args.out, records, cfg.schema)
    Path(args.report).write_text(report.to_text(), encoding="utf-8")
    print(f"kept {report.rows_kept} of {report.rows_read} rows")
    return 0


def cmd_cluster(args) -> int:
    cfg = load_config(args.config)
    records, report = io.load_records(args.input, cfg.schema)
    _warn_drops(report, "cluster")
    result = engine.run(records, cfg.schema, cfg.params)
    io.write_fixed_width(records, result.assignments, cfg.schema, args.out_flat)
    io.save_model(result.model, args.out_model)
    Path(args.trace).write_text(result.trace.to_text(), encoding="utf-8")
    model = result.model
    sizes = {c.cluster_id: c.size for c in model.clusters}
    print(f"clusters: {len(model.display_order)}")
    for cid in model.display_order:
        print(f"  cluster {cid}: {sizes[cid]} records ({100.0 * sizes[cid] / len(records):.2f}%)")
    return 0


def cmd_profile(args) -> int:
    cfg = load_config(args.config)
    if cfg.profile is None:
        raise ConfigError("config has no [profile] section")
    records, report = io.load_records(args.input, cfg.schema)
    _warn_drops(report, "profile")
    _, assignments = io.read_fixed_width(args.assignments, cfg.schema)
    labels = analysis.as_labels(assignments)
    bad = sorted({c for c in labels.values() if not 0 <= c < cfg.params.max_clusters})
    if bad:
        raise SegmentationError(f"assignments reference unknown cluster ids {bad}")
    if set(labels) != {r.id for r in records}:
        raise SegmentationError("assignment file and input CSV hold different record ids")
    profiles, _ = profiler.profile(records, labels, cfg.schema, cfg.profile)
    simparams = None
    if analysis.Metric(args.importance) is analysis.Metric.CONDORCET:
        _, simparams = engine.init_model(records, cfg.schema, cfg.params)
    if len(set(labels.values())) >= 2 or args.importance == analysis.Metric.DATABASE_ORDER:
        imp = analysis.importance(args.importance, records, labels, cfg.schema, simparams)
    else:
        imp = analysis.ImportanceReport(analysis.Metric(args.importance), ())
    hists = [profiler.cluster_variable_profile(records, labels, cfg.schema, f.name)
             for f in cfg.schema.profiled]
    io.write_reports(profiles, imp, hists, None, args.out)
    print(profiler.format_profile_table(profiles))
    return 0


def cmd_score(args) -> int:
    model = io.read_model(args.model)
    records, report = io.load_records(args.input, model.schema)
    _warn_drops(report, "score")
    assignments = engine.assign_new(model, records)
    io.write_fixed_width(records, assignments, model.schema, args.out)
    print(f"scored {len(records)} records")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="custseg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic customer file")
    s.add_argument("--spec", required=True, help="JSON spec file or a bundled name "
                   f"({', '.join(synth.BUNDLED)})")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("cleanse", help="drop incomplete, unparseable and duplicate rows")
    s.add_argument("--config", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_cleanse)

    s = sub.add_parser("cluster", help="run demographic clustering")
    s.add_argument("--config", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out-flat", required=True)
    s.add_argument("--out-model", required=True)
    s.add_argument("--trace", required=True)
    s.set_defaults(func=cmd_cluster)

    s = sub.add_parser("profile", help="profile clusters and write reports")
    s.add_argument("--config", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--assignments", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--importance", default=analysis.Metric.CHI_SQUARE.value,
                   choices=[m.value for m in analysis.Metric])
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("score", help="assign new records to a saved model")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_score)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except (SegmentationError, ValueError, OSError) as exc:
        print(f"custseg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
