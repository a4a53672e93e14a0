"""Command-line front end.

Stages communicate through files under the output directory::

    ingest/      audit.json, link_stats.json, rejections.jsonl, survivors.txt
    features/    <point>.csv, exclusions.csv
    evaluation/  results.csv, baseline.csv
    power/       igr.csv, rankings.json, power_tests.json
    report/      emitted by ``report``
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("tlp")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage().strip()}\n{self.prog}: error: {message}")


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tlp", description="Ticket-level defect prediction toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    def common(p):
        p.add_argument("--config", help="JSON run configuration (default: $TLP_CONFIG)")
        p.add_argument("--out", dest="out_dir", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--project")

    def inputs(p):
        p.add_argument("--tickets")
        p.add_argument("--commits")

    def points(p):
        p.add_argument("--point", "--points", dest="points", action="append", type=_csv_list,
                       help="proximity point(s): open, inprogress, closed")

    def windows(p):
        p.add_argument("--window-init", type=int)
        p.add_argument("--window-step", type=int)

    p = sub.add_parser("ingest", help="link, label and filter the corpus")
    common(p), inputs(p)
    p.add_argument("--filters", type=_csv_list)
    p.add_argument("--opening-date-polarity", choices=["sanity", "literal"])

    p = sub.add_parser("featurize", help="build per-proximity feature matrices")
    common(p), inputs(p), points(p)
    p.add_argument("--repo-metrics")
    p.add_argument("--lexicons")
    p.add_argument("--temporal-window", dest="temporal_window_days", type=float)

    p = sub.add_parser("evaluate", help="run the sliding-window experiment grid")
    common(p), points(p), windows(p)
    p.add_argument("--classifiers", type=_csv_list)
    p.add_argument("--balancing", type=_csv_list)
    p.add_argument("--selection", type=_csv_list)
    p.add_argument("--baseline-trials", type=int)

    p = sub.add_parser("power", help="IGR records, rankings and factor tests")
    common(p), points(p), windows(p)
    p.add_argument("--bins", dest="igr_bins", type=int)
    p.add_argument("--top-k", type=int)

    p = sub.add_parser("report", help="summary and plot-data CSVs")
    common(p)
    p.add_argument("--top-k", type=int)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    common(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--prevalence", type=float)
    p.add_argument("--open-signal", type=float)
    p.add_argument("--progress-signal", type=float)
    p.add_argument("--closed-signal", type=float)
    p.add_argument("--dest", help="directory for the corpus files (default: the tickets file's directory)")
    return parser


_OVERRIDES = ("out_dir", "seed", "project", "tickets", "commits", "filters", "opening_date_polarity", "repo_metrics",
              "lexicons", "temporal_window_days", "window_init", "window_step", "balancing", "selection",
              "baseline_trials", "igr_bins", "top_k")


def resolve_config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    changes = {}
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "points", None):
        changes["points"] = [p for group in args.points for p in group]
    if getattr(args, "classifiers", None):
        changes["classifiers"] = [c.upper() for c in args.classifiers]
    cfg = replace(cfg, **changes)
    cfg.validate()
    return cfg


def _require(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing input file: {p}")
    return p


def _points(cfg: RunConfig):
    from .proximity import ProximityPoint

    return sorted({ProximityPoint.parse(p) for p in cfg.points})


def _filter_config(cfg: RunConfig):
    from .corpus import FilterConfig

    clear = dict(cfg.clear_repository)
    manifest = Path(cfg.tickets).parent / "manifest.json"
    if not clear and manifest.exists():
        try:
            clear = json.loads(manifest.read_text(encoding="utf-8")).get("filter_config", {}).get("clear_repository", {})
        except (json.JSONDecodeError, AttributeError):
            clear = {}
        if clear:
            log.info("repository identity taken from %s", manifest)
    return FilterConfig(clear_repository=clear, snoring_fraction=cfg.snoring_fraction,
                        opening_date_polarity=cfg.opening_date_polarity)


def _load(cfg: RunConfig):
    from .corpus import ingest, load_corpus

    tickets, commits, rejections = load_corpus(_require(cfg.tickets), _require(cfg.commits))
    labeled, survivors, audit, stats = ingest(tickets, commits, cfg.filters, _filter_config(cfg))
    return tickets, commits, rejections, labeled, survivors, audit, stats


def cmd_ingest(cfg: RunConfig) -> None:
    from .corpus import write_rejections

    _, _, rejections, _, survivors, audit, stats = _load(cfg)
    out = Path(cfg.out_dir) / "ingest"
    out.mkdir(parents=True, exist_ok=True)
    (out / "audit.json").write_text(json.dumps(audit.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "link_stats.json").write_text(json.dumps(stats.__dict__, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_rejections(rejections, out / "rejections.jsonl")
    (out / "survivors.txt").write_text("".join(f"{lt.id}\n" for lt in survivors), encoding="utf-8")
    print(f"{audit.input_count} linked tickets, {audit.survivors} survive filters; "
          f"{len(rejections)} rejected records -> {out}")


def _timelines(cfg: RunConfig):
    from .features import RepoMetricsTimeline

    if not cfg.repo_metrics:
        return {}
    path = Path(cfg.repo_metrics)
    if not path.exists():
        if cfg.repo_metrics == RunConfig().repo_metrics:
            log.warning("no repository metrics timeline at %s; code features will be missing", path)
            return {}
        raise DataError(f"missing input file: {path}")
    return {None: RepoMetricsTimeline.read_csv(path)}


def cmd_featurize(cfg: RunConfig) -> None:
    from .features import FeatureContext, featurize, write_feature_matrix
    from .proximity import order_by_proximity
    from .text import load_lexicons

    survivors_path = _require(Path(cfg.out_dir) / "ingest" / "survivors.txt")
    keep = set(survivors_path.read_text(encoding="utf-8").split())
    tickets, commits, _, labeled, _, _, _ = _load(cfg)
    lexicons = load_lexicons(_require(cfg.lexicons)) if cfg.lexicons else None
    ctx = FeatureContext(tickets, labeled, commits, _timelines(cfg), lexicons,
                         temporal_window_days=cfg.temporal_window_days)
    population = [lt for lt in labeled if lt.id in keep and (cfg.project is None or lt.ticket.project == cfg.project)]
    out = Path(cfg.out_dir) / "features"
    out.mkdir(parents=True, exist_ok=True)
    excluded = []
    for point in _points(cfg):
        ordered, exclusions = order_by_proximity(population, point)
        excluded += exclusions
        matrix = featurize([lt for lt, _ in ordered], point, ctx)
        write_feature_matrix(matrix, out / f"{point.value}.csv")
        print(f"{point.label}: {len(matrix)} rows, {len(exclusions)} excluded -> {out / (point.value + '.csv')}")
    with (out / "exclusions.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ticket_id", "point", "reason"])
        for e in excluded:
            writer.writerow([e.ticket_id, e.point.value, e.reason])


def _matrices(cfg: RunConfig):
    from .features import read_feature_matrix

    base = Path(cfg.out_dir) / "features"
    return {p: read_feature_matrix(_require(base / f"{p.value}.csv")) for p in _points(cfg)}


def cmd_evaluate(cfg: RunConfig) -> None:
    from .evaluation import run_experiment_grid, write_baselines, write_results

    results = run_experiment_grid(
        _matrices(cfg), cfg.classifiers, cfg.balancing, cfg.selection, seed=cfg.seed,
        project=cfg.project or "", init=cfg.window_init, step=cfg.window_step,
        train_fraction=cfg.train_fraction, baseline_trials=cfg.baseline_trials,
    )
    out = Path(cfg.out_dir) / "evaluation"
    out.mkdir(parents=True, exist_ok=True)
    write_results(results.rows, out / "results.csv")
    write_baselines(results.baselines, out / "baseline.csv")
    setups = len(cfg.classifiers) * len(cfg.balancing) * len(cfg.selection)
    print(f"{len(results.rows)} result rows ({setups} setups per proximity) -> {out}")


def cmd_power(cfg: RunConfig) -> None:
    from .evaluation import plan_windows
    from .power import compute_igr_records, rankings_by_point, two_way_power_analysis
    from .registry import REGISTRY
    from .report import tests_to_dict, write_igr_records
    from .stats import InsufficientDataError

    records = []
    for point, matrix in _matrices(cfg).items():
        if not len(matrix):
            continue
        plan = plan_windows(len(matrix), cfg.window_init, cfg.window_step, cfg.train_fraction)
        records += compute_igr_records(matrix, plan, REGISTRY, cfg.igr_bins)
    out = Path(cfg.out_dir) / "power"
    out.mkdir(parents=True, exist_ok=True)
    write_igr_records(records, out / "igr.csv")
    rankings = {p: [{"rank": r.rank, "feature": r.feature, "family": r.family, "mean_igr": r.mean_igr}
                    for r in ranking.rows]
                for p, ranking in rankings_by_point(records).items()}
    (out / "rankings.json").write_text(json.dumps(rankings, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    try:
        tests, reason = two_way_power_analysis(records), ""
    except InsufficientDataError as exc:
        tests, reason = None, str(exc)
    (out / "power_tests.json").write_text(json.dumps(tests_to_dict(tests, reason), indent=2, sort_keys=True) + "\n",
                                         encoding="utf-8")
    print(f"{len(records)} IGR records -> {out}")


def cmd_report(cfg: RunConfig) -> None:
    from .evaluation import ExperimentResults, read_baselines, read_results
    from .power import two_way_power_analysis
    from .report import PowerReport, emit_report, read_igr_records
    from .stats import InsufficientDataError

    ev = Path(cfg.out_dir) / "evaluation"
    results = ExperimentResults(read_results(_require(ev / "results.csv")), read_baselines(_require(ev / "baseline.csv")))
    power = None
    igr_path = Path(cfg.out_dir) / "power" / "igr.csv"
    if igr_path.exists():
        records = read_igr_records(igr_path)
        try:
            power = PowerReport(records, two_way_power_analysis(records))
        except InsufficientDataError as exc:
            power = PowerReport(records, None, str(exc))
    manifest = emit_report(results, power, Path(cfg.out_dir) / "report", cfg.top_k)
    print(f"{len(manifest['files'])} report files -> {Path(cfg.out_dir) / 'report'}")


def cmd_synth(cfg: RunConfig, args) -> None:
    from .synth import GeneratorSpec, generate

    params = {"n_tickets": args.n, "seed": cfg.seed}
    for flag, name in (("prevalence", "prevalence"), ("open_signal", "open_signal"),
                       ("progress_signal", "progress_signal"), ("closed_signal", "closed_signal")):
        if getattr(args, flag) is not None:
            params[name] = getattr(args, flag)
    if cfg.project:
        params["project"] = cfg.project
    try:
        spec = GeneratorSpec(**params)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dest = Path(args.dest) if args.dest else Path(cfg.tickets).parent
    corpus = generate(spec)
    paths = corpus.write(dest)
    # keep the configured file names pointing at the generated corpus
    for key, target in (("tickets", cfg.tickets), ("commits", cfg.commits), ("repo_metrics", cfg.repo_metrics)):
        if target and Path(target).parent == dest and Path(target) != paths[key]:
            paths[key].replace(target)
    print(f"{len(corpus.tickets)} tickets, {len(corpus.commits)} commits -> {dest}")


def run_cli(argv: list[str] | None = None) -> int:
    from .corpus import CorpusError
    from .features import FeatureError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_help())
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        if args.command == "synth":
            cmd_synth(cfg, args)
        else:
            {"ingest": cmd_ingest, "featurize": cmd_featurize, "evaluate": cmd_evaluate,
             "power": cmd_power, "report": cmd_report}[args.command](cfg)
    except (UsageError, ConfigError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CorpusError, FeatureError, OSError, ValueError) as exc:
        print(f"tlp: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
