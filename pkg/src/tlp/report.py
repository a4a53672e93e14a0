"""Report emission: tables, plot-ready distribution CSVs and a summary."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .evaluation import METRICS, ExperimentResults, gains_table, proximity_friedman
from .power import (
    IGRRecord,
    PowerTests,
    family_aggregate,
    rankings_by_point,
)
from .proximity import ProximityPoint, is_available
from .registry import REGISTRY

IGR_COLUMNS = ("window", "proximity", "feature", "family", "igr")


class ReportError(OSError):
    pass


@dataclass
class PowerReport:
    records: list[IGRRecord] = field(default_factory=list)
    tests: PowerTests | None = None
    tests_reason: str = ""


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(round(v, 12))
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_num(v) for v in row])


def _point_key(label: str):
    return ProximityPoint.parse(label)


def write_igr_records(records: Sequence[IGRRecord], path: str | Path) -> None:
    _write_csv(Path(path), IGR_COLUMNS, ((r.window, r.point, r.feature, r.family, r.igr) for r in records))


def read_igr_records(path: str | Path, registry=REGISTRY) -> list[IGRRecord]:
    out = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in IGR_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"IGR table {path} lacks columns: {missing}")
        for rec in reader:
            point = ProximityPoint.parse(rec["proximity"])
            feature = rec["feature"]
            out.append(IGRRecord(int(rec["window"]), point.label, feature, rec["family"], float(rec["igr"]),
                                 is_available(feature, point, registry)))
    return out


def tests_to_dict(tests: PowerTests | None, reason: str = "") -> dict:
    if tests is None:
        return {"available": False, "reason": reason}

    def fr(res):
        return {"chi_square": res.chi_square, "df": res.df, "p_value": res.p_value,
                "kendalls_w": res.kendalls_w, "n_blocks": res.n_blocks, "n_treatments": res.n_treatments}

    i = tests.interaction
    return {
        "available": True,
        "FeatureFamily": fr(tests.family),
        "Proximity": fr(tests.proximity),
        "Proximity x FeatureFamily": {"f_statistic": i.f_statistic, "df_effect": i.df_effect,
                                      "df_residual": i.df_residual, "p_value": i.p_value},
    }


def emit_report(results: ExperimentResults, power: PowerReport | None, out_dir: str | Path, top_k: int = 10) -> dict:
    """Write every report file under ``out_dir`` and return the file manifest.

    The manifest maps each file name to its size and SHA-256 digest and is
    itself written to ``manifest.json``.
    """
    if not results.rows:
        raise ValueError("no evaluation results to report")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("", encoding="utf-8")
        probe.unlink()
    except OSError as exc:
        raise ReportError(f"output directory {out} is not writable: {exc}") from exc

    written: list[str] = []
    points = sorted({r.proximity for r in results.rows}, key=_point_key)
    classifiers = sorted({r.classifier for r in results.rows})

    gains = gains_table(results)
    rows = []
    for p in points:
        for m in METRICS:
            rows.append([p, m, *(gains[p][m].get(c, math.nan) for c in classifiers), gains[p][m]["mean"]])
    _write_csv(out / "gains.csv", ["proximity", "metric", *classifiers, "mean"], rows)
    written.append("gains.csv")

    friedman = proximity_friedman(results)
    _write_csv(out / "friedman.csv",
               ["classifier", "metric", "chi_square", "df", "p_value", "kendalls_w", "n_blocks", "note"],
               ([f.classifier, f.metric,
                 *( (f.result.chi_square, f.result.df, f.result.p_value, f.result.kendalls_w, f.result.n_blocks)
                    if f.result else (math.nan, "", math.nan, math.nan, 0)),
                 f.reason] for f in friedman))
    written.append("friedman.csv")

    _write_csv(out / "distribution_accuracy.csv",
               ["project", "proximity", "classifier", "balancing", "selection", "window", *METRICS],
               ([r.project, r.proximity, r.classifier, r.balancing, r.selection, r.window,
                 *(getattr(r.metrics, m) for m in METRICS)] for r in results.rows))
    written.append("distribution_accuracy.csv")

    _write_csv(out / "distribution_baseline.csv", ["project", "proximity", "window", *METRICS],
               ([b.project, b.proximity, b.window, *(getattr(b.metrics, m) for m in METRICS)]
                for b in results.baselines))
    written.append("distribution_baseline.csv")

    has_power = power is not None and bool(power.records)
    rankings = {}
    if has_power:
        rankings = rankings_by_point(power.records)
        for name, view in (("top10.csv", "top"), ("bottom10.csv", "bottom")):
            body = []
            for p in sorted(rankings, key=_point_key):
                for r in getattr(rankings[p], view)(top_k):
                    body.append([p, r.rank, r.feature, r.family, r.mean_igr])
            _write_csv(out / name, ["proximity", "rank", "feature", "family", "mean_igr"], body)
            written.append(name)
        write_igr_records(power.records, out / "distribution_igr.csv")
        written.append("distribution_igr.csv")
        _write_csv(out / "family_igr.csv", ["window", "proximity", "family", "mean_igr", "max_igr"],
                   ([s.window, s.point, s.family, s.mean_igr, s.max_igr] for s in family_aggregate(power.records)))
        written.append("family_igr.csv")
        tests = tests_to_dict(power.tests, power.tests_reason)
        body = []
        if tests["available"]:
            for factor in ("FeatureFamily", "Proximity"):
                t = tests[factor]
                body.append([factor, "friedman", t["chi_square"], t["df"], "", t["p_value"], t["kendalls_w"]])
            t = tests["Proximity x FeatureFamily"]
            body.append(["Proximity x FeatureFamily", "aligned-rank F", t["f_statistic"], t["df_effect"],
                         t["df_residual"], t["p_value"], ""])
        _write_csv(out / "power_tests.csv", ["factor", "test", "statistic", "df", "df_residual", "p_value",
                                             "kendalls_w"], body)
        written.append("power_tests.csv")

    (out / "summary.md").write_text(_summary(results, gains, friedman, power if has_power else None, rankings,
                                             classifiers, points, top_k), encoding="utf-8")
    written.append("summary.md")

    manifest = {"files": {}}
    for name in written:
        data = (out / name).read_bytes()
        manifest["files"][name] = {"bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()}
    manifest["power_section"] = has_power
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def _fmt(v, digits=3) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "n/a"
    return f"{v:.{digits}f}"


def _summary(results, gains, friedman, power, rankings, classifiers, points, top_k) -> str:
    lines = ["# TLP report", ""]
    windows = {p: len({r.window for r in results.rows if r.proximity == p}) for p in points}
    lines.append("## Evaluation")
    lines.append("")
    lines.append(f"{len(results.rows)} result rows over {len(points)} proximity point(s) and "
                 f"{len(classifiers)} classifier(s).")
    if windows:
        lines.append("Windows per point: " + ", ".join(f"{p} {n}" for p, n in windows.items()) + ".")
    failed = [r for r in results.rows if r.error]
    if failed:
        lines.append(f"{len(failed)} cell(s) failed and carry NaN metrics.")
    lines += ["", "### Gain over random (%; kappa in percentage points), mean across classifiers", ""]
    lines.append("| proximity | " + " | ".join(METRICS) + " |")
    lines.append("|---" * (len(METRICS) + 1) + "|")
    for p in points:
        lines.append(f"| {p} | " + " | ".join(_fmt(gains[p][m]['mean'], 1) for m in METRICS) + " |")
    lines += ["", "### Friedman test across proximity points", ""]
    lines.append("| classifier | metric | chi-square | p-value | Kendall's W |")
    lines.append("|---|---|---|---|---|")
    for f in friedman:
        if f.result is None:
            lines.append(f"| {f.classifier} | {f.metric} | n/a | n/a | n/a |")
        else:
            lines.append(f"| {f.classifier} | {f.metric} | {_fmt(f.result.chi_square, 2)} | "
                         f"{f.result.p_value:.3g} | {_fmt(f.result.kendalls_w)} |")
    lines += ["", "## Feature power", ""]
    if power is None:
        lines.append("Power analysis absent: no IGR records were supplied.")
    else:
        for p in sorted(rankings, key=_point_key):
            lines += [f"### Top {top_k} at {p}", "", "| rank | feature | family | mean IGR |", "|---|---|---|---|"]
            for r in rankings[p].top(top_k):
                lines.append(f"| {r.rank} | {r.feature} | {r.family} | {r.mean_igr:.6f} |")
            lines.append("")
        tests = tests_to_dict(power.tests, power.tests_reason)
        if tests["available"]:
            lines += ["### Factor tests on IGR", "", "| factor | p-value |", "|---|---|"]
            for k in ("FeatureFamily", "Proximity", "Proximity x FeatureFamily"):
                lines.append(f"| {k} | {tests[k]['p_value']:.3g} |")
        else:
            lines.append(f"Factor tests not run: {tests['reason']}")
    return "\n".join(lines) + "\n"
