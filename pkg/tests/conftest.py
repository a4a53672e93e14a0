"""Shared fixtures and the per-criterion acceptance summary."""

from __future__ import annotations

import time
from collections import defaultdict
from pathlib import Path

import pytest

from tlp.cli import run_cli
from tlp.corpus import FilterConfig, ingest
from tlp.features import FeatureContext, featurize
from tlp.proximity import POINTS, order_by_proximity
from tlp.synth import GeneratorSpec, generate

_OUTCOMES: dict[int, list[tuple[str, str]]] = defaultdict(list)
_TITLES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker.args
        _TITLES[number] = title
        _OUTCOMES[number].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        results = _OUTCOMES[number]
        failed = [name for name, outcome in results if outcome != "passed"]
        status = "FAIL" if failed else "PASS"
        line = f"{status} criterion {number}: {_TITLES[number]} ({len(results) - len(failed)}/{len(results)} checks)"
        if failed:
            line += " failing: " + ", ".join(failed)
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus():
    return generate(GeneratorSpec(n_tickets=300, seed=7))


@pytest.fixture(scope="session")
def small_population(small_corpus):
    c = small_corpus
    cfg = FilterConfig(clear_repository=c.manifest["filter_config"]["clear_repository"])
    labeled, survivors, audit, stats = ingest(c.tickets, c.commits, config=cfg)
    ctx = FeatureContext(c.tickets, labeled, c.commits, {None: c.timeline})
    return labeled, survivors, audit, ctx


@pytest.fixture(scope="session")
def small_matrices(small_population):
    _, survivors, _, ctx = small_population
    out = {}
    for p in POINTS:
        ordered, _ = order_by_proximity(survivors, p)
        out[p] = featurize([lt for lt, _ in ordered], p, ctx)
    return out


def run_pipeline(workdir: Path, n_tickets: int = 2000, seed: int = 0, extra=()) -> dict:
    """Run every CLI stage on a fresh synthetic corpus; returns per-stage seconds."""
    data, out = workdir / "data", workdir / "out"
    common = ["--out", str(out), "--seed", str(seed)]
    inputs = ["--tickets", str(data / "tickets.jsonl"), "--commits", str(data / "commits.csv")]
    stages = [
        ("synth", ["synth", *common, "--n", str(n_tickets), "--dest", str(data)]),
        ("ingest", ["ingest", *common, *inputs]),
        ("featurize", ["featurize", *common, *inputs, "--repo-metrics", str(data / "repo_metrics.csv")]),
        ("evaluate", ["evaluate", *common, *extra]),
        ("power", ["power", *common]),
        ("report", ["report", *common]),
    ]
    timings = {}
    for name, argv in stages:
        t0 = time.perf_counter()
        code = run_cli(argv)
        timings[name] = time.perf_counter() - t0
        if code != 0:
            raise RuntimeError(f"stage {name} exited with {code}")
    return timings


@pytest.fixture(scope="session")
def full_run(tmp_path_factory):
    """The 2,000-ticket synthetic corpus pushed through every stage with default settings."""
    root = tmp_path_factory.mktemp("full")
    timings = run_pipeline(root)
    return root, timings
