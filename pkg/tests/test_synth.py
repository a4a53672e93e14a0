import json

import numpy as np
import pytest

from tlp.corpus import load_corpus
from tlp.synth import GeneratorSpec, generate


def test_deterministic_per_seed(tmp_path, small_corpus):
    again = generate(GeneratorSpec(n_tickets=300, seed=7))
    a, b = small_corpus.write(tmp_path / "a"), again.write(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes(), key
    other = generate(GeneratorSpec(n_tickets=300, seed=8))
    assert other.tickets != small_corpus.tickets


def test_written_files_parse_cleanly(tmp_path, small_corpus):
    paths = small_corpus.write(tmp_path)
    tickets, commits, rejections = load_corpus(paths["tickets"], paths["commits"])
    assert not rejections
    assert len(tickets) == len(small_corpus.tickets)
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["spec"]["seed"] == 7
    assert set(manifest["label_model"]["coefficients"]) == {"open_score", "progress_activity", "jit_la_sum"}


def test_prevalence_close_to_target(small_population):
    labeled, _, _, _ = small_population
    rate = np.mean([lt.label for lt in labeled])
    assert 0.3 < rate < 0.5


def test_zero_signal_gives_uninformative_churn():
    from tlp.corpus import ingest
    from tlp.evaluation import compute_auc

    c = generate(GeneratorSpec(n_tickets=600, seed=2, open_signal=0, progress_signal=0, closed_signal=0))
    labeled, _, _, _ = ingest(c.tickets, c.commits)
    churn = [sum(x.la for x in lt.commits) for lt in labeled]
    assert abs(compute_auc([lt.label for lt in labeled], churn) - 0.5) < 0.08


@pytest.mark.parametrize("kwargs", [{"prevalence": 0}, {"prevalence": 1}, {"closed_signal": -1}, {"n_tickets": 0}])
def test_invalid_spec(kwargs):
    with pytest.raises(ValueError):
        GeneratorSpec(**kwargs)
