import json
from datetime import datetime, timedelta, timezone

import pytest

from tlp.corpus import (
    FILTER_ORDER, CorpusError, DuplicateTicketError, FilterConfig, RawCommit, RawTicket, SchemaVersionError,
    apply_filters, ingest, label_tickets, link_commits_with_stats, read_commits, read_tickets,
    write_commits, write_tickets,
)

T0 = datetime(2020, 1, 1, tzinfo=timezone.utc)


def ticket(i, created=0, assigned=1, project="P"):
    return RawTicket(f"P-{i}", project, "Bug", "Major", T0 + timedelta(days=created),
                     None if assigned is None else T0 + timedelta(days=assigned), assignee="dev")


def commit(h, tids, day, buggy=False):
    return RawCommit(h, "dev", T0 + timedelta(days=day), tuple(tids), buggy, la=10, ld=2)


def test_roundtrip(tmp_path, small_corpus):
    write_tickets(small_corpus.tickets, tmp_path / "t.jsonl")
    write_commits(small_corpus.commits, tmp_path / "c.csv")
    tickets, rej_t = read_tickets(tmp_path / "t.jsonl")
    commits, rej_c = read_commits(tmp_path / "c.csv")
    assert not rej_t and not rej_c
    assert tickets == small_corpus.tickets
    assert commits == small_corpus.commits


def test_bad_lines_are_rejected_with_line_numbers(tmp_path):
    write_tickets([ticket(1)], tmp_path / "t.jsonl")
    with (tmp_path / "t.jsonl").open("a") as fh:
        fh.write("{not json\n")
        fh.write(json.dumps({"id": "P-9"}) + "\n")
    tickets, rejections = read_tickets(tmp_path / "t.jsonl")
    assert [t.id for t in tickets] == ["P-1"]
    assert [r.line_no for r in rejections] == [2, 3]


def test_duplicate_and_schema_errors(tmp_path):
    write_tickets([ticket(1), ticket(1)], tmp_path / "t.jsonl")
    with pytest.raises(DuplicateTicketError):
        read_tickets(tmp_path / "t.jsonl")
    obj = json.loads((tmp_path / "t.jsonl").read_text().splitlines()[0])
    obj["schema_version"] = 99
    (tmp_path / "v.jsonl").write_text(json.dumps(obj) + "\n")
    with pytest.raises(SchemaVersionError):
        read_tickets(tmp_path / "v.jsonl")
    with pytest.raises(CorpusError):
        read_tickets(tmp_path / "missing.jsonl")


def test_commit_columns_required(tmp_path):
    (tmp_path / "c.csv").write_text("hash,author\nabc,dev\n")
    with pytest.raises(CorpusError):
        read_commits(tmp_path / "c.csv")


def test_linking_and_labels():
    tickets = [ticket(1), ticket(2), ticket(3)]
    commits = [commit("b", ["P-1"], 5, buggy=True), commit("a", ["P-1", "P-2"], 3), commit("z", ["X-1"], 4)]
    linked, stats = link_commits_with_stats(tickets, commits)
    assert [lt.id for lt in linked] == ["P-1", "P-2"]
    assert [c.hash for c in linked[0].commits] == ["a", "b"]
    assert (stats.linked_tickets, stats.unlinked_tickets, stats.unlinked_commits) == (2, 1, 1)
    labels = {lt.id: lt.label for lt in label_tickets(linked)}
    assert labels == {"P-1": True, "P-2": False}


def test_filters_attribute_each_removal_once():
    tickets = [ticket(i, created=i, assigned=i + 1) for i in range(1, 11)]
    tickets.append(ticket(11, created=50, assigned=51, project="Q"))
    commits = [commit(f"c{i}", [f"P-{i}"], i + 2) for i in range(2, 11)]
    commits.append(commit("q", ["P-11"], 52))
    commits.append(commit("early", ["P-1"], 0))                    # before creation
    commits.append(commit("shared", ["P-2", "P-3"], 9, buggy=True))  # buggy only via shared commit
    labeled = label_tickets(link_commits_with_stats(tickets, commits)[0])
    survivors, audit = apply_filters(labeled, config=FilterConfig(clear_repository={"Q": False}))
    assert audit.removed["FirstCommitAfterOpeningDate"] == ["P-1"]
    assert set(audit.removed["ExclusiveBuggyCommitsOnly"]) == {"P-2", "P-3"}
    assert audit.removed["ClearRepository"] == ["P-11"]
    assert audit.removed["NoSnoring"] == ["P-10"]  # floor(0.2 * 7) = 1, the latest closed
    removed = [t for ids in audit.removed.values() for t in ids]
    assert len(removed) == len(set(removed))
    assert audit.survivors == len(survivors) == len(labeled) - audit.removed_count


def test_literal_polarity_flips_opening_filter():
    labeled = label_tickets(link_commits_with_stats([ticket(1, created=2)], [commit("a", ["P-1"], 5)])[0])
    kept, _ = apply_filters(labeled, ["FirstCommitAfterOpeningDate"])
    assert kept
    kept, _ = apply_filters(labeled, ["FirstCommitAfterOpeningDate"], FilterConfig(opening_date_polarity="literal"))
    assert not kept


def test_unknown_filter_rejected():
    with pytest.raises(ValueError):
        apply_filters([], ["NoSuchFilter"])


def test_planted_anomalies_are_each_caught(small_corpus):
    c = small_corpus
    _, _, audit, _ = ingest(c.tickets, c.commits,
                            config=FilterConfig(clear_repository=c.manifest["filter_config"]["clear_repository"]))
    for name in FILTER_ORDER:
        for tid in c.manifest["planted"].get(name, []):
            hit = [f for f, ids in audit.removed.items() if tid in ids]
            assert hit, (name, tid)
