import math

import pytest
from hypothesis import given, strategies as st

from tlp.text import (
    UndefinedScoreError, build_tfidf_model, count_syllables, default_lexicons, flesch_reading_ease,
    grammar_counts, jaccard, lexicon_count, sentiment, similarity, split_sentences, tokenize,
)
from datetime import datetime, timezone

words = st.lists(st.sampled_from("alpha beta gamma delta epsilon crash fix index".split()), max_size=20)


def test_tokenize_sentences():
    s = tokenize("The parser fails. Fix it now! Does it work?")
    assert s.sentence_count == 3
    assert s.tokens[:2] == ("the", "parser")
    assert split_sentences("") == []


@pytest.mark.parametrize("word,n", [("cat", 1), ("table", 2), ("readability", 5), ("make", 1), ("see", 1)])
def test_syllables(word, n):
    assert count_syllables(word) == n


def test_flesch_hand_value():
    # 2 sentences, 6 words, 6 syllables
    expected = 206.835 - 1.015 * 3 - 84.6 * 1
    assert flesch_reading_ease("The cat sat. The dog ran.") == pytest.approx(expected)
    with pytest.raises(UndefinedScoreError):
        flesch_reading_ease("   ")


def test_sentiment_bounds():
    lex = default_lexicons()
    pol, subj = sentiment("This is a terrible, awful crash but a great fix.", lex)
    assert -1 <= pol <= 1 and 0 <= subj <= 1
    assert sentiment("", lex) == (0.0, 0.0)


def test_lexicon_counts_phrases():
    lex = default_lexicons()
    text = "If the build fails, the system must retry. It must log, unless told otherwise; see below."
    assert lexicon_count(text, "imperatives", lex) == 2
    assert lexicon_count(text, "conditionals", lex) == 3  # if, unless, otherwise
    assert lexicon_count(text, "continuances", lex) == 1
    assert lexicon_count("", "options", lex) == 0
    # whole words only
    assert lexicon_count("iffy whenever", "conditionals", lex) == 0


def test_grammar_counts_nonnegative():
    g = grammar_counts(tokenize("The server must restart the index. It should not crash."))
    assert min(g.__dict__.values()) >= 0
    assert 0 <= g.action_density <= 1


@given(words, words)
def test_jaccard_properties(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0 <= jaccard(a, b) <= 1
    assert jaccard(a, a) == 1.0


@given(words, words)
def test_similarity_bounds_and_symmetry(a, b):
    ta, tb = " ".join(a), " ".join(b)
    model = build_tfidf_model([(ta, datetime(2020, 1, 1, tzinfo=timezone.utc)),
                               ("alpha crash", datetime(2020, 1, 2, tzinfo=timezone.utc))], None)
    for metric in ("jaccard", "euclidean_tf", "tfidf_cosine"):
        v = similarity(ta, tb, metric, model)
        assert 0 <= v <= 1
        assert v == pytest.approx(similarity(tb, ta, metric, model))


def test_tfidf_respects_cutoff():
    t1, t2 = datetime(2020, 1, 1, tzinfo=timezone.utc), datetime(2021, 1, 1, tzinfo=timezone.utc)
    model = build_tfidf_model([("alpha beta", t1), ("beta gamma", t2)], t1)
    assert model.n_docs == 1 and "gamma" not in model.df
    assert math.isclose(similarity("alpha", "alpha", "tfidf_cosine", model), 1.0)


def test_unknown_metric():
    with pytest.raises(ValueError):
        similarity("a", "b", "levenshtein")
    with pytest.raises(ValueError):
        similarity("a", "b", "tfidf_cosine")
