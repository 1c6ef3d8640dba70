import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import fixture_text
from founderfit.errors import FeatureCountOutOfRange, MissingExpert, NoListFound, NoScoreFound, ValueOutOfRange
from founderfit.parsing import (FeatureList, check_feature_count, is_refusal, parse_feature_list, parse_final_score,
                                parse_pros_cons, parse_step_ratings, render_final_score)

RATING = fixture_text("founder_rating_transcript.txt")
REFUSAL = fixture_text("idea_refusal.txt")
FEATURES = fixture_text("founder_features_transcript.txt")


def test_rating_transcript():
    ratings = parse_step_ratings(RATING)
    assert [r.expert_likelihoods for r in ratings] == [(0.9, 0.9, 0.85), (0.85,) * 3, (0.8,) * 3, (0.8,) * 3]
    assert [r.feature for r in ratings] == ["Subject Expertise", "Prior Experience", "Innovation", "Determination"]
    assert parse_final_score(RATING) == 0.85


def test_refusal():
    assert is_refusal(REFUSAL)
    assert parse_final_score(REFUSAL) == 0.0
    with pytest.raises(MissingExpert):
        parse_step_ratings(REFUSAL)


def test_feature_transcript():
    features = parse_feature_list(FEATURES)
    assert len(features) == 4
    assert features.items[0].startswith("Subject Expertise")
    assert features.within_stated_range


def test_pros_cons_transcript():
    entries = {e.subject_id.split(" (")[0]: e for e in parse_pros_cons(FEATURES)}
    assert set(entries) == {"Founder 1", "Founder 3"}
    assert len(entries["Founder 1"].pros) == 3 and len(entries["Founder 1"].cons) == 2
    assert entries["Founder 3"].cons == ["His last startup didn't succeed, bringing his business acumen into question"]


@pytest.mark.parametrize("text,expected", [
    ("1. alpha\n2. beta\n3. gamma", ["alpha", "beta", "gamma"]),
    ("- **alpha**\n- beta\n  continued", ["alpha", "beta continued"]),
    ("• one\n• two", ["one", "two"]),
    ("intro\n1) a\n2) b\n\nSuccessful features:\n1. x\n2. y\n\nNotes:\n- z", ["x", "y"]),
    ("- first list\n\ntext\n\n1. last\n2. list", ["last", "list"]),
])
def test_feature_list_formats(text, expected):
    assert list(parse_feature_list(text).items) == expected


def test_feature_list_errors():
    with pytest.raises(NoListFound):
        parse_feature_list("No list here at all.")
    with pytest.raises(FeatureCountOutOfRange):
        check_feature_count(FeatureList(("a", "b")))
    with pytest.raises(FeatureCountOutOfRange):
        check_feature_count(FeatureList(tuple("abcdefghi")))
    assert len(check_feature_count(FeatureList(tuple("abcdefgh")))) == 8


def test_step_ratings_variants():
    text = ("**Step 1: Market**\nAnalyst 1: good. likelihood of success is 80%\n"
            "Analyst 2: Likelihood = 0.7\nAnalyst 3: *Likelihood:* 0.75\nAgreed: 0.75\n"
            "Step 2: Team\nExpert 1: Likelihood: .5\nExpert 2: Likelihood: 0.5\nExpert 3: Likelihood: 1\n")
    r = parse_step_ratings(text)
    assert [x.expert_likelihoods for x in r] == [(0.8, 0.7, 0.75), (0.5, 0.5, 1.0)]
    assert r[0].agreed_note.startswith("Agreed")
    assert r[0].mean == pytest.approx(0.75)


def test_step_ratings_errors():
    with pytest.raises(ValueOutOfRange):
        parse_step_ratings("Step 1: x\nExpert 1: Likelihood: 1.5\nExpert 2: Likelihood: 0.5\nExpert 3: Likelihood: 0.5")
    with pytest.raises(MissingExpert):
        parse_step_ratings("Step 1: x\nExpert 1: Likelihood: 0.5\nExpert 2: Likelihood: 0.5")
    with pytest.raises(MissingExpert):
        parse_step_ratings("")


def test_single_expert_mode():
    r = parse_step_ratings("Step 1: x\nLikelihood: 0.4\nStep 2: y\nLikelihood: 0.6", experts=1)
    assert [x.expert_likelihoods for x in r] == [(0.4,), (0.6,)]


@pytest.mark.parametrize("text,expected", [
    ("Overall likelihood of success: 0.63", 0.63),
    ("**Overall likelihood of success:** 63%", 0.63),
    ("Founder score: 0.71", 0.71),
    ("We went back and forth. Step 3 rated 0.9.\nOverall likelihood of success: 0.6625", 0.6625),
    ("0.5", 0.5),
    ("Likelihood settled at 1e-3 after review", 0.001),
])
def test_final_score(text, expected):
    assert parse_final_score(text) == pytest.approx(expected)


def test_final_score_missing():
    with pytest.raises(NoScoreFound):
        parse_final_score("Nothing numeric here.")
    with pytest.raises(NoScoreFound):
        parse_final_score("It scores 7 out of 10")


@given(st.floats(0.0, 1.0, allow_nan=False))
def test_final_score_roundtrip(x):
    assert parse_final_score(render_final_score(x)) == x


@given(st.text(max_size=200))
def test_parsers_never_crash(text):
    for fn in (parse_final_score, parse_step_ratings, parse_feature_list):
        try:
            fn(text)
        except (NoScoreFound, MissingExpert, NoListFound, ValueOutOfRange):
            pass
    parse_pros_cons(text)


def test_refusal_vocabulary():
    assert is_refusal("I cannot help with that request.")
    assert not is_refusal("A strong, ethical marketplace.")
