import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_cosine, oracle_founder_score, random_founder, random_idea
from founderfit.embedding import DeterministicEmbedder
from founderfit.errors import CorruptFile, DimensionMismatch, EmptyClass, VersionMismatch
from founderfit.index import (FOUNDER_SCORE_MAX, FOUNDER_SCORE_MIN, EmbeddedFounder, ScoredMatch, SimilarityIndex,
                              build_index, founder_similarity, idea_similarity, load_index, save_index,
                              select_neighbors)
from founderfit.ingest import FounderRecord, IdeaRecord, Outcome


def _founder(**kw):
    base = dict(id="a", description="d", highest_degree=1, top_institution=False, majors=frozenset(),
                prior_jobs="", outcome=Outcome.SUCCESS)
    base.update(kw)
    return FounderRecord(**base)


@pytest.mark.parametrize("majors", [frozenset(), frozenset({0}), frozenset({0, 6}), frozenset(range(12))])
def test_identical_profile_score(majors):
    rng = np.random.default_rng(0)
    f = EmbeddedFounder(_founder(majors=majors), rng.normal(size=32).astype(np.float32),
                        rng.normal(size=32).astype(np.float32))
    assert founder_similarity(f, f) == 2 + len(majors) / 5


def test_extreme_bounds_reachable():
    v = np.ones(4, np.float32)
    a = EmbeddedFounder(_founder(highest_degree=0, top_institution=False), v, v)
    b = EmbeddedFounder(_founder(highest_degree=3, top_institution=True), -v, -v)
    assert founder_similarity(a, b) == pytest.approx(FOUNDER_SCORE_MIN)
    full = frozenset(range(12))
    c = EmbeddedFounder(_founder(majors=full), v, v)
    assert founder_similarity(c, c) == pytest.approx(FOUNDER_SCORE_MAX)


@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1))
def test_symmetry_and_bounds(seed):
    rng = np.random.default_rng(seed)
    a, b = random_founder(rng, 0), random_founder(rng, 1)
    s = founder_similarity(a, b)
    assert s == founder_similarity(b, a)
    assert FOUNDER_SCORE_MIN <= s <= FOUNDER_SCORE_MAX
    assert s == pytest.approx(oracle_founder_score(a, b), abs=1e-9)


def test_idea_similarity():
    rng = np.random.default_rng(1)
    a, b = random_idea(rng, 0), random_idea(rng, 1)
    assert idea_similarity(a, b) == pytest.approx(oracle_cosine(a.desc_vec, b.desc_vec), abs=1e-9)


def _m(rid, score, outcome):
    return ScoredMatch(rid, score, Outcome.parse(outcome))


def test_select_neighbors_panel():
    matches = [_m("a", 0.9, "s"), _m("b", 0.8, "s"), _m("c", 0.7, "s"), _m("d", 0.1, "f"), _m("e", 0.05, "f")]
    sel = select_neighbors(matches, k=2)
    assert [m.record_id for m in sel.successes] == ["a", "b"]
    assert [m.record_id for m in sel.failures] == ["d", "e"]
    # best of each class, then the next best overall
    assert [m.record_id for m in sel.panel] == ["a", "b", "d"]


def test_select_neighbors_ties_by_id():
    matches = [_m("z", 0.5, "s"), _m("a", 0.5, "s"), _m("m", 0.5, "f")]
    sel = select_neighbors(matches, k=3)
    assert [m.record_id for m in sel.successes] == ["a", "z"]
    assert [m.record_id for m in sel.panel] == ["a", "m", "z"]


def test_select_neighbors_empty_class():
    with pytest.raises(EmptyClass):
        select_neighbors([_m("a", 1.0, "s")])


@given(st.lists(st.tuples(st.floats(-2.3, 4.4), st.booleans()), min_size=2, max_size=40), st.integers(1, 5))
def test_panel_always_mixed(entries, k):
    matches = [_m(f"r{i}", s, "s" if ok else "f") for i, (s, ok) in enumerate(entries)]
    if len({m.outcome for m in matches}) < 2:
        return
    sel = select_neighbors(matches, k)
    assert {m.outcome for m in sel.panel} == {Outcome.SUCCESS, Outcome.FAILURE}
    assert len(sel.panel) == min(3, len(matches))
    assert len(sel.successes) <= k and len(sel.failures) <= k


def _random_index(n=1000, dim=16, seed=7):
    rng = np.random.default_rng(seed)
    return SimilarityIndex([random_founder(rng, i, dim) for i in range(n)],
                           [random_idea(rng, i, dim) for i in range(n)], dim), rng


def oracle_top_k(query, items, score_fn, k):
    scored = sorted(((score_fn(query, it), it.record.id, it.record.outcome) for it in items),
                    key=lambda t: (-t[0], t[1]))
    succ = [(rid, s) for s, rid, o in scored if o is Outcome.SUCCESS][:k]
    fail = [(rid, s) for s, rid, o in scored if o is Outcome.FAILURE][:k]
    return succ, fail


def test_retrieval_matches_oracle():
    index, rng = _random_index(n=300)
    for q in range(20):
        query = random_founder(rng, 10_000 + q)
        sel = index.top_k_per_class(query, k=3)
        succ, fail = oracle_top_k(query, index.founders, oracle_founder_score, 3)
        assert [m.record_id for m in sel.successes] == [r for r, _ in succ]
        assert [m.record_id for m in sel.failures] == [r for r, _ in fail]
        for m, (_, s) in zip(sel.successes, succ):
            assert m.score == pytest.approx(s, abs=1e-9)


def test_idea_retrieval_matches_oracle():
    index, rng = _random_index(n=300)

    def score(q, it):
        return oracle_cosine(q.desc_vec, it.desc_vec)

    for q in range(20):
        query = random_idea(rng, 10_000 + q)
        by_vec = index.top_k_ideas(query.desc_vec, k=4)
        by_rec = index.top_k_per_class(query, k=4)
        succ, fail = oracle_top_k(query, index.ideas, score, 4)
        assert [m.record_id for m in by_vec.successes] == [r for r, _ in succ]
        assert [m.record_id for m in by_vec.failures] == [r for r, _ in fail]
        assert by_vec == by_rec


def test_query_dimension_checked():
    index, rng = _random_index(n=10)
    with pytest.raises(DimensionMismatch):
        index.top_k_ideas(np.ones(5, np.float32))


def _small_index():
    emb = DeterministicEmbedder(dim=32)
    founders = [_founder(id="s", description="payments engineer", majors=frozenset({6})),
                _founder(id="f", description="marketing lead", outcome=Outcome.FAILURE, prior_jobs="AdCo")]
    ideas = [IdeaRecord("i1", "payments platform", Outcome.SUCCESS), IdeaRecord("i2", "snack box", Outcome.FAILURE)]
    return build_index(founders, ideas, emb, {"embedding": {"dim": 32}})


def test_roundtrip(tmp_path):
    index = _small_index()
    path = tmp_path / "x.idx"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.meta == index.meta
    assert [f.record for f in loaded.founders] == [f.record for f in index.founders]
    for a, b in zip(loaded.founders, index.founders):
        np.testing.assert_array_equal(a.desc_vec, b.desc_vec)
        np.testing.assert_array_equal(a.jobs_vec, b.jobs_vec)
    save_index(loaded, tmp_path / "y.idx")
    assert (tmp_path / "y.idx").read_bytes() == path.read_bytes()


def test_empty_fields_embedded_as_marker():
    index = _small_index()
    # founder "s" has no prior jobs; its jobs vector is that of the "none" marker
    np.testing.assert_array_equal(index.founder("s").jobs_vec, DeterministicEmbedder(dim=32).embed_one("none"))


def test_truncated_file(tmp_path):
    path = tmp_path / "x.idx"
    save_index(_small_index(), path)
    data = path.read_bytes()
    path.write_bytes(data[:-10])
    with pytest.raises(CorruptFile):
        load_index(path)
    path.write_bytes(data[:20])
    with pytest.raises(CorruptFile):
        load_index(path)


def test_flipped_byte(tmp_path):
    path = tmp_path / "x.idx"
    save_index(_small_index(), path)
    data = bytearray(path.read_bytes())
    data[-1] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptFile):
        load_index(path)


def test_version_and_dim_checks(tmp_path):
    path = tmp_path / "x.idx"
    save_index(_small_index(), path)
    with pytest.raises(DimensionMismatch):
        load_index(path, expected_dim=384)
    data = bytearray(path.read_bytes())
    struct.pack_into("<I", data, 8, 2)
    path.write_bytes(bytes(data))
    with pytest.raises(VersionMismatch):
        load_index(path)
    path.write_bytes(b"NOTANIDX" + bytes(data[8:]))
    with pytest.raises(CorruptFile):
        load_index(path)


def test_stats():
    s = _small_index().stats()
    assert s["founders"] == {"success": 1, "failure": 1}
    assert s["records"] == 4
