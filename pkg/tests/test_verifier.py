import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgbanon.exceptions import InfeasibleError
from lgbanon.pipeline import deserialize, lgb, serialize
from lgbanon.synth import random_table
from lgbanon.verifier import (
    BackgroundKnowledge,
    adversary_sweep,
    audit,
    check_k,
    check_l,
    identity_disclosure_prob,
    matching_buckets,
    matching_tuples,
    published_bounds,
    value_disclosure_prob,
)

from conftest import MARK
import oracles


def test_mark_matches_two_tuples(canned_release):
    assert matching_tuples(canned_release, MARK) == {1004, 1008}
    assert matching_buckets(canned_release, MARK, "age") == {1, 2}
    assert identity_disclosure_prob(canned_release, MARK) == Fraction(1, 2)
    assert canned_release.buckets["age"] == {1: (24, 29), 2: (31, 34)}


def test_mark_disease_candidates(canned_release):
    bids = matching_buckets(canned_release, MARK, "disease")
    values = {v for b in bids for v in canned_release.buckets["disease"][b]}
    assert values == {"pneumonia", "bronchitis", "dyspepsia"}


def test_value_disclosure_of_1006(canned_release, example_table):
    bk = BackgroundKnowledge.of(example_table, 1006)
    assert bk.values == {"age": 41, "gender": "M", "zip": 53718}
    assert matching_tuples(canned_release, bk) == {1003, 1006}
    assert value_disclosure_prob(canned_release, bk, "disease", "flu") == Fraction(1, 4)
    assert value_disclosure_prob(canned_release, bk, "disease", "flu") == oracles.disclosure(
        canned_release, bk.values, "disease", "flu")


def test_no_match_is_none(canned_release):
    bk = {"gender": "M", "zip": 99999}
    assert matching_tuples(canned_release, bk) == set()
    assert identity_disclosure_prob(canned_release, bk) is None
    assert value_disclosure_prob(canned_release, bk, "disease", "flu") is None
    with pytest.raises(KeyError):
        value_disclosure_prob(canned_release, bk, "gender", "F")


def test_canned_release_audits_clean(canned_release, example_table):
    report = audit(canned_release, 2, 2, example_table, bks=[MARK])
    assert report["passed"]
    assert report["sweep"]["max_identity"] == "1/2"
    assert report["sweep"]["violations"] == []
    assert report["knowledge"][0]["matches"] == [1004, 1008]


def test_check_k_names_the_group(canned_release):
    assert check_k(canned_release, 2)
    gids = list(canned_release.gids)
    gids[0] = 9  # move tuple 1001 into its own group
    bad = dataclasses.replace(canned_release, gids=tuple(gids))
    v = check_k(bad, 2)
    assert not v and v.where == (1,) and "GID 1" in v.message


def test_check_l_names_the_bucket(canned_release):
    assert check_l(canned_release, 2)
    assert not check_l(canned_release, 3)
    buckets = dict(canned_release.buckets)
    buckets["disease"] = dict(buckets["disease"])
    buckets["disease"][3] = ("flu", "flu")
    v = check_l(dataclasses.replace(canned_release, buckets=buckets), 2)
    assert not v and v.where == ("disease", 3) and "repeats" in v.message


def test_check_l_catches_inconsistent_rows(canned_release):
    buckets = dict(canned_release.buckets)
    buckets["disease"] = {b: vs for b, vs in buckets["disease"].items() if b != 4}
    v = check_l(dataclasses.replace(canned_release, buckets=buckets), 2)
    assert not v and v.where == ("disease", 4)


def test_published_bounds(canned_release):
    b = published_bounds(canned_release)
    assert b["identity"] == Fraction(1, 2)
    assert b["value"] == {"age": Fraction(1, 2), "zip": Fraction(1, 2), "disease": Fraction(1, 2)}


def _oracle_sweep(pub, table):
    ident, value = [], {a: [] for a in pub.buckets}
    for i in table.ids.tolist():
        bk = BackgroundKnowledge.of(table, i).values
        ms = oracles.matching(pub, bk)
        ident.append(Fraction(1, len(ms)) if ms else None)
        for a, bs in pub.buckets.items():
            vals = {v for vs in bs.values() for v in vs}
            probs = [oracles.disclosure(pub, bk, a, s) for s in vals]
            value[a].append(max(probs) if ms else None)
    return ident, value


def test_sweep_matches_oracle_on_worked_example(canned_release, example_table):
    res = adversary_sweep(canned_release, example_table)
    ident, value = _oracle_sweep(canned_release, example_table)
    assert res.identity == ident and res.value == value


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["mdp", "ncp"]), st.sampled_from([2, 3]), st.sampled_from([1, 2]))
def test_sweep_matches_oracle_and_bounds(seed, mode, k, l):
    t = random_table(seed, n=int(np.random.default_rng(seed).integers(20, 70)))
    try:
        pub = lgb(t, k, l, mode)
    except InfeasibleError:
        return
    res = adversary_sweep(pub, t)
    ident, value = _oracle_sweep(pub, t)
    assert res.identity == ident
    assert res.value == value
    assert res.max_identity <= Fraction(1, k)
    assert res.max_value() <= Fraction(1, l)
    # every target matches at least its own row
    assert None not in res.identity


def test_verifier_needs_only_the_release(tmp_path, example_table):
    pub = lgb(example_table, 2, 2)
    serialize(pub, tmp_path)
    back = deserialize(tmp_path)
    bk = BackgroundKnowledge.of(example_table, 1006)
    assert matching_tuples(back, bk) == matching_tuples(pub, bk)
    assert adversary_sweep(back, example_table).value == adversary_sweep(pub, example_table).value


def test_sweep_rejects_foreign_table(canned_release):
    with pytest.raises(ValueError):
        adversary_sweep(canned_release, random_table(0, n=20))
