import json
import os
import shutil
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lgbanon.exceptions import InfeasibleError, InputError
from lgbanon.microdata import AttributeSchema, Table, load_table
from lgbanon.pipeline import (
    PARAMS_FILE,
    PUBLISHED_FILE,
    BucketRef,
    bucket_file,
    deserialize,
    lgb,
    serialize,
)
from lgbanon.synth import random_table

from conftest import DATA, GOLDEN_DIR, MARK
import oracles

GOLDEN_INPUT = os.path.join(DATA, "golden_input")


def golden_table():
    return load_table(*(os.path.join(GOLDEN_INPUT, f) for f in ("data.csv", "mask.csv", "schema.csv")))


def check_release(table, pub, k, l):
    assert pub.ids == tuple(table.ids.tolist())
    for p, (i, cells) in enumerate(zip(pub.ids, pub.cells)):
        for j, (a, c) in enumerate(zip(pub.names, cells)):
            assert isinstance(c, BucketRef) == bool(table.mask[p, j])
    for g in pub.groups:
        assert len(g) >= k
    for attr, bs in pub.buckets.items():
        members = pub.bucket_members(attr)
        flagged = [table.value(i, attr) for i, f in zip(table.ids, table.mask[:, table.col_index(attr)]) if f]
        assert Counter(v for vals in bs.values() for v in vals) == Counter(flagged)
        l_attr = l[attr] if isinstance(l, dict) else l
        for bid, vals in bs.items():
            assert len(vals) >= l_attr and len(set(vals)) == len(vals)
            assert sorted(vals, key=repr) == sorted((table.value(i, attr) for i in members[bid]), key=repr)


def test_worked_example_release(example_table):
    pub = lgb(example_table, 2, 2, "mdp")
    check_release(example_table, pub, 2, 2)
    assert oracles.matching(pub, MARK) == {1004, 1008}
    rows = [pub.row(i) for i in (1004, 1008)]
    assert {r["age"].bid for r in rows} == {1, 2}
    assert pub.buckets["age"] == {1: (24, 29), 2: (31, 34)}
    assert sorted(pub.buckets) == ["age", "disease", "zip"]


def test_all_qi_table_has_no_buckets(tmp_path):
    schema = [AttributeSchema("a", "numeric"), AttributeSchema("b", "categorical")]
    t = Table(schema, [1, 2, 3, 4], [[1, "x"], [2, "y"], [3, "x"], [4, "y"]], np.zeros((4, 2), dtype=bool))
    pub = lgb(t, 2, 3, "ncp")
    assert pub.buckets == {}
    serialize(pub, tmp_path)
    assert (tmp_path / bucket_file("a")).read_text() == "BID,value\n"
    assert deserialize(tmp_path) == pub


@pytest.mark.parametrize("mode", ["mdp", "ncp"])
def test_serialize_round_trip(tmp_path, mode):
    t = random_table(5, n=80)
    pub = lgb(t, 3, 2, mode, seed=9, note="x")
    names = serialize(pub, tmp_path)
    assert PUBLISHED_FILE in names and PARAMS_FILE in names
    back = deserialize(tmp_path)
    assert back == pub
    assert back.params["note"] == "x" and back.params["seed"] == 9


def test_golden_release_is_stable(tmp_path):
    pub = lgb(golden_table(), 3, 2, "mdp", seed=0)
    serialize(pub, tmp_path)
    for name in sorted(os.listdir(GOLDEN_DIR)):
        got, want = (tmp_path / name).read_text(), open(os.path.join(GOLDEN_DIR, name)).read()
        if name == PARAMS_FILE:
            got, want = json.loads(got), json.loads(want)
            got.pop("tool-version"), want.pop("tool-version")
        assert got == want, name
    assert sorted(os.listdir(tmp_path)) == sorted(os.listdir(GOLDEN_DIR))


def test_groups_do_not_depend_on_l():
    t = golden_table()
    runs = [lgb(t, 3, l, "mdp") for l in (1, 2, {"s-num": 2, "s-cat": 1, "sens": 3})]
    assert all(r.groups == runs[0].groups and r.gids == runs[0].gids for r in runs)


def test_buckets_do_not_depend_on_k():
    t = golden_table()
    runs = [lgb(t, k, 2, mode) for k in (1, 3, 6) for mode in ("mdp", "ncp")]
    assert all(r.buckets == runs[0].buckets for r in runs)


def test_buckets_of_one_attribute_ignore_other_masks():
    t = golden_table()
    j = t.col_index("s-num")
    mask = t.mask.copy()
    p = int(np.flatnonzero(mask[:, j])[0])
    mask[p, j] = False
    other = t.with_mask(mask)
    a, b = lgb(t, 3, 2, "mdp"), lgb(other, 3, 2, "mdp")
    assert a.buckets["s-cat"] == b.buckets["s-cat"]
    assert a.buckets["sens"] == b.buckets["sens"]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["mdp", "ncp"]), st.sampled_from([2, 4]), st.sampled_from([1, 2]))
def test_release_invariants(seed, mode, k, l):
    t = random_table(seed, n=int(np.random.default_rng(seed).integers(30, 120)))
    try:
        pub = lgb(t, k, l, mode)
    except InfeasibleError:
        return
    check_release(t, pub, k, l)


def test_argument_errors(example_table):
    with pytest.raises(ValueError, match="mode"):
        lgb(example_table, 2, 2, "anatomy")
    with pytest.raises(ValueError):
        lgb(example_table, 0, 2)
    with pytest.raises(ValueError):
        lgb(example_table, 2, 0)
    with pytest.raises(InfeasibleError):
        lgb(example_table, 3, 2)


def test_deserialize_errors(tmp_path, example_table):
    with pytest.raises(InputError, match="not a directory"):
        deserialize(tmp_path / "missing")
    with pytest.raises(InputError, match=PARAMS_FILE):
        deserialize(tmp_path)
    out = tmp_path / "rel"
    serialize(lgb(example_table, 2, 2), out)
    good = tmp_path / "good"
    shutil.copytree(out, good)
    text = (out / PUBLISHED_FILE).read_text().replace("B1", "B1x", 1)
    (out / PUBLISHED_FILE).write_text(text)
    with pytest.raises(InputError):
        deserialize(out)
    os.remove(good / bucket_file("zip"))
    with pytest.raises(InputError, match=bucket_file("zip")):
        deserialize(good)


def test_frame_view(example_table):
    df = lgb(example_table, 2, 2).to_frame()
    assert list(df.columns) == ["id", "GID", "age", "gender", "zip", "disease"]
    assert df["disease"].str.match(r"^B\d+$").all()
