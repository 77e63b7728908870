import numpy as np
import pytest

from lgbanon.microdata import qi_partition
from lgbanon.synth import (
    AGE_RANGE,
    CENSUS_L_OVERRIDES,
    HOURS_RANGE,
    N_OCCUPATION,
    N_SALARY,
    census_hierarchies,
    census_like,
    census_schema,
    random_table,
)


@pytest.fixture(scope="module")
def census():
    return census_like(5000, seed=1)


def test_census_shape(census):
    assert len(census) == 5000
    assert [a.name for a in census.schema] == [
        "sex", "age", "relationship", "marital-status", "race", "education", "hours-per-week",
        "occupation", "salary"]
    h = census_hierarchies()
    sizes = {a: h[a].leaf_count for a in h}
    assert sizes == {"sex": 2, "relationship": 13, "marital-status": 6, "race": 9, "education": 11,
                     "occupation": N_OCCUPATION}
    assert len(set(census.columns["salary"])) == N_SALARY
    assert census.domain.ranges["age"] == AGE_RANGE[1] - AGE_RANGE[0]
    assert census.domain.ranges["hours-per-week"] == HOURS_RANGE[1] - HOURS_RANGE[0]
    for a in h:
        assert set(census.columns[a]) == set(h[a].leaves)


def test_census_mask(census):
    roles = {a.name: a.role for a in census_schema()}
    for j, a in enumerate(census.names):
        share = census.mask[:, j].mean()
        want = {"qi": 0.0, "sensitive": 1.0, "semi-sensitive": 0.2}[roles[a]]
        assert share == pytest.approx(want, abs=1e-3)


def test_census_deterministic(census):
    again = census_like(5000, seed=1)
    assert again.canonical() == census.canonical()
    assert census_like(5000, seed=2).canonical() != census.canonical()


def test_sex_override_covers_an_attribute():
    assert set(CENSUS_L_OVERRIDES) <= {a.name for a in census_schema()}


def test_random_table_signature_subsets():
    t = random_table(0, min_signature=5)
    assert 20 <= len(t) <= 500
    parts = qi_partition(t)
    assert len(parts) == 4 and min(map(len, parts)) >= 5
    assert t.mask[:, 4].all() and not t.mask[:, :2].any()
    with pytest.raises(ValueError):
        random_table(0, n=10)


def test_random_table_density():
    t = random_table(3, n=400, density=0.25)
    assert t.mask[:, 2:4].mean() == pytest.approx(0.25, abs=0.05)
