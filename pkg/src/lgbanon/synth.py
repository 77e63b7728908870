"""Synthetic tables: a census-like benchmark and small random tables for testing.

The census-like generator mimics a nine-attribute adult census extract
(sex, age, relationship, marital status, race, education, hours per week,
occupation, salary) with the same kinds, roles and domain sizes. Every domain
value occurs at least once, so observed ranges and hierarchy leaves match the
declared sizes exactly.
"""

from __future__ import annotations

import numpy as np

from .metrics import density_mask
from .microdata import QI, SEMI_SENSITIVE, SENSITIVE, AttributeSchema, Table
from .taxonomy import CATEGORICAL, NUMERIC, Hierarchy

CENSUS_ROWS = 31055
CENSUS_DENSITY = 0.2

AGE_RANGE = (17, 89)  # 73 values
HOURS_RANGE = (1, 93)  # 93 values
N_SALARY = 719
N_OCCUPATION = 257

_RELATIONSHIP = {
    "Family": {
        "Spouse": ["Husband", "Wife"],
        "Child": ["Own-child", "Stepchild", "Foster-child"],
        "Kin": ["Parent", "Sibling", "Grandchild", "Other-relative"],
    },
    "Non-family": {
        "Shared": ["Unmarried-partner", "Roommate", "Boarder"],
        "Alone": ["Not-in-family"],
    },
}
_MARITAL = {
    "Married": ["Married-civ-spouse", "Married-AF-spouse", "Married-spouse-absent"],
    "Unmarried": ["Never-married", "Divorced", "Widowed"],
}
_RACE = {
    "Single-race": ["White", "Black", "Asian", "Pacific-Islander", "Amer-Indian-Eskimo", "Other"],
    "Multi-race": ["White-Black", "White-Asian", "Other-multi"],
}
_EDUCATION = {
    "Basic": {"Primary": ["Preschool", "1st-8th"], "Secondary": ["9th-12th", "HS-grad"]},
    "Post-secondary": {
        "Undergraduate": ["Some-college", "Assoc-voc", "Assoc-acdm", "Bachelors"],
        "Graduate": ["Masters", "Prof-school", "Doctorate"],
    },
}
_SEX = {"Female": [], "Male": []}


def _edges(tree, parent="*"):
    out = []
    for child, sub in tree.items():
        out.append((parent, child))
        if isinstance(sub, dict):
            out.extend(_edges(sub, child))
        else:
            out.extend((child, leaf) for leaf in sub)
    return out


def _occupation_hierarchy() -> Hierarchy:
    # 257 detailed codes -> 16 major groups -> 4 sectors
    edges = []
    sizes = [17] + [16] * 15
    code = 1
    for g, size in enumerate(sizes):
        sector = f"sector-{g // 4 + 1}"
        major = f"major-{g + 1:02d}"
        if g % 4 == 0:
            edges.append(("*", sector))
        edges.append((sector, major))
        for _ in range(size):
            edges.append((major, f"occ-{code:03d}"))
            code += 1
    return Hierarchy(edges)


def census_hierarchies() -> dict[str, Hierarchy]:
    return {
        "sex": Hierarchy(_edges(_SEX)),
        "relationship": Hierarchy(_edges(_RELATIONSHIP)),
        "marital-status": Hierarchy(_edges(_MARITAL)),
        "race": Hierarchy(_edges(_RACE)),
        "education": Hierarchy(_edges(_EDUCATION)),
        "occupation": _occupation_hierarchy(),
    }


def census_schema() -> list[AttributeSchema]:
    h = census_hierarchies()
    return [
        AttributeSchema("sex", CATEGORICAL, SEMI_SENSITIVE, h["sex"]),
        AttributeSchema("age", NUMERIC, SEMI_SENSITIVE),
        AttributeSchema("relationship", CATEGORICAL, QI, h["relationship"]),
        AttributeSchema("marital-status", CATEGORICAL, QI, h["marital-status"]),
        AttributeSchema("race", CATEGORICAL, QI, h["race"]),
        AttributeSchema("education", CATEGORICAL, QI, h["education"]),
        AttributeSchema("hours-per-week", NUMERIC, QI),
        AttributeSchema("occupation", CATEGORICAL, SEMI_SENSITIVE, h["occupation"]),
        AttributeSchema("salary", NUMERIC, SENSITIVE),
    ]


def _skewed(rng, n, m, alpha):
    p = 1.0 / np.arange(1, m + 1) ** alpha
    p = p[rng.permutation(m)]
    return rng.choice(m, size=n, p=p / p.sum())


def _with_cover(rng, draw, m):
    """Overwrite random slots of ``draw`` so that all ``m`` values occur."""
    n = len(draw)
    if n >= m:
        slots = rng.choice(n, size=m, replace=False)
        draw[slots] = np.arange(m)
    return draw


def census_like(n: int = CENSUS_ROWS, seed: int = 0, density: float = CENSUS_DENSITY) -> Table:
    """Census-shaped synthetic table with a random per-cell sensitivity mask.

    Parameters
    ----------
    n : int
        Number of rows; every domain value is present when ``n`` is at least
        the salary domain size (719).
    seed : int
        Seeds independent streams for the values and the mask.
    density : float
        Share of flagged cells in each semi-sensitive attribute.
    """
    data_rng, mask_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    schema = census_schema()
    h = census_hierarchies()
    rng = data_rng

    sex = rng.choice(2, size=n, p=[0.33, 0.67])
    age_lo, age_hi = AGE_RANGE
    ages = np.arange(age_lo, age_hi + 1)
    age_w = np.exp(-0.5 * ((ages - 38) / 14.0) ** 2) + 0.02
    age = age_lo + _with_cover(rng, rng.choice(len(ages), size=n, p=age_w / age_w.sum()), len(ages))

    def leaves(a):
        return np.array(h[a].leaves, dtype=object)

    rel = _with_cover(rng, _skewed(rng, n, 13, 1.3), 13)
    mar = _with_cover(rng, _skewed(rng, n, 6, 1.1), 6)
    race = _with_cover(rng, _skewed(rng, n, 9, 2.0), 9)
    edu = _with_cover(rng, _skewed(rng, n, 11, 0.9), 11)

    h_lo, h_hi = HOURS_RANGE
    hours = np.clip(np.rint(rng.normal(40, 11, size=n)), h_lo, h_hi).astype(int)
    hours = h_lo + _with_cover(rng, hours - h_lo, h_hi - h_lo + 1)

    # skew kept mild so that no occupation exceeds 1/20 of the flagged cells
    occ = _with_cover(rng, _skewed(rng, n, N_OCCUPATION, 0.5), N_OCCUPATION)

    # salary grid of 719 levels; level depends loosely on education, age and hours
    score = (edu / 10.0) + (np.minimum(age, 60) - age_lo) / 43.0 + (hours - h_lo) / 92.0
    level = np.rint(N_SALARY * (score / 3.0) + rng.normal(0, 90, size=n)).astype(int)
    level = _with_cover(rng, np.clip(level, 0, N_SALARY - 1), N_SALARY)
    salary = 5000 + 150 * level

    cols = [
        leaves("sex")[sex], age, leaves("relationship")[rel], leaves("marital-status")[mar],
        leaves("race")[race], leaves("education")[edu], hours, leaves("occupation")[occ], salary,
    ]
    rows = [list(r) for r in zip(*[c.tolist() for c in cols])]
    mask = np.zeros((n, len(schema)), dtype=bool)
    mask[:, -1] = True
    table = Table(schema, range(1, n + 1), rows, mask, hierarchies=h, check_roles=False)
    return table.with_mask(density_mask(table, density, mask_rng))


def random_table(seed: int, n: int | None = None, min_signature: int = 5,
                 density: float | None = None) -> Table:
    """Small random table: 2 QI, 2 semi-sensitive and 1 sensitive attribute.

    Each of the four flag patterns over the semi-sensitive attributes gets at
    least ``min_signature`` rows, so every QI-signature subset can hold a group
    of that size.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4 * min_signature, 501)) if n is None else n
    if n < 4 * min_signature:
        raise ValueError(f"need at least {4 * min_signature} rows")
    cat = Hierarchy(_edges({"g1": ["a", "b", "c", "d"], "g2": ["e", "f", "g"], "g3": ["h", "i", "j"]}))
    diag = Hierarchy(_edges({"d1": {"d11": ["x1", "x2"], "d12": ["x3", "x4", "x5"]},
                             "d2": ["x6", "x7", "x8", "x9", "x10"]}))
    schema = [
        AttributeSchema("q-num", NUMERIC, QI),
        AttributeSchema("q-cat", CATEGORICAL, QI, cat),
        AttributeSchema("s-num", NUMERIC, SEMI_SENSITIVE),
        AttributeSchema("s-cat", CATEGORICAL, SEMI_SENSITIVE, diag),
        AttributeSchema("sens", NUMERIC, SENSITIVE),
    ]
    q_num = rng.integers(0, 60, size=n)
    q_cat = np.array(cat.leaves, dtype=object)[rng.integers(0, cat.leaf_count, size=n)]
    s_num = rng.integers(20, 40, size=n)
    s_cat = np.array(diag.leaves, dtype=object)[rng.integers(0, diag.leaf_count, size=n)]
    sens = rng.integers(0, 25, size=n) * 10
    rows = [list(r) for r in zip(q_num.tolist(), q_cat.tolist(), s_num.tolist(), s_cat.tolist(), sens.tolist())]

    if density is None:
        pattern = np.concatenate([np.repeat(np.arange(4), min_signature), rng.integers(0, 4, size=n - 4 * min_signature)])
        rng.shuffle(pattern)
        flags = np.column_stack([pattern & 1, pattern >> 1]).astype(bool)
    else:
        flags = rng.random((n, 2)) < density
    mask = np.zeros((n, 5), dtype=bool)
    mask[:, 2:4] = flags
    mask[:, 4] = True
    ids = np.sort(rng.choice(np.arange(1, 10 * n + 1), size=n, replace=False)).tolist()
    return Table(schema, ids, rows, mask, hierarchies={"q-cat": cat, "s-cat": diag})


# sex has two values, so no bucket of it can be more than 2-diverse; the
# benchmark leaves it without a diversity requirement
CENSUS_L_OVERRIDES = {"sex": 1}
