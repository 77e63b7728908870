"""Utility measures for published tables.

Discernibility (sum of squared group sizes), table NCP, and SUM aggregate
queries answered from the release with lower/upper bounds. A tuple satisfies a
query with probability equal to the product, over the queried attributes, of
the share of its published cell that satisfies the predicate: integer points of
an interval, leaves below a hierarchy node, or values inside its bucket.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._columns import column_view
from .microdata import QI, SEMI_SENSITIVE, SENSITIVE, Table
from .pipeline import BucketRef, PublishedTable
from .taxonomy import CATEGORICAL, NUMERIC, NUMERIC_OPS, Domain, Predicate, integer_bounds, ncp_cell

N_PREDICATES = 4
MAX_CATEGORICAL_VALUES = 5
_EPS = 1e-9


def c_dm(groups) -> int:
    """Discernibility metric: sum of squared group sizes."""
    return sum(len(g) ** 2 for g in groups)


def ncp_table(pub: PublishedTable, domain: Domain | None = None) -> Fraction:
    """Total NCP over every generalized cell; bucketed cells contribute nothing."""
    domain = domain or pub.domain
    counts = Counter()
    for cells in pub.cells:
        for a, c in zip(pub.names, cells):
            if not isinstance(c, BucketRef):
                counts[(a, c)] += 1
    return sum((n * ncp_cell(a, c, domain) for (a, c), n in counts.items()), Fraction(0))


@dataclass(frozen=True)
class Query:
    """``SELECT SUM(sum_attr) WHERE p1 AND p2 AND ...``"""

    predicates: tuple[Predicate, ...]
    sum_attr: str

    def __str__(self):
        where = " AND ".join(f"({p})" for p in self.predicates)
        return f"SELECT SUM({self.sum_attr}) WHERE {where}"


@dataclass(frozen=True)
class QueryAnswer:
    """Bounds on a SUM answer; ``r_error`` is None (and ``flagged``) when the true sum is 0."""

    lower: Fraction
    upper: Fraction
    actual: Fraction
    r_error: Fraction | None

    @property
    def flagged(self) -> bool:
        return self.r_error is None


def default_sum_attribute(schema) -> str:
    cands = [a.name for a in schema if a.kind == NUMERIC and a.role == SENSITIVE]
    if len(cands) != 1:
        raise ValueError(f"cannot pick the SUM attribute automatically from {cands}; pass sum_attr")
    return cands[0]


def query_attributes(schema) -> list[str]:
    """Attributes a query may condition on: QI and semi-sensitive ones."""
    return [a.name for a in schema if a.role in (QI, SEMI_SENSITIVE)]


def gen_queries(seed: int, n: int, table: Table, sum_attr: str | None = None,
                n_predicates: int = N_PREDICATES) -> list[Query]:
    """``n`` random SUM queries with ``n_predicates`` predicates on distinct attributes.

    Categorical predicates pick 1..min(5, |D[A]|) distinct leaves; numeric ones pick
    one of the six comparison operators and a value observed in the column. Fully
    determined by ``seed``.
    """
    sum_attr = sum_attr or default_sum_attribute(table.schema)
    attrs = [a for a in query_attributes(table.schema) if a != sum_attr]
    if len(attrs) < n_predicates:
        raise ValueError(f"need at least {n_predicates} QI or semi-sensitive attributes, have {len(attrs)}")
    domains = {}
    for a in attrs:
        if table.attr(a).kind == CATEGORICAL:
            domains[a] = list(table.hierarchies[a].leaves)
        else:
            domains[a] = sorted(set(table.columns[a]))
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        chosen = rng.choice(len(attrs), size=n_predicates, replace=False)
        preds = []
        for c in chosen:
            a = attrs[int(c)]
            dom = domains[a]
            if table.attr(a).kind == CATEGORICAL:
                m = int(rng.integers(1, min(MAX_CATEGORICAL_VALUES, len(dom)) + 1))
                picks = rng.choice(len(dom), size=m, replace=False)
                preds.append(Predicate(a, "in", frozenset(dom[int(i)] for i in picks)))
            else:
                op = NUMERIC_OPS[int(rng.integers(len(NUMERIC_OPS)))]
                preds.append(Predicate(a, op, dom[int(rng.integers(len(dom)))]))
        out.append(Query(tuple(preds), sum_attr))
    return out


def _compare(x: np.ndarray, op: str, v: float) -> np.ndarray:
    if op == ">":
        return x > v
    if op == "<":
        return x < v
    if op == "=":
        return x == v
    if op == ">=":
        return x >= v
    if op == "<=":
        return x <= v
    return x != v


def _bucket_arrays(pub: PublishedTable, attr: str):
    """Flattened bucket values of ``attr`` as keys, with their bucket index."""
    cache = pub.__dict__.setdefault("_bucket_arrays", {})
    if attr not in cache:
        bs = pub.buckets.get(attr, {})
        bids = sorted(bs)
        h = pub.domain.hierarchies.get(attr)
        keys, owner = [], []
        for i, b in enumerate(bids):
            for v in bs[b]:
                keys.append(float(h.leaf_index(v)) if h is not None else float(v))
                owner.append(i)
        max_bid = max(bids) if bids else 0
        pos = np.zeros(max_bid + 1, dtype=np.int64)
        pos[bids] = np.arange(len(bids))
        sizes = np.array([len(bs[b]) for b in bids], dtype=np.float64)
        cache[attr] = (np.array(keys), np.array(owner, dtype=np.int64), sizes, pos)
    return cache[attr]


def _cell_fractions(pub: PublishedTable, pred: Predicate) -> np.ndarray:
    """Per row, the share of its published cell on ``pred.attr`` satisfying ``pred``."""
    col = column_view(pub)[pred.attr]
    h = pub.domain.hierarchies.get(pred.attr)
    frac = np.zeros(len(pub.ids))
    gen = ~col.is_bid
    lo, hi = col.lo[gen], col.hi[gen]
    if pred.is_categorical:
        wanted = np.sort([h.leaf_index(v) for v in pred.value if v in h and h.is_leaf(v)])
        hits = np.searchsorted(wanted, hi, side="right") - np.searchsorted(wanted, lo, side="left")
        frac[gen] = hits / (hi - lo + 1)
    else:
        v = float(pred.value)
        a, b = np.ceil(lo), np.floor(hi)
        total = b - a + 1
        point = (lo == hi) | (a > b)
        if pred.op == "!=":
            lo_i, hi_i = integer_bounds("=", pred.value)
        else:
            lo_i, hi_i = integer_bounds(pred.op, pred.value)
        lo_i, hi_i = float(lo_i), float(hi_i)
        inside = np.clip(np.minimum(b, hi_i) - np.maximum(a, lo_i) + 1, 0, None)
        with np.errstate(invalid="ignore", divide="ignore"):
            share = inside / total
        if pred.op == "!=":
            share = 1.0 - share
        frac[gen] = np.where(point, _compare(lo, pred.op, v).astype(float), share)
    if col.is_bid.any():
        keys, owner, sizes, pos = _bucket_arrays(pub, pred.attr)
        if pred.is_categorical:
            wanted = [h.leaf_index(v) for v in pred.value if v in h and h.is_leaf(v)]
            ok = np.isin(keys, wanted)
        else:
            ok = _compare(keys, pred.op, float(pred.value))
        per_bucket = np.bincount(owner, weights=ok.astype(float), minlength=len(sizes)) / sizes
        frac[col.is_bid] = per_bucket[pos[col.bid[col.is_bid]]]
    return frac


class _SumBuckets:
    """Sorted prefix sums of the SUM attribute's buckets, for bound lookups."""

    def __init__(self, pub: PublishedTable, attr: str):
        col = column_view(pub)[attr]
        if not col.is_bid.all():
            raise ValueError(f"SUM attribute {attr!r} must be fully bucketized")
        bs = pub.buckets[attr]
        bids = sorted(bs)
        exact_int = all(isinstance(v, int) for b in bids for v in bs[b])
        dtype = np.int64 if exact_int else object
        self.sizes = np.array([len(bs[b]) for b in bids], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)])
        flat = [v for b in bids for v in bs[b]]
        self.prefix = np.concatenate([np.array([0], dtype=dtype), np.cumsum(np.array(flat, dtype=dtype))])
        pos = np.zeros(max(bids) + 1, dtype=np.int64)
        pos[bids] = np.arange(len(bids))
        self.row_bucket = pos[col.bid]

    def bounds(self, pro: np.ndarray):
        s = np.bincount(self.row_bucket, weights=pro, minlength=len(self.sizes))
        n_lo = np.clip(np.floor(s + _EPS).astype(np.int64), 0, self.sizes)
        n_hi = np.clip(np.ceil(s - _EPS).astype(np.int64), 0, self.sizes)
        start, end = self.offsets[:-1], self.offsets[1:]
        lower = (self.prefix[start + n_lo] - self.prefix[start]).sum()
        upper = (self.prefix[end] - self.prefix[end - n_hi]).sum()
        return lower, upper


def _actual(table: Table, q: Query):
    ok = np.ones(len(table), dtype=bool)
    for p in q.predicates:
        keys = table.keys[p.attr]
        if p.is_categorical:
            h = table.hierarchies[p.attr]
            ok &= np.isin(keys, [h.leaf_index(v) for v in p.value if v in h and h.is_leaf(v)])
        else:
            ok &= _compare(keys, p.op, float(p.value))
    col = table.columns[q.sum_attr]
    return sum((col[i] for i in np.flatnonzero(ok)), 0)


def _to_fraction(x) -> Fraction:
    return Fraction(int(x)) if isinstance(x, (int, np.integer)) else Fraction(x)


def answer_queries(pub: PublishedTable, queries, table: Table) -> list[QueryAnswer]:
    """Answer each query from ``pub``; the true sum comes from the original ``table``."""
    out = []
    sums: dict[str, _SumBuckets] = {}
    for q in queries:
        if q.sum_attr not in sums:
            sums[q.sum_attr] = _SumBuckets(pub, q.sum_attr)
        pro = np.ones(len(pub.ids))
        for p in q.predicates:
            pro *= _cell_fractions(pub, p)
        lower, upper = sums[q.sum_attr].bounds(pro)
        lower, upper = _to_fraction(lower), _to_fraction(upper)
        actual = _to_fraction(_actual(table, q))
        r_error = (upper - lower) / actual if actual != 0 else None
        out.append(QueryAnswer(lower, upper, actual, r_error))
    return out


def answer_query(pub: PublishedTable, q: Query, table: Table) -> QueryAnswer:
    """Bounds on ``q`` from the release, per-bucket floor/ceil of expected hits.

    In each bucket of the SUM attribute the expected number of satisfying members
    is rounded down and up; the lower bound adds that many smallest values, the
    upper bound that many largest.
    """
    return answer_queries(pub, [q], table)[0]


def mean_relative_error(answers) -> float | None:
    errs = [float(a.r_error) for a in answers if not a.flagged]
    return float(np.mean(errs)) if errs else None


def density_mask(table: Table, p: float, seed) -> np.ndarray:
    """Mask flagging ``round(p * n)`` random cells of each semi-sensitive attribute.

    QI attributes stay clear and sensitive ones fully flagged.
    """
    if not 0 <= p <= 1:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    n = len(table)
    mask = np.array(table.mask, dtype=bool)
    m = int(math.floor(p * n + 0.5))
    for j, a in enumerate(table.schema):
        if a.role == SEMI_SENSITIVE:
            mask[:, j] = False
            mask[rng.choice(n, size=m, replace=False), j] = True
        elif a.role == SENSITIVE:
            mask[:, j] = True
        else:
            mask[:, j] = False
    return mask
