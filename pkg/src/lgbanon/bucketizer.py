"""Local bucketization of one attribute's sensitive values.

The flagged ``(tuple id, value)`` pairs of an attribute are split recursively at
their weighted median while both halves can still be made l-diverse, which keeps
the value range of every bucket narrow. Each leaf set is then dealt into
buckets where no value repeats and every bucket holds at least ``l`` pairs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import InfeasibleError


class ValuePairSet:
    """Flagged ``(id, value)`` pairs of one attribute, with a total value order.

    Parameters
    ----------
    attr : str
    pairs : iterable of (int, value)
    key : callable, optional
        Sort key defining the value order. Defaults to the natural order.
    """

    def __init__(self, attr: str, pairs=(), key: Callable | None = None):
        pairs = list(pairs)
        self.attr = attr
        self.ids = np.array([int(i) for i, _ in pairs], dtype=np.int64)
        if len(set(self.ids.tolist())) != len(self.ids):
            raise ValueError(f"duplicate tuple ids in value pairs of {attr!r}")
        self.values = np.empty(len(pairs), dtype=object)
        self.values[:] = [v for _, v in pairs]
        distinct = sorted(set(self.values.tolist()), key=key)
        rank = {v: r for r, v in enumerate(distinct)}
        self.distinct = distinct
        self.ranks = np.array([rank[v] for v in self.values], dtype=np.int64)

    @classmethod
    def _from_arrays(cls, attr, ids, values, ranks, distinct):
        vp = cls.__new__(cls)
        vp.attr, vp.ids, vp.values, vp.ranks, vp.distinct = attr, ids, values, ranks, distinct
        return vp

    @classmethod
    def from_table(cls, table, attr: str) -> "ValuePairSet":
        """The flagged cells of ``attr``, ordered by the table's value keys."""
        j = table.col_index(attr)
        pos = np.flatnonzero(table.mask[:, j])
        keys = table.keys[attr][pos]
        uniq, ranks = np.unique(keys, return_inverse=True)
        col = table.columns[attr]
        values = np.empty(len(pos), dtype=object)
        values[:] = [col[p] for p in pos]
        distinct = [None] * len(uniq)
        for v, r in zip(values, ranks):
            distinct[r] = v
        return cls._from_arrays(attr, table.ids[pos].copy(), values, ranks.astype(np.int64), distinct)

    def take(self, idx) -> "ValuePairSet":
        return ValuePairSet._from_arrays(self.attr, self.ids[idx], self.values[idx], self.ranks[idx],
                                         self.distinct)

    def __len__(self):
        return len(self.ids)

    @property
    def pairs(self) -> list[tuple[int, object]]:
        return list(zip(self.ids.tolist(), self.values.tolist()))

    @property
    def value_counts(self) -> Counter:
        return Counter(self.values.tolist())

    def max_frequency(self) -> tuple[int, object]:
        """Highest multiplicity and the (first, in value order) value having it."""
        if len(self) == 0:
            return 0, None
        counts = np.bincount(self.ranks)
        r = int(np.argmax(counts))
        return int(counts[r]), self.distinct[r]


@dataclass(frozen=True)
class LocalBucket:
    """A bucket of one attribute: its id and its ``(tuple id, value)`` members."""

    attr: str
    bid: int
    members: tuple[tuple[int, object], ...]

    def __len__(self):
        return len(self.members)

    @property
    def ids(self) -> list[int]:
        return [i for i, _ in self.members]

    @property
    def values(self) -> list:
        return [v for _, v in self.members]


def check_condition(vp: ValuePairSet, l: int) -> bool:
    """l-eligibility: the most frequent value times ``l`` fits in ``|vp|``.

    An empty set cannot form a bucket and is not eligible.
    """
    if l < 1:
        raise ValueError("l must be at least 1")
    if len(vp) == 0:
        return False
    return vp.max_frequency()[0] * l <= len(vp)


def weighted_median(vp: ValuePairSet):
    """Smallest value ``v`` with at least ``ceil(|vp|/2)`` pairs ``<= v``."""
    if len(vp) == 0:
        raise ValueError("median of an empty value set")
    return vp.distinct[_median_rank(vp.ranks)]


def _median_rank(ranks: np.ndarray) -> int:
    half = -(-len(ranks) // 2)
    cum = np.cumsum(np.bincount(ranks))
    return int(np.searchsorted(cum, half))


def divide_buckets(vp: ValuePairSet, l: int, first_bid: int = 1) -> list[LocalBucket]:
    """Deal an l-eligible pair set into ``|vp| // l`` buckets with no repeated value.

    Pairs are laid out value group by value group (most frequent first, ties in
    value order, members by id) and dealt round-robin. A value occurring ``f``
    times occupies ``f`` consecutive slots, and eligibility gives ``f <= |vp| // l``,
    so its copies land in distinct buckets.
    """
    if not check_condition(vp, l):
        f, v = vp.max_frequency()
        raise InfeasibleError(
            f"attribute {vp.attr!r}: {len(vp)} value(s) cannot form {l}-diverse buckets "
            f"(value {v!r} occurs {f} times)"
        )
    n_buckets = len(vp) // l
    counts = np.bincount(vp.ranks)
    # descending count, then value rank, then tuple id
    order = np.lexsort((vp.ids, vp.ranks, -counts[vp.ranks]))
    slots: list[list[int]] = [[] for _ in range(n_buckets)]
    for s, p in enumerate(order):
        slots[s % n_buckets].append(int(p))
    out = []
    for b, members in enumerate(slots):
        members.sort(key=lambda p: vp.ids[p])
        out.append(LocalBucket(vp.attr, first_bid + b,
                               tuple((int(vp.ids[p]), vp.values[p]) for p in members)))
    return out


def local_bucketize(vp: ValuePairSet, l: int,
                    eligible: Callable[[ValuePairSet, int], bool] = check_condition) -> list[LocalBucket]:
    """Partition ``vp`` into range-narrow l-diverse local buckets.

    ``eligible`` guards each split and may be replaced to impose a different
    per-attribute acceptance rule; the final assignment still needs plain
    l-eligibility. BIDs are dense from 1, numbered depth-first (lower half
    first) and then by round-robin slot.
    """
    if not check_condition(vp, l) or not eligible(vp, l):
        f, v = vp.max_frequency()
        raise InfeasibleError(
            f"attribute {vp.attr!r} is not {l}-eligible: value {v!r} occurs {f} times "
            f"among {len(vp)} sensitive value(s)"
        )
    out: list[LocalBucket] = []
    stack = [vp]
    while stack:
        cur = stack.pop()
        med = _median_rank(cur.ranks)
        small = cur.take(np.flatnonzero(cur.ranks <= med))
        big = cur.take(np.flatnonzero(cur.ranks > med))
        if len(big) and eligible(small, l) and eligible(big, l):
            stack.append(big)
            stack.append(small)
        else:
            out.extend(divide_buckets(cur, l, first_bid=len(out) + 1))
    return out
