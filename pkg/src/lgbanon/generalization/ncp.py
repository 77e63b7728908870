"""Local generalization by greedy top-down bisection on NCP.

Within each QI-signature subset a working set of at least ``2k`` tuples is split
around two far-apart seed tuples. The seeds start two sides; the other tuples, in
id order, each join the side whose total NCP rises less when the side's
generalization widens to cover them. Splits that leave a side below ``k`` are abandoned and
the whole working set becomes a group.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ..microdata import Table
from ..taxonomy import NUMERIC, generalize_values, ncp_cell
from ._common import LocalEquivalenceGroup, checked_partition, make_group, positions_of

SEED_ROUNDS = 3
_TIE = 1e-12


def pair_ncp(table: Table, t1: int, t2: int, qi_set) -> Fraction:
    """Exact NCP of generalizing tuples ``t1`` and ``t2`` together over ``qi_set``."""
    total = Fraction(0)
    for a in sorted(qi_set):
        schema = table.attr(a)
        g = generalize_values(schema, [table.value(t1, a), table.value(t2, a)], table.hierarchies.get(a))
        total += ncp_cell(schema, g, table.domain)
    return total


class _Distance:
    """Vectorized float ``pair_ncp`` from one seed to many tuples."""

    def __init__(self, table: Table, attrs):
        self.num = [a for a in attrs if table.attr(a).kind == NUMERIC]
        self.cat = [a for a in attrs if table.attr(a).kind != NUMERIC]
        cols = []
        for a in self.num:
            width = float(table.domain.ranges[a])
            cols.append(table.keys[a] / width if width else np.zeros(len(table)))
        self.x = np.column_stack(cols) if cols else np.zeros((len(table), 0))
        self.leaf = [table.keys[a] for a in self.cat]
        self.hier = [table.hierarchies[a] for a in self.cat]
        self._paths: list[dict[int, list[tuple[int, int, float]]]] = [{} for _ in self.cat]

    def _path(self, j: int, leaf: int):
        cache = self._paths[j]
        if leaf not in cache:
            h = self.hier[j]
            spans = []
            for node in reversed(h.ancestors(h.leaves[leaf])):
                lo, hi = h.span(node)
                spans.append((lo, hi, (hi - lo + 1) / h.leaf_count))
            cache[leaf] = spans
        return cache[leaf]

    def __call__(self, pos: np.ndarray, seed: int) -> np.ndarray:
        d = np.abs(self.x[pos] - self.x[seed]).sum(axis=1) if self.num else np.zeros(len(pos))
        for j in range(len(self.cat)):
            x = self.leaf[j][pos]
            cost = np.empty(len(pos))
            for lo, hi, c in self._path(j, int(self.leaf[j][seed])):
                cost[(x >= lo) & (x <= hi)] = c
            d += cost
        return d


def _find_seeds(dist: _Distance, pos: np.ndarray) -> tuple[int, int]:
    cur = 0  # positions are sorted by id, so index 0 holds the smallest id
    prev = cur
    for _ in range(SEED_ROUNDS):
        d = dist(pos, pos[cur])
        d[cur] = -np.inf
        prev, cur = cur, int(np.argmax(d))
    return int(pos[prev]), int(pos[cur])


class _Cover:
    """Growing generalization cover of one side of a split, with its per-tuple NCP."""

    def __init__(self, geo: "_Geometry", p: int):
        self.geo = geo
        self.lo = list(geo.rows[p])
        self.hi = list(geo.rows[p])
        self.size = 1
        self.cost = 0.0

    def grown(self, x):
        lo = [min(a, b) for a, b in zip(self.lo, x)]
        hi = [max(a, b) for a, b in zip(self.hi, x)]
        return lo, hi, self.geo.cost(lo, hi)

    def increase(self, x):
        """Rise in the side's total NCP if a tuple with coordinates ``x`` joins."""
        lo, hi, c = self.grown(x)
        return (self.size + 1) * c - self.size * self.cost, lo, hi, c


class _Geometry:
    """Tuples as coordinate rows: numeric keys and categorical leaf indices."""

    def __init__(self, table: Table, attrs):
        attrs = list(attrs)
        self.widths = []
        self.hier = []
        cols = []
        for a in attrs:
            cols.append(table.keys[a])
            if table.attr(a).kind == NUMERIC:
                self.widths.append(float(table.domain.ranges[a]))
                self.hier.append(None)
            else:
                self.widths.append(None)
                self.hier.append(table.hierarchies[a])
        self.rows = np.column_stack(cols).tolist() if cols else [[] for _ in range(len(table))]
        self._lca: dict[tuple[int, float, float], float] = {}

    def cost(self, lo, hi) -> float:
        total = 0.0
        for j, (a, b) in enumerate(zip(lo, hi)):
            if a == b:
                continue
            w = self.widths[j]
            if w is not None:
                total += (b - a) / w if w else 0.0
                continue
            key = (j, a, b)
            c = self._lca.get(key)
            if c is None:
                h = self.hier[j]
                c = h.size(h.lca_span(int(a), int(b))) / h.leaf_count
                self._lca[key] = c
            total += c
        return total


def _divide(geo: _Geometry, pos: np.ndarray, sd1: int, sd2: int):
    sides = (_Cover(geo, sd1), _Cover(geo, sd2))
    members = ([sd1], [sd2])
    for p in pos.tolist():
        if p == sd1 or p == sd2:
            continue
        x = geo.rows[p]
        i1, i2 = sides[0].increase(x), sides[1].increase(x)
        d = i1[0] - i2[0]
        if abs(d) <= _TIE * max(1.0, abs(i1[0]), abs(i2[0])):
            side = 0 if sides[0].size <= sides[1].size else 1
        else:
            side = 0 if d < 0 else 1
        cover, inc = sides[side], (i1, i2)[side]
        _, cover.lo, cover.hi, cover.cost = inc
        cover.size += 1
        members[side].append(p)
    return np.array(sorted(members[0]), dtype=np.int64), np.array(sorted(members[1]), dtype=np.int64)


def find_seeds(table: Table, ids, qi_set) -> tuple[int, int]:
    """Two mutually far tuples of ``ids`` by ``SEED_ROUNDS`` farthest-neighbour hops.

    Starts from the smallest id; each hop moves to the tuple with the largest pair
    NCP to the current one (smallest id on ties). Returns the last two endpoints.
    """
    pos = positions_of(table, ids)
    if len(pos) < 2:
        raise ValueError("need at least two tuples to pick seeds")
    a, b = _find_seeds(_Distance(table, sorted(qi_set)), pos)
    return int(table.ids[a]), int(table.ids[b])


def divide_table(table: Table, ids, sd1: int, sd2: int, qi_set) -> tuple[set[int], set[int]]:
    """Split ``ids`` into two sides grown from the seeds ``sd1`` and ``sd2``.

    Tuples are taken in id order. Each joins the side whose total NCP, the size
    of the side times the NCP of its covering generalization, increases less.
    Equal increases go to the side with fewer members, then to ``sd1``'s side.
    """
    pos = positions_of(table, ids)
    p1, p2 = table.position(sd1), table.position(sd2)
    if p1 not in pos or p2 not in pos:
        raise ValueError("seeds must belong to the set")
    s1, s2 = _divide(_Geometry(table, sorted(qi_set)), pos, p1, p2)
    return set(table.ids[s1].tolist()), set(table.ids[s2].tolist())


def generalize_ncp(table: Table, k: int) -> list[LocalEquivalenceGroup]:
    """Partition every QI-signature subset into groups of >= k tuples, greedily on NCP.

    Working sets are processed last-in first-out. Sets smaller than ``2k`` become
    groups; larger ones are divided around two seeds and the halves kept only if
    both hold ``k`` tuples, otherwise the set becomes a group as is.

    Raises
    ------
    InfeasibleError
        If a QI-signature subset holds fewer than ``k`` tuples.
    """
    groups: list[LocalEquivalenceGroup] = []
    for attrs, subset in checked_partition(table, k):
        dist = _Distance(table, attrs)
        geo = _Geometry(table, attrs)
        stack = [subset]
        while stack:
            oper = stack.pop()
            if len(oper) >= 2 * k:
                sd1, sd2 = _find_seeds(dist, oper)
                t1, t2 = _divide(geo, oper, sd1, sd2)
                if len(t1) >= k and len(t2) >= k:
                    stack.append(t2)
                    stack.append(t1)
                    continue
            groups.append(make_group(table, len(groups) + 1, oper, attrs))
    return groups
