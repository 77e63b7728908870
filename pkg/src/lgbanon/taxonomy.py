"""Generalization hierarchies, generalized values and per-cell NCP.

Numeric cells generalize to closed intervals, categorical cells to a node of the
attribute's hierarchy. Leaves are totally ordered by pre-order traversal, so the
leaves below any node form one contiguous index range ("span"). Most of the
fast paths elsewhere in the package rely on that property.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping

from .exceptions import InputError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

NUMERIC_OPS = (">", "<", "=", ">=", "<=", "!=")


class Hierarchy:
    """A labelled taxonomy tree built from ``(parent, child)`` edges.

    The root is the unique node that never appears as a child. Children keep the
    order in which their edges were first given.
    """

    def __init__(self, edges: Iterable[tuple[str, str]]):
        edges = [(str(p), str(c)) for p, c in edges]
        children: dict[str, list[str]] = {}
        parent: dict[str, str] = {}
        for p, c in edges:
            if c in parent:
                raise InputError(f"hierarchy node {c!r} has two parents")
            if p == c:
                raise InputError(f"hierarchy node {c!r} is its own parent")
            parent[c] = p
            children.setdefault(p, []).append(c)
            children.setdefault(c, [])
        roots = [n for n in children if n not in parent]
        if not edges:
            raise InputError("hierarchy has no edges")
        if len(roots) != 1:
            raise InputError(f"hierarchy must have exactly one root, found {sorted(roots)}")
        self.root = roots[0]
        self._edges = tuple(edges)
        self._children = {n: tuple(cs) for n, cs in children.items()}
        self._parent = parent

        leaves: list[str] = []
        span: dict[str, tuple[int, int]] = {}
        depth: dict[str, int] = {self.root: 0}
        # iterative pre-order; post-order pass closes the spans
        stack = [(self.root, False)]
        start: dict[str, int] = {}
        while stack:
            node, done = stack.pop()
            if done:
                span[node] = (start[node], len(leaves) - 1)
                continue
            start[node] = len(leaves)
            kids = self._children[node]
            if not kids:
                leaves.append(node)
            stack.append((node, True))
            for kid in reversed(kids):
                depth[kid] = depth[node] + 1
                stack.append((kid, False))
        if len(span) != len(self._children):
            raise InputError("hierarchy contains a cycle or disconnected nodes")
        self.leaves = tuple(leaves)
        self._leaf_index = {leaf: i for i, leaf in enumerate(leaves)}
        self._span = span
        self._depth = depth

    @classmethod
    def flat(cls, values: Iterable, root: str = "*") -> "Hierarchy":
        """Two-level hierarchy: ``root`` directly above every distinct value."""
        distinct = sorted({str(v) for v in values})
        if root in distinct:
            raise InputError(f"value {root!r} collides with the flat hierarchy root")
        if not distinct:
            raise InputError("cannot build a hierarchy from no values")
        return cls((root, v) for v in distinct)

    @classmethod
    def from_csv(cls, path) -> "Hierarchy":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(x.strip() for x in r)]
        if rows and [x.strip().lower() for x in rows[0]] == ["parent", "child"]:
            rows = rows[1:]
        for i, r in enumerate(rows):
            if len(r) != 2:
                raise InputError(f"hierarchy file {path}: expected parent,child", row=i + 1)
        return cls((p.strip(), c.strip()) for p, c in rows)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parent", "child"])
            w.writerows(self._edges)

    @property
    def edges(self) -> tuple[tuple[str, str], ...]:
        return self._edges

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self._children)

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    def __contains__(self, label) -> bool:
        return label in self._children

    def __eq__(self, other) -> bool:
        return isinstance(other, Hierarchy) and self._edges == other._edges

    def __hash__(self):
        return hash(self._edges)

    def __repr__(self):
        return f"Hierarchy(root={self.root!r}, leaves={self.leaf_count})"

    def is_leaf(self, label: str) -> bool:
        return not self._children[label]

    def children(self, label: str) -> tuple[str, ...]:
        return self._children[label]

    def parent(self, label: str) -> str | None:
        return self._parent.get(label)

    def depth(self, label: str) -> int:
        return self._depth[label]

    def leaf_index(self, label: str) -> int:
        try:
            return self._leaf_index[label]
        except KeyError:
            raise InputError(f"{label!r} is not a leaf of the hierarchy") from None

    def span(self, label: str) -> tuple[int, int]:
        """Inclusive range of leaf indices below ``label``."""
        try:
            return self._span[label]
        except KeyError:
            raise InputError(f"{label!r} is not a node of the hierarchy") from None

    def size(self, label: str) -> int:
        """Number of leaves that descend from ``label`` (1 for a leaf)."""
        lo, hi = self.span(label)
        return hi - lo + 1

    def ancestors(self, label: str) -> list[str]:
        """Path from ``label`` up to the root, both included."""
        self.span(label)
        out = [label]
        while out[-1] in self._parent:
            out.append(self._parent[out[-1]])
        return out

    def covers(self, node: str, leaf: str) -> bool:
        lo, hi = self.span(node)
        return lo <= self.leaf_index(leaf) <= hi

    def lca_span(self, lo: int, hi: int) -> str:
        """Lowest node whose leaf span contains leaf indices ``lo..hi``."""
        node = self.leaves[lo]
        while not (self._span[node][0] <= lo and hi <= self._span[node][1]):
            node = self._parent[node]
        return node

    def lca(self, labels: Iterable[str]) -> str:
        idx = [self.leaf_index(v) for v in labels]
        if not idx:
            raise InputError("lowest common ancestor of an empty set")
        return self.lca_span(min(idx), max(idx))


@dataclass(frozen=True, order=True)
class Interval:
    """Closed numeric range produced by generalizing numeric values."""

    lower: Rational
    upper: Rational

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"empty interval [{self.lower}, {self.upper}]")

    def __str__(self):
        return f"[{format_number(self.lower)}-{format_number(self.upper)}]"

    def __contains__(self, v) -> bool:
        return self.lower <= v <= self.upper


@dataclass(frozen=True, order=True)
class Node:
    """A hierarchy node standing in for a set of categorical leaves."""

    label: str

    def __str__(self):
        return self.label


GeneralizedValue = Interval | Node


def format_number(v) -> str:
    """Render an exact number; non-integral rationals are written ``p/q``."""
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return str(v)


def parse_number(text: str):
    """Parse a finite rational, returning ``int`` when the value is integral."""
    s = text.strip()
    try:
        return int(s)
    except ValueError:
        pass
    try:
        f = Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"not a finite number: {text!r}") from None
    return int(f) if f.denominator == 1 else f


@dataclass
class Domain:
    """Whole-table statistics that NCP normalizes by.

    ``ranges`` maps numeric attributes to ``max - min`` over the full column and
    ``hierarchies`` maps categorical attributes to their taxonomy.
    """

    kinds: dict[str, str]
    ranges: dict[str, Rational] = field(default_factory=dict)
    hierarchies: dict[str, Hierarchy] = field(default_factory=dict)

    def size(self, attr: str):
        if self.kinds[attr] == NUMERIC:
            return self.ranges[attr]
        return self.hierarchies[attr].leaf_count


def _kind(attr) -> str:
    return attr if isinstance(attr, str) else attr.kind


def generalize_values(attr, values, hierarchy: Hierarchy | None = None) -> GeneralizedValue:
    """Smallest generalized value covering every value in ``values``.

    Numeric values give ``[min, max]``; categorical values give their lowest
    common ancestor in ``hierarchy``. ``attr`` is an AttributeSchema or a kind
    string.
    """
    values = list(values)
    if not values:
        raise ValueError("cannot generalize an empty multiset")
    if _kind(attr) == NUMERIC:
        return Interval(min(values), max(values))
    if hierarchy is None:
        raise ValueError("categorical generalization needs a hierarchy")
    return Node(hierarchy.lca(values))


def ncp_cell(attr, g: GeneralizedValue, domain: Domain) -> Fraction:
    """Normalized certainty penalty of one generalized cell, in [0, 1].

    A zero-width numeric domain has nothing to lose and scores 0.
    """
    name = attr if isinstance(attr, str) else attr.name
    if isinstance(g, Interval):
        width = domain.ranges[name]
        if width == 0:
            return Fraction(0)
        return Fraction(g.upper - g.lower) / Fraction(width)
    h = domain.hierarchies[name]
    return Fraction(h.size(g.label), h.leaf_count)


@dataclass(frozen=True)
class Predicate:
    """One query condition.

    Numeric predicates use ``op`` in ``> < = >= <= !=`` against ``value``;
    categorical predicates use ``op == "in"`` with ``value`` a frozenset of leaves.
    """

    attr: str
    op: str
    value: object

    def __post_init__(self):
        if self.op == "in":
            object.__setattr__(self, "value", frozenset(self.value))
        elif self.op not in NUMERIC_OPS:
            raise ValueError(f"unknown predicate operator {self.op!r}")

    @property
    def is_categorical(self) -> bool:
        return self.op == "in"

    def holds(self, v) -> bool:
        op, c = self.op, self.value
        if op == "in":
            return v in c
        if op == ">":
            return v > c
        if op == "<":
            return v < c
        if op == "=":
            return v == c
        if op == ">=":
            return v >= c
        if op == "<=":
            return v <= c
        return v != c

    def __str__(self):
        if self.op == "in":
            return " or ".join(f"{self.attr}={v}" for v in sorted(self.value))
        return f"{self.attr}{self.op}{format_number(self.value)}"


def integer_bounds(op: str, v) -> tuple[float, float]:
    """Inclusive integer range ``[lo, hi]`` of points ``x`` with ``x op v`` (``!=`` excluded)."""
    if op == ">":
        return math.floor(v) + 1, math.inf
    if op == ">=":
        return math.ceil(v), math.inf
    if op == "<":
        return -math.inf, math.ceil(v) - 1
    if op == "<=":
        return -math.inf, math.floor(v)
    if op == "=":
        if v != math.floor(v):
            return 1, 0
        return v, v
    raise ValueError(op)


def value_matches(g, predicate: Predicate, hierarchy: Hierarchy | None = None) -> Fraction:
    """Fraction of ``g`` satisfying ``predicate``: 1 means yes, 0 no, else partial.

    Raw values are tested exactly. An interval counts the integer points it holds
    (uniform over them); a hierarchy node counts its leaves.
    """
    if isinstance(g, Node):
        if not predicate.is_categorical:
            raise TypeError(f"numeric predicate {predicate} against categorical node {g}")
        if hierarchy is None:
            raise ValueError("matching a hierarchy node needs the hierarchy")
        lo, hi = hierarchy.span(g.label)
        hits = sum(1 for leaf in hierarchy.leaves[lo : hi + 1] if leaf in predicate.value)
        return Fraction(hits, hi - lo + 1)
    if isinstance(g, Interval):
        if predicate.is_categorical:
            raise TypeError(f"categorical predicate {predicate} against interval {g}")
        a, b = math.ceil(g.lower), math.floor(g.upper)
        if g.lower == g.upper or a > b:
            return Fraction(int(predicate.holds(g.lower)))
        total = b - a + 1
        if predicate.op == "!=":
            lo, hi = integer_bounds("=", predicate.value)
            inside = max(0, min(b, hi) - max(a, lo) + 1)
            return Fraction(total - inside, total)
        lo, hi = integer_bounds(predicate.op, predicate.value)
        inside = max(0, min(b, hi) - max(a, lo) + 1)
        return Fraction(int(inside), total)
    if isinstance(g, str) != predicate.is_categorical:
        raise TypeError(f"value {g!r} and predicate {predicate} differ in kind")
    return Fraction(int(predicate.holds(g)))


def domain_from_columns(kinds: Mapping[str, str], columns: Mapping[str, list],
                        hierarchies: Mapping[str, Hierarchy]) -> Domain:
    ranges = {}
    for name, kind in kinds.items():
        if kind == NUMERIC:
            col = columns[name]
            ranges[name] = (max(col) - min(col)) if col else 0
    return Domain(dict(kinds), ranges, {a: hierarchies[a] for a in kinds if kinds[a] == CATEGORICAL})
