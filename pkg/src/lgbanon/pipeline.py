"""Local generalization and bucketization of a whole table, and its release format.

Every flagged cell is moved into a local bucket of its attribute and replaced by
the bucket id; every QI cell is generalized to the form shared by its local
equivalence group. The two protections are computed independently: buckets
never look at ``k`` and groups never look at ``l``.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

from . import __version__
from .bucketizer import LocalBucket, ValuePairSet, check_condition, local_bucketize
from .exceptions import InputError
from .generalization import GENERALIZERS, LocalEquivalenceGroup
from .microdata import AttributeSchema, Table
from .taxonomy import (
    CATEGORICAL,
    NUMERIC,
    Domain,
    GeneralizedValue,
    Hierarchy,
    Interval,
    Node,
    format_number,
    parse_number,
)

PUBLISHED_FILE = "published.csv"
PARAMS_FILE = "params.json"
_BID_RE = re.compile(r"^B([0-9]+)$")
_INTERVAL_RE = re.compile(r"^\[(-?[0-9]+(?:/[0-9]+)?)-(-?[0-9]+(?:/[0-9]+)?)\]$")


@dataclass(frozen=True, order=True)
class BucketRef:
    """A published sensitive cell: only the id of the local bucket holding the value."""

    bid: int

    def __str__(self):
        return f"B{self.bid}"


@dataclass
class PublishedTable:
    """An anonymized release.

    Attributes
    ----------
    schema : tuple of AttributeSchema
    domain : Domain
        Whole-table NCP statistics and the hierarchies used for generalization.
    ids, gids : tuple of int
        Row keys in ascending order and their local equivalence group ids.
    cells : tuple of tuple
        Per row, one entry per attribute: a generalized value for QI cells or a
        BucketRef for sensitive ones.
    buckets : dict
        ``attr -> {bid -> sorted tuple of values}``; only attributes with
        sensitive cells appear.
    params : dict
        Run metadata (k, l, mode, seed, tool-version, ...).
    """

    schema: tuple
    domain: Domain
    ids: tuple
    gids: tuple
    cells: tuple
    buckets: dict
    params: dict = field(default_factory=dict)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    @property
    def hierarchies(self) -> dict[str, Hierarchy]:
        return self.domain.hierarchies

    def __len__(self):
        return len(self.ids)

    def row(self, tuple_id: int) -> dict:
        p = self.ids.index(tuple_id)
        return dict(zip(self.names, self.cells[p]))

    @property
    def groups(self) -> list[LocalEquivalenceGroup]:
        """Local equivalence groups rebuilt from the rows, ordered by GID."""
        members: dict[int, list[int]] = {}
        gen: dict[int, dict] = {}
        for i, g, cells in zip(self.ids, self.gids, self.cells):
            members.setdefault(g, []).append(i)
            if g not in gen:
                gen[g] = {n: c for n, c in zip(self.names, cells) if not isinstance(c, BucketRef)}
        return [LocalEquivalenceGroup(g, tuple(members[g]), gen[g]) for g in sorted(members)]

    def bucket_members(self, attr: str) -> dict[int, list[int]]:
        """``bid -> tuple ids`` for one attribute (the ID-to-BID side of the release)."""
        j = self.names.index(attr)
        out: dict[int, list[int]] = {b: [] for b in self.buckets.get(attr, {})}
        for i, cells in zip(self.ids, self.cells):
            c = cells[j]
            if isinstance(c, BucketRef):
                out.setdefault(c.bid, []).append(i)
        return out

    def to_frame(self):
        import pandas as pd

        df = pd.DataFrame([[str(c) for c in cells] for cells in self.cells], columns=list(self.names))
        df.insert(0, "GID", list(self.gids))
        df.insert(0, "id", list(self.ids))
        return df


def _value_sort_key(table_or_domain, attr: str):
    kinds = table_or_domain.kinds
    if kinds[attr] == NUMERIC:
        return lambda v: v
    h = table_or_domain.hierarchies[attr]
    return h.leaf_index


def bucketize_table(table: Table, l, eligible: Callable | None = None) -> dict[str, list[LocalBucket]]:
    """Local buckets for every attribute holding sensitive cells, in schema order.

    ``l`` is an int or a mapping ``attr -> l``; ``eligible`` is an optional
    mapping ``attr -> predicate`` overriding the split guard per attribute.
    """
    out = {}
    for attr in table.sensitive_attributes():
        l_attr = l[attr] if isinstance(l, Mapping) else l
        guard = (eligible or {}).get(attr, check_condition)
        out[attr] = local_bucketize(ValuePairSet.from_table(table, attr), l_attr, guard)
    return out


def assemble(table: Table, groups: list[LocalEquivalenceGroup],
             buckets: Mapping[str, list[LocalBucket]], params: dict | None = None) -> PublishedTable:
    """Combine groups and buckets into the released table."""
    n, names = len(table), table.names
    gid_of = {}
    for g in groups:
        for i in g.members:
            gid_of[i] = g.gid
    bid_of: dict[str, dict[int, int]] = {}
    published_buckets = {}
    for attr, bs in buckets.items():
        key = _value_sort_key(table.domain, attr)
        bid_of[attr] = {i: b.bid for b in bs for i in b.ids}
        published_buckets[attr] = {b.bid: tuple(sorted(b.values, key=key)) for b in bs}
    group_of = {g.gid: g for g in groups}
    cells = []
    for p in range(n):
        i = int(table.ids[p])
        g = group_of[gid_of[i]]
        row = []
        for j, a in enumerate(names):
            if table.mask[p, j]:
                row.append(BucketRef(bid_of[a][i]))
            else:
                row.append(g.generalized[a])
        cells.append(tuple(row))
    return PublishedTable(
        # hierarchies travel with the domain; the schema keeps name, kind and role
        schema=tuple(AttributeSchema(a.name, a.kind, a.role) for a in table.schema),
        domain=table.domain,
        ids=tuple(int(i) for i in table.ids),
        gids=tuple(gid_of[int(i)] for i in table.ids),
        cells=tuple(cells),
        buckets=published_buckets,
        params=dict(params or {}),
    )


def lgb(table: Table, k: int, l, mode: str = "mdp", *, eligible: Mapping[str, Callable] | None = None,
        seed: int | None = None, **extra) -> PublishedTable:
    """Anonymize ``table`` so that groups hold >= k tuples and buckets are l-diverse.

    Parameters
    ----------
    table : Table
    k : int
    l : int or mapping of attribute name to int
        Diversity per bucketized attribute; a mapping lets attributes differ.
    mode : {"mdp", "ncp"}
        Local generalization strategy.
    eligible : mapping, optional
        Per-attribute replacement for the bucketizer's split guard.
    seed : int, optional
        Recorded in ``params`` only; the algorithm itself is deterministic.
    **extra
        Further metadata copied into ``params``.
    """
    if mode not in GENERALIZERS:
        raise ValueError(f"unknown mode {mode!r}; expected one of {sorted(GENERALIZERS)}")
    if k < 1:
        raise ValueError("k must be at least 1")
    l_values = l.values() if isinstance(l, Mapping) else [l]
    if any(x < 1 for x in l_values):
        raise ValueError("l must be at least 1")
    buckets = bucketize_table(table, l, eligible)
    groups = GENERALIZERS[mode](table, k)
    params = {"k": k, "l": dict(l) if isinstance(l, Mapping) else l, "mode": mode,
              "seed": seed, "tool-version": __version__}
    params.update(extra)
    return assemble(table, groups, buckets, params)


# -- files ------------------------------------------------------------------------


def bucket_file(attr: str) -> str:
    return f"buckets_{attr}.csv"


def hierarchy_file(attr: str) -> str:
    return f"hierarchy_{attr}.csv"


def _json_number(v):
    return v if isinstance(v, int) else format_number(v)


def serialize(pub: PublishedTable, out_dir) -> list[str]:
    """Write ``pub`` to ``out_dir``; returns the written file names.

    Files: ``published.csv`` (id, GID, one column per attribute), one
    ``buckets_<attr>.csv`` (BID,value) per attribute, header only when the
    attribute has no buckets, ``hierarchy_<attr>.csv`` per categorical attribute,
    and ``params.json``.
    """
    os.makedirs(out_dir, exist_ok=True)
    for a, h in pub.hierarchies.items():
        clash = [n for n in h.nodes if _BID_RE.match(n) or n.startswith("[")]
        if clash:
            raise InputError(f"hierarchy labels {clash} are ambiguous with bucket ids or intervals", column=a)
    written = []

    def _open(name):
        written.append(name)
        return open(os.path.join(out_dir, name), "w", newline="", encoding="utf-8")

    with _open(PUBLISHED_FILE) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "GID", *pub.names])
        for i, g, cells in zip(pub.ids, pub.gids, pub.cells):
            w.writerow([i, g, *(str(c) for c in cells)])
    for a in pub.schema:
        with _open(bucket_file(a.name)) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["BID", "value"])
            for bid, values in sorted(pub.buckets.get(a.name, {}).items()):
                for v in values:
                    w.writerow([bid, format_number(v) if a.kind == NUMERIC else v])
    for a, h in sorted(pub.hierarchies.items()):
        written.append(hierarchy_file(a))
        h.to_csv(os.path.join(out_dir, hierarchy_file(a)))
    meta = dict(pub.params)
    meta["schema"] = [{"name": a.name, "kind": a.kind, "role": a.role} for a in pub.schema]
    meta["ranges"] = {a: _json_number(v) for a, v in sorted(pub.domain.ranges.items())}
    meta["bucketized"] = sorted(pub.buckets)
    with _open(PARAMS_FILE) as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return written


def _parse_published_cell(text: str, attr: AttributeSchema, domain: Domain, row: int):
    m = _BID_RE.match(text)
    if m:
        return BucketRef(int(m.group(1)))
    if attr.kind == NUMERIC:
        m = _INTERVAL_RE.match(text)
        if not m:
            raise InputError(f"cannot parse numeric cell {text!r}", row=row, column=attr.name)
        return Interval(parse_number(m.group(1)), parse_number(m.group(2)))
    if text not in domain.hierarchies[attr.name]:
        raise InputError(f"{text!r} is not a hierarchy node", row=row, column=attr.name)
    return Node(text)


def deserialize(in_dir) -> PublishedTable:
    """Read a directory written by :func:`serialize`."""
    path = os.path.join(in_dir, PARAMS_FILE)
    if not os.path.isdir(in_dir):
        raise InputError(f"not a directory: {in_dir}")
    if not os.path.exists(path):
        raise InputError(f"missing {PARAMS_FILE} in {in_dir}")
    with open(path, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: {e}") from None
    try:
        schema = tuple(AttributeSchema(s["name"], s["kind"], s["role"]) for s in meta.pop("schema"))
        ranges = {a: parse_number(str(v)) for a, v in meta.pop("ranges").items()}
        bucketized = meta.pop("bucketized")
    except (KeyError, TypeError, ValueError) as e:
        raise InputError(f"{path}: malformed metadata ({e})") from None
    hierarchies = {}
    for a in schema:
        if a.kind == CATEGORICAL:
            hp = os.path.join(in_dir, hierarchy_file(a.name))
            if not os.path.exists(hp):
                raise InputError(f"missing {hierarchy_file(a.name)} in {in_dir}")
            hierarchies[a.name] = Hierarchy.from_csv(hp)
    domain = Domain({a.name: a.kind for a in schema}, ranges, hierarchies)

    pp = os.path.join(in_dir, PUBLISHED_FILE)
    if not os.path.exists(pp):
        raise InputError(f"missing {PUBLISHED_FILE} in {in_dir}")
    with open(pp, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = ["id", "GID", *(a.name for a in schema)]
    if not rows or rows[0] != header:
        raise InputError(f"{pp}: header does not match metadata schema", row=0)
    ids, gids, cells = [], [], []
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise InputError(f"{pp}: expected {len(header)} fields", row=r)
        try:
            ids.append(int(row[0]))
            gids.append(int(row[1]))
        except ValueError:
            raise InputError(f"{pp}: id and GID must be integers", row=r) from None
        cells.append(tuple(_parse_published_cell(t, a, domain, r) for t, a in zip(row[2:], schema)))

    buckets = {}
    for a in schema:
        bp = os.path.join(in_dir, bucket_file(a.name))
        if not os.path.exists(bp):
            raise InputError(f"missing {bucket_file(a.name)} in {in_dir}")
        with open(bp, newline="", encoding="utf-8") as fh:
            brows = list(csv.reader(fh))
        if not brows or brows[0] != ["BID", "value"]:
            raise InputError(f"{bp}: expected header BID,value", row=0)
        per: dict[int, list] = {}
        for r, (bid, v) in enumerate(brows[1:], start=1):
            try:
                value = parse_number(v) if a.kind == NUMERIC else v
                per.setdefault(int(bid), []).append(value)
            except ValueError:
                raise InputError(f"{bp}: malformed entry", row=r) from None
        if per or a.name in bucketized:
            key = _value_sort_key(domain, a.name)
            buckets[a.name] = {b: tuple(sorted(vs, key=key)) for b, vs in sorted(per.items())}
    return PublishedTable(schema, domain, tuple(ids), tuple(gids), tuple(cells), buckets, meta)
