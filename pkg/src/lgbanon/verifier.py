"""Adversary model and compliance checks for published tables.

The adversary knows a target's QI values and nothing sensitive. A published row
*matches* the target when every known value lies inside the row's generalized
cell on that attribute; bucket-id cells constrain nothing. Matching rows are
equally likely to be the target, which fixes the probabilities below.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np
from scipy import sparse

from ._columns import column_view
from .microdata import Table
from .pipeline import PublishedTable
from .taxonomy import format_number


@dataclass(frozen=True)
class BackgroundKnowledge:
    """Raw values the adversary knows about one target, keyed by attribute."""

    values: Mapping[str, object]

    @classmethod
    def of(cls, table: Table, tuple_id: int) -> "BackgroundKnowledge":
        """Worst case: every QI value of the tuple as it appears in the original table."""
        p = table.position(tuple_id)
        return cls({n: table.columns[n][p] for j, n in enumerate(table.names) if not table.mask[p, j]})


def _as_values(bk) -> Mapping[str, object]:
    return bk.values if isinstance(bk, BackgroundKnowledge) else bk


def _match_mask(pub: PublishedTable, bk) -> np.ndarray:
    view = column_view(pub)
    ok = np.ones(len(pub.ids), dtype=bool)
    for attr, v in _as_values(bk).items():
        col = view[attr]
        x = col.key_of(v, pub.domain.hierarchies.get(attr))
        ok &= col.is_bid | ((col.lo <= x) & (x <= col.hi))
    return ok


def matching_tuples(pub: PublishedTable, bk) -> set[int]:
    """Ids of published rows consistent with every known value."""
    ids = np.asarray(pub.ids)
    return set(ids[_match_mask(pub, bk)].tolist())


def matching_buckets(pub: PublishedTable, bk, attr: str) -> set[int]:
    """BIDs of ``attr`` that hold at least one matching tuple."""
    if attr not in pub.buckets:
        raise KeyError(f"attribute {attr!r} has no buckets")
    col = column_view(pub)[attr]
    sel = _match_mask(pub, bk) & col.is_bid
    return set(col.bid[sel].tolist())


def identity_disclosure_prob(pub: PublishedTable, bk) -> Fraction | None:
    """``1 / |matching tuples|``, or None when nothing matches (no risk)."""
    n = int(_match_mask(pub, bk).sum())
    return Fraction(1, n) if n else None


def value_disclosure_prob(pub: PublishedTable, bk, attr: str, s) -> Fraction | None:
    """Probability the adversary assigns to the target holding value ``s`` on ``attr``.

    Sums, over matching buckets, the share of matching tuples inside the bucket
    times the share of the bucket's values equal to ``s``. None when nothing matches.
    """
    if attr not in pub.buckets:
        raise KeyError(f"attribute {attr!r} has no buckets")
    m = _match_mask(pub, bk)
    total = int(m.sum())
    if not total:
        return None
    col = column_view(pub)[attr]
    hits = Counter(col.bid[m & col.is_bid].tolist())
    prob = Fraction(0)
    for bid, n_match in hits.items():
        values = pub.buckets[attr][bid]
        prob += Fraction(n_match, total) * Fraction(values.count(s), len(values))
    return prob


@dataclass
class Verdict:
    """Outcome of a structural check; ``where`` locates the first violation."""

    passed: bool
    message: str = "ok"
    where: tuple = ()

    def __bool__(self):
        return self.passed


def check_k(pub: PublishedTable, k: int) -> Verdict:
    """Every local equivalence group holds at least ``k`` tuples."""
    sizes = Counter(pub.gids)
    for gid in sorted(sizes):
        if sizes[gid] < k:
            return Verdict(False, f"group GID {gid} has {sizes[gid]} tuple(s) < k={k}", (gid,))
    return Verdict(True)


def check_l(pub: PublishedTable, l) -> Verdict:
    """Every bucket holds at least ``l`` values and no value twice.

    ``l`` may be a mapping ``attr -> l``. Bucket contents must also agree with the
    bucket ids present in the rows.
    """
    for attr in pub.names:
        if attr not in pub.buckets:
            continue
        l_attr = l[attr] if isinstance(l, Mapping) else l
        members = pub.bucket_members(attr)
        for bid, values in sorted(pub.buckets[attr].items()):
            if len(values) < l_attr:
                return Verdict(False, f"bucket ({attr}, B{bid}) has {len(values)} value(s) < l={l_attr}",
                               (attr, bid))
            dup = [v for v, c in Counter(values).items() if c > 1]
            if dup:
                return Verdict(False, f"bucket ({attr}, B{bid}) repeats value {dup[0]!r}", (attr, bid))
            if len(members.get(bid, ())) != len(values):
                return Verdict(False, f"bucket ({attr}, B{bid}) lists {len(values)} value(s) "
                                      f"but {len(members.get(bid, ()))} row(s) reference it", (attr, bid))
        extra = set(members) - set(pub.buckets[attr])
        if extra:
            bid = min(extra)
            return Verdict(False, f"rows reference unknown bucket ({attr}, B{bid})", (attr, bid))
    for j, attr in enumerate(pub.names):
        if attr not in pub.buckets and any(hasattr(c[j], "bid") for c in pub.cells):
            return Verdict(False, f"attribute {attr} has bucket ids but no bucket file", (attr,))
    return Verdict(True)


def published_bounds(pub: PublishedTable) -> dict:
    """Disclosure bounds computable from the release alone.

    Identity: ``1 / smallest group``. Value, per attribute: the largest share of
    one value inside any bucket.
    """
    sizes = Counter(pub.gids)
    out = {"identity": Fraction(1, min(sizes.values())) if sizes else None, "value": {}}
    for attr, bs in pub.buckets.items():
        worst = Fraction(0)
        for values in bs.values():
            if values:
                worst = max(worst, Fraction(max(Counter(values).values()), len(values)))
        out["value"][attr] = worst
    return out


# -- exhaustive sweep ----------------------------------------------------------------


@dataclass
class SweepResult:
    """Worst-case disclosure over adversaries built from every original row."""

    ids: np.ndarray
    identity: list  # per target, Fraction or None
    value: dict = field(default_factory=dict)  # attr -> per target Fraction or None

    @property
    def max_identity(self) -> Fraction:
        vals = [p for p in self.identity if p is not None]
        return max(vals) if vals else Fraction(0)

    def max_value(self, attr: str | None = None) -> Fraction:
        attrs = [attr] if attr else list(self.value)
        vals = [p for a in attrs for p in self.value[a] if p is not None]
        return max(vals) if vals else Fraction(0)


def _bk_matrix(pub: PublishedTable, table: Table, targets: np.ndarray) -> np.ndarray:
    """``M[t, c]``: published row ``c`` matches the QI values of original row ``targets[t]``."""
    view = column_view(pub)
    m = np.ones((len(targets), len(pub.ids)), dtype=bool)
    for j, attr in enumerate(table.names):
        col = view[attr]
        known = ~table.mask[targets, j]
        x = table.keys[attr][targets].astype(float)
        inside = (col.lo[None, :] <= x[:, None]) & (x[:, None] <= col.hi[None, :])
        m &= ~known[:, None] | col.is_bid[None, :] | inside
    return m


def adversary_sweep(pub: PublishedTable, table: Table, chunk: int = 512) -> SweepResult:
    """Identity and value disclosure for every original row taken as the target.

    Probabilities are exact. Value disclosure for a target is the maximum over all
    values of the attribute.
    """
    if tuple(pub.ids) != tuple(int(i) for i in table.ids):
        raise ValueError("published table and original table have different ids")
    n = len(table)
    view = column_view(pub)
    identity: list = [None] * n
    value: dict[str, list] = {a: [None] * n for a in pub.buckets}

    prepared = {}
    for attr, bs in pub.buckets.items():
        col = view[attr]
        bids = sorted(bs)
        index = {b: i for i, b in enumerate(bids)}
        sizes = np.array([len(bs[b]) for b in bids], dtype=np.int64)
        rows = np.flatnonzero(col.is_bid)
        onehot = sparse.csr_matrix(
            (np.ones(len(rows), dtype=np.int64), (rows, [index[b] for b in col.bid[rows]])),
            shape=(n, len(bids)),
        )
        distinct = sorted({v for b in bids for v in bs[b]}, key=lambda v: (str(type(v)), v))
        vindex = {v: i for i, v in enumerate(distinct)}
        counts = Counter((index[b], vindex[v]) for b in bids for v in bs[b])
        r, c = zip(*counts) if counts else ((), ())
        cnt = sparse.csr_matrix((np.array(list(counts.values()), dtype=np.int64), (r, c)),
                                shape=(len(bids), len(distinct)))
        lcm = math.lcm(*sizes.tolist()) if len(sizes) else 1
        exact = lcm * n * int(sizes.max() if len(sizes) else 1) < 2**62
        prepared[attr] = (onehot, cnt, sizes, lcm, exact, bids, distinct)

    for start in range(0, n, chunk):
        targets = np.arange(start, min(n, start + chunk))
        m = _bk_matrix(pub, table, targets)
        totals = m.sum(axis=1)
        for t, tot in zip(targets, totals):
            identity[t] = Fraction(1, int(tot)) if tot else None
        mi = m.astype(np.int64)
        for attr, (onehot, cnt, sizes, lcm, exact, bids, distinct) in prepared.items():
            if not len(bids):
                continue
            per_bucket = np.asarray((onehot.T @ mi.T).T)
            if exact:
                scaled = per_bucket * (lcm // sizes)[None, :]
                num = np.asarray((cnt.T @ scaled.T).T)
                best = num.max(axis=1)
                for t, b, tot in zip(targets, best, totals):
                    value[attr][t] = Fraction(int(b), lcm * int(tot)) if tot else None
            else:
                prob = np.asarray((cnt.T @ (per_bucket / sizes[None, :]).T).T)
                best = prob.max(axis=1)
                for row, (t, tot) in enumerate(zip(targets, totals)):
                    if not tot:
                        continue
                    cands = np.flatnonzero(prob[row] >= best[row] - 1e-9)
                    exact_best = Fraction(0)
                    nz = np.flatnonzero(per_bucket[row])
                    for s in cands:
                        acc = Fraction(0)
                        for bi in nz:
                            c = cnt[bi, s]
                            if c:
                                acc += Fraction(int(per_bucket[row, bi]) * int(c), int(sizes[bi]))
                        exact_best = max(exact_best, acc / int(tot))
                    value[attr][t] = exact_best
    return SweepResult(np.asarray(table.ids), identity, value)


def _fmt(p) -> str | None:
    return None if p is None else format_number(p)


def audit(pub: PublishedTable, k: int, l, table: Table | None = None, bks=None) -> dict:
    """Compliance report: structural checks, release-only bounds and, when the
    original table is given, the exhaustive adversary sweep."""
    vk, vl = check_k(pub, k), check_l(pub, l)
    bounds = published_bounds(pub)
    report = {
        "k": k,
        "l": l,
        "check_k": {"passed": vk.passed, "message": vk.message},
        "check_l": {"passed": vl.passed, "message": vl.message},
        "groups": len(set(pub.gids)),
        "buckets": {a: len(bs) for a, bs in pub.buckets.items()},
        "bounds": {"identity": _fmt(bounds["identity"]),
                   "value": {a: _fmt(p) for a, p in bounds["value"].items()}},
    }
    passed = vk.passed and vl.passed

    def l_of(attr):
        return l[attr] if isinstance(l, Mapping) else l

    if table is not None:
        sweep = adversary_sweep(pub, table)
        violations = []
        per_tuple = []
        for p, i in enumerate(sweep.ids.tolist()):
            ident = sweep.identity[p]
            vals = {a: sweep.value[a][p] for a in sweep.value}
            per_tuple.append({"id": i, "identity": _fmt(ident), "value": {a: _fmt(v) for a, v in vals.items()}})
            if ident is not None and ident > Fraction(1, k):
                violations.append({"id": i, "kind": "identity", "prob": _fmt(ident)})
            for a, v in vals.items():
                if v is not None and v > Fraction(1, l_of(a)):
                    violations.append({"id": i, "kind": "value", "attr": a, "prob": _fmt(v)})
        report["sweep"] = {
            "max_identity": _fmt(sweep.max_identity),
            "max_value": {a: _fmt(sweep.max_value(a)) for a in sweep.value},
            "violations": violations,
            "per_tuple": per_tuple,
        }
        passed = passed and not violations
    if bks:
        out = []
        for bk in bks:
            entry = {"knowledge": {a: str(v) for a, v in _as_values(bk).items()},
                     "matches": sorted(matching_tuples(pub, bk)),
                     "identity": _fmt(identity_disclosure_prob(pub, bk))}
            out.append(entry)
        report["knowledge"] = out
    report["passed"] = passed
    return report
