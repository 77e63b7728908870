from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..exceptions import InfeasibleError
from ..microdata import Table, qi_partition_positions, signature_key
from ..taxonomy import NUMERIC, GeneralizedValue, Interval, Node


@dataclass(frozen=True)
class LocalEquivalenceGroup:
    """Tuples sharing one QI signature, with one generalized value per QI attribute."""

    gid: int
    members: tuple[int, ...]
    generalized: Mapping[str, GeneralizedValue] = field(default_factory=dict)

    def __len__(self):
        return len(self.members)

    @property
    def signature(self) -> frozenset[str]:
        return frozenset(self.generalized)


def generalize_positions(table: Table, pos: np.ndarray, attrs) -> dict[str, GeneralizedValue]:
    out = {}
    for a in attrs:
        keys = table.keys[a][pos]
        if table.attr(a).kind == NUMERIC:
            col = table.columns[a]
            out[a] = Interval(col[pos[int(np.argmin(keys))]], col[pos[int(np.argmax(keys))]])
        else:
            out[a] = Node(table.hierarchies[a].lca_span(int(keys.min()), int(keys.max())))
    return out


def make_group(table: Table, gid: int, pos: np.ndarray, attrs) -> LocalEquivalenceGroup:
    members = tuple(sorted(int(i) for i in table.ids[pos]))
    return LocalEquivalenceGroup(gid, members, generalize_positions(table, pos, attrs))


def checked_partition(table: Table, k: int):
    """QI partition with attribute lists in schema order; every subset must hold k tuples."""
    if k < 1:
        raise ValueError("k must be at least 1")
    out = []
    for sig, pos in qi_partition_positions(table):
        if len(pos) < k:
            raise InfeasibleError(
                f"QI-signature subset {list(signature_key(sig))} has {len(pos)} tuple(s), fewer than k={k}"
            )
        out.append(([a for a in table.names if a in sig], pos))
    return out


def positions_of(table: Table, ids) -> np.ndarray:
    return np.array(sorted(table.position(i) for i in ids), dtype=np.int64)
