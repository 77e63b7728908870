"""Array view of a published table, shared by the verifier and the query evaluator."""

from __future__ import annotations

import numpy as np

from .taxonomy import NUMERIC, Interval


class AttributeColumn:
    """One published attribute as arrays.

    ``lo``/``hi`` hold interval bounds for numeric cells and the covered leaf-index
    span for categorical cells; bucketed cells have ``is_bid`` set and carry their
    BID in ``bid`` (0 elsewhere).
    """

    def __init__(self, pub, j: int):
        a = pub.schema[j]
        self.name = a.name
        self.kind = a.kind
        n = len(pub.ids)
        self.is_bid = np.zeros(n, dtype=bool)
        self.bid = np.zeros(n, dtype=np.int64)
        self.lo = np.full(n, np.nan)
        self.hi = np.full(n, np.nan)
        h = pub.domain.hierarchies.get(a.name)
        for p, cells in enumerate(pub.cells):
            c = cells[j]
            if isinstance(c, Interval):
                self.lo[p], self.hi[p] = float(c.lower), float(c.upper)
            elif hasattr(c, "bid"):
                self.is_bid[p] = True
                self.bid[p] = c.bid
            else:
                self.lo[p], self.hi[p] = h.span(c.label)

    def key_of(self, value, hierarchy=None) -> float:
        if self.kind == NUMERIC:
            return float(value)
        return float(hierarchy.leaf_index(value))


def column_view(pub) -> dict[str, AttributeColumn]:
    view = pub.__dict__.get("_column_view")
    if view is None:
        view = {a.name: AttributeColumn(pub, j) for j, a in enumerate(pub.schema)}
        pub.__dict__["_column_view"] = view
    return view
