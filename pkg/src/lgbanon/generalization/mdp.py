"""Local generalization by multi-dimensional median partitioning.

Each QI-signature subset is cut recursively, Mondrian style, along the
attribute with the widest normalized spread whose median cut leaves at least
``k`` tuples on both sides.
"""

from __future__ import annotations

import numpy as np

from ..microdata import Table
from ..taxonomy import NUMERIC
from ._common import LocalEquivalenceGroup, checked_partition, make_group, positions_of


def _spread(table: Table, pos: np.ndarray, attr: str) -> float:
    keys = table.keys[attr][pos]
    if table.attr(attr).kind == NUMERIC:
        width = float(table.domain.ranges[attr])
        return 0.0 if width == 0 else (float(keys.max()) - float(keys.min())) / width
    return len(np.unique(keys)) / table.hierarchies[attr].leaf_count


def _dimension_order(table: Table, pos: np.ndarray, attrs) -> list[str]:
    return sorted(attrs, key=lambda a: (-_spread(table, pos, a), a))


def choose_dimension(table: Table, group, qi_set) -> str:
    """Attribute of ``qi_set`` with the widest normalized spread over ``group`` (ids).

    Numeric spread is ``(max - min) / range(A)``; categorical spread is the number of
    distinct leaves over ``|A|``. Ties go to the smallest attribute name.
    """
    if not qi_set:
        raise ValueError("no attribute to choose from")
    return _dimension_order(table, positions_of(table, group), list(qi_set))[0]


def _median_split(keys: np.ndarray):
    half = -(-len(keys) // 2)
    med = np.partition(keys, half - 1)[half - 1]
    return keys <= med


def generalize_mdp(table: Table, k: int) -> list[LocalEquivalenceGroup]:
    """Partition every QI-signature subset into local equivalence groups of >= k tuples.

    Working sets are processed last-in first-out. A set is cut at the median of the
    first attribute, in choose_dimension order, that leaves both sides with at least
    ``k`` tuples; a set no attribute can cut becomes a group. GIDs follow emission
    order.

    Raises
    ------
    InfeasibleError
        If a QI-signature subset holds fewer than ``k`` tuples.
    """
    groups: list[LocalEquivalenceGroup] = []
    for attrs, subset in checked_partition(table, k):
        stack = [subset]
        while stack:
            oper = stack.pop()
            parts = None
            for a in _dimension_order(table, oper, attrs):
                left = _median_split(table.keys[a][oper])
                n_left = int(left.sum())
                if n_left >= k and len(oper) - n_left >= k:
                    parts = oper[left], oper[~left]
                    break
            if parts is None:
                groups.append(make_group(table, len(groups) + 1, oper, attrs))
            else:
                stack.append(parts[1])
                stack.append(parts[0])
    return groups
