"""Input validation helpers for the estimator API."""

from __future__ import annotations

from numbers import Integral
from typing import Mapping

import pandas as pd

from .exceptions import InputError
from .generalization import GENERALIZERS
from .microdata import AttributeSchema, Table


def check_schema(schema) -> list[AttributeSchema]:
    """Accept AttributeSchema objects or ``(name, kind[, role[, hierarchy]])`` tuples."""
    if schema is None:
        raise InputError("a schema is required to build a table from a DataFrame")
    out = []
    for a in schema:
        out.append(a if isinstance(a, AttributeSchema) else AttributeSchema(*a))
    return out


def check_table(X, mask=None, schema=None, hierarchies=None) -> Table:
    """Coerce ``X`` to a validated Table.

    ``X`` may already be a Table (then ``mask`` must be omitted) or a DataFrame with
    an ``id`` column (or id index) plus a same-shaped ``mask``.
    """
    if isinstance(X, Table):
        if mask is not None:
            raise InputError("pass the mask inside the Table, not separately")
        return X
    if not isinstance(X, pd.DataFrame):
        raise InputError(f"expected a Table or a pandas DataFrame, got {type(X).__name__}")
    if mask is None:
        raise InputError("a sensitivity mask is required")
    return Table.from_frame(X, mask, check_schema(schema), hierarchies)


def check_positive_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_l(l, table: Table | None = None):
    """An int, or a mapping of attribute name to int covering every bucketized attribute."""
    if isinstance(l, Mapping):
        out = {a: check_positive_int(v, f"l[{a!r}]") for a, v in l.items()}
        if table is not None:
            missing = [a for a in table.sensitive_attributes() if a not in out]
            if missing:
                raise ValueError(f"no l given for attribute(s) {missing}")
        return out
    return check_positive_int(l, "l")


def check_mode(mode: str) -> str:
    if mode not in GENERALIZERS:
        raise ValueError(f"mode must be one of {sorted(GENERALIZERS)}, got {mode!r}")
    return mode


def resolve_l(l: int, l_per_attribute: Mapping[str, int] | None, table: Table):
    """Per-attribute l: ``l_per_attribute`` overrides the default ``l``."""
    if not l_per_attribute:
        return l
    return {a: l_per_attribute.get(a, l) for a in table.sensitive_attributes()}
