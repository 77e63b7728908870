"""Microdata tables with per-cell sensitivity flags.

A table holds one row per individual. Next to every cell sits a boolean flag: a
set flag means the individual treats that value as sensitive, a clear flag
means it is a quasi-identifier (QI) value. Which attributes carry QI values is
therefore a per-row property, the row's *QI signature*.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral, Real

import numpy as np
import pandas as pd

from .exceptions import InputError
from .taxonomy import CATEGORICAL, NUMERIC, Domain, Hierarchy, domain_from_columns, parse_number

QI = "qi"
SEMI_SENSITIVE = "semi-sensitive"
SENSITIVE = "sensitive"
ROLES = (QI, SEMI_SENSITIVE, SENSITIVE)
KINDS = (NUMERIC, CATEGORICAL)


@dataclass(frozen=True)
class AttributeSchema:
    """One column: its name, value kind, declared role and optional hierarchy.

    ``hierarchy`` is a file name when read from a schema file, or a loaded
    :class:`Hierarchy` when built in code.
    """

    name: str
    kind: str
    role: str = QI
    hierarchy: str | Hierarchy | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown kind {self.kind!r}", column=self.name)
        if self.role not in ROLES:
            raise InputError(f"unknown role hint {self.role!r}", column=self.name)
        if self.name == "id" or not self.name or "/" in self.name:
            raise InputError(f"invalid attribute name {self.name!r}")


@dataclass(frozen=True)
class Record:
    """A single row: its id and one cell per schema attribute."""

    id: int
    cells: tuple

    def __getitem__(self, i):
        return self.cells[i]


def _parse_cell(raw, kind, row, column):
    if raw is None or (isinstance(raw, float) and math.isnan(raw)):
        raise InputError("missing value", row=row, column=column)
    if kind == CATEGORICAL:
        s = str(raw).strip()
        if not s:
            raise InputError("missing value", row=row, column=column)
        return s
    if isinstance(raw, (bool, np.bool_)):
        raise InputError(f"not a number: {raw!r}", row=row, column=column)
    if isinstance(raw, Integral):
        return int(raw)
    if isinstance(raw, Fraction):
        return int(raw) if raw.denominator == 1 else raw
    if isinstance(raw, Real):
        if not math.isfinite(raw):
            raise InputError(f"non-finite number {raw!r}", row=row, column=column)
        f = Fraction(raw)
        return int(f) if f.denominator == 1 else f
    s = str(raw).strip()
    if not s:
        raise InputError("missing value", row=row, column=column)
    try:
        return parse_number(s)
    except ValueError as e:
        raise InputError(str(e), row=row, column=column) from None


class Table:
    """An immutable microdata table.

    Parameters
    ----------
    schema : sequence of AttributeSchema
    ids : sequence of int
        Positive, unique row identifiers.
    rows : sequence of sequence
        One cell per schema attribute. Numeric cells may be strings, ints,
        floats or Fractions; they are stored as exact numbers.
    mask : array-like of bool, shape (n_rows, n_attributes)
        True where the individual flags the cell as sensitive.
    hierarchies : dict, optional
        ``name -> Hierarchy`` for categorical attributes. Otherwise a Hierarchy
        attached to the schema entry is used, else a flat one over the observed
        values.
    check_roles : bool
        Cross-check each attribute's role hint against the mask.

    Rows are stored in ascending id order.
    """

    def __init__(self, schema, ids, rows, mask, hierarchies=None, check_roles=True):
        self.schema = tuple(schema)
        names = [a.name for a in self.schema]
        if len(set(names)) != len(names):
            raise InputError(f"duplicate attribute names in schema: {names}")
        ids = list(ids)
        rows = list(rows)
        mask = np.asarray(mask)
        if mask.dtype != bool:
            mask = mask.astype(object)
        if len(rows) != len(ids):
            raise InputError(f"{len(ids)} ids but {len(rows)} rows")
        if mask.shape != (len(rows), len(self.schema)) and not (len(rows) == 0 and mask.size == 0):
            raise InputError(
                f"mask shape {mask.shape} does not match data shape {(len(rows), len(self.schema))}"
            )
        if mask.dtype == bool:
            bool_mask = mask.reshape(len(rows), len(self.schema)).copy()
        else:
            bool_mask = np.zeros((len(rows), len(self.schema)), dtype=bool)
            for (r, c), v in np.ndenumerate(mask):
                if v in (0, 1, "0", "1", True, False):
                    bool_mask[r, c] = v in (1, "1", True)
                else:
                    raise InputError(f"mask cell must be 0 or 1, got {v!r}", row=r + 1, column=names[c])

        parsed_ids = []
        for r, i in enumerate(ids):
            try:
                i = int(str(i).strip()) if not isinstance(i, Integral) else int(i)
            except ValueError:
                raise InputError(f"id {i!r} is not an integer", row=r + 1, column="id") from None
            if i <= 0:
                raise InputError(f"id {i} is not positive", row=r + 1, column="id")
            parsed_ids.append(i)
        if len(set(parsed_ids)) != len(parsed_ids):
            seen = set()
            for r, i in enumerate(parsed_ids):
                if i in seen:
                    raise InputError(f"duplicate id {i}", row=r + 1, column="id")
                seen.add(i)

        columns: dict[str, list] = {a.name: [] for a in self.schema}
        for r, row in enumerate(rows):
            row = list(row)
            if len(row) != len(self.schema):
                raise InputError(f"expected {len(self.schema)} cells, got {len(row)}", row=r + 1)
            for a, raw in zip(self.schema, row):
                columns[a.name].append(_parse_cell(raw, a.kind, r + 1, a.name))

        order = np.argsort(np.asarray(parsed_ids, dtype=np.int64), kind="stable")
        self.ids = np.asarray(parsed_ids, dtype=np.int64)[order]
        self.columns = {k: tuple(v[i] for i in order) for k, v in columns.items()}
        self.mask = bool_mask[order]
        self.mask.setflags(write=False)
        self.ids.setflags(write=False)
        self._pos = {int(i): p for p, i in enumerate(self.ids)}

        given = dict(hierarchies or {})
        self.hierarchies: dict[str, Hierarchy] = {}
        for a in self.schema:
            if a.kind != CATEGORICAL:
                continue
            h = given.get(a.name)
            if h is None and isinstance(a.hierarchy, Hierarchy):
                h = a.hierarchy
            if h is None:
                h = Hierarchy.flat(self.columns[a.name])
            self.hierarchies[a.name] = h
            for r, v in enumerate(self.columns[a.name]):
                if v not in h or not h.is_leaf(v):
                    raise InputError(
                        f"value {v!r} is not a leaf of the hierarchy", row=int(order[r]) + 1, column=a.name
                    )
        if check_roles:
            self._check_roles()

        self.domain: Domain = domain_from_columns(
            {a.name: a.kind for a in self.schema}, self.columns, self.hierarchies
        )
        self.keys = {}
        for a in self.schema:
            if a.kind == NUMERIC:
                key = np.array([float(v) for v in self.columns[a.name]], dtype=np.float64)
            else:
                h = self.hierarchies[a.name]
                key = np.array([h.leaf_index(v) for v in self.columns[a.name]], dtype=np.int64)
            key.setflags(write=False)
            self.keys[a.name] = key

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_frame(cls, data: pd.DataFrame, mask, schema, hierarchies=None, check_roles=True):
        """Build a table from a DataFrame whose first (or ``id``) column holds ids."""
        if "id" in data.columns:
            ids = data["id"].tolist()
            body = data.drop(columns=["id"])
        else:
            ids = data.index.tolist()
            body = data
        names = [a.name for a in schema]
        if list(body.columns) != names:
            raise InputError(f"columns {list(body.columns)} do not match schema {names}")
        if isinstance(mask, pd.DataFrame):
            if "id" in mask.columns:
                mask = mask.drop(columns=["id"])
            mask = mask.to_numpy()
        return cls(schema, ids, body.itertuples(index=False, name=None), mask, hierarchies, check_roles)

    def with_mask(self, mask) -> "Table":
        """Same data under a different sensitivity mask (role hints are not re-checked)."""
        rows = zip(*(self.columns[a.name] for a in self.schema))
        return Table(self.schema, self.ids.tolist(), rows, np.asarray(mask, dtype=bool),
                     self.hierarchies, check_roles=False)

    def _check_roles(self):
        for j, a in enumerate(self.schema):
            flagged = self.mask[:, j]
            n_flag = int(flagged.sum())
            n = len(flagged)
            if n == 0:
                continue
            if a.role == QI and n_flag:
                r = int(np.argmax(flagged)) + 1
                raise InputError(f"role hint 'qi' but {n_flag} cell(s) flagged sensitive", row=r, column=a.name)
            if a.role == SENSITIVE and n_flag != n:
                r = int(np.argmin(flagged)) + 1
                raise InputError("role hint 'sensitive' but some cells are not flagged", row=r, column=a.name)
            if a.role == SEMI_SENSITIVE and (n_flag == 0 or n_flag == n):
                raise InputError(
                    "role hint 'semi-sensitive' needs both flagged and unflagged cells", column=a.name
                )

    # -- accessors ----------------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    def __len__(self):
        return len(self.ids)

    def attr(self, name: str) -> AttributeSchema:
        for a in self.schema:
            if a.name == name:
                return a
        raise KeyError(name)

    def col_index(self, name: str) -> int:
        return self.names.index(name)

    def position(self, tuple_id: int) -> int:
        try:
            return self._pos[int(tuple_id)]
        except KeyError:
            raise KeyError(f"unknown tuple id {tuple_id}") from None

    def record(self, tuple_id: int) -> Record:
        p = self.position(tuple_id)
        return Record(int(self.ids[p]), tuple(self.columns[n][p] for n in self.names))

    def records(self):
        for p, i in enumerate(self.ids):
            yield Record(int(i), tuple(self.columns[n][p] for n in self.names))

    def value(self, tuple_id: int, attr: str):
        return self.columns[attr][self.position(tuple_id)]

    def sensitive_attributes(self) -> list[str]:
        """Attributes with at least one flagged cell, in schema order."""
        return [a.name for j, a in enumerate(self.schema) if self.mask[:, j].any()]

    def effective_role(self, name: str) -> str:
        col = self.mask[:, self.col_index(name)]
        if not col.any():
            return QI
        return SENSITIVE if col.all() else SEMI_SENSITIVE

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({n: list(self.columns[n]) for n in self.names})
        df.insert(0, "id", self.ids.tolist())
        return df

    def canonical(self) -> str:
        """Stable text rendering used to compare tables byte for byte."""
        lines = [",".join(["id", *self.names])]
        lines += [",".join(f"{a.name}:{a.kind}:{a.role}" for a in self.schema)]
        for p, i in enumerate(self.ids):
            cells = [str(self.columns[n][p]) for n in self.names]
            flags = "".join("1" if f else "0" for f in self.mask[p])
            lines.append(",".join([str(i), *cells, flags]))
        for n, h in sorted(self.hierarchies.items()):
            lines.append(f"{n}:" + ";".join(f"{p}>{c}" for p, c in h.edges))
        return "\n".join(lines)

    def __eq__(self, other):
        return isinstance(other, Table) and self.canonical() == other.canonical()

    def __repr__(self):
        return f"Table(n={len(self)}, attributes={list(self.names)})"


# -- QI signatures and partition -------------------------------------------------


def qi_signature(t, table: Table) -> frozenset[str]:
    """Attributes on which tuple ``t`` (a Record or an id) holds a QI value."""
    tid = t.id if isinstance(t, Record) else t
    p = table.position(tid)
    return frozenset(n for n, flag in zip(table.names, table.mask[p]) if not flag)


def signature_key(sig) -> tuple[str, ...]:
    """Canonical ordering key for a signature: its sorted attribute names."""
    return tuple(sorted(sig))


def qi_partition_positions(table: Table) -> list[tuple[frozenset[str], np.ndarray]]:
    """QI partition as ``(signature, row positions)`` pairs in canonical order."""
    if len(table) == 0:
        return []
    codes = np.packbits(table.mask, axis=1, bitorder="little")
    _, inverse = np.unique(codes, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    out = []
    for g in range(inverse.max() + 1):
        pos = np.flatnonzero(inverse == g)
        sig = frozenset(n for n, flag in zip(table.names, table.mask[pos[0]]) if not flag)
        out.append((sig, pos))
    out.sort(key=lambda x: signature_key(x[0]))
    return out


def qi_partition(table: Table) -> list[set[int]]:
    """Group tuple ids by equal QI signature, ordered by canonical signature."""
    return [set(table.ids[pos].tolist()) for _, pos in qi_partition_positions(table)]


# -- files ------------------------------------------------------------------------


def read_schema(path) -> list[AttributeSchema]:
    """Parse ``name,kind,role-hint[,hierarchy-file]`` lines."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [c.strip() for c in row]
            if not row or not any(row) or row[0].startswith("#"):
                continue
            if lineno == 1 and row[0].lower() == "name":
                continue
            if len(row) not in (3, 4):
                raise InputError(f"schema file {path}: expected 3 or 4 fields", row=lineno)
            hier = row[3] if len(row) == 4 and row[3] else None
            out.append(AttributeSchema(row[0], row[1], row[2], hier))
    if not out:
        raise InputError(f"schema file {path} declares no attributes")
    return out


def write_schema(schema, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for a in schema:
            w.writerow([a.name, a.kind, a.role] + ([a.hierarchy] if isinstance(a.hierarchy, str) else []))


def load_table(rows_file, mask_file, schema_file) -> Table:
    """Load and validate a table from its data, mask and schema files.

    Hierarchy paths in the schema resolve relative to the schema file.
    """
    for p in (rows_file, mask_file, schema_file):
        if not os.path.exists(p):
            raise InputError(f"file not found: {p}")
    schema = read_schema(schema_file)
    names = [a.name for a in schema]
    base = os.path.dirname(os.path.abspath(schema_file))
    hierarchies = {}
    for a in schema:
        if a.hierarchy:
            if a.kind != CATEGORICAL:
                raise InputError("hierarchy given for a numeric attribute", column=a.name)
            hierarchies[a.name] = Hierarchy.from_csv(os.path.join(base, a.hierarchy))

    with open(rows_file, newline="", encoding="utf-8") as fh:
        data = list(csv.reader(fh))
    if not data:
        raise InputError(f"{rows_file} is empty")
    header = [h.strip() for h in data[0]]
    if header[:1] != ["id"]:
        raise InputError(f"{rows_file}: first column must be 'id'", row=0)
    if header[1:] != names:
        raise InputError(f"{rows_file}: header {header[1:]} does not match schema {names}", row=0)
    body = [r for r in data[1:] if r]
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise InputError(f"expected {len(header)} fields, got {len(row)}", row=r)

    with open(mask_file, newline="", encoding="utf-8") as fh:
        mrows = [r for r in csv.reader(fh) if r]
    if mrows and [c.strip() for c in mrows[0]] in (names, ["id", *names]):
        mrows = mrows[1:]
    if len(mrows) != len(body):
        raise InputError(f"mask has {len(mrows)} rows, data has {len(body)}")
    mask = []
    for r, row in enumerate(mrows, start=1):
        row = [c.strip() for c in row]
        if len(row) == len(names) + 1:
            row = row[1:]
        if len(row) != len(names):
            raise InputError(f"mask row has {len(row)} fields, expected {len(names)}", row=r)
        for c, v in zip(names, row):
            if v not in ("0", "1"):
                raise InputError(f"mask cell must be 0 or 1, got {v!r}", row=r, column=c)
        mask.append([v == "1" for v in row])

    return Table(schema, [r[0] for r in body], [r[1:] for r in body],
                 np.array(mask, dtype=bool).reshape(len(body), len(names)), hierarchies)


def write_table(table: Table, rows_file, mask_file, schema_file=None, hierarchy_dir=None) -> None:
    """Write a table back out in the load_table file formats."""
    from .taxonomy import format_number

    with open(rows_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *table.names])
        for p, i in enumerate(table.ids):
            w.writerow([int(i), *(format_number(table.columns[n][p]) for n in table.names)])
    with open(mask_file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(table.names)
        for row in table.mask:
            w.writerow(["1" if f else "0" for f in row])
    if schema_file is not None:
        schema = []
        for a in table.schema:
            hier = a.hierarchy if isinstance(a.hierarchy, str) else None
            if a.kind == CATEGORICAL and hierarchy_dir is not None:
                hier = f"hierarchy_{a.name}.csv"
                table.hierarchies[a.name].to_csv(os.path.join(hierarchy_dir, hier))
                if os.path.dirname(os.path.abspath(schema_file)) != os.path.abspath(hierarchy_dir):
                    hier = os.path.relpath(os.path.join(hierarchy_dir, hier),
                                           os.path.dirname(os.path.abspath(schema_file)))
            schema.append(AttributeSchema(a.name, a.kind, a.role, hier))
        write_schema(schema, schema_file)
