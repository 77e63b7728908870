"""Command-line interface: ``lgbanon {anonymize,verify,evaluate,sweep,synth}``.

Exit status is 0 on success, 1 when ``verify`` finds a violation, 2 when the
requested privacy levels cannot be met, and 3 on malformed input or arguments.
``LGB_WORKERS`` sets the number of worker processes used by ``sweep``.

All randomness derives from ``--seed``: it is split into independent streams for
synthetic data, density masks and the query workload.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from itertools import product

import numpy as np

from . import __version__
from .exceptions import InfeasibleError, InputError, LGBError
from .metrics import answer_queries, c_dm, density_mask, gen_queries, mean_relative_error, ncp_table
from .microdata import Table, load_table, write_table
from .pipeline import deserialize, lgb, serialize
from .synth import CENSUS_L_OVERRIDES, CENSUS_ROWS, census_like
from .taxonomy import NUMERIC, format_number, parse_number
from .verifier import audit

EXIT_OK, EXIT_VIOLATION, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2, 3
STREAMS = ("data", "mask", "queries")
DEFAULT_QUERIES = 1000
WORKERS_ENV = "LGB_WORKERS"

SWEEP_FIELDS = ["k", "l", "mode", "density", "status", "c_dm", "ncp", "mean_r_error", "n_answered", "n_flagged"]
EVAL_FIELDS = ["k", "l", "mode", "density", "metric", "value"]


def derive_seeds(seed: int) -> dict[str, int]:
    """One 32-bit seed per named stream, all spawned from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: int(c.generate_state(1)[0]) for name, c in zip(STREAMS, children)}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _attr_l(items) -> dict[str, int]:
    out = {}
    for item in items or []:
        name, _, value = item.partition("=")
        if not name or not value.isdigit():
            raise InputError(f"--l-attr expects NAME=INT, got {item!r}")
        out[name] = int(value)
    return out


def _l_for(table: Table, l: int, overrides: dict[str, int]):
    if not overrides:
        return l
    return {a: overrides.get(a, l) for a in table.sensitive_attributes()}


def _format_l(l) -> str:
    if isinstance(l, dict):
        return ";".join(f"{a}={v}" for a, v in sorted(l.items()))
    return str(l)


def _add_table_args(p, required=True):
    p.add_argument("--data", required=required, help="rows CSV (id column first)")
    p.add_argument("--mask", required=required, help="sensitivity mask CSV (0/1 per cell)")
    p.add_argument("--schema", required=required, help="schema CSV: name,kind,role[,hierarchy]")


def _load(args) -> Table:
    return load_table(args.data, args.mask, args.schema)


def _apply_density(table: Table, density, seed: int) -> Table:
    if density is None:
        return table
    return table.with_mask(density_mask(table, density, derive_seeds(seed)["mask"]))


# -- anonymize ------------------------------------------------------------------


def cmd_anonymize(args) -> int:
    table = _apply_density(_load(args), args.density, args.seed)
    l = _l_for(table, args.l, _attr_l(args.l_attr))
    pub = lgb(table, args.k, l, args.mode, seed=args.seed,
              **{"density": args.density, "l-default": args.l})
    serialize(pub, args.out)
    groups = pub.groups
    print(f"groups: {len(groups)}")
    for a in sorted(pub.buckets):
        print(f"buckets[{a}]: {len(pub.buckets[a])}")
    print(f"C_DM: {c_dm(groups)}")
    print(f"NCP: {format_number(ncp_table(pub))}")
    print(f"written: {args.out}")
    return EXIT_OK


# -- verify ---------------------------------------------------------------------


def _read_knowledge(path, pub) -> list[dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"cannot read background knowledge {path}: {e}") from None
    if isinstance(raw, dict):
        raw = [raw]
    kinds = {a.name: a.kind for a in pub.schema}
    out = []
    for entry in raw:
        bk = {}
        for a, v in entry.items():
            if a not in kinds:
                raise InputError(f"background knowledge names unknown attribute {a!r}")
            bk[a] = parse_number(str(v)) if kinds[a] == NUMERIC else str(v)
        out.append(bk)
    return out


def cmd_verify(args) -> int:
    pub = deserialize(args.pub)
    k = args.k if args.k is not None else pub.params.get("k")
    l = args.l if args.l is not None else pub.params.get("l")
    if k is None or l is None:
        raise InputError("k and l are neither given nor recorded in the published params")
    if args.l is not None and args.l_attr:
        l = {a: _attr_l(args.l_attr).get(a, args.l) for a in pub.buckets}
    table = None
    if args.data:
        table = _load(args)
        if list(table.ids) != list(pub.ids):
            raise InputError("original table ids do not match the published table")
        table = table.with_mask(_published_mask(pub))
    bks = _read_knowledge(args.bk, pub) if args.bk else None
    report = audit(pub, k, l, table=table, bks=bks)
    if not args.full and "sweep" in report:
        report["sweep"].pop("per_tuple")
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    print("PASS" if report["passed"] else "FAIL")
    return EXIT_OK if report["passed"] else EXIT_VIOLATION


def _published_mask(pub) -> np.ndarray:
    """Sensitivity mask implied by the release: bucketed cells are the flagged ones."""
    from ._columns import column_view

    view = column_view(pub)
    return np.column_stack([view[a].is_bid for a in pub.names])


# -- evaluate -------------------------------------------------------------------


def evaluate(pub, table: Table, n_queries: int, query_seed: int) -> dict:
    """C_DM, NCP and the query workload's error.

    Query metrics are None when the table cannot carry the workload (no single
    numeric sensitive attribute to sum, or too few attributes to condition on).
    """
    out = {"c_dm": c_dm(pub.groups), "ncp": ncp_table(pub),
           "mean_r_error": None, "n_answered": None, "n_flagged": None}
    try:
        queries = gen_queries(query_seed, n_queries, table)
    except ValueError as e:
        out["skipped"] = str(e)
        return out
    answers = answer_queries(pub, queries, table)
    out["mean_r_error"] = mean_relative_error(answers)
    out["n_answered"] = sum(not a.flagged for a in answers)
    out["n_flagged"] = sum(a.flagged for a in answers)
    return out


def _metric_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return format(float(v), ".10g")
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def cmd_evaluate(args) -> int:
    pub = deserialize(args.pub)
    table = _load(args)
    if list(table.ids) != list(pub.ids):
        raise InputError("original table ids do not match the published table")
    m = evaluate(pub, table, args.queries, derive_seeds(args.seed)["queries"])
    if "skipped" in m:
        print(f"warning: no query workload: {m.pop('skipped')}", file=sys.stderr)
    p = pub.params
    density = args.density if args.density is not None else p.get("density")
    density = "" if density is None else density
    key = [p.get("k", ""), _format_l(p.get("l-default", p.get("l", ""))), p.get("mode", ""), density]
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(EVAL_FIELDS)
        for name, v in m.items():
            w.writerow([*key, name, _metric_text(v)])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# -- sweep ----------------------------------------------------------------------

_WORKER_TABLE: Table | None = None


def _init_worker(source):
    global _WORKER_TABLE
    _WORKER_TABLE = _source_table(source)


def _source_table(source) -> Table:
    kind, payload = source
    if kind == "synthetic":
        rows, seed = payload
        return census_like(rows, seed=seed)
    return load_table(*payload)


def _cell_key(k, l, mode, density) -> tuple[str, str, str, str]:
    return (str(k), str(l), mode, "" if density is None else str(density))


def run_cell(table: Table, k: int, l: int, mode: str, density, seed: int, n_queries: int,
             l_overrides: dict[str, int]) -> dict:
    """One sweep cell; failures are reported in ``status`` instead of raised."""
    row = dict(zip(SWEEP_FIELDS[:4], _cell_key(k, l, mode, density)))
    try:
        t = _apply_density(table, density, seed)
        pub = lgb(t, k, _l_for(t, l, l_overrides), mode, seed=seed)
        m = evaluate(pub, t, n_queries, derive_seeds(seed)["queries"])
        row["status"] = f"ok (no queries: {m.pop('skipped')})" if "skipped" in m else "ok"
        row.update({name: _metric_text(v) for name, v in m.items()})
    except LGBError as e:
        row["status"] = f"{'infeasible' if isinstance(e, InfeasibleError) else 'error'}: {e}"
    return row


def _run_cell_in_worker(args):
    return run_cell(_WORKER_TABLE, *args)


def _done_cells(path) -> set[tuple[str, str, str, str]]:
    if not path or not os.path.exists(path):
        return set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != SWEEP_FIELDS:
            raise InputError(f"{path} exists but is not a sweep CSV; refusing to append")
        return {(r["k"], r["l"], r["mode"], r["density"]) for r in reader}


def workers_from_env() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_sweep(args) -> int:
    if args.data:
        source = ("files", (args.data, args.mask, args.schema))
    else:
        source = ("synthetic", (args.rows, derive_seeds(args.seed)["data"]))
    overrides = _attr_l(args.l_attr)
    if not args.data and not args.l_attr:
        overrides = dict(CENSUS_L_OVERRIDES)
    densities = args.density if args.density else [None]
    grid = [(k, l, mode, d) for d, mode, k, l in product(densities, args.mode, args.k, args.l)]
    done = _done_cells(args.out)
    todo = [c for c in grid if _cell_key(*c) not in done]
    jobs = [(k, l, mode, d, args.seed, args.queries, overrides) for k, l, mode, d in todo]

    new_file = not args.out or not os.path.exists(args.out)
    out = open(args.out, "a", newline="", encoding="utf-8") if args.out else sys.stdout
    failures = []
    try:
        w = csv.DictWriter(out, fieldnames=SWEEP_FIELDS, lineterminator="\n")
        if new_file:
            w.writeheader()
            out.flush()
        if jobs:
            n_workers = min(workers_from_env(), len(jobs))
            if n_workers == 1:
                table = _source_table(source)
                results = (run_cell(table, *j) for j in jobs)
            else:
                pool = ProcessPoolExecutor(n_workers, initializer=_init_worker, initargs=(source,))
                results = pool.map(_run_cell_in_worker, jobs)
            for row in results:
                w.writerow(row)
                out.flush()
                if not row["status"].startswith("ok"):
                    failures.append(row)
            if n_workers > 1:
                pool.shutdown()
    finally:
        if args.out:
            out.close()
    print(f"cells: {len(grid)} total, {len(grid) - len(todo)} skipped, {len(todo)} run, "
          f"{len(failures)} failed", file=sys.stderr)
    for row in failures:
        print(f"  k={row['k']} l={row['l']} mode={row['mode']} density={row['density']}: {row['status']}",
              file=sys.stderr)
    return EXIT_OK


# -- synth ----------------------------------------------------------------------


def cmd_synth(args) -> int:
    seeds = derive_seeds(args.seed)
    table = census_like(args.rows, seed=seeds["data"], density=args.density)
    os.makedirs(args.out, exist_ok=True)
    write_table(table, os.path.join(args.out, "data.csv"), os.path.join(args.out, "mask.csv"),
                os.path.join(args.out, "schema.csv"), hierarchy_dir=args.out)
    print(f"wrote {len(table)} rows to {args.out}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lgbanon", description="Local generalization and bucketization of microdata.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("anonymize", help="anonymize a table and write the release")
    _add_table_args(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--l-attr", action="append", metavar="NAME=INT", help="per-attribute l override")
    p.add_argument("--mode", choices=("mdp", "ncp"), default="mdp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, help="re-draw semi-sensitive flags at this share")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("verify", help="audit a release for k-anonymity and l-diversity")
    p.add_argument("pub", help="release directory")
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--l-attr", action="append", metavar="NAME=INT")
    _add_table_args(p, required=False)
    p.add_argument("--bk", help="JSON background knowledge: an object or a list of objects")
    p.add_argument("--full", action="store_true", help="include per-tuple sweep results")
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evaluate", help="utility metrics of a release as long-form CSV")
    p.add_argument("pub", help="release directory")
    _add_table_args(p)
    p.add_argument("--queries", type=int, default=DEFAULT_QUERIES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, help="density label for the output rows")
    p.add_argument("--out", help="CSV path (stdout if omitted)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="metrics over a parameter grid, one CSV row per cell")
    _add_table_args(p, required=False)
    p.add_argument("--rows", type=int, default=CENSUS_ROWS, help="synthetic rows when no --data")
    p.add_argument("--k", type=_int_list, default=[5, 8, 10])
    p.add_argument("--l", type=_int_list, default=[5, 8, 10, 12, 15, 18, 20])
    p.add_argument("--l-attr", action="append", metavar="NAME=INT")
    p.add_argument("--mode", type=_str_list, default=["mdp", "ncp"])
    p.add_argument("--density", type=_float_list, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queries", type=int, default=DEFAULT_QUERIES)
    p.add_argument("--out", help="CSV path; existing cells are skipped")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="write a synthetic census-like table")
    p.add_argument("--rows", type=int, default=CENSUS_ROWS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--density", type=float, default=0.2)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)
    return parser


def _check_args(args):
    for name in ("k", "l", "queries", "rows"):
        v = getattr(args, name, None)
        vals = v if isinstance(v, list) else [v]
        if any(x is not None and x < 1 for x in vals):
            raise InputError(f"--{name} must be positive")
    d = getattr(args, "density", None)
    for x in d if isinstance(d, list) else [d]:
        if x is not None and not 0 <= x <= 1:
            raise InputError("--density must lie in [0, 1]")
    modes = getattr(args, "mode", None)
    if isinstance(modes, list) and any(m not in ("mdp", "ncp") for m in modes):
        raise InputError(f"--mode entries must be mdp or ncp, got {modes}")
    if getattr(args, "data", None) or getattr(args, "mask", None) or getattr(args, "schema", None):
        if not (args.data and args.mask and args.schema):
            raise InputError("--data, --mask and --schema must be given together")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_args(args)
        return args.func(args)
    except InfeasibleError as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, ValueError, OSError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
