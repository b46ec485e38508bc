"""Command-line front end: ``fieldcalc <command> ...``.

Exit codes: 0 success, 1 numeric or guard failure (including tolerance
breaches), 2 usage or input parse failure.  ``enumerate`` prints one
structure per line (or a bare count) unless ``--json`` is given; every other
command prints one JSON document on standard output carrying a ``metadata``
block (model hash, truncations, tool version, seed).  Output is deterministic: keys are
sorted, floats are written with ``repr`` in JSON and ``%.17g`` in CSV, and
every sum that feeds a printed number is correctly rounded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from . import multiindex as mi
from . import oracle
from .combinatorics import (
    SizeLimitError,
    count_hierarchies,
    count_pair_partitions,
    count_partitions,
    enumerate_apportionments,
    enumerate_hierarchies,
    enumerate_pair_partitions,
    enumerate_partitions,
)
from .gaussian import Metric, SingularMetricError, isserlis_moment
from .perturbation import (
    STRATEGIES,
    Interaction,
    ModelSpec,
    ds_max_residual,
    interacting_moments,
    moments_to_cumulants,
    partition_function,
)
from .series import BaseSpace, SymmetricSeries, TruncationError, log_series
from .trees import ConvergenceError, stationary_log_z, tree_expand

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_USAGE = 2

SYMMETRY_TOL = 1e-12
DEFAULT_MAX_WORK = 10**8
THREADS_ENV = "FIELDCALC_THREADS"

FAMILIES = {
    "partitions": (enumerate_partitions, count_partitions),
    "pairs": (enumerate_pair_partitions, count_pair_partitions),
    "apportionments": (enumerate_apportionments, lambda n: 2 * count_partitions(n)),
    "hierarchies": (enumerate_hierarchies, count_hierarchies),
}


class InputError(ValueError):
    """Malformed command-line input or model file (exit code 2)."""


class WorkLimitError(RuntimeError):
    """Estimated job size above --max-work (exit code 1)."""


# ----------------------------------------------------------------- model files

def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc


def _require(doc: dict, key: str, path: str, where: str = ""):
    if key not in doc:
        raise InputError(f"{path}: missing key '{where}{key}'")
    return doc[key]


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def parse_model(doc, path: str = "<model>", warn=None) -> tuple[ModelSpec, dict]:
    """Validate a model document; returns the model and its normalized form.

    The normalized form (used for hashing) has a symmetrized metric and
    float-valued numbers.  ``warn`` receives warning strings (default: stderr).
    """
    warn = warn or (lambda msg: print(f"warning: {msg}", file=sys.stderr))
    if not isinstance(doc, dict):
        raise InputError(f"{path}: model must be a JSON object")
    m = _require(doc, "m", path)
    if not _is_int(m) or m < 1:
        raise InputError(f"{path}: key 'm' must be a positive integer")
    weights = _require(doc, "weights", path)
    if not isinstance(weights, list) or len(weights) != m or not all(_is_num(w) for w in weights):
        raise InputError(f"{path}: key 'weights' must be a list of {m} finite numbers")
    if not all(w > 0 for w in weights):
        raise InputError(f"{path}: key 'weights' must be positive")
    metric = _require(doc, "metric", path)
    if (not isinstance(metric, list) or len(metric) != m
            or not all(isinstance(r, list) and len(r) == m and all(_is_num(v) for v in r) for r in metric)):
        raise InputError(f"{path}: key 'metric' must be an {m}x{m} matrix of finite numbers")
    g = np.array(metric, dtype=float)
    asym = float(np.max(np.abs(g - g.T)))
    if asym > SYMMETRY_TOL:
        raise InputError(f"{path}: key 'metric' is not symmetric (max asymmetry {asym:.3e})")
    if asym > 0.0:
        warn(f"{path}: metric asymmetry {asym:.3e} symmetrized")
        g = 0.5 * (g + g.T)
    inter = _require(doc, "interaction", path)
    if not isinstance(inter, dict):
        raise InputError(f"{path}: key 'interaction' must be an object")
    coupling = _require(inter, "coupling", path, "interaction.")
    if not _is_num(coupling):
        raise InputError(f"{path}: key 'interaction.coupling' must be a finite number")
    terms = _require(inter, "terms", path, "interaction.")
    if not isinstance(terms, list):
        raise InputError(f"{path}: key 'interaction.terms' must be a list")
    entries = {}
    for k, t in enumerate(terms):
        where = f"interaction.terms[{k}]"
        if not isinstance(t, dict):
            raise InputError(f"{path}: key '{where}' must be an object")
        idx = _require(t, "idx", path, where + ".")
        val = _require(t, "val", path, where + ".")
        if not isinstance(idx, list) or not all(_is_int(i) for i in idx):
            raise InputError(f"{path}: key '{where}.idx' must be a list of integers")
        if not idx:
            raise InputError(f"{path}: key '{where}.idx' is empty; the interaction has no constant term")
        if idx != sorted(idx):
            raise InputError(f"{path}: key '{where}.idx' must be sorted")
        if not all(0 <= i < m for i in idx):
            raise InputError(f"{path}: key '{where}.idx' has points outside [0, {m})")
        if not _is_num(val):
            raise InputError(f"{path}: key '{where}.val' must be a finite number")
        if tuple(idx) in entries:
            raise InputError(f"{path}: key '{where}.idx' repeats an earlier term")
        entries[tuple(idx)] = float(val)
    n_max = _require(doc, "n_max", path)
    N_max = _require(doc, "N_max", path)
    for key, val in (("n_max", n_max), ("N_max", N_max)):
        if not _is_int(val) or val < 0:
            raise InputError(f"{path}: key '{key}' must be a non-negative integer")
    degree = max((len(k) for k in entries), default=0)
    base = BaseSpace(np.array(weights, dtype=float))
    try:
        met = Metric.from_matrix(g, base)
    except SingularMetricError as exc:
        raise InputError(f"{path}: key 'metric': {exc}") from exc
    V = SymmetricSeries(m, max(degree, 1), entries)
    model = ModelSpec(base, met, Interaction(V, float(coupling)), n_max, N_max)
    normalized = {
        "m": m,
        "weights": [float(w) for w in weights],
        "metric": g.tolist(),
        "interaction": {
            "coupling": float(coupling),
            "terms": [{"idx": list(k), "val": v} for k, v in sorted(entries.items(), key=lambda kv: (len(kv[0]), kv[0]))],
        },
        "n_max": n_max,
        "N_max": N_max,
    }
    return model, normalized


def load_model(path: str, warn=None) -> tuple[ModelSpec, dict]:
    return parse_model(_read_json(path), path, warn)


def model_hash(normalized: dict) -> str:
    canon = json.dumps(normalized, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def load_source(path: str, m: int) -> np.ndarray:
    doc = _read_json(path)
    if isinstance(doc, dict):
        doc = _require(doc, "j", path)
    if not isinstance(doc, list) or len(doc) != m or not all(_is_num(v) for v in doc):
        raise InputError(f"{path}: source must be a list of {m} finite numbers")
    return np.array(doc, dtype=float)


# ------------------------------------------------------------------- outputs

def metadata(normalized: Optional[dict], n_max=None, N_max=None, seed=None, **extra) -> dict:
    meta = {
        "tool": "fieldcalc",
        "version": __version__,
        "model_sha256": model_hash(normalized) if normalized is not None else None,
        "truncations": {"n_max": n_max, "N_max": N_max},
        "seed": seed,
    }
    meta.update(extra)
    return meta


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def dumps(doc) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n"


def emit(doc) -> None:
    sys.stdout.write(dumps(doc))


def write_series(series: SymmetricSeries, json_path: str, csv_path: Optional[str], meta: dict) -> None:
    doc = dict(series.to_json())
    doc["metadata"] = meta
    Path(json_path).write_text(dumps(doc))
    if csv_path:
        lines = ["idx,value"]
        for k, v in series.items():
            lines.append(f"\"{' '.join(str(i) for i in k)}\",{v:.17g}")
        Path(csv_path).write_text("\n".join(lines) + "\n")


# -------------------------------------------------------------- work guards

def _n_indices(m: int, n_max: int) -> int:
    return sum(mi.count_indices(m, n) for n in range(n_max + 1))


def estimate_work(model: ModelSpec, N: int, strategy: str) -> int:
    """Rough operation count of an expansion run, before running it."""
    m, L = model.m, model.vertex_order
    work = _n_indices(m, N) * _n_indices(m, L)
    if strategy == "enumeration":
        work += sum(mi.count_indices(m, n) * count_partitions(n) for n in range(L + 1))
        work += sum(mi.count_indices(m, n) * count_pair_partitions(n) for n in range(0, L + N + 1, 2))
    else:
        work += model.n_max * sum(mi.count_indices(m, n) * 2**n for n in range(L + 1))
        work += _n_indices(m, L + N) * (L + N)
    return work


def _check_work(work: int, limit: int, what: str) -> None:
    if work > limit:
        raise WorkLimitError(f"{what}: estimated work {work} exceeds --max-work {limit}")


def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        return arg
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise InputError(f"{THREADS_ENV}={raw!r} is not an integer") from exc
    if n < 1:
        raise InputError(f"{THREADS_ENV} must be >= 1")
    return n


def _moments(model: ModelSpec, args) -> SymmetricSeries:
    _check_work(estimate_work(model, model.N_max, args.strategy), args.max_work, "moments")
    return interacting_moments(model, strategy=args.strategy, threads=_threads(args.threads))


def _override(model: ModelSpec, args) -> ModelSpec:
    return model.with_truncation(getattr(args, "n_max", None), getattr(args, "N_max", None))


# ----------------------------------------------------------------- commands

def cmd_enumerate(args) -> int:
    gen, count = FAMILIES[args.family]
    n = args.n
    if n < 0 or (args.family == "hierarchies" and n < 1):
        raise InputError(f"--n {n} is out of range for family {args.family}")
    total = count(n)
    doc = {"family": args.family, "n": n, "count": total, "metadata": metadata(None)}
    if not args.count_only:
        _check_work(total, args.max_work, "enumerate")
        doc["items"] = [str(s) for s in gen(n)]
    if args.json:
        emit(doc)
    elif args.count_only:
        print(total)
    else:
        sys.stdout.write("".join(item + "\n" for item in doc["items"]))
    return EXIT_OK


def cmd_moments(args) -> int:
    model, norm = load_model(args.model)
    model = _override(model, args)
    G = _moments(model, args)
    xi = partition_function(model, args.strategy)
    meta = metadata(norm, model.n_max, model.N_max, strategy=args.strategy)
    if args.out:
        csv = args.csv or str(Path(args.out).with_suffix(".csv"))
        write_series(G, args.out, csv, meta)
    doc = {"xi": xi, "metadata": meta}
    if not args.out:
        doc["moments"] = G.to_json()
    emit(doc)
    return EXIT_OK


def cmd_cumulants(args) -> int:
    model, norm = load_model(args.model)
    model = _override(model, args)
    K = moments_to_cumulants(_moments(model, args))
    meta = metadata(norm, model.n_max, model.N_max, strategy=args.strategy)
    if args.out:
        csv = args.csv or str(Path(args.out).with_suffix(".csv"))
        write_series(K, args.out, csv, meta)
        emit({"metadata": meta})
    else:
        emit({"cumulants": K.to_json(), "metadata": meta})
    return EXIT_OK


def cmd_partition_function(args) -> int:
    model, norm = load_model(args.model)
    model = _override(model, args)
    _check_work(estimate_work(model, 0, args.strategy), args.max_work, "partition-function")
    xi = partition_function(model, args.strategy)
    emit({"xi": xi, "metadata": metadata(norm, model.n_max, None, strategy=args.strategy)})
    return EXIT_OK


def cmd_ds_check(args) -> int:
    model, norm = load_model(args.model)
    model = _override(model, args)
    need = args.order + max(1, model.interaction.degree - 1)
    model = model.with_truncation(N_max=max(need, args.N_max or 0))
    G = _moments(model, args)
    worst = ds_max_residual(model, G, args.order)
    ok = worst <= args.tol
    emit({
        "max_residual": worst,
        "order": args.order,
        "tol": args.tol,
        "pass": ok,
        "metadata": metadata(norm, model.n_max, model.N_max, strategy=args.strategy),
    })
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_tree(args) -> int:
    model, norm = load_model(args.model)
    j = load_source(args.j, model.m)
    _check_work(count_hierarchies(max(args.leaves, 1)) * args.leaves, args.max_work, "tree")
    sp = stationary_log_z(model, j, tol=args.tol, max_iter=args.max_iter)
    doc = {
        "psi": sp.psi,
        "logZ": sp.log_z,
        "residual": sp.residual,
        "iterations": sp.iterations,
        "metadata": metadata(norm, None, None, leaves=args.leaves, source_sha256=_file_hash(args.j)),
    }
    if args.leaves > 0:
        doc["psi_tree"] = tree_expand(model, j, args.leaves)
    emit(doc)
    return EXIT_OK


def _file_hash(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# --------------------------------------------------------------- oracle checks

def _gh_order(degree: int) -> int:
    return max(oracle.GH_ORDER, degree // 2 + 1)


def _truncated_weight(model: ModelSpec):
    # phi -> sum_{n <= n_max} V(phi)^n / n!, V evaluated by tuple loops
    V = model.interaction.vertex
    B = model.base

    def f(phi):
        v = oracle.naive_polynomial(V, phi, B)
        return sum(v**n / math.factorial(n) for n in range(model.n_max + 1))

    return f


def _rel_diff(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


def _compare_rows(rows) -> tuple[list, float]:
    out, worst = [], 0.0
    for label, got, ref in rows:
        got, ref = float(got), float(ref)
        d = _rel_diff(got, ref)
        worst = max(worst, d)
        out.append({"idx": label, "value": got, "oracle": ref, "diff": got - ref})
    return out, worst


def _check_xi(model: ModelSpec, args):
    if model.m > 3:
        raise InputError("quadrature oracle needs m <= 3")
    deg = model.vertex_order
    ref = oracle.gh_expectation_fn(model.metric.g, _truncated_weight(model), _gh_order(deg))
    return [("xi", partition_function(model, args.strategy), ref)]


def _check_moments(model: ModelSpec, args):
    if model.m > 3:
        raise InputError("quadrature oracle needs m <= 3")
    deg = model.vertex_order + model.N_max
    rule = oracle.gauss_hermite_rule(model.metric.g, _gh_order(deg))
    weight = _truncated_weight(model)(rule.nodes)
    xi = math.fsum(rule.weights * weight)
    G = _moments(model, args)
    rows = []
    for X in mi.indices_upto(model.m, model.N_max):
        mono = np.prod(rule.nodes[:, list(X)], axis=1) if X else np.ones(len(rule.weights))
        rows.append((list(X), G[X], math.fsum(rule.weights * mono * weight) / xi))
    return rows


def _check_isserlis(model: ModelSpec, args):
    if model.m > 3:
        raise InputError("quadrature oracle needs m <= 3")
    g = model.metric.g
    rule = oracle.gauss_hermite_rule(g, _gh_order(args.order))
    rows = []
    for X in mi.indices_upto(model.m, args.order):
        mono = np.prod(rule.nodes[:, list(X)], axis=1) if X else np.ones(len(rule.weights))
        rows.append((list(X), isserlis_moment(g, X), math.fsum(rule.weights * mono)))
    return rows


def _check_compose(model: ModelSpec, args):
    # cumulants along a direction j are the scalar log of the moment series
    G = _moments(model, args)
    K = log_series(G)
    rng = np.random.Generator(np.random.PCG64(args.seed))
    rows = []
    for d in range(args.directions):
        j = rng.uniform(-1.0, 1.0, model.m)
        a = oracle.directional_coefficients(G, j, model.base)
        a[0] = 1.0
        want = oracle.scalar_log(a)
        got = oracle.directional_coefficients(K, j, model.base)
        for n in range(1, len(want)):
            rows.append((f"dir{d}:t^{n}", float(got[n]), float(want[n])))
    return rows


CHECKS = {
    "xi": _check_xi,
    "moments": _check_moments,
    "isserlis": _check_isserlis,
    "compose": _check_compose,
}


def cmd_oracle_compare(args) -> int:
    model, norm = load_model(args.model)
    model = _override(model, args)
    rows, worst = _compare_rows(CHECKS[args.check](model, args))
    ok = worst <= args.tol
    seed = args.seed if args.check == "compose" else None
    emit({
        "check": args.check,
        "rows": rows,
        "max_rel_diff": worst,
        "tol": args.tol,
        "pass": ok,
        "metadata": metadata(norm, model.n_max, model.N_max, seed=seed, strategy=args.strategy),
    })
    return EXIT_OK if ok else EXIT_NUMERIC


# ------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fieldcalc", description="Field calculus on a finite weighted base space.")
    p.add_argument("--version", action="version", version=f"fieldcalc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, model=True, truncation=True, strategy=True):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
        if truncation:
            sp.add_argument("--n-max", dest="n_max", type=int, help="override vertex truncation")
            sp.add_argument("--N-max", dest="N_max", type=int, help="override moment truncation")
        if strategy:
            sp.add_argument("--strategy", choices=STRATEGIES, default="wick")
            sp.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
        sp.add_argument("--max-work", type=int, default=DEFAULT_MAX_WORK,
                        help="refuse jobs whose estimated work exceeds this")

    sp = sub.add_parser("enumerate", help="list or count partition-family structures")
    sp.add_argument("--family", choices=sorted(FAMILIES), required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--count-only", action="store_true", help="print the count only")
    sp.add_argument("--json", action="store_true", help="JSON output with count and metadata")
    common(sp, model=False, truncation=False, strategy=False)
    sp.set_defaults(func=cmd_enumerate)

    for name, func, hlp in (
        ("moments", cmd_moments, "interacting moments G_X"),
        ("cumulants", cmd_cumulants, "interacting cumulants K_X"),
    ):
        sp = sub.add_parser(name, help=hlp)
        common(sp)
        sp.add_argument("--out", help="series JSON output path (CSV written alongside)")
        sp.add_argument("--csv", help="CSV output path (default: --out with .csv suffix)")
        sp.set_defaults(func=func)

    sp = sub.add_parser("partition-function", help="truncated partition function Xi")
    common(sp)
    sp.set_defaults(func=cmd_partition_function)

    sp = sub.add_parser("ds-check", help="max Dyson-Schwinger residual of the computed moments")
    common(sp)
    sp.add_argument("--order", type=int, default=4, help="largest |X| checked")
    sp.add_argument("--tol", type=float, default=1e-12)
    sp.set_defaults(func=cmd_ds_check)

    sp = sub.add_parser("tree", help="tree-level stationary field and log Z")
    common(sp, truncation=False, strategy=False)
    sp.add_argument("--j", required=True, help="source JSON file (list or {\"j\": [...]})")
    sp.add_argument("--leaves", type=int, default=0, help="also report the hierarchy expansion to this many leaves")
    sp.add_argument("--tol", type=float, default=1e-14)
    sp.add_argument("--max-iter", type=int, default=1000)
    sp.set_defaults(func=cmd_tree)

    sp = sub.add_parser("oracle-compare", help="compare against brute-force oracles")
    common(sp)
    sp.add_argument("--check", choices=sorted(CHECKS), required=True)
    sp.add_argument("--tol", type=float, default=1e-9, help="relative tolerance")
    sp.add_argument("--order", type=int, default=8, help="moment order for the isserlis check")
    sp.add_argument("--seed", type=int, default=0, help="seed for random directions (compose)")
    sp.add_argument("--directions", type=int, default=5)
    sp.set_defaults(func=cmd_oracle_compare)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SizeLimitError, TruncationError, WorkLimitError, ConvergenceError,
            SingularMetricError, ZeroDivisionError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
