"""Command-line front end.

Local mode drives the library directly on files: a database is a directory
of per-label basis matrices plus a database.json manifest, an index is a
single L1IX1 file.  With --server the data-path commands become thin HTTP
clients against a running `l1sq serve` instance and operate on server-side
ids instead of files.

Tabular results are emitted as CSV — to --out when given, to stdout
otherwise; human summaries go to stderr so piping the CSV stays clean.
Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import bench as bench_mod
from . import lab
from .cauchy import derive_seed, generator, sample_cauchy_matrix
from .csvio import render_csv, write_csv
from .engine import (
    QueryConfig,
    build_index,
    distance_gap,
    exhaustive_search,
    load_index,
    save_index,
)
from .engine import query as query_engine
from .errors import ConfigInvalid, FormatError
from .linalg import Subspace
from .matio import load_matrix_auto, save_csv_matrix, save_dmat
from .regression import SolverConfig
from .validate import validate_all

_DB_MANIFEST = "database.json"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage errors with exit code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _default_threads() -> int:
    env = os.environ.get("L1SQ_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        return 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument(
        "--threads",
        type=int,
        default=_default_threads(),
        help="BLAS/worker thread budget (default $L1SQ_THREADS or 1)",
    )
    p.add_argument("--tol", type=float, default=1e-8, help="solver tolerance")
    p.add_argument("--out", type=Path, default=None, help="output path")
    p.add_argument(
        "--format",
        choices=("csv", "dmat"),
        default="dmat",
        help="matrix file format for gen-db (default dmat)",
    )


def _parse_values(text: str, kind=float) -> list:
    """Comma lists and start..stop ranges.

    Integer ranges double geometrically (256..2048 -> 256, 512, 1024, 2048);
    float ranges step arithmetically by 0.05.
    """
    out = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo_s, hi_s = part.split("..", 1)
            lo, hi = kind(lo_s), kind(hi_s)
            if hi < lo:
                raise ConfigInvalid(f"range {part!r} runs backward")
            if kind is int:
                if lo < 1:
                    raise ConfigInvalid(f"range {part!r} must start at 1 or above")
                v = lo
                while v <= hi:
                    out.append(v)
                    v *= 2
            else:
                v = lo
                while v <= hi + 1e-12:
                    out.append(round(v, 10))
                    v += 0.05
        else:
            out.append(kind(part))
    if not out:
        raise ConfigInvalid(f"no values in {text!r}")
    return out


def _load_vector(path: Path) -> np.ndarray:
    m = load_matrix_auto(path)
    if 1 not in m.shape:
        raise FormatError(f"{path} holds a {m.shape[0]}x{m.shape[1]} matrix, not a vector")
    return np.ascontiguousarray(m.ravel())


def _emit(args, header, rows) -> None:
    if args.out is not None:
        write_csv(args.out, header, rows)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(render_csv(header, rows))


def _solver_config(args) -> SolverConfig:
    return SolverConfig(tol=args.tol)


# ---------------------------------------------------------------------------
# Databases on disk.

def _save_db(out_dir: Path, subspaces, labels, seed, fmt: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = "dmat" if fmt == "dmat" else "csv"
    for sub, lab_ in zip(subspaces, labels):
        path = out_dir / f"{lab_}.{ext}"
        if fmt == "dmat":
            save_dmat(path, sub.basis)
        else:
            save_csv_matrix(path, sub.basis)
    manifest = {
        "format": "l1sq-db",
        "version": 1,
        "n": len(labels),
        "D": subspaces[0].ambient_dim,
        "r": subspaces[0].rank,
        "seed": int(seed),
        "matrix_format": fmt,
        "labels": list(labels),
    }
    with open(out_dir / _DB_MANIFEST, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_db(db_dir: Path):
    manifest_path = db_dir / _DB_MANIFEST
    if not manifest_path.exists():
        raise FormatError(f"{db_dir} has no {_DB_MANIFEST}; not a database directory")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("format") != "l1sq-db":
        raise FormatError(f"{manifest_path} is not an l1sq database manifest")
    ext = "dmat" if manifest.get("matrix_format", "dmat") == "dmat" else "csv"
    labels = list(manifest["labels"])
    subspaces = [
        Subspace(basis=load_matrix_auto(db_dir / f"{lab_}.{ext}")) for lab_ in labels
    ]
    return subspaces, labels, manifest


def _synth_query(subspaces, labels, theta: float, seed) -> tuple[np.ndarray, str]:
    """Corrupted on-subspace query, same construction as the scenario lab."""
    rng = generator(seed, 901)
    true_idx = int(rng.integers(len(subspaces)))
    basis = subspaces[true_idx].basis
    big_d, rank = basis.shape
    while True:
        clean = basis @ rng.standard_normal(rank)
        peak = np.abs(clean).max()
        if peak > 0:
            break
    q = clean / peak
    n_corrupt = int(round(theta * big_d))
    if n_corrupt > 0:
        idx = rng.choice(big_d, size=n_corrupt, replace=False)
        q[idx] += rng.uniform(-1.0, 1.0, size=n_corrupt)
    return q, labels[true_idx]


# ---------------------------------------------------------------------------
# Subcommand bodies.

def _cmd_gen_db(args) -> int:
    if args.server:
        import httpx

        resp = httpx.post(
            f"{args.server}/databases/generate",
            json={"n": args.n, "D": args.D, "r": args.r, "seed": args.seed},
            timeout=300.0,
        )
        resp.raise_for_status()
        info = resp.json()
        print(f"db_id {info['db_id']} n {info['n']} D {info['D']} r {info['r']}")
        return 0
    subspaces, labels = lab.make_database(args.n, args.D, args.r, args.seed)
    out_dir = args.out or Path("l1sq-db")
    _save_db(out_dir, subspaces, labels, args.seed, args.format)
    print(f"wrote {len(labels)} subspaces (D={args.D}, r={args.r}) to {out_dir}")
    return 0


def _cmd_build_index(args) -> int:
    if args.server:
        import httpx

        if args.db_id is None:
            raise ConfigInvalid("--server mode needs --db-id")
        resp = httpx.post(
            f"{args.server}/indexes",
            json={
                "db_id": args.db_id,
                "k": args.k,
                "d": args.d,
                "master_seed": args.seed,
            },
            timeout=600.0,
        )
        resp.raise_for_status()
        info = resp.json()
        print(f"index_id {info['index_id']} k {info['k']} d {info['d']}")
        return 0
    subspaces, labels, _ = _load_db(args.db)
    index = build_index(
        subspaces,
        labels,
        k=args.k,
        d=args.d,
        master_seed=args.seed,
        threads=args.threads,
    )
    out = args.out or Path("index.l1ix")
    n_bytes = save_index(index, out)
    print(f"wrote {out} ({n_bytes} bytes): k={args.k} d={args.d} n={index.n}")
    return 0


def _resolve_query_vector(args, subspaces, labels):
    if args.query is not None:
        return _load_vector(args.query), None
    if args.theta is None:
        raise ConfigInvalid("provide --query FILE or --theta FRACTION")
    q, true_label = _synth_query(subspaces, labels, args.theta, args.seed)
    return q, true_label


def _cmd_query(args) -> int:
    if args.server:
        import httpx

        if args.query is None:
            raise ConfigInvalid("--server mode needs --query FILE (no --theta)")
        if args.index_id is None:
            raise ConfigInvalid("--server mode needs --index-id")
        q = _load_vector(args.query)
        resp = httpx.post(
            f"{args.server}/query",
            json={
                "index_id": args.index_id,
                "query": q.tolist(),
                "n_rep": args.n_rep,
                "n_back": args.n_back,
                "rng_seed": args.seed,
            },
            timeout=600.0,
        )
        resp.raise_for_status()
        body = resp.json()
        winner, refined = body["winner"], body["refined_distances"]
    else:
        index = load_index(args.index)
        q, true_label = _resolve_query_vector(args, index.subspaces, index.labels)
        cfg = QueryConfig(
            n_rep=args.n_rep,
            n_back=args.n_back,
            rng_seed=args.seed,
            solver=_solver_config(args),
        )
        with threadpool_limits(limits=args.threads):
            result = query_engine(index, q, cfg)
        winner, refined = result.winner, result.refined_distances
        if true_label is not None:
            print(f"true {true_label}", file=sys.stderr)

    print(f"winner {winner}")
    header = ["label", "refined_distance"]
    rows = [[lab_, dist] for lab_, dist in sorted(refined.items(), key=lambda kv: kv[1])]
    _emit(args, header, rows)
    return 0


def _cmd_exhaustive(args) -> int:
    if args.server:
        import httpx

        if args.query is None:
            raise ConfigInvalid("--server mode needs --query FILE (no --theta)")
        if args.db_id is None:
            raise ConfigInvalid("--server mode needs --db-id")
        q = _load_vector(args.query)
        resp = httpx.post(
            f"{args.server}/exhaustive",
            json={"db_id": args.db_id, "query": q.tolist()},
            timeout=600.0,
        )
        resp.raise_for_status()
        body = resp.json()
        winner, distances = body["winner"], body["distances"]
        eta = (body.get("gap") or {}).get("eta")
        if eta is not None:
            print(f"eta {eta:.6g}", file=sys.stderr)
    else:
        subspaces, labels, _ = _load_db(args.db)
        q, true_label = _resolve_query_vector(args, subspaces, labels)
        with threadpool_limits(limits=args.threads):
            result = exhaustive_search(subspaces, labels, q, _solver_config(args))
        winner, distances = result.winner, result.distances
        if len(distances) >= 2:
            gap = distance_gap(distances)
            print(f"eta {gap.eta:.6g}", file=sys.stderr)
        if true_label is not None:
            print(f"true {true_label}", file=sys.stderr)

    print(f"winner {winner}")
    header = ["label", "distance"]
    rows = [[lab_, dist] for lab_, dist in sorted(distances.items(), key=lambda kv: kv[1])]
    _emit(args, header, rows)
    return 0


def _cmd_simulate(args) -> int:
    with threadpool_limits(limits=args.threads):
        return _dispatch_simulate(args)


def _dispatch_simulate(args) -> int:
    sub = args.experiment
    if sub == "success-curve":
        d_list = _parse_values(args.d, int)
        thetas = _parse_values(args.theta, float)
        header = [
            "theta", "d", "trials", "successes",
            "p_hat", "wilson_low", "wilson_high", "eta_median",
        ]
        rows = []
        for theta in thetas:
            params = {
                "n": args.n, "D": args.D, "r": args.r,
                "theta": theta, "scenarios": args.scenarios,
            }
            for rep in lab.success_curve(
                params, d_list, args.trials, derive_seed(args.seed, int(theta * 1e6))
            ):
                rows.append([
                    theta, rep.parameters["d"], rep.trials, rep.successes,
                    rep.p_hat, rep.wilson_low, rep.wilson_high,
                    rep.parameters["eta_median"],
                ])
        _emit(args, header, rows)
    elif sub == "expansion":
        header = ["d", "trials", "p_hat", "wilson_low", "wilson_high", "explicit_bound"]
        rows = []
        for d in _parse_values(args.d, int):
            rep = lab.expansion_probability(
                np.ones(8), d, args.trials, derive_seed(args.seed, d)
            )
            rows.append([
                d, rep.trials, rep.p_hat, rep.wilson_low, rep.wilson_high,
                rep.parameters["explicit_lower_bound"],
            ])
        _emit(args, header, rows)
    elif sub == "lower-tail":
        header = ["d", "alpha", "delta", "trials", "p_hat", "wilson_high", "bound"]
        rows = []
        for d in _parse_values(args.d, int):
            for delta in _parse_values(args.delta, float):
                rep = lab.lower_tail_probability(
                    d, args.alpha, delta, args.trials,
                    derive_seed(args.seed, d, int(delta * 1e6)),
                )
                rows.append([
                    d, args.alpha, delta, rep.trials,
                    rep.p_hat, rep.wilson_high, rep.parameters["bound"],
                ])
        _emit(args, header, rows)
    elif sub == "tightness":
        header = ["d", "beta", "trials", "p_hat", "threshold", "calibrated_C"]
        rows = []
        for d in _parse_values(args.d, int):
            rep = lab.lower_tail_tightness(
                d, args.beta, args.trials, derive_seed(args.seed, d)
            )
            c = lab.calibrate_tightness_constant(max(rep.p_hat, 1e-12), d, args.beta)
            rows.append([
                d, args.beta, rep.trials, rep.p_hat,
                rep.parameters["threshold"], c,
            ])
        _emit(args, header, rows)
    elif sub == "lipschitz":
        sub_basis = lab.make_database(1, args.D, args.r, derive_seed(args.seed, 1))[0][0]
        rows = []
        header = [
            "d", "m", "t", "threshold", "l_hat",
            "analytic_bound", "violations", "trials",
        ]
        for d in _parse_values(args.d, int):
            p = sample_cauchy_matrix(d, args.D, derive_seed(args.seed, 2, d))
            rep = lab.lipschitz_probe(
                p, sub_basis, args.samples, derive_seed(args.seed, 3, d),
                trials=args.trials,
            )
            chk = rep.bound_check
            rows.append([
                d, args.r, chk.parameters["t"], rep.threshold, rep.l_hat,
                rep.analytic_bound, chk.successes, chk.trials,
            ])
        _emit(args, header, rows)
    elif sub == "stability":
        from .cauchy import check_l1_stability

        v = generator(args.seed, 77).standard_normal(args.len)
        rep = check_l1_stability(v, args.d_rows, args.trials, derive_seed(args.seed, 78))
        header = ["quantile", "observed", "reference"]
        rows = [[p, rep.quantiles[p], rep.reference_quantiles[p]] for p in sorted(rep.quantiles)]
        _emit(args, header, rows)
    elif sub == "arctan-check":
        holds = lab.arctan_sum_check(args.k)
        _emit(args, ["k_max", "holds"], [[args.k, holds]])
        if not holds:
            return 2
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigInvalid(f"unknown experiment {sub!r}")
    return 0


def _cmd_bench(args) -> int:
    if args.mode == "regression":
        records = bench_mod.bench_regression(
            _parse_values(args.D, int),
            r=args.r,
            theta=args.theta,
            repetitions=args.repetitions,
            seed=args.seed,
            config=_solver_config(args),
            threads=args.threads,
        )
        header, rows = bench_mod.records_to_rows(records)
        _emit(args, header, rows)
        if len(records) >= 2:
            print(
                f"log-log slope {bench_mod.fit_loglog_slope(records):.3f}",
                file=sys.stderr,
            )
    else:
        report = bench_mod.bench_two_level(
            n=args.n,
            big_d=args.D_single,
            d=args.d,
            r=args.r,
            n_rep=args.n_rep,
            n_back=args.n_back,
            theta=args.theta,
            repetitions=args.repetitions,
            seed=args.seed,
            config=_solver_config(args),
            threads=args.threads,
        )
        header, rows = bench_mod.records_to_rows(report.records)
        _emit(args, header, rows)
        print(
            f"speedup {report.speedup:.2f} (winner_match={report.winner_match}, "
            f"eta={report.eta:.3g})",
            file=sys.stderr,
        )
    return 0


def _cmd_validate(args) -> int:
    out_dir = args.out or Path("validate-out")
    report = validate_all(args.seed, out_dir=out_dir)
    for s in report.suites:
        print(f"{'PASS' if s.passed else 'FAIL'}  {s.name}: {s.detail}")
    print(f"csv output in {out_dir}", file=sys.stderr)
    return 0 if report.ok else 2


def _cmd_serve(args) -> int:  # pragma: no cover - network loop
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# Parser wiring.

def _build_parser() -> _Parser:
    parser = _Parser(prog="l1sq", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("gen-db", help="synthesize a random subspace database")
    _add_common(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--D", type=int, default=2000)
    p.add_argument("--r", type=int, default=5)
    p.add_argument("--server", type=str, default=None, help="service base URL")
    p.set_defaults(fn=_cmd_gen_db)

    p = subs.add_parser("build-index", help="build and save a projection index")
    _add_common(p)
    p.add_argument("--db", type=Path, default=Path("l1sq-db"), help="database directory")
    p.add_argument("--k", type=int, default=100, help="projection pool size")
    p.add_argument("--d", type=int, default=30, help="sketch dimension")
    p.add_argument("--server", type=str, default=None)
    p.add_argument("--db-id", type=str, default=None, help="server database id")
    p.set_defaults(fn=_cmd_build_index)

    p = subs.add_parser("query", help="two-stage nearest-subspace query")
    _add_common(p)
    p.add_argument("--index", type=Path, default=Path("index.l1ix"))
    p.add_argument("--query", type=Path, default=None, help="query vector file")
    p.add_argument("--theta", type=float, default=None,
                   help="synthesize a corrupted on-subspace query")
    p.add_argument("--Nrep", dest="n_rep", type=int, default=5)
    p.add_argument("--Nback", dest="n_back", type=int, default=5)
    p.add_argument("--server", type=str, default=None)
    p.add_argument("--index-id", type=str, default=None, help="server index id")
    p.set_defaults(fn=_cmd_query)

    p = subs.add_parser("exhaustive", help="exact distance to every subspace")
    _add_common(p)
    p.add_argument("--db", type=Path, default=Path("l1sq-db"))
    p.add_argument("--query", type=Path, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--server", type=str, default=None)
    p.add_argument("--db-id", type=str, default=None)
    p.set_defaults(fn=_cmd_exhaustive)

    p = subs.add_parser("simulate", help="theory-lab Monte Carlo experiments")
    exp = p.add_subparsers(dest="experiment", required=True, parser_class=_Parser)

    e = exp.add_parser("success-curve")
    _add_common(e)
    e.add_argument("--d", type=str, default="10,30,50,70,90")
    e.add_argument("--theta", type=str, default="0.05")
    e.add_argument("--trials", type=int, default=100)
    e.add_argument("--n", type=int, default=100)
    e.add_argument("--D", type=int, default=2000)
    e.add_argument("--r", type=int, default=5)
    e.add_argument("--scenarios", type=int, default=10)
    e.set_defaults(fn=_cmd_simulate)

    e = exp.add_parser("expansion")
    _add_common(e)
    e.add_argument("--d", type=str, default="16,35,64")
    e.add_argument("--trials", type=int, default=10000)
    e.set_defaults(fn=_cmd_simulate)

    e = exp.add_parser("lower-tail")
    _add_common(e)
    e.add_argument("--d", type=str, default="64,256,1024")
    e.add_argument("--alpha", type=float, default=0.5)
    e.add_argument("--delta", type=str, default="0.3,0.5")
    e.add_argument("--trials", type=int, default=100000)
    e.set_defaults(fn=_cmd_simulate)

    e = exp.add_parser("tightness")
    _add_common(e)
    e.add_argument("--d", type=str, default="16,64,256")
    e.add_argument("--beta", type=float, default=0.5)
    e.add_argument("--trials", type=int, default=20000)
    e.set_defaults(fn=_cmd_simulate)

    e = exp.add_parser("lipschitz")
    _add_common(e)
    e.add_argument("--d", type=str, default="30")
    e.add_argument("--D", type=int, default=400)
    e.add_argument("--r", type=int, default=5, help="subspace dimension m")
    e.add_argument("--samples", type=int, default=500)
    e.add_argument("--trials", type=int, default=200)
    e.set_defaults(fn=_cmd_simulate)

    e = exp.add_parser("stability")
    _add_common(e)
    e.add_argument("--d-rows", type=int, default=30, help="sketch rows per trial")
    e.add_argument("--len", type=int, default=24, help="length of the test vector")
    e.add_argument("--trials", type=int, default=1000)
    e.set_defaults(fn=_cmd_simulate)

    e = exp.add_parser("arctan-check")
    _add_common(e)
    e.add_argument("--k", type=int, default=100000)
    e.set_defaults(fn=_cmd_simulate)

    p = subs.add_parser("bench", help="wall-clock benchmarks")
    bm = p.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    b = bm.add_parser("regression")
    _add_common(b)
    b.add_argument("--D", type=str, default="256..16384",
                   help="ambient dimensions (geometric range or comma list)")
    b.add_argument("--r", type=int, default=10)
    b.add_argument("--theta", type=float, default=0.2)
    b.add_argument("--repetitions", type=int, default=5)
    b.set_defaults(fn=_cmd_bench)

    b = bm.add_parser("two-level")
    _add_common(b)
    b.add_argument("--n", type=int, default=38)
    b.add_argument("--D", dest="D_single", type=int, default=16384)
    b.add_argument("--d", type=int, default=100)
    b.add_argument("--r", type=int, default=10)
    b.add_argument("--Nrep", dest="n_rep", type=int, default=5)
    b.add_argument("--Nback", dest="n_back", type=int, default=5)
    b.add_argument("--theta", type=float, default=0.2)
    b.add_argument("--repetitions", type=int, default=5)
    b.set_defaults(fn=_cmd_bench)

    p = subs.add_parser("validate", help="run the full invariant suite")
    _add_common(p)
    p.set_defaults(fn=_cmd_validate)

    p = subs.add_parser("serve", help="run the HTTP service")
    _add_common(p)
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    try:
        return args.fn(args)
    except _UsageError:
        return 1
    except ConfigInvalid as exc:
        print(f"l1sq: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"l1sq: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 2
    except Exception as exc:
        # httpx raises its own hierarchy; anything else is a real bug.
        if type(exc).__module__.partition(".")[0] == "httpx":
            print(f"l1sq: http error: {exc}", file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
