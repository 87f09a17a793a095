"""Command-line front end.

Subcommands: ``gen-data`` (synthetic datasets), ``run exact`` (dense oracle),
``run qi`` (sampling pipeline with optional query/sample actions),
``run verify`` (check suites), ``run bench`` (read-count scaling), and
``replay`` (re-execute a recorded run and require byte-identical artifacts).

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 verification or
replay mismatch. ``SKETCH_SFA_THREADS`` caps the linear-algebra thread pool.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_VERIFY = 3


def _apply_thread_env() -> None:
    threads = os.environ.get("SKETCH_SFA_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


_apply_thread_env()

import numpy as np  # noqa: E402

from . import datagen, sq_io  # noqa: E402
from .config import RunConfig  # noqa: E402
from .errors import InvalidInput, SketchSfaError  # noqa: E402
from .matrix_sq import MatrixSQ  # noqa: E402
from .sfa_exact import Dataset, exact_sfa, normalize, pairwise_differentiate  # noqa: E402
from .sfa_qi import (  # noqa: E402
    SpectralSummary,
    build,
    query_entry,
    sample_output_row,
    select_parameters,
)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_manifest(out_path: Path, argv: list[str], outputs: list[Path], seed: int) -> None:
    manifest = {
        "argv": argv,
        "seed": seed,
        "outputs": {str(p): _sha256(p) for p in outputs if p.exists()},
        "version": 1,
        "wall_time": time.time(),
    }
    with open(out_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_dataset(args) -> Dataset:
    data = sq_io.load_csv(args.input)
    if args.labels:
        if data.shape[1] < 2:
            raise InvalidInput("--labels needs at least two columns")
        return Dataset(X=data[:, :-1], labels=data[:, -1].astype(np.int64), mode="classification")
    return Dataset(X=data, labels=None, mode="time-series")


def _prepare(args, cfg: RunConfig, rng):
    ds = _load_dataset(args)
    ds = normalize(ds)
    diff = pairwise_differentiate(ds, max_pairs_per_class=cfg.max_pairs_per_class, rng=rng)
    return ds, diff


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def cmd_gen_data(args) -> int:
    rng_seed = args.seed
    meta: dict = {}
    if args.kind == "blobs":
        ds, truth = datagen.blobs(args.n, args.d, classes=args.classes, seed=rng_seed)
        arr = np.hstack([ds.X, ds.labels[:, None].astype(np.float64)])
        header = [f"x{i}" for i in range(ds.d)] + ["label"]
        meta["class_means"] = truth["class_means"].tolist()
    elif args.kind == "wiskott-signal":
        ds = datagen.wiskott_signal(args.n, seed=rng_seed)
        arr, header = ds.X, ["x0", "x1"]
    elif args.kind == "timescale":
        speeds = [float(s) for s in args.speeds.split(",")]
        ds = datagen.timescale_mix(args.n, speeds, seed=rng_seed)
        arr, header = ds.X, [f"x{i}" for i in range(ds.d)]
    else:  # low-rank
        x, truth = datagen.low_rank(args.n, args.d, args.rank, seed=rng_seed)
        arr, header = x, [f"x{i}" for i in range(args.d)]
        meta["singular_values"] = truth["singular_values"].tolist()
    out = Path(args.out)
    csv_path = out.with_suffix(".csv")
    sq_io.save_csv(arr, csv_path, header=header)
    sq_io.write_manifest(
        out.with_suffix(".manifest.json"),
        arr.shape[0],
        arr.shape[1],
        {"kind": args.kind, "seed": rng_seed, "command": "gen-data", **meta},
    )
    print(f"wrote {csv_path} ({arr.shape[0]} x {arr.shape[1]})")
    return EXIT_OK


def cmd_run_exact(args) -> int:
    cfg = RunConfig.load(args.config)
    rng = np.random.default_rng(args.seed)
    ds, diff = _prepare(args, cfg, rng)
    res = exact_sfa(ds.X, diff, args.J or cfg.J)
    out = Path(args.out)
    with open(out, "w") as fh:
        fh.write(res.to_json())
        fh.write("\n")
    _write_run_manifest(out.with_suffix(".run.json"), args.argv, [out], args.seed)
    print(f"slowness values: {np.array2string(res.delta_values, precision=6)}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_run_qi(args) -> int:
    cfg = RunConfig.load(args.config)
    rng = np.random.default_rng(args.seed)
    ds, diff = _prepare(args, cfg, rng)
    J = args.J or cfg.J
    res = exact_sfa(ds.X, diff, J)
    summ = SpectralSummary.from_oracle(res, diff.Xdot)
    params = select_parameters(
        args.eps_target or cfg.eps_target,
        summ,
        ds.d,
        J,
        seed=args.seed,
        sketch_budget=cfg.sketch_budget,
        matmul_budget=cfg.matmul_budget,
    )
    mx = MatrixSQ(ds.X)
    mdT = MatrixSQ(diff.Xdot.T)
    model = build(mx, mdT, params, np.random.default_rng(args.seed))

    out = Path(args.out)
    outputs = [out]
    with open(out, "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")

    if args.query is not None:
        i, j = args.query
        value = query_entry(model, i, j)
        qpath = out.with_suffix(".query.json")
        with open(qpath, "w") as fh:
            json.dump({"i": i, "j": j, "value": value}, fh, sort_keys=True)
            fh.write("\n")
        outputs.append(qpath)
        print(f"Y({i}, {j}) = {value:.6g}")

    if args.sample_row is not None:
        draw_rng = np.random.default_rng(args.seed + 1)
        counts = np.zeros(J, dtype=np.int64)
        for _ in range(args.draws):
            counts[sample_output_row(model, args.sample_row, draw_rng)] += 1
        spath = out.with_suffix(".samples.csv")
        sq_io.save_csv(
            np.stack([np.arange(J, dtype=np.float64), counts.astype(np.float64)], axis=1),
            spath,
            header=["column", "count"],
        )
        outputs.append(spath)
        print(f"sampled {args.draws} draws from output row {args.sample_row}")

    _write_run_manifest(out.with_suffix(".run.json"), args.argv, outputs, args.seed)
    print(f"wrote {out} (pipeline X reads: {mx.ledger.snapshot()['entry_reads']})")
    return EXIT_OK


def _verify_reports(args, cfg: RunConfig):
    from . import verify
    from .handles import VectorHandle
    from .weight_tree import WeightTree

    reports = []
    rng = np.random.default_rng(args.seed)
    suites = {args.suite} if args.suite != "all" else {
        "sampling", "davis-kahan", "error-budget", "sublinearity"
    }

    if "sampling" in suites:
        v = rng.standard_normal(64)
        handle = VectorHandle(WeightTree(v))
        reports.append(
            verify.chi_square_test(
                handle, v**2 / (v @ v), cfg.chi_square_samples, rng, test_id="chi-square-vector"
            )
        )
        a = rng.standard_normal((40, 8))
        mat = MatrixSQ(a)
        row_probs = np.sum(a**2, axis=1) / np.sum(a**2)

        class _RowSampler:
            n = 40

            def sample_many(self, m, r):
                return mat.sample_rows(m, r)

        reports.append(
            verify.chi_square_test(
                _RowSampler(), row_probs, cfg.chi_square_samples, rng, test_id="chi-square-rows"
            )
        )

    if "davis-kahan" in suites:
        base = rng.standard_normal((12, 12))
        a = base @ base.T + 12 * np.diag(np.arange(12, dtype=np.float64))
        pert = rng.standard_normal((12, 12))
        pert = 1e-3 * (pert + pert.T)
        reports.append(verify.davis_kahan_check(a, a + pert))

    if "error-budget" in suites or "sublinearity" in suites:
        speeds = [0.25, 1.0, 1.2, 1.4]

        def make(n, seed):
            ds = datagen.timescale_mix(n, speeds, seed=seed)
            diff = pairwise_differentiate(ds)
            return ds.X, diff

        if "error-budget" in suites:
            X, diff = make(3000, args.seed)
            res = exact_sfa(X, diff, cfg.J)
            summ = SpectralSummary.from_oracle(res, diff.Xdot)
            params = select_parameters(
                cfg.eps_target, summ, X.shape[1], cfg.J, seed=args.seed,
                sketch_budget=cfg.sketch_budget, matmul_budget=cfg.matmul_budget,
            )
            reports.extend(
                verify.error_budget_audit(X, diff, params, seeds=range(cfg.verify_seeds))
            )
        if "sublinearity" in suites:
            reports.append(
                verify.sublinearity_audit(
                    make,
                    [2048, 4096, 8192, 16384],
                    J=cfg.J,
                    eps_target=cfg.eps_target,
                    seed=args.seed,
                    growth_constant=cfg.growth_constant,
                )
            )
    return reports


def cmd_run_verify(args) -> int:
    from . import verify

    cfg = RunConfig.load(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = _verify_reports(args, cfg)
    jsonl = out_dir / "reports.jsonl"
    summary = out_dir / "summary.csv"
    verify.write_reports(reports, jsonl, summary)
    _write_run_manifest(out_dir / "run.json", args.argv, [jsonl, summary], args.seed)
    failed = [r.test_id for r in reports if not r.passed]
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {rep.test_id}: observed {rep.observed:.4g} vs bound {rep.bound:.4g}")
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_run_bench(args) -> int:
    cfg = RunConfig.load(args.config)
    n_grid = [int(s) for s in args.n_grid.split(",")]
    speeds = [0.25, 1.0, 1.2, 1.4]
    rows = []
    for n in n_grid:
        ds = datagen.timescale_mix(n, speeds, seed=args.seed)
        diff = pairwise_differentiate(ds)
        res = exact_sfa(ds.X, diff, cfg.J)
        summ = SpectralSummary.from_oracle(res, diff.Xdot)
        params = select_parameters(
            cfg.eps_target, summ, ds.d, cfg.J, seed=args.seed,
            sketch_budget=cfg.sketch_budget, matmul_budget=cfg.matmul_budget,
        )
        mx = MatrixSQ(ds.X)
        mdT = MatrixSQ(diff.Xdot.T)
        mx.ledger.reset()
        t0 = time.perf_counter()
        build(mx, mdT, params, np.random.default_rng(args.seed))
        dt = time.perf_counter() - t0
        snap = mx.ledger.snapshot()
        rows.append([n, snap["entry_reads"], ds.X.size, dt])
        print(f"n={n}: pipeline reads {snap['entry_reads']}, linear scan {ds.X.size}, {dt:.2f}s")
    out = Path(args.out)
    sq_io.save_csv(
        np.array(rows, dtype=np.float64),
        out,
        header=["n", "pipeline_reads", "linear_scan_reads", "build_seconds"],
    )
    _write_run_manifest(out.with_suffix(".run.json"), args.argv, [out], args.seed)
    return EXIT_OK


def cmd_replay(args) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    recorded = manifest["outputs"]
    argv = manifest["argv"]
    # re-execute the recorded command in-process
    code = main(argv)
    if code != EXIT_OK:
        print(f"replayed command exited with {code}", file=sys.stderr)
        return EXIT_RUNTIME
    for path, digest in recorded.items():
        fresh = _sha256(path)
        if fresh != digest:
            print(f"artifact mismatch: {path}", file=sys.stderr)
            return EXIT_VERIFY
    print(f"replay verified {len(recorded)} artifact(s) byte-identical")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sketch-sfa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="generate a synthetic dataset")
    gen.add_argument(
        "--kind", choices=["blobs", "wiskott-signal", "timescale", "low-rank"], required=True
    )
    gen.add_argument("--n", type=int, default=4000)
    gen.add_argument("--d", type=int, default=8)
    gen.add_argument("--classes", type=int, default=4)
    gen.add_argument("--rank", type=int, default=4)
    gen.add_argument("--speeds", type=str, default="0.25,1.0,1.2,1.4")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_data)

    run = sub.add_parser("run", help="run a pipeline or a check suite")
    run_sub = run.add_subparsers(dest="mode", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--in", dest="input", required=True)
            p.add_argument("--labels", action="store_true", help="last CSV column is a class label")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None, help="TOML overrides")
        p.add_argument("--out", required=True)

    exact = run_sub.add_parser("exact", help="dense oracle")
    common(exact)
    exact.add_argument("--J", type=int, default=None)
    exact.set_defaults(func=cmd_run_exact)

    qi = run_sub.add_parser("qi", help="sampling pipeline")
    common(qi)
    qi.add_argument("--J", type=int, default=None)
    qi.add_argument("--eps-target", type=float, default=None)
    qi.add_argument("--query", nargs=2, type=int, metavar=("I", "J"), default=None)
    qi.add_argument("--sample-row", type=int, default=None)
    qi.add_argument("--draws", type=int, default=1000)
    qi.set_defaults(func=cmd_run_qi)

    ver = run_sub.add_parser("verify", help="check suites")
    common(ver, needs_input=False)
    ver.add_argument(
        "--suite",
        choices=["all", "sampling", "davis-kahan", "error-budget", "sublinearity"],
        default="all",
    )
    ver.set_defaults(func=cmd_run_verify)

    bench = run_sub.add_parser("bench", help="read-count scaling")
    common(bench, needs_input=False)
    bench.add_argument("--n-grid", default="2048,4096,8192,16384")
    bench.set_defaults(func=cmd_run_bench)

    rep = sub.add_parser("replay", help="re-run a recorded command, verify artifacts")
    rep.add_argument("manifest")
    rep.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(argv) if argv is not None else sys.argv[1:]
    parser = _build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except SketchSfaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
