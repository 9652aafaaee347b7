"""Command-line front end: run experiments, tune learning rates, print
rate tables, run the enumeration-oracle suite, validate LIBSVM files, and
reproduce the paired quadratic-group comparison."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import bounds as bnd
from . import data as datamod
from . import harness, lemma_oracles


def _load_config(args) -> harness.ExperimentConfig:
    text = Path(args.config).read_text() if args.config else ""
    overrides = {}
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return harness.parse_config(text, overrides)


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    rows = harness.run_experiment(cfg)
    csv_text = harness.rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    for s in harness.summarize(rows):
        print(
            f"# {s['method']} lr={s['lr']:g}: final gap "
            f"mean={s['mean_final_gap']:.6g} min={s['min_final_gap']:.6g} "
            f"max={s['max_final_gap']:.6g} diverged={s['n_diverged']}/{s['n_seeds']}",
            file=sys.stderr,
        )
    return 0


def _cmd_grid(args) -> int:
    cfg = _load_config(args)
    best, rows = harness.grid_search(cfg)
    if args.out:
        Path(args.out).write_text(harness.rows_to_csv(rows))
    for method, lr in sorted(best.items()):
        print(f"{method}: best lr = {lr:g}")
    return 0


def _bound_rows(p: bnd.BoundParams):
    rows = []
    for case in ("strongly-convex", "convex", "non-convex"):
        try:
            _, tuned = bnd.tuned_rate_sfl(case, p)
            rows.append((case, "SFL (tuned)", tuned))
        except (bnd.BoundPreconditionError, ValueError):
            pass
        for assumption in ("opt-heterogeneity", "max-heterogeneity"):
            try:
                rows.append((case, f"PFL ({assumption})", bnd.pfl_upper_bound(case, assumption, p)))
            except bnd.BoundPreconditionError:
                pass
    for variant in ("any-lr", "small-lr-sc", "small-lr-gc"):
        try:
            rows.append(("lower", f"SFL ({variant})", bnd.sfl_lower_bound(variant, p)))
        except bnd.BoundPreconditionError:
            pass
    return rows


def _cmd_bounds(args) -> int:
    p = bnd.BoundParams(
        mu=args.mu, L=args.L, sigma=args.sigma, zeta_star=args.zeta_star,
        zeta=args.zeta, beta=args.beta, zeta_hat=args.zeta_hat, D=args.D,
        A=args.A, M=args.M, K=args.K, R=args.R,
    )
    rows = _bound_rows(p)
    if args.format == "csv":
        print("case,method,total,optimization,stochasticity-1,stochasticity-2,heterogeneity")
        for case, method, res in rows:
            t = res.terms
            print(
                f"{case},{method},{res.total:.6g},{t.get('optimization', 0):.6g},"
                f"{t.get('stochasticity-1', 0):.6g},{t.get('stochasticity-2', 0):.6g},"
                f"{t.get('heterogeneity', 0):.6g}"
            )
    else:
        print("| case | method | total | terms |")
        print("| --- | --- | --- | --- |")
        for case, method, res in rows:
            terms = ", ".join(f"{k}={v:.4g}" for k, v in res.terms.items())
            print(f"| {case} | {method} | {res.total:.6g} | {terms} |")
    return 0


def _cmd_lemmas(args) -> int:
    checks = []

    ok = True
    for n in range(0, lemma_oracles.MAX_IID_N + 1):
        e = lemma_oracles.exact_abs_partial_sum_iid(n)
        ok &= math.sqrt(n) / 5 <= e <= math.sqrt(n) + 1e-15
    checks.append(("iid |partial sum| within [sqrt(n)/5, sqrt(n)] for n <= 24", ok))

    ok = True
    sym = True
    window = True
    for M in range(2, 13, 2):
        for K in range(1, 5):
            for m in range(1, M + 1):
                for k in range(0, K):
                    st = lemma_oracles.exact_perm_stats(M, K, m, k)
                    sym &= st.prob_pos == st.prob_neg
                    if (m, k) != (1, 0):
                        window &= 1 / 6 - 1e-15 <= st.prob_pos <= 0.5 + 1e-15
                    upper = math.sqrt(m - 1 + st.a_k**2)
                    ok &= st.exp_abs <= upper + 1e-12
                    if M >= 4 and m <= M // 2 + 1:
                        ok &= st.exp_abs >= upper / 20 - 1e-12
    checks.append(("balanced-permutation |partial sum| sandwich", ok))
    checks.append(("sign probabilities exactly symmetric", sym))
    checks.append(("sign probabilities within [1/6, 1/2]", window))

    ok = True
    import numpy as np

    for M in (2, 4, 8):
        for K in (1, 3, 10):
            grid = np.linspace(1e-6, 1 - 1e-6, 1000)
            vals = [lemma_oracles.t_function(d, M, K) for d in grid]
            ok &= all(b > a for a, b in zip(vals, vals[1:]))
    checks.append(("mixing profile strictly increasing on (0,1)", ok))

    failed = [name for name, good in checks if not good]
    for name, good in checks:
        print(f"[{'PASS' if good else 'FAIL'}] {name}")
    return 1 if failed else 0


def _cmd_parse(args) -> int:
    try:
        ds = datamod.parse_libsvm(Path(args.file).read_text())
    except datamod.LibsvmParseError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 1
    labels = ds.labels()
    print(
        f"ok: {len(ds)} samples, dim {ds.dim}, "
        f"{labels.count(1)} positive / {labels.count(0)} negative"
    )
    return 0


def _cmd_figure2(args) -> int:
    results = harness.figure2(
        args.out,
        rounds=args.rounds,
        seeds=tuple(range(args.seeds)),
        make_plot=not args.no_plot,
    )
    for gid in sorted(results):
        r = results[gid]
        rel = "SFL<PFL" if r["sfl_final_gap"] < r["pfl_final_gap"] else "SFL>=PFL"
        print(
            f"group {gid}: pfl_lr={r['pfl_lr']:g} sfl={r['sfl_final_gap']:.3e} "
            f"pfl={r['pfl_final_gap']:.3e} [{rel}]"
        )
    print(f"wrote CSVs, manifest.json and summary.svg under {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sflsim")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (("run", _cmd_run), ("grid", _cmd_grid)):
        sp = sub.add_parser(name, help=f"{name} an experiment from a config file")
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--out", help="CSV output path (default: stdout for run)")
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("bounds", help="print the rate table for given parameters")
    for flag, default in (
        ("--mu", 0.0), ("--L", 1.0), ("--sigma", 0.0), ("--zeta-star", 0.0),
        ("--zeta", 0.0), ("--beta", 0.0), ("--zeta-hat", 0.0), ("--D", 1.0), ("--A", 1.0),
    ):
        sp.add_argument(flag, type=float, default=default, dest=flag[2:].replace("-", "_"))
    for flag, default in (("--M", 1), ("--K", 1), ("--R", 1)):
        sp.add_argument(flag, type=int, default=default)
    sp.add_argument("--format", choices=("md", "csv"), default="md")
    sp.set_defaults(fn=_cmd_bounds)

    sp = sub.add_parser("lemmas", help="run the exact enumeration-oracle suite")
    sp.set_defaults(fn=_cmd_lemmas)

    sp = sub.add_parser("parse", help="validate a LIBSVM file")
    sp.add_argument("file")
    sp.set_defaults(fn=_cmd_parse)

    sp = sub.add_parser("figure2", help="paired quadratic-group comparison")
    sp.add_argument("--out", required=True)
    sp.add_argument("--rounds", type=int, default=100)
    sp.add_argument("--seeds", type=int, default=10)
    sp.add_argument("--no-plot", action="store_true")
    sp.set_defaults(fn=_cmd_figure2)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
