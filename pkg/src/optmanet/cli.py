"""Command-line entry point.

Subcommands: gen-data, train, grad-check, experiment, report. Exit codes:
0 success, 1 runtime failure, 2 config error. All randomness flows from
seeds named in configs or --seed; nothing reads entropy from the machine.
"""

import argparse
import json
import os
import sys

import numpy as np

from ._backend import BACKEND_NAME
from .data import canonical_hash, gen_acoustic, gen_gramacy, save_csv
from .errors import ConfigError, OptmanetError
from .evaluation import (
    _family_mlp,
    _seed_datasets,
    _write_text_atomic,
    derive_seed,
    format_report,
    load_experiment_config,
    load_report,
    parse_experiment_config,
    relative_error,
    run_experiment,
    save_report,
    save_scatter_csv,
    train_model,
    NormStats,
    mse_normalized,
    rmse_normalized,
)
from .models import ModelSpec, build_model, predict
from .network import save_params
from .physics import default_partial_config, gramacy_pp, monopole_spl
from .tape import constant, grad_check


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path} is not valid JSON: line {exc.lineno}, column {exc.colno}"
        ) from exc


# ---------------------------------------------------------------------------
# gradient check suite

def run_grad_check_suite(seed=0, n_points=100, emit=None):
    """Check every tape primitive plus the composed physics heads against
    central finite differences at random non-degenerate inputs. Returns
    (all_passed, rows) where rows are (name, max_rel_err, n_kinks, passed).
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    P = int(n_points)
    rows = []

    def check(name, f, x0):
        rep = grad_check(f, np.asarray(x0, dtype=np.float64))
        rows.append((name, rep.max_rel_err, len(rep.kinks), rep.passed))
        if emit:
            mark = "ok  " if rep.passed else "FAIL"
            emit(f"{mark} {name:<22} max rel err {rep.max_rel_err:.3e}"
                 + (f"  ({len(rep.kinks)} kinks skipped)" if rep.kinks else ""))

    def u(lo, hi, n=P):
        return rng.uniform(lo, hi, size=n)

    def signed(lo, hi, n=P):
        return u(lo, hi, n) * rng.choice([-1.0, 1.0], size=n)

    anyv = signed(0.2, 2.0)
    c_row = constant(u(-1.5, 1.5).reshape(1, P))
    c_pos = constant(u(0.5, 2.0).reshape(1, P))

    check("add", lambda t, x: t.sum(t.add(x, c_row)), anyv)
    check("add_scalar", lambda t, x: t.sum(t.add(x, 3.25)), anyv)
    check("sub", lambda t, x: t.sum(t.sub(x, c_row)), anyv)
    check("sub_right", lambda t, x: t.sum(t.sub(c_row, x)), anyv)
    check("rsub_scalar", lambda t, x: t.sum(t.sub(1.75, x)), anyv)
    check("mul", lambda t, x: t.sum(t.mul(x, c_row)), anyv)
    check("mul_scalar", lambda t, x: t.sum(t.mul(x, -2.5)), anyv)
    check("div", lambda t, x: t.sum(t.div(x, c_pos)), anyv)
    check("div_denominator", lambda t, x: t.sum(t.div(c_row, x)), signed(0.5, 2.0))
    check("rdiv_scalar", lambda t, x: t.sum(t.div(2.5, x)), signed(0.5, 2.0))
    check("neg", lambda t, x: t.sum(t.neg(x)), anyv)
    check("pow_square", lambda t, x: t.sum(t.pow(x, 2.0)), anyv)
    check("pow_cube", lambda t, x: t.sum(t.pow(x, 3.0)), anyv)
    check("pow_fractional", lambda t, x: t.sum(t.pow(x, 1.7)), u(0.3, 2.5))
    check("pow_negative", lambda t, x: t.sum(t.pow(x, -1.3)), u(0.4, 2.5))
    check("sin", lambda t, x: t.sum(t.sin(x)), signed(0.0, 3.0))
    check("cos", lambda t, x: t.sum(t.cos(x)), signed(0.0, 3.0))
    check("sqrt", lambda t, x: t.sum(t.sqrt(x)), u(0.3, 4.0))
    check("abs", lambda t, x: t.sum(t.abs(x)), signed(0.2, 2.0))
    check("log10", lambda t, x: t.sum(t.log10(x)), u(0.1, 3.0))
    check("relu", lambda t, x: t.sum(t.relu(x)), signed(0.2, 2.0))

    mm_r = constant(u(-1.0, 1.0, 4 * P).reshape(P, 4))
    mm_l = constant(u(-1.0, 1.0, 3).reshape(3, 1))
    nt_r = constant(u(-1.0, 1.0, 4 * P).reshape(4, P))
    nt_l = constant(u(-1.0, 1.0, 3 * P).reshape(3, P))
    check("matmul_left", lambda t, x: t.sum(t.matmul(x, mm_r)), anyv)
    check("matmul_right", lambda t, x: t.sum(t.matmul(mm_l, x)), anyv)
    check("matmul_nt_left", lambda t, x: t.sum(t.matmul_nt(x, nt_r)), anyv)
    check("matmul_nt_right", lambda t, x: t.sum(t.matmul_nt(nt_l, x)), anyv)

    wide = constant(u(-1.0, 1.0, 5 * P).reshape(5, P))
    check("badd_row", lambda t, x: t.sum(t.badd(wide, x)), anyv)
    check("badd_matrix", lambda t, x: t.sum(t.badd(x, c_row)), anyv)
    check("bmul_row", lambda t, x: t.sum(t.bmul(wide, x)), anyv)
    check("bmul_matrix", lambda t, x: t.sum(t.bmul(x, c_row)), anyv)
    check("sum", lambda t, x: t.sum(x), anyv)
    check("mean", lambda t, x: t.mean(x), anyv)
    check("concat_cols", lambda t, x: t.sum(t.concat_cols([x, t.mul(x, 2.0)])), anyv)
    check("slice_col",
          lambda t, x: t.sum(t.concat_cols([t.slice_col(x, P // 2),
                                            t.slice_col(x, 0)])), anyv)

    # composed gramacy head at points clear of the pole at zero
    check("gramacy_head", lambda t, x: t.sum(gramacy_pp(t, x)), signed(0.05, 2.9))

    # composed monopole head: amplitude gradients at random field points.
    # Degenerate draws are rejected: points hugging a source, and fields
    # where the four terms nearly cancel (the log makes SPL ill-conditioned
    # there, so finite differences cannot resolve the slope).
    config = default_partial_config()
    worst = 0.0
    kinks = 0
    ok = True
    draws = 0
    tries = 0
    while draws < P and tries < 100 * P:
        tries += 1
        pt = rng.uniform([-1.15, -1.15, -0.6], [1.15, 1.15, 0.6], size=3)
        dists = np.sqrt(((config.positions - pt) ** 2).sum(axis=1))
        if dists.min() < 0.25:
            continue
        amps = signed(0.3, 2.0, config.n_sources)
        terms = np.cos(config.wavenumbers * dists + config.phases) / dists
        if abs(float(amps @ terms)) < 0.05:
            continue
        draws += 1
        rep = grad_check(
            lambda t, a, p=pt.reshape(1, 3): t.sum(monopole_spl(t, p, a, config)),
            amps,
        )
        worst = max(worst, rep.max_rel_err)
        kinks += len(rep.kinks)
        ok = ok and rep.passed
    rows.append(("monopole_head", worst, kinks, ok))
    if emit:
        mark = "ok  " if ok else "FAIL"
        emit(f"{mark} {'monopole_head':<22} max rel err {worst:.3e}"
             + (f"  ({kinks} kinks skipped)" if kinks else ""))

    return all(r[3] for r in rows), rows


# ---------------------------------------------------------------------------
# subcommands

def cmd_gen_data(args):
    doc = _read_json(args.config)
    if not isinstance(doc, dict):
        raise ConfigError("generator config must be a JSON object")
    problem = doc.get("problem")
    if problem not in ("fp1", "fp2", "acoustic"):
        raise ConfigError(f"problem must be fp1, fp2, or acoustic, got {problem!r}")
    allowed = {"problem", "n", "seed"} | ({"noise_db"} if problem == "acoustic" else set())
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown generator keys: {', '.join(unknown)}")
    n = doc.get("n", 1728 if problem == "acoustic" else 200)
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    norm = {"problem": problem, "n": n, "seed": seed}
    if problem == "acoustic":
        noise = doc.get("noise_db", 0.25)
        if isinstance(noise, bool) or not isinstance(noise, (int, float)) or noise < 0:
            raise ConfigError(f"noise_db must be a number >= 0, got {noise!r}")
        norm["noise_db"] = float(noise)
        ds = gen_acoustic(n=n, seed=seed, noise_db=norm["noise_db"])
    else:
        ds = gen_gramacy(problem, n, seed)
    out = args.out or "dataset.csv"
    save_csv(out, ds)
    sidecar = {
        "config": norm,
        "config_hash": canonical_hash(norm),
        "rows": len(ds),
        "backend": BACKEND_NAME,
    }
    _write_text_atomic(out + ".meta.json",
                       json.dumps(sidecar, sort_keys=True, indent=2) + "\n")
    if not args.quiet:
        print(f"wrote {len(ds)} rows to {out} (config {sidecar['config_hash'][:12]})")
    return 0


def cmd_experiment(args):
    cfg = load_experiment_config(args.config)
    if args.seed is not None:
        doc = cfg.to_json_dict()
        doc["seeds"] = [args.seed]
        doc["n_repeats"] = 1
        cfg = parse_experiment_config(doc)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    report = run_experiment(cfg, jobs=args.jobs, log=log)
    report_path = os.path.join(out_dir, "report.json")
    save_report(report_path, report)
    written = [report_path]
    if cfg.problem == "acoustic":
        for family in cfg.families:
            for plane in ("yz", "xz"):
                path = os.path.join(out_dir, f"scatter_{family}_{plane}.csv")
                try:
                    save_scatter_csv(path, report, plane, family)
                    written.append(path)
                except ConfigError as exc:
                    if log:
                        log(f"skipping {path}: {exc}")
    if not args.quiet:
        print(format_report(report), end="")
        print(f"wrote {', '.join(written)}")
    failed = sum(entry["n_failed"] for entry in report["aggregate"].values())
    return 1 if failed else 0


def cmd_train(args):
    cfg = load_experiment_config(args.config)
    if len(cfg.families) != 1:
        raise ConfigError("train expects a config with exactly one family")
    family = cfg.families[0]
    run_seed = args.seed if args.seed is not None else cfg.seeds[0]
    doc = cfg.to_json_dict()
    doc["seeds"] = [run_seed]
    doc["n_repeats"] = 1
    cfg = parse_experiment_config(doc)
    train_all, train_used, val, test, _ = _seed_datasets(cfg, 0)
    mspec = ModelSpec(
        family=family,
        problem=cfg.problem,
        mlp=_family_mlp(cfg, family),
        physics=cfg.physics if cfg.problem == "acoustic" else None,
    )
    model = build_model(mspec, derive_seed("init", run_seed, family))
    result = train_model(model, train_used, val, derive_seed("train", run_seed, family))
    stats = NormStats.fit(train_all.targets)
    pred = predict(model, test.inputs)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    params_path = os.path.join(out_dir, "model.json")
    history_path = os.path.join(out_dir, "history.json")
    save_params(params_path, model.params, model.buffers)
    _write_text_atomic(
        history_path,
        json.dumps(
            {
                "family": family,
                "seed": run_seed,
                "best_epoch": result.best_epoch,
                "best_val_loss": result.best_val_loss,
                "history": result.history,
            },
            sort_keys=True,
            indent=2,
        )
        + "\n",
    )
    if not args.quiet:
        print(
            f"{family} on {cfg.problem}: "
            f"test nRMSE {rmse_normalized(pred, test.targets, stats):.5g}, "
            f"test nMSE {mse_normalized(pred, test.targets, stats):.5g}, "
            f"raw MSE {float(np.mean((pred - test.targets) ** 2)):.5g}"
        )
        print(f"wrote {params_path}, {history_path}")
    return 0


def cmd_grad_check(args):
    emit = None if args.quiet else print
    passed, rows = run_grad_check_suite(seed=args.seed or 0, emit=emit)
    worst = max(r[1] for r in rows)
    if not args.quiet:
        print(f"{len(rows)} checks, worst max rel err {worst:.3e}: "
              + ("all passed" if passed else "FAILURES above"))
    return 0 if passed else 1


def cmd_report(args):
    print(format_report(load_report(args.config)), end="")
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def _parser():
    parser = argparse.ArgumentParser(
        prog="optmanet",
        description="Physics-infused surrogate models over a hand-rolled AD tape.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_txt, config=True):
        p = sub.add_parser(name, help=help_txt)
        if config:
            p.add_argument("config", help="path to the JSON config"
                           if name != "report" else "path to a report JSON")
        p.add_argument("--out", default=None, help="output path or directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed(s)")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes (experiment only)")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
        p.set_defaults(fn=fn)
        return p

    add("gen-data", cmd_gen_data, "generate a dataset CSV plus provenance sidecar")
    add("train", cmd_train, "train one model family and save its parameters")
    add("experiment", cmd_experiment, "run a repeated-seed experiment and write a report")
    add("report", cmd_report, "pretty-print a saved report JSON")
    p = sub.add_parser("grad-check", help="verify AD against finite differences")
    p.add_argument("--out", default=None, help=argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=None, help="suite RNG seed")
    p.add_argument("--jobs", type=int, default=1, help=argparse.SUPPRESS)
    p.add_argument("--quiet", action="store_true", help="suppress per-op lines")
    p.set_defaults(fn=cmd_grad_check)
    return parser


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OptmanetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1
