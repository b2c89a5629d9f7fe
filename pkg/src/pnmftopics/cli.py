"""Command line front end.

    pnmftopics fit --input X.mtx --k 6 --method cd --extrapolate --out fit/
    pnmftopics simulate --scenario b --seed 1 --out sim/
    pnmftopics transform --direction pnmf-to-topic --L fit/L.csv --F fit/F.csv --out topic/
    pnmftopics eval --input X.mtx --L fit/L.csv --F fit/F.csv
    pnmftopics bench --scenario b --budget-iters 750 --prewarm 50 --out bench/

Exit codes: 0 success, 1 input or configuration error, 2 numerical failure.
"""

import argparse
import csv
import datetime
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .benchmark import run_benchmark
from .bridge import (
    TopicFit,
    check_lemma1,
    map_scale,
    pnmf_to_topic,
    recover_pnmf_mle,
    topic_to_pnmf,
)
from .count_matrix import MatrixMarketError, read_matrix_market, write_matrix_market
from .csvio import read_matrix_csv, read_vector_csv, write_matrix_csv
from .engine import FitConfig, GammaPrior, default_threads, fit_pnmf, kkt_residuals
from .likelihood import pnmf_loglik, pnmf_loss, topic_loglik
from .pois_reg import NonFiniteLossError
from .simulate import SimSpec, simulate_corpus, write_simulation

log = logging.getLogger("pnmftopics")

PROGRESS_COLUMNS = ["iter", "elapsed_s", "pnmf_loglik", "topic_loglik", "loss", "max_kkt",
                    "extrapolated", "beta"]


class UsageError(Exception):
    """Bad input or configuration; maps to exit code 1."""


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, command, config, inputs, seed=None, **extra):
    manifest = {
        "command": command,
        "config": config,
        "inputs": {p: sha256_file(p) for p in inputs},
        "seed": seed,
        "tool_version": __version__,
    }
    manifest.update(extra)
    with open(os.path.join(outdir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=_json_default)
    return manifest


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_progress(path, progress):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROGRESS_COLUMNS)
        for r in progress:
            w.writerow([r.iter, f"{r.elapsed:.9f}", f"{r.pnmf_loglik:.17g}",
                        f"{r.topic_loglik:.17g}", f"{r.loss:.17g}", f"{r.max_kkt:.17g}",
                        int(r.extrapolated), f"{r.beta:.17g}"])


def read_progress(path):
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _load_matrix(path):
    try:
        return read_matrix_market(path)
    except (OSError, MatrixMarketError) as err:
        raise UsageError(f"cannot read {path}: {err}") from err


def _load_csv(path, what):
    try:
        return read_matrix_csv(path)
    except (OSError, ValueError) as err:
        raise UsageError(f"cannot read {what} from {path}: {err}") from err


def _scalar_or_csv(value, what):
    if value is None:
        return None
    try:
        return float(value)
    except ValueError:
        return _load_csv(value, what)


def _prior_from_args(args, m, K):
    if args.prior_alpha is None and args.prior_beta is None:
        return None
    if args.prior_alpha is None or args.prior_beta is None:
        raise UsageError("--prior-alpha and --prior-beta must be given together")
    alpha = _scalar_or_csv(args.prior_alpha, "prior alpha")
    beta = _scalar_or_csv(args.prior_beta, "prior beta")
    if not np.isscalar(beta):
        beta = np.ravel(beta)
    prior = GammaPrior(alpha, beta)
    try:
        prior.arrays(m, K)
    except ValueError as err:
        raise UsageError(str(err)) from err
    return prior


def _write_fit(outdir, L, F):
    topic = pnmf_to_topic(L, F)
    write_matrix_csv(os.path.join(outdir, "L.csv"), L)
    write_matrix_csv(os.path.join(outdir, "F.csv"), F)
    write_matrix_csv(os.path.join(outdir, "Lstar.csv"), topic.Lstar)
    write_matrix_csv(os.path.join(outdir, "Fstar.csv"), topic.Fstar)
    write_matrix_csv(os.path.join(outdir, "s.csv"), topic.s)
    write_matrix_csv(os.path.join(outdir, "u.csv"), topic.u)


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args):
    started = _now()
    X = _load_matrix(args.input)
    Xfit, keep_rows, keep_cols = X.drop_empty()
    dropped_rows = np.setdiff1d(np.arange(X.n), keep_rows)
    dropped_cols = np.setdiff1d(np.arange(X.m), keep_cols)
    if dropped_rows.size or dropped_cols.size:
        log.warning("dropping %d empty rows and %d empty columns before fitting",
                    dropped_rows.size, dropped_cols.size)
    if Xfit.nnz == 0:
        raise UsageError("input matrix has no nonzero counts")
    prior = _prior_from_args(args, Xfit.m, args.k)
    config = FitConfig(
        K=args.k, method=args.method, extrapolate=args.extrapolate, num_outer=args.num_outer,
        num_inner=args.num_inner, seed=args.seed, prewarm=args.prewarm,
        tol_loglik=args.tol_loglik, tol_kkt=args.tol_kkt, prior=prior, threads=args.threads,
    )
    try:
        config.validate()
    except ValueError as err:
        raise UsageError(str(err)) from err
    os.makedirs(args.out, exist_ok=True)
    outcome = fit_pnmf(Xfit, config)
    write_progress(os.path.join(args.out, "progress.csv"), outcome.progress)
    _write_fit(args.out, outcome.fit.L, outcome.fit.F)
    cfg = {k: v for k, v in vars(config).items() if k != "prior"}
    cfg["prior"] = None if prior is None else {"alpha": args.prior_alpha, "beta": args.prior_beta}
    status = "failed" if outcome.stop_reason == "nonfinite" else "ok"
    write_manifest(
        args.out, "fit", cfg, [args.input], seed=args.seed, started=started, finished=_now(),
        stop_reason=outcome.stop_reason, status=status, iterations=len(outcome.progress),
        dropped_rows=dropped_rows, dropped_cols=dropped_cols,
        shape={"n": X.n, "m": X.m, "n_fit": Xfit.n, "m_fit": Xfit.m},
    )
    if status == "failed":
        log.error("fit stopped on a non-finite objective; partial outputs written")
        return 2
    return 0


def cmd_simulate(args):
    started = _now()
    inputs = []
    if args.spec is not None:
        inputs.append(args.spec)
        try:
            with open(args.spec, encoding="utf-8") as fh:
                d = json.load(fh)
            if args.seed is not None:
                d["seed"] = args.seed
            spec = SimSpec.from_dict(d)
        except (OSError, ValueError, TypeError) as err:
            raise UsageError(f"bad simulation spec {args.spec}: {err}") from err
    else:
        spec = SimSpec.scenario_spec(args.scenario, seed=1 if args.seed is None else args.seed)
    sim = simulate_corpus(spec)
    paths = write_simulation(sim, args.out)
    write_manifest(args.out, "simulate", spec.to_dict(), inputs, seed=spec.seed,
                   started=started, finished=_now(), status="ok",
                   sigma_56=float(spec.Sigma[4, 5]) if spec.K >= 6 else None,
                   outputs={k: os.path.basename(v) for k, v in paths.items()})
    return 0


def _check_topic_inputs(Lstar, Fstar, tol=1e-6):
    rows = np.abs(Lstar.sum(axis=1) - 1)
    if rows.size and rows.max() > tol:
        i = int(np.argmax(rows))
        raise UsageError(f"row {i} of Lstar sums to {Lstar[i].sum():.12g}, not 1")
    cols = np.abs(Fstar.sum(axis=0) - 1)
    if cols.size and cols.max() > tol:
        k = int(np.argmax(cols))
        raise UsageError(f"column {k} of Fstar sums to {Fstar[:, k].sum():.12g}, not 1")
    if Lstar.shape[1] != Fstar.shape[1]:
        raise UsageError("Lstar and Fstar have different numbers of topics")


def cmd_transform(args):
    started = _now()
    os.makedirs(args.out, exist_ok=True)
    if args.direction == "pnmf-to-topic":
        if not (args.L and args.F):
            raise UsageError("pnmf-to-topic needs --L and --F")
        L, F = _load_csv(args.L, "L"), _load_csv(args.F, "F")
        if L.shape[1] != F.shape[1]:
            raise UsageError("L and F have different numbers of columns")
        try:
            topic = pnmf_to_topic(L, F)
        except ValueError as err:
            raise UsageError(str(err)) from err
        write_matrix_csv(os.path.join(args.out, "Lstar.csv"), topic.Lstar)
        write_matrix_csv(os.path.join(args.out, "Fstar.csv"), topic.Fstar)
        write_matrix_csv(os.path.join(args.out, "s.csv"), topic.s)
        write_matrix_csv(os.path.join(args.out, "u.csv"), topic.u)
        inputs = [args.L, args.F]
    else:
        if not (args.Lstar and args.Fstar and args.doc_sizes):
            raise UsageError("topic-to-pnmf needs --Lstar, --Fstar and --doc-sizes")
        Lstar, Fstar = _load_csv(args.Lstar, "Lstar"), _load_csv(args.Fstar, "Fstar")
        _check_topic_inputs(Lstar, Fstar)
        if args.doc_sizes.endswith(".mtx"):
            t = _load_matrix(args.doc_sizes).row_sums().astype(np.float64)
        else:
            t = _load_csv(args.doc_sizes, "document sizes").ravel()
        m, K = Fstar.shape
        if args.map:
            if args.alpha is None or args.beta is None:
                raise UsageError("--map needs --alpha and --beta")
            alpha = _scalar_or_csv(args.alpha, "alpha")
            beta = _scalar_or_csv(args.beta, "beta")
            try:
                u = map_scale(alpha, np.ravel(beta) if not np.isscalar(beta) else beta, m, K)
            except ValueError as err:
                raise UsageError(f"{err} (the MAP mapping requires every alpha > 1)") from err
        elif args.u is not None:
            u = _scalar_or_csv(args.u, "u")
            u = np.broadcast_to(np.ravel(u), (K,)) if np.ndim(u) else np.full(K, u)
        else:
            raise UsageError("topic-to-pnmf needs --u or --map with --alpha/--beta")
        try:
            L, F = recover_pnmf_mle(TopicFit(Lstar, Fstar, t, u), t, u)
        except ValueError as err:
            raise UsageError(str(err)) from err
        write_matrix_csv(os.path.join(args.out, "L.csv"), L)
        write_matrix_csv(os.path.join(args.out, "F.csv"), F)
        inputs = [args.Lstar, args.Fstar, args.doc_sizes]
        if args.u is not None and not _is_number(args.u):
            inputs.append(args.u)
    write_manifest(args.out, "transform", {k: v for k, v in vars(args).items() if k != "func"},
                   inputs, started=started, finished=_now(), status="ok")
    return 0


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_eval(args):
    X = _load_matrix(args.input)
    if args.drop_empty:
        X, _, _ = X.drop_empty()
    L, F = _load_csv(args.L, "L"), _load_csv(args.F, "F")
    if L.shape[1] != F.shape[1]:
        raise UsageError(f"L has {L.shape[1]} columns but F has {F.shape[1]}")
    if L.shape[0] != X.n or F.shape[0] != X.m:
        raise UsageError(f"factors {L.shape}, {F.shape} do not match a {X.n}x{X.m} matrix")
    prior = _prior_from_args(args, X.m, L.shape[1])
    try:
        topic = pnmf_to_topic(L, F)
    except ValueError as err:
        raise UsageError(str(err)) from err
    ll = pnmf_loglik(X, L, F)
    result = {
        "pnmf_loglik": ll,
        "topic_loglik": topic_loglik(X, topic.Lstar, topic.Fstar),
        "loss": pnmf_loss(X, L, F),
        "max_kkt": kkt_residuals(X, L, F, prior)[2],
        "lemma1_residual": check_lemma1(X, L, F),
    }
    json.dump(result, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_bench(args):
    started = _now()
    res = run_benchmark(args.scenario, budget_iters=args.budget_iters, prewarm=args.prewarm,
                        seed=args.seed, followup_iters=args.followup_iters, K=6,
                        threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    write_matrix_market(res.sim.X, os.path.join(args.out, "X.mtx"))
    for name, outcome in res.runs.items():
        d = os.path.join(args.out, name)
        os.makedirs(d, exist_ok=True)
        write_progress(os.path.join(d, "progress.csv"), outcome.progress)
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(res.summary, fh, indent=2, default=_json_default)
    write_manifest(args.out, "bench", {k: v for k, v in vars(args).items() if k != "func"}, [],
                   seed=args.seed, started=started, finished=_now(), status="ok",
                   simulation=res.sim.spec.to_dict())
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="pnmftopics", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a topic model through Poisson NMF")
    f.add_argument("--input", required=True, help="Matrix Market count matrix")
    f.add_argument("--k", type=int, required=True)
    f.add_argument("--method", choices=["em", "cd"], default="cd")
    f.add_argument("--extrapolate", action="store_true")
    f.add_argument("--num-outer", type=int, default=1000)
    f.add_argument("--num-inner", type=int, default=4)
    f.add_argument("--prewarm", type=int, default=20, help="EM iterations before the main run")
    f.add_argument("--seed", type=int, default=1)
    f.add_argument("--threads", type=int, default=None)
    f.add_argument("--tol-loglik", type=float, default=1e-8)
    f.add_argument("--tol-kkt", type=float, default=1e-3)
    f.add_argument("--prior-alpha", default=None, help="gamma shape (scalar or m x K CSV)")
    f.add_argument("--prior-beta", default=None, help="gamma inverse scale (scalar or K CSV)")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("simulate", help="simulate a correlated topic model corpus")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--scenario", type=str.upper, choices=["A", "B"])
    g.add_argument("--spec", help="JSON file of simulation settings")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("transform", help="map between Poisson NMF and topic model parameters")
    t.add_argument("--direction", choices=["pnmf-to-topic", "topic-to-pnmf"], required=True)
    t.add_argument("--L")
    t.add_argument("--F")
    t.add_argument("--Lstar")
    t.add_argument("--Fstar")
    t.add_argument("--doc-sizes", help="CSV vector of document sizes, or the .mtx matrix")
    t.add_argument("--u", help="factor scales (scalar or CSV vector)")
    t.add_argument("--map", action="store_true", help="use u_k = sum_j (alpha_jk - 1) / beta_k")
    t.add_argument("--alpha")
    t.add_argument("--beta")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_transform)

    e = sub.add_parser("eval", help="likelihoods and KKT diagnostics of a fit")
    e.add_argument("--input", required=True)
    e.add_argument("--L", required=True)
    e.add_argument("--F", required=True)
    e.add_argument("--drop-empty", action="store_true",
                   help="drop empty rows/columns of the input, as fit does")
    e.add_argument("--prior-alpha", default=None)
    e.add_argument("--prior-beta", default=None)
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="EM vs CD comparison on a simulated corpus")
    b.add_argument("--scenario", type=str.upper, choices=["A", "B"], required=True)
    b.add_argument("--budget-iters", type=int, default=750)
    b.add_argument("--prewarm", type=int, default=50)
    b.add_argument("--followup-iters", type=int, default=200)
    b.add_argument("--seed", type=int, default=1)
    b.add_argument("--threads", type=int, default=None)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) is None:
        args.threads = default_threads()
    try:
        return args.func(args)
    except UsageError as err:
        log.error("%s", err)
        return 1
    except NonFiniteLossError as err:
        log.error("numerical failure: %s", err)
        return 2


if __name__ == "__main__":
    sys.exit(main())
