"""Command-line front end: ``solve``, ``bench``, ``validate`` and ``gen-data``.

Exit codes: 0 success, 1 solver did not converge, 2 configuration or data
error.  Errors go to standard error prefixed with ``error:``.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .applications import (DsvmInstance, FusedSvmInstance, LogisticInstance,
                           build_dsvm, build_fused_svm, build_logistic)
from .benchmarks import dsvm_toy, fused_svm_synthetic, make_d1, qp_from_data
from .core import IdentityQuadratic, JacobianQuadratic, psd_proximal_weight
from .diagnostics import block_stationarity, increment_series, rate_fit, reference_saddle
from .errors import (DataValidationError, DiagnosticUnavailable, NoConvergence, NumericalFailure,
                     ParameterRejected, VappError)
from .io import (RunConfig, generate_synthetic, load_config, read_libsvm,
                 write_libsvm, write_summary_json, write_trace_csv)
from .problem import primal_residual
from .solver import default_parameters, run, validate_parameters

__all__ = ["cli_main", "build_from_config", "main"]


def _load_instance(cfg):
    if cfg.data is None:
        inst = generate_synthetic(cfg.problem, cfg.seed, cfg.n, cfg.m)
        if cfg.problem == "fused-svm":
            inst = FusedSvmInstance(inst.B, inst.labels, cfg.lam1, cfg.lam2, cfg.gamma,
                                    cfg.alpha, cfg.alpha)
        elif cfg.problem == "logistic":
            inst = LogisticInstance(inst.B, inst.labels, cfg.lam, cfg.eps or 1.0, cfg.gamma)
        elif cfg.problem == "dsvm":
            inst = DsvmInstance(inst.Q, inst.e, inst.y, cfg.c, cfg.eps, cfg.gamma, cfg.rho)
        else:
            inst = inst.problem()
        return inst
    if cfg.problem in ("fused-svm", "logistic"):
        X, y = read_libsvm(cfg.data)
        B = X.T.toarray()
        if cfg.problem == "fused-svm":
            return FusedSvmInstance(B, y, cfg.lam1, cfg.lam2, cfg.gamma, cfg.alpha, cfg.alpha)
        return LogisticInstance(B, y, cfg.lam, cfg.eps or 1.0, cfg.gamma)
    try:
        data = json.loads(Path(cfg.data).read_text())
    except OSError as exc:
        raise DataValidationError(f"{cfg.data}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{cfg.data}: invalid JSON ({exc.msg})") from exc
    try:
        if cfg.problem == "dsvm":
            return DsvmInstance(data["Q"], data["e"], data["y"], data.get("c", cfg.c),
                                cfg.eps, cfg.gamma, cfg.rho)
        return qp_from_data(data)
    except KeyError as exc:
        raise DataValidationError(f"{cfg.data}: missing field {exc}") from None


def build_from_config(cfg):
    """Return ``(problem, core, params, instance)`` described by `cfg`."""
    inst = _load_instance(cfg)
    if cfg.problem == "fused-svm":
        prob, core = build_fused_svm(inst)
    elif cfg.problem == "logistic":
        prob, core = build_logistic(inst)
    elif cfg.problem == "dsvm":
        prob, core = build_dsvm(inst)
    else:
        prob, core = inst, None
    g = cfg.gamma
    theta = g if cfg.theta is None else cfg.theta
    eps = cfg.eps
    if cfg.variant == "identity-core":
        core = IdentityQuadratic(1.0)
    elif cfg.variant == "newton-core":
        eps = inst.eps
    elif cfg.variant == "PJVAPP":
        eps = 1.0 if eps is None else eps
        if cfg.problem != "fused-svm":
            alpha = cfg.alpha if cfg.alpha is not None else psd_proximal_weight(prob, theta, g, eps)
            core = JacobianQuadratic(prob, theta, alpha)
    elif cfg.variant == "LJVAPP":
        core = JacobianQuadratic(prob, theta, 0.0)
    elif cfg.variant == "LPVAPP":
        core = JacobianQuadratic(prob, 0.0, 1.0 if cfg.alpha is None else cfg.alpha)
    params = default_parameters(prob, core, gamma=g, delta=cfg.delta, schedule=cfg.schedule,
                                tol_primal=cfg.tol_primal, tol_change=cfg.tol_change,
                                max_iter=cfg.max_iter, worker_count=cfg.workers)
    if eps is not None:
        params = params.with_(eps=eps)
    if cfg.rho is not None:
        params = params.with_(rho=cfg.rho)
    return prob, core, params, inst


def _rate_summary(trace, params):
    a = increment_series(trace, params.rho)
    if np.any(np.isnan(a)):
        a = trace.column("du_norm") ** 2 + trace.column("dp_norm") ** 2 / params.rho
    a = a[: np.argmax(a <= 0)] if np.any(a <= 0) else a
    try:
        fit = rate_fit(a)
    except VappError as exc:
        return {"available": False, "reason": str(exc)}
    return {"available": True, "slope": fit.slope, "tail_ratio": fit.tail_ratio,
            "o_one_over_t": fit.o_one_over_t}


def _solve(cfg, out_dir):
    prob, core, params, _ = build_from_config(cfg)
    reference = None
    if prob.n <= 12:
        try:
            reference = reference_saddle(prob)
        except DiagnosticUnavailable:
            reference = None
    out_dir.mkdir(parents=True, exist_ok=True)
    state, trace = run(prob, core, params, reference=reference, override=cfg.override,
                       timing=cfg.timing)
    write_trace_csv(trace, out_dir / cfg.trace_csv)
    _, res = primal_residual(prob, state.u)
    summary = {
        "problem": cfg.problem, "variant": cfg.variant,
        "objective": trace.records[-1].objective if trace.records else None,
        "primal_residual": res,
        "primal_residual_inf": float(np.max(np.abs(state.residual), initial=0.0)),
        "block_stationarity": max(block_stationarity(prob, state.u, state.p)),
        "iterations": state.k, "termination": trace.reason,
        "parameters": {"eps": params.eps, "gamma": params.gamma, "rho": params.rho,
                       "delta": params.delta, "schedule": params.schedule},
        "parameter_report": trace.meta["report"].to_dict(),
        "rate_fit": _rate_summary(trace, params),
        "reference_objective": None if reference is None else reference.objective_star,
    }
    write_summary_json(summary, out_dir / cfg.summary_json)
    print(f"{trace.reason} after {state.k} iterations; objective "
          f"{summary['objective']!r}, residual {res:.3e}")
    return 0 if trace.reason == "converged" else 1


def _bench(out_dir, workers):
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    cases = [("D1 block QP", make_d1(0), IdentityQuadratic(1.0), None),
             ("DSVM toy", *build_dsvm(dsvm_toy(0)), None)]
    inst = fused_svm_synthetic(0)
    cases.append(("Fused-SVM n=20 m=50", *build_fused_svm(inst), inst.params()))
    for name, prob, core, params in cases:
        params = params or default_parameters(prob, core)
        params = params.with_(worker_count=workers, max_iter=20_000,
                              tol_primal=1e-8, tol_change=1e-8)
        t0 = time.perf_counter()
        state, trace = run(prob, core, params, timing=False)
        rows.append({"problem": name, "iterations": state.k, "termination": trace.reason,
                     "objective": trace.records[-1].objective,
                     "primal_residual_inf": float(np.max(np.abs(state.residual))),
                     "seconds": time.perf_counter() - t0})
        print(f"{name:24s} {trace.reason:14s} k={state.k:6d} "
              f"res={rows[-1]['primal_residual_inf']:.2e} {rows[-1]['seconds']:.2f}s")
    write_summary_json({"bench": rows}, out_dir / "bench.json")
    return 0 if all(r["termination"] == "converged" for r in rows) else 1


def _validate(cfg):
    if cfg is None:
        inst = dsvm_toy(0)
        prob, core = build_dsvm(inst)
        params = inst.params()
    else:
        prob, core, params, _ = build_from_config(cfg)
    report = validate_parameters(prob, core, params)
    print(report.summary())
    return 0 if report.ok or (cfg is not None and cfg.override) else 2


def _gen_data(kind, seed, out, n, m):
    inst = generate_synthetic(kind, seed, n, m)
    out = Path(out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    if kind in ("fused-svm", "logistic"):
        write_libsvm(out, inst.B.T, inst.labels)
    elif kind == "dsvm":
        write_summary_json({"Q": inst.Q, "e": inst.e, "y": inst.y, "c": inst.c}, out)
    else:
        write_summary_json(inst.data, out)
    print(f"wrote {kind} data to {out}")
    return 0


def _parser():
    ap = argparse.ArgumentParser(prog="vappal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("solve", "bench", "validate", "gen-data"):
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", help="flat 'key = value' run file")
        sp_.add_argument("--seed", type=int)
        sp_.add_argument("--workers", type=int)
        sp_.add_argument("--override-params", action="store_true",
                         help="run even when the parameters meet no convergence regime")
        sp_.add_argument("--out-dir", default=".")
        if name == "gen-data":
            sp_.add_argument("--kind", required=True,
                             choices=("fused-svm", "logistic", "dsvm", "qp"))
            sp_.add_argument("--out", help="output file (default: <out-dir>/<kind>-<seed>.*)")
            sp_.add_argument("--n", type=int)
            sp_.add_argument("--m", type=int)
    return ap


def _config(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.override_params:
        cfg.override = True
    RunConfig.__post_init__(cfg)
    return cfg


def cli_main(argv=None):
    """Run the command line; returns the process exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    out_dir = Path(args.out_dir)
    try:
        if args.command == "solve":
            return _solve(_config(args), out_dir)
        if args.command == "validate":
            return _validate(_config(args) if args.config else None)
        if args.command == "bench":
            return _bench(out_dir, args.workers or 1)
        seed = 0 if args.seed is None else args.seed
        ext = "txt" if args.kind in ("fused-svm", "logistic") else "json"
        out = args.out or out_dir / f"{args.kind}-{seed}.{ext}"
        return _gen_data(args.kind, seed, out, args.n, args.m)
    except ParameterRejected as exc:
        print(f"error: parameters rejected: {exc}", file=sys.stderr)
        if exc.report is not None:
            print(exc.report.summary(), file=sys.stderr)
        return 2
    except (NoConvergence, NumericalFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (VappError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
