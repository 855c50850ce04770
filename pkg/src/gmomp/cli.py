"""Command-line entry point: ``gmomp {solve,analyze,bench,postprocess,dict}``.

Exit codes: 0 success, 1 I/O or configuration error, 2 invalid problem
(dimension mismatch, unusable dictionary, unsupported space), 3 solver
stagnation (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .analysis import babel_values, recovery_report
from .experiments import ExperimentConfig, run_experiment, write_results
from .io import (config_hash, dump_json, export_dictionary, read_matrix, read_points,
                 read_solution, write_matrix, write_patterns, write_points, write_solution)
from .postprocess import (denoise_amplitudes, denoise_pattern, fit_pattern_polynomial,
                          transfer_amplitudes)
from .solver import gm_omp, omp_per_column, omp_vectorized, somp

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_STAGNATED = 0, 1, 2, 3


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _output_dir(args, cfg, base):
    if args.output:
        return Path(args.output)
    if "output" in cfg:
        return cfgmod.resolve(base, cfg["output"])
    raise CLIError("no output directory: pass --output or set 'output' in the config", EXIT_IO)


def _require(cfg, key, cmd):
    if key not in cfg:
        raise CLIError(f"'{cmd}' needs '{key}' in the config", EXIT_IO)
    return cfg[key]


def _dictionary(cfg, base):
    try:
        return cfgmod.make_dictionary(_require(cfg, "dictionary", "dictionary"), base)
    except OSError:
        raise
    except ValueError as exc:
        raise CLIError(f"invalid dictionary: {exc}", EXIT_INVALID) from None


def _read(fn, *args):
    try:
        return fn(*args)
    except ValueError as exc:
        raise CLIError(f"unreadable input: {exc}", EXIT_IO) from None


def _effective(cfg, args):
    """The config as run, with command-line overrides folded in (hashed into run.json)."""
    eff = dict(cfg)
    eff.pop("output", None)
    if args.seed is not None:
        eff["seed"] = args.seed
    return eff


def _run_solver(cfg, D, S, mspace):
    method = cfg.get("method", "gm-omp")
    stop = cfgmod.make_stop(cfg.get("stop"))
    if method == "gm-omp":
        params = cfgmod.make_params(_require(cfg, "feasible", "solve"))
        return gm_omp(D, S, mspace, params, stop)
    if method == "omp":
        return omp_per_column(D, S, stop)
    if method == "omp-vectorized":
        return omp_vectorized(D, S, stop)
    lam = cfg.get("lambda_norm", 1)
    return somp(D, S, math.inf if lam == "inf" else float(lam), stop)


def cmd_solve(args, cfg, base):
    D = _dictionary(cfg, base)
    S = _read(read_matrix, cfgmod.resolve(base, _require(cfg, "data", "solve")))
    mspace = _read(cfgmod.make_mspace, cfg.get("measurement_space"), base, S.shape[1])
    if S.shape[0] != D.n_samples:
        raise CLIError(f"data has {S.shape[0]} rows but atoms have length {D.n_samples}", EXIT_INVALID)
    if len(mspace) != S.shape[1]:
        raise CLIError(f"data has {S.shape[1]} columns but the measurement space has "
                       f"{len(mspace)} points", EXIT_INVALID)
    out = _output_dir(args, cfg, base)
    sol = _run_solver(cfg, D, S, mspace)
    eff = _effective(cfg, args)
    meta = {"config": eff, "config_hash": config_hash(eff),
            "measurement_metric": mspace.metric.value, "parameter_metric": D.pspace.metric.value,
            "shape": {"T": D.n_samples, "P": D.n_atoms, "M": S.shape[1]}}
    if "feasible" in cfg:
        p = cfgmod.make_params(cfg["feasible"])
        meta["sigma"], meta["tau"] = p.sigma, p.tau
    write_solution(out, sol, meta)
    write_points(out / "measurement_space.csv", mspace)
    write_points(out / "parameter_space.csv", D.pspace)
    if sol.stagnated:
        print(f"solver stagnated after {sol.iterations} iterations; partial results in {out}",
              file=sys.stderr)
        return EXIT_STAGNATED
    print(f"{sol.method}: {sol.iterations} iterations, nnz={sol.nnz}, "
          f"residual={sol.residual_norms[-1] if sol.residual_norms else float('nan'):.3e}")
    return EXIT_OK


def cmd_analyze(args, cfg, base):
    D = _dictionary(cfg, base)
    section = _require(cfg, "analysis", "analyze")
    L = section["L"]
    if L >= D.n_atoms:
        raise CLIError(f"L = {L} must be smaller than the number of atoms P = {D.n_atoms}", EXIT_INVALID)
    mu = babel_values(D, L)
    if mu[L - 1] >= 1.0:
        raise CLIError(f"mu_1(L-1) = {mu[L - 1]:.6g} >= 1: recovery conditions undefined", EXIT_INVALID)
    report = recovery_report(D, L, section.get("lambda", 1.0)).to_dict()
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.output or "output" in cfg:
        out = _output_dir(args, cfg, base)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(text + "\n")
    return EXIT_OK


def cmd_bench(args, cfg, base):
    exp = dict(cfg["experiment"])
    if "std_dev" in exp and isinstance(exp["std_dev"], str):
        inner = exp["std_dev"][len("sqrt("):-1]
        exp["std_dev"] = math.sqrt(float(inner))
    if args.seed is not None:
        exp["base_seed"] = args.seed
    exp["threads"] = args.threads
    try:
        ecfg = ExperimentConfig(**exp)
    except ValueError as exc:
        raise CLIError(str(exc), EXIT_INVALID) from None
    out = _output_dir(args, cfg, base)
    rows = run_experiment(ecfg)
    csv_path, _ = write_results(rows, out, ecfg)
    print(f"wrote {len(rows)} rows to {csv_path}")
    return EXIT_OK


def cmd_postprocess(args, cfg, base):
    sol_dir = cfgmod.resolve(base, _require(cfg, "solution", "postprocess"))
    try:
        sol, run = read_solution(sol_dir)
    except FileNotFoundError as exc:
        raise CLIError(f"missing solution file: {exc.filename}", EXIT_IO) from None
    mspace = read_points(sol_dir / "measurement_space.csv", run.get("measurement_metric", "absolute-1d"))
    pspace = read_points(sol_dir / "parameter_space.csv", run.get("parameter_metric", "absolute-1d"))
    settings = cfg.get("postprocess", {})
    pdeg = settings.get("pattern_degree")
    adeg = settings.get("amplitude_degree")
    delta = settings.get("delta", 0.0)
    if pdeg is not None and (mspace.dim != 1 or pspace.dim != 1):
        raise CLIError(f"pattern denoising needs 1-D spaces (measurement {mspace.dim}-D, "
                       f"parameter {pspace.dim}-D)", EXIT_INVALID)
    if adeg and mspace.dim != 1:
        raise CLIError("amplitude polynomials of positive degree need a 1-D measurement space",
                       EXIT_INVALID)
    out = _output_dir(args, cfg, base)
    X = np.array(sol.X, copy=True)
    patterns, structures = [], []
    for it, pat in enumerate(sol.patterns, start=1):
        if not pat:
            patterns.append(pat)
            continue
        if pdeg is not None:
            fitted = fit_pattern_polynomial(pat, mspace, pspace, pdeg, delta)
            target = denoise_pattern(pat, mspace, pspace, pdeg, delta, fitted=fitted)
            X = transfer_amplitudes(X, pat, target, mspace, adeg)
            structures.append({"iteration": it, **fitted.to_dict()})
            patterns.append(target)
        else:
            if adeg is not None:
                X = denoise_amplitudes(X, pat, mspace, adeg)
            patterns.append(pat)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "X.csv", X)
    write_patterns(out / "patterns.txt", patterns, X)
    eff = _effective(cfg, args)
    eff.pop("solution", None)
    dump_json(out / "structures.json", {"structures": structures, "settings": settings,
                                        "source_config_hash": run.get("config_hash"),
                                        "config_hash": config_hash(eff)})
    print(f"post-processed {len(sol.patterns)} patterns into {out}")
    return EXIT_OK


def cmd_dict(args, cfg, base):
    D = _dictionary(cfg, base)
    out = _output_dir(args, cfg, base)
    export_dictionary(out, D)
    print(f"wrote {D.n_samples}x{D.n_atoms} {D.kind} dictionary to {out}")
    return EXIT_OK


COMMANDS = {
    "solve": (cmd_solve, cfgmod.RUN_SCHEMA, "run a sparse solver on a data matrix"),
    "analyze": (cmd_analyze, cfgmod.RUN_SCHEMA, "Babel values and recovery conditions of a dictionary"),
    "bench": (cmd_bench, cfgmod.BENCH_SCHEMA, "run a synthetic benchmark"),
    "postprocess": (cmd_postprocess, cfgmod.RUN_SCHEMA, "denoise the patterns of a solution"),
    "dict": (cmd_dict, cfgmod.RUN_SCHEMA, "export a built dictionary to CSV"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="gmomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="base random seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for benchmarks")
        p.add_argument("--output", default=None, help="output directory (overrides the config)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    fn, schema, _ = COMMANDS[args.command]
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_IO
    try:
        cfg = cfgmod.load_config(args.config, schema)
        base = Path(args.config).resolve().parent
        return fn(args, cfg, base)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        print(f"error: {exc.strerror or exc}: {name}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
