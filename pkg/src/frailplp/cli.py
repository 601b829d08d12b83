"""Command-line front end: simulate / fit / mcmc / diagnose / benchmark.

All commands are deterministic functions of (config, input files, seed).
Flags may be collected in a flat key=value config file passed via --config;
explicit command-line flags override file values.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .data import ObservationDesign, DatasetError, ingest, summarize, write_dataset
from .plp import (
    PlpParams,
    PriorConfig,
    ImproperPosteriorError,
    posterior,
    bayes_estimates,
    classic_mle,
    duane_points,
)
from .simulate import SimScenario, FrailtyMixture, simulate, write_frailties
from .dpm import DpmHyperparams, run_chain, density_estimate, frailty_variance, mixture_variance
from .hmc import HmcConfig
from .diagnostics import geweke, autocorrelation, ess, run_harness

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

SCENARIOS = {
    "A": dict(beta=[1.2, 0.7], alpha=[5.0, 13.33]),
    "B": dict(beta=[0.75, 1.25], alpha=[9.46, 12.69]),
}


class ConfigError(Exception):
    pass


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from None


def _load_config_file(path):
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return values


def _apply_config_file(args, parser):
    if not getattr(args, "config", None):
        return args
    values = _load_config_file(args.config)
    given = {a.lstrip("-").replace("-", "_").split("=")[0] for a in sys.argv[1:] if a.startswith("--")}
    for key, value in values.items():
        if key in given or not hasattr(args, key):
            continue
        current = getattr(args, key)
        if isinstance(current, bool):
            value = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        setattr(args, key, value)
    return args


def _write_estimates(path, rows, fmt=None):
    fmt = fmt or ("json" if str(path).endswith(".json") else "csv")
    if fmt == "json":
        payload = [
            dict(parameter=r.name, mean=r.mean, sd=r.sd, ci_low=r.ci_low, ci_high=r.ci_high)
            for r in rows
        ]
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["parameter", "mean", "sd", "ci_low", "ci_high"])
            for r in rows:
                writer.writerow([r.name, f"{r.mean!r}", f"{r.sd!r}", f"{r.ci_low!r}", f"{r.ci_high!r}"])


def _write_matrix(path, header, array):
    array = np.atleast_2d(np.asarray(array))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, row in enumerate(array):
            writer.writerow([i] + [f"{float(v)!r}" for v in np.atleast_1d(row)])


def cmd_simulate(args):
    beta = _parse_floats(args.beta)
    alpha = _parse_floats(args.alpha)
    if len(beta) != len(alpha):
        raise ConfigError("--beta and --alpha must list the same number of causes")
    design = ObservationDesign(T=args.T, m=args.m, K=len(beta))
    family = "gamma"
    if args.frailty_mixture:
        parts = _parse_floats(args.frailty_mixture)
        if len(parts) % 3 != 0 or not parts:
            raise ConfigError("--frailty-mixture needs weight,mu,sigma triples")
        triples = np.array(parts).reshape(-1, 3)
        family = FrailtyMixture(weights=triples[:, 0], mu=triples[:, 1], sigma=triples[:, 2])
    scenario = SimScenario(
        design=design,
        true_params=PlpParams(beta=np.array(beta), alpha=np.array(alpha)),
        eta=args.eta,
        frailty_family=family,
        seed=args.seed,
        normalize_frailties=args.normalize,
    )
    data, z = simulate(scenario)
    write_dataset(args.out, data)
    write_frailties(args.truth_out or args.out + ".truth.csv", z)
    print(f"wrote {len(data)} failures across {design.m} systems to {args.out}")
    return EXIT_OK


def _read_dataset(args):
    design = None
    if args.T is not None or args.m is not None or args.K is not None:
        if None in (args.T, args.m, args.K):
            raise ConfigError("design overrides need all of --T, --m, --K")
        design = ObservationDesign(T=args.T, m=args.m, K=args.K)
    return ingest(args.data, design)


def cmd_fit(args):
    data = _read_dataset(args)
    if len(data) == 0:
        raise DatasetError("dataset contains no failures; nothing to fit")
    post = posterior(summarize(data), PriorConfig(zeta=args.zeta))
    rows = bayes_estimates(post)
    _write_estimates(args.out, rows)
    for r in rows:
        print(f"{r.name:>8}  mean={r.mean:.3f}  sd={r.sd:.3f}  ci=[{r.ci_low:.3f}, {r.ci_high:.3f}]")
    if data.design.m == 1 and data.design.K == 1:
        beta_hat, mu_hat = classic_mle(data)
        print(f"classic MLEs: beta_hat={beta_hat:.6f}  mu_hat={mu_hat:.6f}")
    if args.duane_out:
        for q in range(1, data.design.K + 1):
            log_t, log_n, slope = duane_points(data, q)
            _write_matrix(
                f"{args.duane_out}.cause{q}.csv",
                ["index", "log_time", "log_count"],
                np.column_stack([log_t, log_n]),
            )
            print(f"duane slope cause {q}: {slope:.4f}")
    return EXIT_OK


def cmd_mcmc(args):
    import os

    data = _read_dataset(args)
    hyper = DpmHyperparams(
        ac0=args.ac0, bc0=args.bc0, m0=args.m0, s0=args.s0, d0=args.d0, p0=args.p0
    )
    hmc = HmcConfig(
        step_size=args.step_size,
        leapfrog_steps=args.leapfrog_steps,
        adapt=not args.no_adapt,
        target_accept=args.target_accept,
    )
    if args.iterations <= args.burn_in:
        raise ConfigError("--iterations must exceed --burn-in")
    trace = run_chain(
        data,
        hyper=hyper,
        hmc=hmc,
        iterations=args.iterations,
        burn_in=args.burn_in,
        seed=args.seed,
    )
    os.makedirs(args.out_dir, exist_ok=True)
    m = data.design.m
    _write_matrix(
        os.path.join(args.out_dir, "z_trace.csv"),
        ["iteration"] + [f"z_{j}" for j in range(1, m + 1)],
        trace.z,
    )
    _write_matrix(os.path.join(args.out_dir, "var_z_trace.csv"), ["iteration", "var_z"], trace.var_z)
    _write_matrix(os.path.join(args.out_dir, "c_trace.csv"), ["iteration", "c"], trace.c)
    _write_matrix(
        os.path.join(args.out_dir, "acceptance.csv"),
        ["iteration", "accepted"],
        trace.accepted.astype(int),
    )
    z_hat = trace.z_hat
    _write_matrix(
        os.path.join(args.out_dir, "z_hat.csv"),
        ["system", "z_hat", "n_failures"],
        np.column_stack([z_hat, trace.n_counts.astype(float)]),
    )
    grid = np.linspace(args.grid_lo, args.grid_hi, args.grid_points)
    dens = density_estimate(trace, grid)
    _write_matrix(
        os.path.join(args.out_dir, "frailty_density.csv"),
        ["index", "z", "density"],
        np.column_stack([grid, dens]),
    )
    vz = frailty_variance(trace.post_burn_in(trace.var_z))
    mix_vz = mixture_variance(trace)
    gw = geweke(trace.post_burn_in(trace.var_z))
    summary = dict(
        iterations=args.iterations,
        burn_in=args.burn_in,
        var_z_mean=vz.mean,
        var_z_sd=vz.sd,
        var_z_ci=[vz.ci_low, vz.ci_high],
        mixture_var_z_mean=mix_vz.mean,
        geweke_var_z=gw.z_score,
        geweke_pass=gw.passed,
        acceptance_rate=trace.acceptance_rate,
        divergences=trace.divergences,
        z_hat_mean=float(z_hat.mean()),
    )
    with open(os.path.join(args.out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    print(
        f"Var(Z) posterior mean {vz.mean:.3f} sd {vz.sd:.3f} "
        f"CI [{vz.ci_low:.3f}, {vz.ci_high:.3f}]; geweke z={gw.z_score:.2f}"
    )
    divergence_frac = trace.divergences / args.iterations
    if divergence_frac > 0.5:
        print(f"warning: divergence fraction {divergence_frac:.2f}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_diagnose(args):
    values = np.loadtxt(args.trace, delimiter=",", skiprows=1, usecols=args.column)
    gw = geweke(values, first_frac=args.first_frac, last_frac=args.last_frac)
    acf = autocorrelation(values, args.max_lag)
    result = dict(
        geweke_z=gw.z_score,
        geweke_pass=gw.passed,
        ess=ess(values),
        acf=list(map(float, acf)),
    )
    text = json.dumps(result, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(f"geweke z={gw.z_score:.3f} pass={gw.passed} ess={result['ess']:.1f}")
    return EXIT_OK


def cmd_benchmark(args):
    if args.scenario:
        if args.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {args.scenario!r}; choices: {sorted(SCENARIOS)}"
            )
        params = SCENARIOS[args.scenario]
        beta, alpha = params["beta"], params["alpha"]
    else:
        beta, alpha = _parse_floats(args.beta), _parse_floats(args.alpha)
    design = ObservationDesign(T=args.T, m=args.m, K=len(beta))
    scenario = SimScenario(
        design=design,
        true_params=PlpParams(beta=np.array(beta), alpha=np.array(alpha)),
        eta=args.eta,
        seed=args.seed,
    )
    report = run_harness(
        scenario,
        prior=PriorConfig(zeta=args.zeta),
        M=args.M,
        with_mcmc=args.with_mcmc,
        mcmc_iterations=args.mcmc_iterations,
        mcmc_burn_in=args.mcmc_burn_in,
    )
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eta", "m", "M", "parameter", "truth", "bias", "mse", "rmse", "cp95", "mc_se"])
        for r in report.rows:
            writer.writerow(
                [args.eta, args.m, args.M, r.name]
                + [f"{float(v)!r}" for v in (r.truth, r.bias, r.mse, r.rmse, r.cp95, r.mc_se)]
            )
    for r in report.rows:
        print(
            f"{r.name:>8}  bias={r.bias:+.4f}  mse={r.mse:.4f}  rmse={r.rmse:.4f}  cp95={r.cp95:.4f}"
        )
    return EXIT_OK


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file; flags override it")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frailplp",
        description="Reliability inference for repairable systems under dependent competing risks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic fleet")
    _add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--truth-out", default=None)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--beta", default="1.2,0.7")
    p.add_argument("--alpha", default="5,13.33")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--frailty-mixture", default=None, help="weight,mu,sigma triples")
    p.add_argument("--normalize", action="store_true", help="rescale frailties to sample mean 1")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="closed-form Bayes estimates and Duane data")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="estimates.csv")
    p.add_argument("--duane-out", default=None, help="prefix for per-cause Duane CSVs")
    p.add_argument("--zeta", type=float, default=2.0)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mcmc", help="frailty posterior via the hybrid Gibbs/HMC chain")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out-dir", default="mcmc_out")
    p.add_argument("--iterations", type=int, default=10_000)
    p.add_argument("--burn-in", type=int, default=5_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--ac0", type=float, default=1.0)
    p.add_argument("--bc0", type=float, default=1.0)
    p.add_argument("--m0", type=float, default=0.0)
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--d0", type=float, default=2.0)
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--leapfrog-steps", type=int, default=20)
    p.add_argument("--target-accept", type=float, default=0.8)
    p.add_argument("--no-adapt", action="store_true")
    p.add_argument("--grid-lo", type=float, default=0.02)
    p.add_argument("--grid-hi", type=float, default=6.0)
    p.add_argument("--grid-points", type=int, default=300)
    p.set_defaults(func=cmd_mcmc)

    p = sub.add_parser("diagnose", help="Geweke / ACF / ESS on a trace CSV column")
    _add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--column", type=int, default=1)
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--first-frac", type=float, default=0.1)
    p.add_argument("--last-frac", type=float, default=0.5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("benchmark", help="Monte Carlo bias/MSE/coverage harness")
    _add_common(p)
    p.add_argument("--scenario", default=None, help=f"named scenario: {sorted(SCENARIOS)}")
    p.add_argument("--beta", default="1.2,0.7")
    p.add_argument("--alpha", default="5,13.33")
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--m", type=int, default=50)
    p.add_argument("--T", type=float, default=20.0)
    p.add_argument("--M", type=int, default=2000)
    p.add_argument("--zeta", type=float, default=2.0)
    p.add_argument("--with-mcmc", action="store_true")
    p.add_argument("--mcmc-iterations", type=int, default=1500)
    p.add_argument("--mcmc-burn-in", type=int, default=500)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="benchmark.csv")
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config_file(args, parser)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DatasetError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ImproperPosteriorError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, FloatingPointError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
