"""Command-line entry point.

Exit codes: 0 on success, 1 on configuration or usage errors, 2 on numerical
failures (singular operators, degenerate augmentations, failed checks).
"""

import argparse
import json
import sys

import numpy as np

from . import analysis
from .errors import ConfigError, DegenerateAugmentationError, NoiseModelError, SingularMatrixError
from .harness import (
    ESTIMATORS,
    PRIORS,
    append_report,
    config_from_mapping,
    load_config,
    run_experiment,
    run_fig3_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _bench_overrides(args):
    keys = {
        "family": "chain.family",
        "K": "chain.K",
        "gamma": "chain.gamma",
        "reward": "reward.kind",
        "N": "noise.N",
        "m": "bootstrap.m",
        "prior": "bootstrap.prior",
        "trials": "trials",
        "estimator": "estimator",
        "threshold": "threshold",
        "seed": "seed",
        "output": "output",
        "workers": "workers",
    }
    flat = {keys[name]: getattr(args, name) for name in keys if getattr(args, name) is not None}
    for item in args.param or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--param expects name=value, got {item!r}")
        flat[f"chain.params.{name}"] = float(value)
    return flat


def _cmd_bench(args):
    flat = {}
    if args.config:
        base = load_config(args.config)
        flat = {
            "chain.family": base.chain.family,
            "chain.K": base.chain.K,
            "chain.gamma": base.chain.gamma,
            "reward.kind": base.reward,
            "noise.N": base.N,
            "bootstrap.m": base.m,
            "bootstrap.prior": base.prior,
            "trials": base.trials,
            "estimator": base.estimator,
            "threshold": base.threshold,
            "seed": base.seed,
            "output": base.output,
            "workers": base.workers,
        }
        flat.update({f"chain.params.{k}": v for k, v in base.chain.params.items()})
    flat.update(_bench_overrides(args))
    if "chain.family" not in flat:
        raise ConfigError("bench needs --config or --family")
    config = config_from_mapping(flat)
    result = run_experiment(config)
    if config.output:
        append_report(result, config.output, wall_time=not args.no_wall_time)
    print(
        f"{config.chain.chain_id} N={config.N}: naive {result.naive_err_pct:.4g}% "
        f"(+-{result.naive_ci2:.3g}), augmented {result.aug_err_pct:.4g}% "
        f"(+-{result.aug_ci2:.3g}), beta {result.mean_beta:.4g} +- {result.std_beta:.3g}"
    )
    return EXIT_OK


def _cmd_counterexample(args):
    if args.which == "anisotropy":
        report = analysis.anisotropy_beta(args.k, args.b)
        report.extras["min_eig"] = analysis.anisotropy_mineig(args.k)
    elif args.which == "masking":
        report = analysis.masking_beta(args.k)
    else:
        report = analysis.l2_counterexample_beta(args.epsilon, args.norm)
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def smallnoise_probes(draws=1000, seed=0):
    """Randomized checks of the small-noise identities; returns a dict of pass flags."""
    rng = np.random.default_rng(seed)
    pair_ok = identity_ok = variation_ok = True
    for _ in range(draws):
        n = int(rng.integers(2, 7))
        y = rng.standard_normal((n, n)) * rng.uniform(0.05, 0.6)
        try:
            pair = analysis.symmetric_pair_sum(y)
            lhs, rhs = analysis.trace_identity_sides(y)
        except SingularMatrixError:
            continue
        pair_ok &= pair >= -1e-9
        identity_ok &= abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))
        variation_ok &= analysis.second_variation(y) >= 0.0
    y = rng.standard_normal((5, 5))
    gaps = [
        abs(analysis.symmetric_pair_sum(t * y) - t * t * analysis.second_variation(y)) for t in (1e-2, 5e-3)
    ]
    ratio = gaps[0] / gaps[1]
    return {
        "symmetric_pair_nonnegative": bool(pair_ok),
        "trace_identity": bool(identity_ok),
        "second_variation_nonnegative": bool(variation_ok),
        "remainder_ratio": ratio,
        "remainder_fourth_order": bool(8.0 <= ratio <= 32.0),
    }


def _cmd_smallnoise(args):
    result = smallnoise_probes(args.draws, args.seed)
    print(json.dumps(result, indent=2))
    ok = all(v for k, v in result.items() if isinstance(v, bool))
    return EXIT_OK if ok else EXIT_NUMERIC


def _cmd_fig3(args):
    if args.k:
        ks = args.k
    else:
        ks = np.linspace(args.kmin, args.kmax, args.num)
        ks = [k for k in ks if abs(abs(k) - 1.0) > 1e-9]
    rows = run_fig3_sweep(ks, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")
    return EXIT_OK


def _cmd_overshoot(args):
    rng = np.random.default_rng(args.seed)
    out = analysis.overshoot_demo(args.shape, args.scale, args.samples, rng, full_output=True)
    print(json.dumps(out._asdict(), indent=2))
    return EXIT_OK


def _bool(text):
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def build_parser():
    parser = _Parser(prog="opaug", description="Operator augmentation experiments for noisy linear systems")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    bench = sub.add_parser("bench", help="run a naive-vs-augmented Markov chain experiment")
    bench.add_argument("--config", help="flat key: value YAML experiment file")
    bench.add_argument("--family")
    bench.add_argument("--K", type=int)
    bench.add_argument("--gamma", type=float)
    bench.add_argument("--param", action="append", help="chain parameter name=value, e.g. l=0.25")
    bench.add_argument("--reward", help="sine, sine1d, sine2d, sine3d or isotropic")
    bench.add_argument("--N", type=int, help="observed transitions per state")
    bench.add_argument("--m", type=int, help="bootstrap samples per trial")
    bench.add_argument("--prior", choices=PRIORS, help="right-hand sides used inside the bootstrap")
    bench.add_argument("--trials", type=int)
    bench.add_argument("--estimator", choices=ESTIMATORS)
    bench.add_argument("--threshold", type=_bool, help="clip negative beta estimates to 0")
    bench.add_argument("--seed", type=int)
    bench.add_argument("--output", help="CSV report to append to")
    bench.add_argument("--workers", type=int)
    bench.add_argument("--no-wall-time", action="store_true", help="write wall_ms as 0 for reproducible reports")
    bench.set_defaults(func=_cmd_bench)

    ce = sub.add_parser("counterexample", help="evaluate an adversarial ensemble")
    ce_sub = ce.add_subparsers(dest="which", required=True, parser_class=_Parser)
    aniso = ce_sub.add_parser("anisotropy")
    aniso.add_argument("--k", type=float, default=100.0)
    aniso.add_argument("--b", type=float, nargs=2, default=[2.0, -1.0])
    masking = ce_sub.add_parser("masking")
    masking.add_argument("--k", type=float, default=1000.0)
    l2 = ce_sub.add_parser("l2")
    l2.add_argument("--epsilon", type=float, default=0.01)
    l2.add_argument("--norm", choices=("frobenius", "residual"), default="frobenius")
    ce.set_defaults(func=_cmd_counterexample)

    small = sub.add_parser("smallnoise", help="randomized checks of the small-noise expansion")
    small.add_argument("--draws", type=int, default=1000)
    small.add_argument("--seed", type=int, default=0)
    small.set_defaults(func=_cmd_smallnoise)

    fig3 = sub.add_parser("fig3", help="lowest eigenvalue curve of the anisotropy example")
    fig3.add_argument("--output", required=True)
    fig3.add_argument("--k", type=float, nargs="+", help="explicit k values")
    fig3.add_argument("--kmin", type=float, default=-10.0)
    fig3.add_argument("--kmax", type=float, default=10.0)
    fig3.add_argument("--num", type=int, default=401)
    fig3.set_defaults(func=_cmd_fig3)

    demo = sub.add_parser("demo-overshoot", help="E[1/X] versus 1/E[X] for gamma-distributed X")
    demo.add_argument("--shape", type=float, default=2.0)
    demo.add_argument("--scale", type=float, default=0.5)
    demo.add_argument("--samples", type=int, default=1_000_000)
    demo.add_argument("--seed", type=int, default=0)
    demo.set_defaults(func=_cmd_overshoot)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularMatrixError, DegenerateAugmentationError, NoiseModelError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
