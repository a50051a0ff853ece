"""Naive-versus-augmented value-function experiments on sampled Markov chains.

Each trial draws an empirical transition matrix ``P_hat`` from the true chain,
estimates the augmentation factor by parametric bootstrap from ``P_hat``
alone, and records the squared residual-norm errors ``||A (q_hat - q)||^2``
of the naive and augmented value functions.  Errors are reported as the mean
squared error in percent of the squared residual norm of the true solution,
``||A q||^2 = ||r||^2`` (averaged over trials for random rewards), with a
``2 sigma`` half-width from the standard error of the mean.
"""

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import yaml

from .augmentation import (
    Deterministic,
    InverseShrink,
    IsotropicGaussian,
    bootstrap_beta_general,
    bootstrap_beta_taylor_prior,
    threshold_beta,
)
from .errors import ConfigError
from .linalg import LUFactor
from .markov import (
    ChainSpec,
    TransitionBootstrap,
    build_chain,
    reward_vector,
    sample_empirical_transition,
    value_operator,
)
from .analysis import anisotropy_mineig

ESTIMATORS = ("taylor", "mc")
PRIORS = ("reward", "isotropic")
REPORT_COLUMNS = (
    "chain_id",
    "N",
    "trials",
    "estimator",
    "naive_err_pct",
    "naive_ci2",
    "aug_err_pct",
    "aug_ci2",
    "mean_beta",
    "std_beta",
    "wall_ms",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One row of a results table.

    ``prior`` selects the right-hand-side distribution used inside the
    bootstrap: ``"reward"`` uses the experiment's own reward prior (the fixed
    reward vector for sine rewards, ``N(0, I)`` for isotropic ones);
    ``"isotropic"`` always probes with ``N(0, I)``.
    """

    chain: ChainSpec
    reward: str = "sine"
    N: int = 64
    m: int = 100
    trials: int = 2000
    estimator: str = "taylor"
    threshold: bool = True
    seed: int = 0
    output: Optional[str] = None
    prior: str = "reward"
    workers: int = 1

    def __post_init__(self):
        for name in ("N", "m", "trials", "workers"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.trials < 2:
            raise ConfigError("at least 2 trials are needed for a standard error")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.prior not in PRIORS:
            raise ConfigError(f"bootstrap prior must be one of {PRIORS}, got {self.prior!r}")
        if not isinstance(self.threshold, bool):
            raise ConfigError(f"threshold must be true or false, got {self.threshold!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an integer in [0, 2^64), got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "reward", str(self.reward).lower())
        try:
            reward_vector(self.reward, self.chain, np.random.default_rng(0))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def isotropic_reward(self):
        return self.reward == "isotropic"


@dataclass
class TrialRecord:
    beta_hat: float
    naive_sq_err: float
    aug_sq_err: float
    rhs_sq_norm: float
    rejected: int = 0


@dataclass
class ExperimentResult:
    naive_err_pct: float
    naive_ci2: float
    aug_err_pct: float
    aug_ci2: float
    mean_beta: float
    std_beta: float
    config: ExperimentConfig
    wall_ms: float = 0.0
    records: list = field(default_factory=list, repr=False)

    def report_row(self, wall_time=True):
        c = self.config
        values = [
            self.naive_err_pct,
            self.naive_ci2,
            self.aug_err_pct,
            self.aug_ci2,
            self.mean_beta,
            self.std_beta,
        ]
        return (
            [c.chain.chain_id, str(c.N), str(c.trials), c.estimator]
            + [f"{v:.6g}" for v in values]
            + [f"{self.wall_ms:.0f}" if wall_time else "0"]
        )


# -- configuration --------------------------------------------------------

_SCALAR_KEYS = {
    "reward.kind": "reward",
    "noise.N": "N",
    "bootstrap.m": "m",
    "bootstrap.prior": "prior",
    "trials": "trials",
    "estimator": "estimator",
    "threshold": "threshold",
    "seed": "seed",
    "output": "output",
    "workers": "workers",
}


def _flatten(mapping, prefix=""):
    flat = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def config_from_mapping(mapping):
    """Build a config from flat dotted keys (``chain.family``, ``noise.N``, ...).

    Nested mappings are flattened first, so ``{"chain": {"K": 16}}`` and
    ``{"chain.K": 16}`` are equivalent.
    """
    flat = _flatten(mapping)
    chain_kwargs = {"params": {}}
    kwargs = {}
    for key, value in flat.items():
        if key.startswith("chain.params."):
            chain_kwargs["params"][key[len("chain.params."):]] = value
        elif key in ("chain.family", "chain.K", "chain.gamma"):
            chain_kwargs[key.split(".", 1)[1]] = value
        elif key in _SCALAR_KEYS:
            kwargs[_SCALAR_KEYS[key]] = value
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if "family" not in chain_kwargs:
        raise ConfigError("configuration needs chain.family")
    try:
        kwargs["chain"] = ChainSpec(**chain_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid chain: {exc}") from None
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path):
    """Read a flat ``key: value`` YAML file into an ExperimentConfig."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a key/value mapping")
    return config_from_mapping(data)


# -- trials ---------------------------------------------------------------


def trial_stream(seed, trial_index):
    """Independent generator for one trial, fixed by ``(seed, trial_index)`` alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial_index,)))


class Problem:
    """Quantities shared by all trials of one configuration."""

    def __init__(self, config):
        chain = config.chain
        self.p = build_chain(chain)
        self.a = value_operator(self.p, chain.gamma)
        self.factor = LUFactor(self.a)
        self.reward = None if config.isotropic_reward else reward_vector(config.reward, chain)


def run_trial(config, trial_index, problem=None):
    problem = problem or Problem(config)
    chain = config.chain
    rng = trial_stream(config.seed, trial_index)

    p_hat = sample_empirical_transition(problem.p, config.N, rng)
    a_hat = LUFactor(value_operator(p_hat, chain.gamma))
    boot = TransitionBootstrap(p_hat, config.N, chain.gamma)
    if problem.reward is not None and config.prior == "reward":
        prior = Deterministic(problem.reward)
    else:
        prior = IsotropicGaussian(chain.n_states)
    if config.estimator == "taylor":
        est = bootstrap_beta_taylor_prior(a_hat, boot.perturbations(), config.m, prior, rng, full_output=True)
    else:
        est = bootstrap_beta_general(a_hat, boot.operators(), InverseShrink(), config.m, prior, rng, full_output=True)
    beta = threshold_beta(est.beta) if config.threshold else est.beta

    r = problem.reward if problem.reward is not None else reward_vector("isotropic", chain, rng)
    q = problem.factor.solve(r)
    q_hat = a_hat.solve(r)
    q_aug = q_hat - beta * q_hat
    naive = problem.a @ (q_hat - q)
    aug = problem.a @ (q_aug - q)
    return TrialRecord(beta, float(naive @ naive), float(aug @ aug), float(r @ r), est.rejected)


_cached_problem = [None, None]


def _run_chunk(config, indices):
    if _cached_problem[0] != config:
        _cached_problem[:] = [config, Problem(config)]
    problem = _cached_problem[1]
    return [run_trial(config, i, problem) for i in indices]


def _mean_and_se(values):
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n), math.sqrt(var)


def summarize(records, config, wall_ms=0.0):
    """Aggregate trial records; the result does not depend on record order."""
    naive = [rec.naive_sq_err for rec in records]
    aug = [rec.aug_sq_err for rec in records]
    betas = [rec.beta_hat for rec in records]
    scale = math.fsum(rec.rhs_sq_norm for rec in records) / len(records)
    naive_mean, naive_se, _ = _mean_and_se(naive)
    aug_mean, aug_se, _ = _mean_and_se(aug)
    beta_mean, _, beta_std = _mean_and_se(betas)
    return ExperimentResult(
        naive_err_pct=100.0 * naive_mean / scale,
        naive_ci2=100.0 * 2.0 * naive_se / scale,
        aug_err_pct=100.0 * aug_mean / scale,
        aug_ci2=100.0 * 2.0 * aug_se / scale,
        mean_beta=beta_mean,
        std_beta=beta_std,
        config=config,
        wall_ms=wall_ms,
        records=list(records),
    )


def run_experiment(config, workers=None):
    """Run ``config.trials`` independent trials and aggregate them.

    ``workers`` > 1 spreads trials over processes; every trial draws from its
    own stream, so the result is identical for any worker count.
    """
    workers = config.workers if workers is None else workers
    start = time.perf_counter()
    indices = list(range(config.trials))
    if workers <= 1:
        records = _run_chunk(config, indices)
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [config] * workers, chunks))
        by_index = {}
        for chunk, part in zip(chunks, parts):
            by_index.update(zip(chunk, part))
        records = [by_index[i] for i in indices]
    wall_ms = 1000.0 * (time.perf_counter() - start)
    return summarize(records, config, wall_ms)


# -- reports --------------------------------------------------------------


def _csv_line(values):
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(values)
    return buf.getvalue()


def append_report(result, path, wall_time=True):
    """Append one result row to a CSV report, writing the header for a new file."""
    new = not os.path.exists(path) or os.path.getsize(path) == 0
    try:
        with open(path, "a", newline="") as fh:
            if new:
                fh.write(_csv_line(REPORT_COLUMNS))
            fh.write(_csv_line(result.report_row(wall_time)))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report {path}: {exc.strerror}") from None


def run_fig3_sweep(k_values, output_path):
    """Write ``k, min_eig`` rows of the anisotropy eigenvalue curve to a CSV file."""
    rows = [(float(k), anisotropy_mineig(k)) for k in k_values]
    try:
        with open(output_path, "w", newline="") as fh:
            fh.write(_csv_line(("k", "min_eig")))
            for k, lam in rows:
                fh.write(_csv_line((f"{k:.6g}", f"{lam:.6g}")))
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {output_path}: {exc.strerror}") from None
    return rows


def config_as_dict(config):
    out = asdict(config)
    out["chain"]["chain_id"] = config.chain.chain_id
    return out
