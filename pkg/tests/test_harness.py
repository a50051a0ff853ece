import csv
import math
import random

import numpy as np
import pytest

from opaug.errors import ConfigError
from opaug.harness import (
    REPORT_COLUMNS,
    ExperimentConfig,
    Problem,
    append_report,
    config_as_dict,
    config_from_mapping,
    load_config,
    run_experiment,
    run_fig3_sweep,
    run_trial,
    summarize,
    trial_stream,
)
from opaug.markov import ChainSpec


def small_config(**kw):
    base = dict(chain=ChainSpec("drift1d", K=8), N=16, m=20, trials=40, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_flat_and_nested_agree(self):
        flat = config_from_mapping({"chain.family": "drift1d", "chain.params.l": 0.1, "noise.N": 8})
        nested = config_from_mapping({"chain": {"family": "drift1d", "params": {"l": 0.1}}, "noise": {"N": 8}})
        assert flat == nested
        assert flat.chain.params["l"] == 0.1 and flat.N == 8

    def test_load_yaml(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text(
            "chain.family: unif2d\nchain.K: 6\nreward.kind: sine2d\nnoise.N: 12\n"
            "bootstrap.m: 50\ntrials: 10\nestimator: mc\nthreshold: false\nseed: 9\n"
        )
        cfg = load_config(path)
        assert (cfg.chain.K, cfg.N, cfg.m, cfg.trials, cfg.estimator, cfg.threshold, cfg.seed) == (
            6,
            12,
            50,
            10,
            "mc",
            False,
            9,
        )

    def test_missing_file_names_path(self, tmp_path):
        with pytest.raises(ConfigError, match="nope.yaml"):
            load_config(tmp_path / "nope.yaml")

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_config(path)

    @pytest.mark.parametrize(
        "mapping",
        [
            {"chain.family": "drift1d", "colour": "red"},
            {"noise.N": 4},
            {"chain.family": "drift1d", "trials": 1},
            {"chain.family": "drift1d", "estimator": "exact"},
            {"chain.family": "drift1d", "threshold": "maybe"},
            {"chain.family": "drift1d", "seed": -1},
            {"chain.family": "drift1d", "noise.N": 0},
            {"chain.family": "drift1d", "reward.kind": "sine2d"},
            {"chain.family": "drift1d", "chain.gamma": 1.5},
        ],
    )
    def test_invalid(self, mapping):
        with pytest.raises(ConfigError):
            config_from_mapping(mapping)

    def test_as_dict(self):
        assert config_as_dict(small_config())["chain"]["chain_id"] == "drift1d_l0.25_r0.25_K8_g0.99"


class TestTrials:
    def test_stream_depends_only_on_seed_and_index(self):
        a = trial_stream(5, 7).standard_normal(3)
        b = trial_stream(5, 7).standard_normal(3)
        c = trial_stream(5, 8).standard_normal(3)
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_trial_is_reproducible(self):
        cfg = small_config()
        assert run_trial(cfg, 4) == run_trial(cfg, 4, Problem(cfg))

    def test_reward_norm_recorded(self):
        cfg = small_config(threshold=False)
        rec = run_trial(cfg, 0)
        assert math.isfinite(rec.beta_hat)
        assert rec.rhs_sq_norm == pytest.approx(float(np.sum(np.sin(4 * np.pi * np.arange(8) / 8) ** 2)))

    def test_zero_beta_leaves_naive_error(self):
        cfg = small_config()
        rec = run_trial(cfg, 1)
        assert rec.aug_sq_err >= 0 and rec.naive_sq_err >= 0
        if rec.beta_hat == 0.0:
            assert rec.aug_sq_err == rec.naive_sq_err


class TestExperiment:
    def test_worker_count_invariant(self):
        cfg = small_config(trials=12)
        one = run_experiment(cfg, workers=1)
        two = run_experiment(cfg, workers=2)
        assert one.report_row(False) == two.report_row(False)

    def test_summary_order_invariant(self):
        cfg = small_config(trials=30)
        res = run_experiment(cfg)
        shuffled = list(res.records)
        random.Random(0).shuffle(shuffled)
        other = summarize(shuffled, cfg)
        for name in ("naive_err_pct", "aug_err_pct", "naive_ci2", "aug_ci2", "mean_beta", "std_beta"):
            assert getattr(other, name) == pytest.approx(getattr(res, name), rel=1e-12)

    def test_zero_noise_surrogate(self):
        res = run_experiment(ExperimentConfig(ChainSpec("drift1d"), N=10**6, trials=20, m=20))
        assert res.naive_err_pct <= 0.5 and res.aug_err_pct <= 0.5

    def test_complete_chain_not_worse(self):
        res = run_experiment(ExperimentConfig(ChainSpec("complete1d"), N=64, trials=400, m=50))
        assert res.aug_err_pct <= res.naive_err_pct

    def test_unthresholded_beta_spread(self):
        res = run_experiment(small_config(threshold=False, trials=30))
        assert math.isfinite(res.mean_beta) and res.std_beta > 0

    def test_mc_estimator_and_isotropic_reward(self):
        res = run_experiment(small_config(estimator="mc", reward="isotropic", trials=300))
        assert res.aug_err_pct < res.naive_err_pct

    def test_isotropic_bootstrap_prior(self):
        res = run_experiment(small_config(prior="isotropic", trials=20))
        assert 0 < res.mean_beta < 1

    def test_percent_definition(self):
        res = run_experiment(small_config(trials=10))
        naive = [r.naive_sq_err for r in res.records]
        scale = res.records[0].rhs_sq_norm
        assert res.naive_err_pct == pytest.approx(100 * np.mean(naive) / scale, rel=1e-12)
        assert res.naive_ci2 == pytest.approx(200 * np.std(naive, ddof=1) / np.sqrt(10) / scale, rel=1e-12)


class TestReports:
    def test_append_writes_header_once(self, tmp_path):
        res = run_experiment(small_config(trials=4))
        path = tmp_path / "out.csv"
        append_report(res, path)
        append_report(res, path, wall_time=False)
        rows = list(csv.reader(path.open()))
        assert tuple(rows[0]) == REPORT_COLUMNS
        assert len(rows) == 3 and rows[1][:4] == ["drift1d_l0.25_r0.25_K8_g0.99", "16", "4", "taylor"]
        assert rows[2][-1] == "0"
        assert all(len(v.split("e")[0].replace(".", "").lstrip("-0")) <= 6 for v in rows[1][4:10])

    def test_unwritable_path(self, tmp_path):
        res = run_experiment(small_config(trials=2))
        bad = tmp_path / "missing_dir" / "out.csv"
        with pytest.raises(OSError, match="missing_dir"):
            append_report(res, bad)

    def test_fig3_sweep(self, tmp_path):
        path = tmp_path / "fig3.csv"
        run_fig3_sweep([0.0, 2.0, -5.0], path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["k", "min_eig"]
        assert float(rows[1][1]) == 0.0
        assert float(rows[2][1]) == pytest.approx(-0.136838, abs=1e-6)
        assert float(rows[3][1]) < 0
