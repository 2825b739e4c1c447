"""Experiment driver tests: determinism, estimators, capacity machinery."""

import math
from dataclasses import replace

import numpy as np
import pytest

from astm import (ConfigError, ExperimentConfig, LatticeConfig,
                  UnsupportedMethodError, capacity, corruption_prob,
                  duty_sweep, equilibrium_error, hebb_pixel_error,
                  noise_sweep, repeated_noise_run, weight_noise_sweep)
from astm.harness import CapacityProbe, _map_trials, duty_law


def tiny_cfg(**kw):
    # M = 24 keeps accidental window collisions (and with them genuinely
    # contradictory movies) out of the clean-retrieval regime
    base = dict(lattice=LatticeConfig(7, 5), method="dgd", frames=3,
                trials=20, master_seed=7, dgd_max_epochs=4000)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_rejects_bad_values(self):
        with pytest.raises(UnsupportedMethodError):
            tiny_cfg(method="nope")
        with pytest.raises(ConfigError):
            tiny_cfg(trials=0)
        with pytest.raises(ConfigError):
            tiny_cfg(duty=1.0)
        with pytest.raises(ConfigError):
            tiny_cfg(flip_fraction=1.5)
        with pytest.raises(ConfigError):
            tiny_cfg(master_seed=-1)


class TestMapTrials:
    def test_early_stop_is_prefix_exact(self):
        hits = [False, True, False, True, True, False, True, False]

        def fn(t):
            return hits[t]

        for threads in (1, 3, 5):
            outcomes, n = _map_trials(fn, len(hits), threads, stop_above=2)
            # third True sits at index 4: prefix length must be 5 always
            assert n == 5
            assert sum(outcomes[:n]) == 3

    def test_no_stop_runs_everything(self):
        outcomes, n = _map_trials(lambda t: t % 3 == 0, 10, 2)
        assert n == 10 and sum(outcomes) == 4


class TestCorruptionProb:
    def test_zero_far_below_capacity(self):
        p, se = corruption_prob(tiny_cfg())
        assert p == 0.0 and se == 0.0

    def test_thread_count_invariance(self):
        cfg1 = tiny_cfg(flip_fraction=0.3, trials=30, threads=1)
        cfg4 = tiny_cfg(flip_fraction=0.3, trials=30, threads=4)
        assert corruption_prob(cfg1) == corruption_prob(cfg4)

    def test_reproducible(self):
        cfg = tiny_cfg(flip_fraction=0.4, trials=40)
        a = corruption_prob(cfg)
        b = corruption_prob(tiny_cfg(flip_fraction=0.4, trials=40))
        assert a == b

    def test_master_seed_changes_trial_stream(self):
        # continuous-valued estimator: distinct seeds collide with
        # probability ~0
        base = dict(lattice=LatticeConfig(31, 11), method="hebb", frames=22,
                    trials=4)
        a = equilibrium_error(ExperimentConfig(master_seed=5, **base))
        b = equilibrium_error(ExperimentConfig(master_seed=6, **base))
        assert a != b

    def test_stderr_matches_binomial_formula(self):
        cfg = tiny_cfg(flip_fraction=0.45, trials=50)
        p, se = corruption_prob(cfg)
        assert se == pytest.approx(math.sqrt(p * (1 - p) / 50))


class TestEquilibriumError:
    def test_requires_hebb(self):
        with pytest.raises(UnsupportedMethodError):
            equilibrium_error(tiny_cfg(method="qp"))

    def test_single_frame_movie_is_fixed_point(self):
        cfg = ExperimentConfig(lattice=LatticeConfig(7, 3), method="hebb",
                               frames=1, trials=10, master_seed=1)
        p, se = equilibrium_error(cfg)
        assert p == 0.0

    def test_matches_formula_near_one_percent(self):
        # the closed form replaces the true crosstalk variance M(Q-1) by MQ,
        # which costs ~M/(2Q(Q-1)) in the exponent; at the 1% operating
        # point that residual is ~5%, allowed for explicitly on top of the
        # Monte Carlo band
        cfg = ExperimentConfig(lattice=LatticeConfig(31, 11), method="hebb",
                               frames=22, trials=40, master_seed=3)
        p, se = equilibrium_error(cfg)
        expected = hebb_pixel_error(120, 22)
        assert abs(p - expected) <= 3 * se + 0.06 * expected

    def test_independent_of_lattice_size_at_fixed_connectivity(self):
        q = 12
        p_small, se_small = equilibrium_error(ExperimentConfig(
            lattice=LatticeConfig(51, 11), method="hebb", frames=q,
            trials=25, master_seed=5))
        p_large, se_large = equilibrium_error(ExperimentConfig(
            lattice=LatticeConfig(101, 11), method="hebb", frames=q,
            trials=25, master_seed=6))
        combined = math.sqrt(se_small ** 2 + se_large ** 2)
        assert abs(p_small - p_large) <= 3 * max(combined, 2e-5)

    def test_monotone_in_frames(self):
        cfg = lambda q: ExperimentConfig(lattice=LatticeConfig(31, 11),
                                         method="hebb", frames=q, trials=25,
                                         master_seed=9)
        estimates = [equilibrium_error(cfg(q)) for q in (12, 22, 40)]
        for (p_lo, se_lo), (p_hi, se_hi) in zip(estimates, estimates[1:]):
            slack = 2 * math.sqrt(se_lo ** 2 + se_hi ** 2)
            assert p_hi >= p_lo - slack


class TestCapacity:
    def test_hebb_capacity_tiny_lattice(self):
        # M = 8: the formula puts the 1% point between Q = 1 and Q = 2
        cfg = ExperimentConfig(lattice=LatticeConfig(5, 3), method="hebb",
                               frames=1, trials=30, master_seed=11)
        result = capacity(cfg, target_p=0.01)
        assert result.q_max in (1, 2)
        assert result.q_hi - result.q_lo <= 1
        assert result.q_lo == result.q_max

    def test_probe_log_records_bisection(self):
        cfg = ExperimentConfig(lattice=LatticeConfig(5, 3), method="hebb",
                               frames=1, trials=20, master_seed=12)
        log: list[CapacityProbe] = []
        capacity(cfg, target_p=0.01, probe_log=log)
        assert log[0].frames == 1
        assert log[1].frames == 32  # upper bracket 4M
        assert all(p.trials_used <= 20 for p in log)

    def test_bracket_failure_raises(self):
        # heavy input noise corrupts even single-frame retrieval, so no
        # Q satisfies an extreme fidelity target
        cfg = tiny_cfg(flip_fraction=0.45, trials=20, master_seed=13)
        with pytest.raises(ConfigError):
            capacity(cfg, target_p=1e-4)

    def test_dgd_capacity_tiny_lattice_deterministic(self):
        cfg = ExperimentConfig(lattice=LatticeConfig(7, 5), method="dgd",
                               frames=1, trials=12, master_seed=14,
                               dgd_max_epochs=2000, threads=1)
        a = capacity(cfg, target_p=0.05, resolution=2)
        b = capacity(replace(cfg, threads=3), target_p=0.05, resolution=2)
        assert a.q_max == b.q_max and a.bracket == b.bracket
        assert 0.5 * 24 <= a.q_max <= 2.5 * 24  # sane range around ~1.5M


class TestSweeps:
    def test_noise_sweep_rows_and_monotonicity(self):
        cfg = tiny_cfg(trials=30)
        result = noise_sweep(cfg, [0.0, 0.2, 0.45])
        assert [row.flip_fraction for row in result.rows] == [0.0, 0.2, 0.45]
        assert result.rows[0].estimate == 0.0
        ps = [row.estimate for row in result.rows]
        ses = [row.stderr for row in result.rows]
        for k in range(len(ps) - 1):
            slack = 2 * math.sqrt(ses[k] ** 2 + ses[k + 1] ** 2)
            assert ps[k + 1] >= ps[k] - slack

    def test_weight_noise_sweep_monotonicity(self):
        cfg = tiny_cfg(method="qp", trials=30)
        result = weight_noise_sweep(cfg, [0.0, 0.6, 2.0])
        ps = [row.estimate for row in result.rows]
        assert ps[0] == 0.0
        ses = [row.stderr for row in result.rows]
        for k in range(len(ps) - 1):
            slack = 2 * math.sqrt(ses[k] ** 2 + ses[k + 1] ** 2)
            assert ps[k + 1] >= ps[k] - slack

    def test_csv_shape_and_determinism(self):
        cfg = tiny_cfg(trials=15)
        text1 = noise_sweep(cfg, [0.0, 0.3]).to_csv()
        text2 = noise_sweep(tiny_cfg(trials=15), [0.0, 0.3]).to_csv()
        assert text1 == text2
        lines = text1.splitlines()
        assert lines[0].startswith("# ")
        assert lines[1] == ("experiment,method,L,m,N,M,Q,d,f,r,trials,"
                            "estimate,stderr,master_seed")
        assert len(lines) == 4

    def test_duty_sweep_requires_dgd(self):
        with pytest.raises(UnsupportedMethodError):
            duty_sweep(tiny_cfg(method="hebb"), [0.4])

    def test_duty_law_shape(self):
        assert duty_law(100.0, 0.5) == pytest.approx(100.0)
        assert duty_law(100.0, 0.3) == pytest.approx(
            100.0 * math.sqrt(0.25 / 0.21))
        assert duty_law(100.0, 0.3) == pytest.approx(duty_law(100.0, 0.7))

    def test_duty_sweep_emits_measured_and_reference_rows(self):
        cfg = tiny_cfg(trials=10, dgd_max_epochs=1500)
        result = duty_sweep(cfg, [0.5], target_p=0.05, resolution=4)
        kinds = [row.experiment for row in result.rows]
        assert kinds == ["sweep-duty", "duty-law"]
        measured, reference = result.rows
        # at the anchor duty the reference equals the measured capacity
        assert reference.estimate == pytest.approx(float(measured.estimate))
        assert result.manifest["q_max_half"] == measured.frames
        assert measured.estimate >= 1.0


class TestRepeatedNoiseRun:
    def test_one_recording_many_attempts(self):
        cfg = tiny_cfg(flip_fraction=0.25, trials=1)
        traces = repeated_noise_run(cfg, attempts=6)
        assert len(traces) == 6
        # same recording, different noise: traces may differ, reruns do not
        again = repeated_noise_run(tiny_cfg(flip_fraction=0.25, trials=1),
                                   attempts=6)
        for a, b in zip(traces, again):
            assert np.array_equal(a.wrong_counts, b.wrong_counts)
            assert a.status == b.status
