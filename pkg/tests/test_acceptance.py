"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s`.  The capacity-based
criteria share session-scoped fixtures; expect several hours of single-core
compute for the full set.  Criterion 3 is a full-scale long run, gated
behind ASTM_FULL_SCALE=1.

Iteration budgets for the desk-scale capacity experiments (picked once,
then frozen): discrete GD 1000 epochs, analog GD 600 epochs at the
connectivity-matched rate 0.44/M, QP 2000 constraint passes at tolerance
1e-6.  The full-scale defaults stay at their paper-scale values.
"""

import math
import os
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from astm import (CORRUPTED, RECOVERED, ExperimentConfig, LatticeConfig,
                  Movie, build_connectivity, capacity, corruption_prob,
                  crossnet_capacity, equilibrium_error, hebb_pixel_error,
                  hebb_pixel_error_asymptotic, random_movie,
                  record_discrete_gd, record_minnorm_qp, retrieval_error_mc,
                  run, tcam_capacity, tcam_confusion_prob,
                  tcam_confusion_prob_exact)
from astm.analytics import hebb_pixel_error_quadrature
from astm.recording import minnorm_row, minnorm_row_bruteforce
from astm import _kernels

SEED = 20260810
LATTICE_120 = LatticeConfig(51, 11)  # N = 2601, M = 120
M = LATTICE_120.connectivity

DGD_BUDGET = dict(dgd_max_epochs=1000)
AGD_BUDGET = dict(agd_eta=0.44 / M, agd_max_epochs=600)
QP_BUDGET = dict(qp_max_iters=2000, qp_tol=1e-6)


def verdict(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line, flush=True)
    return ok


def _capacity_for(method, extra, resolution, duty=0.5):
    cfg = ExperimentConfig(lattice=LATTICE_120, method=method, frames=1,
                           duty=duty, trials=200, master_seed=SEED,
                           **extra)
    t0 = time.time()
    result = capacity(cfg, target_p=0.01, resolution=resolution)
    print(f"[capacity {method} d={duty}] Q_max={result.q_max} "
          f"bracket={result.bracket} ({time.time() - t0:.0f}s, "
          f"{len(result.probes)} probes)", flush=True)
    return result


@pytest.fixture(scope="session")
def hebb_capacity():
    return _capacity_for("hebb", {}, resolution=1)


@pytest.fixture(scope="session")
def agd_capacity():
    return _capacity_for("agd", AGD_BUDGET, resolution=8)


@pytest.fixture(scope="session")
def dgd_capacity():
    return _capacity_for("dgd", DGD_BUDGET, resolution=6)


@pytest.fixture(scope="session")
def qp_capacity():
    return _capacity_for("qp", QP_BUDGET, resolution=8)


def _exact_one_step_error(m, q):
    """Independent-crosstalk discrete tail: diagnostic for criterion 1."""
    t = m * (q - 1)
    if t == 0:
        return 0.0
    log_half_t = t * math.log(0.5)

    def tail_le(k_max):
        if k_max < 0:
            return 0.0
        total = 0.0
        for k in range(k_max + 1):
            total += math.exp(math.lgamma(t + 1) - math.lgamma(k + 1)
                              - math.lgamma(t - k + 1) + log_half_t)
        return total

    k_hi = (t - m) // 2
    return 0.5 * (tail_le(k_hi - 1) + tail_le(k_hi))


class TestCriterion1:
    def test_hebb_equilibrium_matches_closed_form(self):
        """Equilibrium pixel error vs 0.5*erfc(sqrt(M/2Q)) at three loads."""
        results = []
        for q in (12, 17, 22):
            cfg = ExperimentConfig(lattice=LATTICE_120, method="hebb",
                                   frames=q, trials=50, master_seed=SEED + 1,
                                   seed_path=(q,))
            p_hat, se = equilibrium_error(cfg)
            formula = hebb_pixel_error(M, q)
            ok = abs(p_hat - formula) <= 3 * se
            results.append(ok)
            print(f"  Q={q}: simulated {p_hat:.3e} (se {se:.1e}), "
                  f"closed form {formula:.3e}, "
                  f"discrete-tail reference {_exact_one_step_error(M, q):.3e}"
                  f" -> {'ok' if ok else 'OUT OF BAND'}", flush=True)
        ok = all(results)
        verdict(1, ok, "hebb equilibrium vs closed form at Q/M=0.10/0.14/0.18"
                       " (3 s.e., 50 movies each)")
        assert ok

class TestCriterion2:
    def test_capacity_ordering_and_bands(self, hebb_capacity, agd_capacity,
                                         dgd_capacity, qp_capacity):
        loads = {name: res.q_max / M for name, res in
                 (("hebb", hebb_capacity), ("agd", agd_capacity),
                  ("dgd", dgd_capacity), ("qp", qp_capacity))}
        bands = {"hebb": (0.12, 0.25), "agd": (0.7, 1.2),
                 "dgd": (1.3, 1.9), "qp": (1.4, 2.0)}
        in_band = {name: bands[name][0] <= loads[name] <= bands[name][1]
                   for name in bands}
        ordered = (hebb_capacity.q_max < agd_capacity.q_max
                   < dgd_capacity.q_max <= qp_capacity.q_max)
        detail = ", ".join(f"{name} {loads[name]:.3f}M"
                           f"{'' if in_band[name] else '!'}"
                           for name in ("hebb", "agd", "dgd", "qp"))
        ok = ordered and all(in_band.values())
        verdict(2, ok, f"ordering {'ok' if ordered else 'VIOLATED'}; "
                       f"loads: {detail}")
        assert ok


class TestCriterion3:
    @pytest.mark.skipif(os.environ.get("ASTM_FULL_SCALE") != "1",
                        reason="full-scale spot check is flag-gated: set "
                               "ASTM_FULL_SCALE=1 (very long single-core run)")
    def test_full_scale_dgd_capacity(self):
        cfg = ExperimentConfig(lattice=LatticeConfig(101, 21), method="dgd",
                               frames=1, trials=200, master_seed=SEED + 3,
                               dgd_max_epochs=5000)
        result = capacity(cfg, target_p=0.01, resolution=20)
        load = result.q_max / 440
        ok = 1.55 <= load <= 1.80
        verdict(3, ok, f"full-scale dgd capacity {load:.3f}M "
                       f"(bracket {result.bracket})")
        assert ok


class TestCriterion4:
    def test_dgd_margin_theorem(self):
        """Converged recordings satisfy every margin exactly, no tolerance."""
        shapes = [(5, 3), (7, 5), (9, 7), (13, 9), (15, 11)]
        rng = np.random.default_rng(SEED + 4)
        converged = 0
        attempts = 0
        clean = True
        while converged < 100:
            attempts += 1
            side, window = shapes[int(rng.integers(len(shapes)))]
            cfg = LatticeConfig(side, window)
            conn = build_connectivity(cfg)
            m = cfg.connectivity
            q = int(rng.integers(1, max(2, int(0.8 * m)) + 1))
            movie = random_movie(cfg.cell_count, q, 0.5,
                                 rng.integers(1 << 60))
            weights, report = record_discrete_gd(movie, conn,
                                                 max_epochs=50_000)
            if not report.converged:
                continue
            converged += 1
            for step_q in range(q):
                h = _kernels.preact(weights, conn.neighbors,
                                    movie.frames[step_q])
                margin = movie.frames[(step_q + 1) % q] * h
                if not np.all(margin >= 1.0):
                    clean = False
        verdict(4, clean, f"margins >= D exact on 100/{attempts} converged "
                          f"random instances")
        assert clean


class TestCriterion5:
    def test_qp_oracle_equivalence_and_exact_retrieval(self):
        rng = np.random.default_rng(SEED + 5)
        checked = 0
        worst_gap = 0.0
        while checked < 50:
            m = int(rng.integers(2, 9))
            q = int(rng.integers(1, 5))
            a = np.where(rng.random((q, m)) < 0.5, 1.0, -1.0)
            y = np.where(rng.random(q) < 0.5, 1.0, -1.0)
            reference = minnorm_row_bruteforce(a, y)
            if reference is None:
                continue
            solved, _, violations = minnorm_row(a, y, max_iters=20_000)
            assert violations == 0
            worst_gap = max(worst_gap,
                            float(np.linalg.norm(solved - reference)))
            checked += 1
        oracle_ok = worst_gap <= 1e-6

        # feasible lattice recordings replay their movies exactly
        cfg = LatticeConfig(5, 3)
        conn = build_connectivity(cfg)
        retrieval_ok = True
        feasible = 0
        for seed in range(40):
            q = 1 + seed % 4
            movie = random_movie(cfg.cell_count, q, 0.5, (SEED + 6, seed))
            weights, report = record_minnorm_qp(movie, conn)
            if not report.converged:
                continue
            feasible += 1
            for start in range(q):
                trace = run(weights, conn, movie.frames[start], movie, start)
                if trace.status != RECOVERED or trace.wrong_counts.any():
                    retrieval_ok = False
        ok = oracle_ok and retrieval_ok and feasible >= 25
        verdict(5, ok, f"oracle gap {worst_gap:.2e} over 50 tiny instances; "
                       f"exact retrieval on {feasible} feasible recordings")
        assert ok


class TestCriterion6:
    def test_tcam_error_formula_validation(self):
        trials = 100_000
        ok = True
        details = []
        for f in (0.125, 0.25, 0.375):
            p_mc, se = retrieval_error_mc(64, 2, f, trials, SEED + 7)
            p_exact = tcam_confusion_prob_exact(64, f)
            band = 3 * max(se, math.sqrt(p_exact * (1 - p_exact) / trials))
            point_ok = abs(p_mc - p_exact) <= band
            ok = ok and point_ok
            details.append(f"f={f}: |{p_mc:.2e}-{p_exact:.2e}|"
                           f"{'<=' if point_ok else '>'}3se")
        f_large = 460 / 1024
        p_mc, se = retrieval_error_mc(1024, 2, f_large, trials, SEED + 8)
        p_gauss = tcam_confusion_prob(1024, f_large)
        band = 3 * max(se, math.sqrt(p_gauss * (1 - p_gauss) / trials))
        large_ok = abs(p_mc - p_gauss) <= band
        ok = ok and large_ok
        details.append(f"N=1024: |{p_mc:.2e}-{p_gauss:.2e}|"
                       f"{'<=' if large_ok else '>'}3se")
        verdict(6, ok, "; ".join(details))
        assert ok


class TestCriterion7:
    def test_duty_cycle_law(self, dgd_capacity):
        q_half = dgd_capacity.q_max
        results = {}
        for k, duty in enumerate((0.3, 0.7)):
            cfg = ExperimentConfig(lattice=LATTICE_120, method="dgd",
                                   frames=1, duty=duty, trials=200,
                                   master_seed=SEED, seed_path=(70 + k,),
                                   **DGD_BUDGET)
            results[duty] = capacity(cfg, target_p=0.01, resolution=6)
            print(f"[capacity dgd d={duty}] Q_max={results[duty].q_max} "
                  f"bracket={results[duty].bracket}", flush=True)
        ok = True
        details = []
        for duty in (0.3, 0.7):
            predicted = math.sqrt(0.25 / (duty * (1 - duty)))
            measured = results[duty].q_max / q_half
            point_ok = abs(measured / predicted - 1.0) <= 0.20
            ok = ok and point_ok
            details.append(f"d={duty}: ratio {measured:.3f} vs law "
                           f"{predicted:.3f}{'' if point_ok else ' OUT'}")
        # symmetry within combined brackets, widened by one bracket width
        # on each side for the Monte Carlo wobble of the probe decisions
        lo3, hi3 = results[0.3].bracket
        lo7, hi7 = results[0.7].bracket
        w3, w7 = hi3 - lo3, hi7 - lo7
        symmetric = max(lo3 - w3, lo7 - w7) <= min(hi3 + w3, hi7 + w7)
        ok = ok and symmetric
        details.append(f"symmetry {'ok' if symmetric else 'VIOLATED'} "
                       f"({results[0.3].bracket} vs {results[0.7].bracket})")
        verdict(7, ok, "; ".join(details))
        assert ok


def _crossing_level(base, axis, lo, hi, probes=7, trials=100, salt=0):
    """Noise level where the corruption probability crosses one half."""
    def p_at(x, k):
        cfg = replace(base, trials=trials,
                      seed_path=(*base.seed_path, salt, k), **{axis: x})
        return corruption_prob(cfg)[0]

    if p_at(lo, 0) >= 0.5:
        return lo
    if p_at(hi, 1) < 0.5:
        return hi
    for k in range(probes):
        mid = math.sqrt(lo * hi)
        if p_at(mid, 2 + k) >= 0.5:
            hi = mid
        else:
            lo = mid
    return math.sqrt(lo * hi)


def _operating_cfg(method, frames, extra, salt):
    return ExperimentConfig(lattice=LATTICE_120, method=method,
                            frames=frames, trials=100, master_seed=SEED,
                            seed_path=(salt,), **extra)


class TestCriterion8:
    def test_input_noise_collapse(self, dgd_capacity, qp_capacity):
        n = LATTICE_120.cell_count
        ok = True
        details = []
        for method, cap, extra, salt in (
                ("qp", qp_capacity.q_max, QP_BUDGET, 80),
                ("dgd", dgd_capacity.q_max, DGD_BUDGET, 84)):
            f_quarter = _crossing_level(
                _operating_cfg(method, round(0.25 * cap), extra, salt),
                "flip_fraction", 2.0 / n, 0.5)
            f_half = _crossing_level(
                _operating_cfg(method, round(0.5 * cap), extra, salt + 1),
                "flip_fraction", 2.0 / n, 0.5)
            ratio = f_quarter / f_half
            point_ok = ratio >= 5.0
            ok = ok and point_ok
            details.append(f"{method}: f50({0.25:.2f}Qm)={f_quarter:.4f}, "
                           f"f50(0.5Qm)={f_half:.4f}, ratio {ratio:.1f}"
                           f"{'' if point_ok else ' <5'}")
        verdict(8, ok, "; ".join(details))
        assert ok


class TestCriterion9:
    def test_weight_noise_tolerance_ratio(self, dgd_capacity, qp_capacity):
        ok = True
        details = []
        for method, cap, extra, salt in (
                ("qp", qp_capacity.q_max, QP_BUDGET, 90),
                ("dgd", dgd_capacity.q_max, DGD_BUDGET, 94)):
            r_quarter = _crossing_level(
                _operating_cfg(method, round(0.25 * cap), extra, salt),
                "weight_noise", 0.02, 2.0)
            r_half = _crossing_level(
                _operating_cfg(method, round(0.5 * cap), extra, salt + 1),
                "weight_noise", 0.02, 2.0)
            ratio = r_quarter / r_half
            point_ok = 1.5 <= ratio <= 3.0
            ok = ok and point_ok
            details.append(f"{method}: r50(0.25Qm)={r_quarter:.3f}, "
                           f"r50(0.5Qm)={r_half:.3f}, ratio {ratio:.2f}"
                           f"{'' if point_ok else ' OUT'}")
        verdict(9, ok, "; ".join(details))
        assert ok


class TestCriterion10:
    def test_cli_byte_determinism(self, tmp_path):
        outputs = []
        for name, threads in (("a", "1"), ("b", "3"), ("c", "1")):
            out = tmp_path / f"{name}.csv"
            proc = subprocess.run(
                [sys.executable, "-m", "astm.cli", "sweep-noise",
                 "--method", "dgd", "--side", "9", "--window", "5",
                 "--frames", "4", "--flip-values", "0.0,0.1,0.3",
                 "--trials", "30", "--seed", "77", "--threads", threads,
                 "--out", str(out)], capture_output=True)
            assert proc.returncode == 0, proc.stderr
            outputs.append(out.read_bytes())
        ok = outputs[0] == outputs[1] == outputs[2]
        verdict(10, ok, "sweep CSV bytes identical across reruns and "
                        "--threads 1/3")
        assert ok


class TestCriterion11:
    def test_analytic_self_consistency(self):
        quad_ok = True
        for m in (50, 120, 440, 1000):
            for q in (5, 20, 80, 200, 500):
                closed = hebb_pixel_error(m, q)
                quad = hebb_pixel_error_quadrature(m, q)
                if abs(closed - quad) > 1e-8 * max(closed, quad):
                    quad_ok = False
        ratio_ok = True
        for m in (100, 440, 1000):
            for q in range(2, m // 10 + 1, max(1, m // 60)):
                ratio = hebb_pixel_error_asymptotic(m, q) \
                    / hebb_pixel_error(m, q)
                if abs(ratio - 1.0) > 0.10:
                    ratio_ok = False
        exact_ok = all(
            crossnet_capacity(n_dev, n_pix)
            == 2.0 * tcam_capacity(n_dev, n_pix)
            for n_dev, n_pix in ((8, 2), (97, 13), (2 * 440 * 10_201,
                                                    10_201)))
        ok = quad_ok and ratio_ok and exact_ok
        verdict(11, ok, f"quadrature<=1e-8: {quad_ok}; asymptotic ratio "
                        f"within 10% for Q<=M/10: {ratio_ok}; capacity "
                        f"ratio exactly 2: {exact_ok}")
        assert ok
