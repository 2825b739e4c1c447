"""Fast invariant checks wired into the `astm selftest` command.

Each check returns (name, passed, detail) so the CLI can print one line per
check and the test suite can reuse the same functions.
"""

import numpy as np

from . import _kernels
from .analytics import hebb_pixel_error, hebb_pixel_error_quadrature
from .lattice import LatticeConfig, Movie, build_connectivity, random_movie
from .recording import minnorm_row, minnorm_row_bruteforce, \
    record_discrete_gd, record_hebb
from .tcam import match, store

Check = tuple[str, bool, str]


def check_connectivity_symmetry() -> Check:
    """Two-sided connectivity: j in nb(i) exactly when i in nb(j)."""
    for side in (3, 5, 7, 9):
        for window in range(3, side + 1, 2):
            conn = build_connectivity(LatticeConfig(side, window))
            nb = conn.neighbors
            n, m = nb.shape
            sets = [set(row.tolist()) for row in nb]
            for i in range(n):
                if len(sets[i]) != m or i in sets[i]:
                    return ("connectivity-symmetry", False,
                            f"bad neighbor set at L={side} m={window} i={i}")
                for j in sets[i]:
                    if i not in sets[j]:
                        return ("connectivity-symmetry", False,
                                f"asymmetric pair ({i},{j}) at L={side} "
                                f"m={window}")
    return ("connectivity-symmetry", True, "L in 3..9 exhaustive")


def check_hebb_integer_lattice() -> Check:
    """Correlation weights times Q are integers in [-Q, Q]."""
    cfg = LatticeConfig(5, 3)
    conn = build_connectivity(cfg)
    for q_count, seed in ((1, 11), (4, 12), (9, 13)):
        movie = random_movie(cfg.cell_count, q_count, 0.5, seed)
        weights, report = record_hebb(movie, conn)
        scaled = weights * q_count
        if not np.allclose(scaled, np.round(scaled), atol=1e-9):
            return ("hebb-integer-weights", False, f"Q={q_count}")
        if np.abs(weights).max() > 1.0 + 1e-12 or not report.converged:
            return ("hebb-integer-weights", False, f"range at Q={q_count}")
    return ("hebb-integer-weights", True, "Q in {1,4,9}")


def check_qp_oracle(instances: int = 10) -> Check:
    """Dual coordinate ascent equals brute-force min-norm on tiny systems."""
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < instances:
        m = int(rng.integers(3, 9))
        q = int(rng.integers(1, 5))
        a = np.where(rng.random((q, m)) < 0.5, 1.0, -1.0)
        y = np.where(rng.random(q) < 0.5, 1.0, -1.0)
        reference = minnorm_row_bruteforce(a, y)
        if reference is None:
            continue
        solved, _, violations = minnorm_row(a, y)
        gap = float(np.linalg.norm(solved - reference))
        if violations != 0 or gap > 1e-6:
            return ("qp-oracle-equivalence", False,
                    f"gap {gap:.2e} on M={m} Q={q}")
        checked += 1
    return ("qp-oracle-equivalence", True, f"{instances} tiny instances")


def check_dgd_margin() -> Check:
    """Converged discrete-GD weights satisfy every transition margin."""
    cfg = LatticeConfig(5, 3)
    conn = build_connectivity(cfg)
    for q_count, seed in ((2, 5), (4, 6), (6, 7)):
        movie = random_movie(cfg.cell_count, q_count, 0.5, seed)
        weights, report = record_discrete_gd(movie, conn)
        if not report.converged:
            return ("dgd-margin", False, f"recorder stalled at Q={q_count}")
        for q in range(q_count):
            h = _kernels.preact(weights, conn.neighbors, movie.frames[q])
            margin = movie.frames[(q + 1) % q_count] * h
            if not np.all(margin >= 1.0):
                return ("dgd-margin", False,
                        f"margin below D at Q={q_count} step {q}")
    return ("dgd-margin", True, "Q in {2,4,6}")


def check_pixel_error_quadrature() -> Check:
    """Closed-form pixel error equals its quadrature oracle to 1e-8."""
    for m in (50, 120, 440, 1000):
        for q in (5, 20, 100, 500):
            closed = hebb_pixel_error(m, q)
            quad = hebb_pixel_error_quadrature(m, q)
            if abs(closed - quad) > 1e-8 * max(closed, quad):
                return ("pixel-error-quadrature", False,
                        f"M={m} Q={q}: {closed!r} vs {quad!r}")
    return ("pixel-error-quadrature", True, "grid M 50..1000, Q 5..500")


def check_tcam_hamming() -> Check:
    """Ideal-device matching picks a minimum-Hamming row, ties to lowest."""
    rng = np.random.default_rng(99)
    for _ in range(25):
        q = int(rng.integers(2, 9))
        n = int(rng.integers(8, 40))
        frames = np.where(rng.random((q, n)) < 0.5, 1, -1).astype(np.int8)
        bank = store(Movie(frames=frames), g_on=1.0, g_off=0.0, sigma_g=0.0)
        probe = np.where(rng.random(n) < 0.5, 1, -1).astype(np.int8)
        idx, rates = match(bank, probe)
        dist = (frames != probe).sum(axis=1)
        if dist[idx] != dist.min() or idx != int(np.argmin(dist)):
            return ("tcam-hamming", False, f"wrong row at Q={q} N={n}")
        if not np.array_equal(rates, dist.astype(float)):
            return ("tcam-hamming", False, "rates differ from distances")
    return ("tcam-hamming", True, "25 random banks")


ALL_CHECKS = (
    check_connectivity_symmetry,
    check_hebb_integer_lattice,
    check_qp_oracle,
    check_dgd_margin,
    check_pixel_error_quadrature,
    check_tcam_hamming,
)


def run_selftest(report=print) -> bool:
    """Run every check, emit one line each; True when all pass."""
    ok = True
    for check in ALL_CHECKS:
        name, passed, detail = check()
        report(f"{'ok' if passed else 'FAIL'}  {name}  ({detail})")
        ok = ok and passed
    return ok
