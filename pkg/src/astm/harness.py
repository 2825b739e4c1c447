"""Monte Carlo experiment driver: corruption estimates, capacity, sweeps.

Every trial draws its randomness from a generator keyed by
(master_seed, *seed_path, trial_index), so results are bit-identical no
matter how trials are scheduled across worker threads.  Probability sweeps
always run their full trial budget; the capacity bisection may cut a probe
short once the corrupted-trial count already decides "above target", which
cannot change the decision and keeps the reported numbers prefix-exact.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._version import __version__
from .errors import ConfigError, UnsupportedMethodError
from .lattice import LatticeConfig, build_connectivity, flip_pixels, \
    random_movie
from .recording import AGD_EPS_STOP, AGD_ETA, AGD_MAX_EPOCHS, DGD_ETA, \
    DGD_MARGIN, DGD_MAX_EPOCHS, QP_MARGIN, QP_MAX_ITERS, QP_TOL, \
    record_analog_gd, record_discrete_gd, record_hebb, record_minnorm_qp
from .retrieval import CORRUPTED, perturb_weights, run

METHODS = ("hebb", "qp", "agd", "dgd")
CAPACITY_UPPER_FACTOR = 4  # search bracket [1, 4M]; every known Q_max < 2M
CSV_COLUMNS = ("experiment", "method", "L", "m", "N", "M", "Q", "d", "f",
               "r", "trials", "estimate", "stderr", "master_seed")


@dataclass
class ExperimentConfig:
    """One experiment operating point plus the method's iteration knobs.

    The iteration caps default to the full-scale values; desk-scale sweeps
    normally pass smaller caps, which bounds the cost of hopeless rows near
    and above capacity at the price of a slightly conservative capacity
    reading.
    """

    lattice: LatticeConfig
    method: str
    frames: int
    duty: float = 0.5
    flip_fraction: float = 0.0
    weight_noise: float = 0.0
    trials: int = 200
    master_seed: int = 0
    horizon: int | None = None
    threads: int = 1
    qp_margin: float = QP_MARGIN
    qp_max_iters: int = QP_MAX_ITERS
    qp_tol: float = QP_TOL
    agd_eta: float = AGD_ETA
    agd_max_epochs: int = AGD_MAX_EPOCHS
    agd_eps_stop: float = AGD_EPS_STOP
    dgd_eta: float = DGD_ETA
    dgd_margin: float = DGD_MARGIN
    dgd_max_epochs: int = DGD_MAX_EPOCHS
    seed_path: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.method not in METHODS:
            raise UnsupportedMethodError(
                f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if self.master_seed < 0:
            raise ConfigError("master_seed must be a nonnegative integer")
        if not 0.0 < self.duty < 1.0:
            raise ConfigError(f"duty must lie in (0, 1), got {self.duty}")
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise ConfigError(
                f"flip fraction must lie in [0, 1], got {self.flip_fraction}")
        if self.weight_noise < 0:
            raise ConfigError(
                f"weight noise must be >= 0, got {self.weight_noise}")
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    def trial_rng(self, trial: int) -> np.random.Generator:
        return np.random.default_rng(
            (self.master_seed, *self.seed_path, trial))


@dataclass(frozen=True)
class SweepRow:
    experiment: str
    method: str
    lattice: LatticeConfig
    frames: int
    duty: float
    flip_fraction: float
    weight_noise: float
    trials: int
    estimate: float
    stderr: float
    master_seed: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    manifest: dict

    def to_csv(self) -> str:
        lines = ["# " + " ".join(f"{k}={v}" for k, v in
                                 sorted(self.manifest.items()))]
        lines.append(",".join(CSV_COLUMNS))
        for row in self.rows:
            cfg = row.lattice
            lines.append(",".join((
                row.experiment, row.method, str(cfg.side), str(cfg.window),
                str(cfg.cell_count), str(cfg.connectivity), str(row.frames),
                f"{row.duty:.12g}", f"{row.flip_fraction:.12g}",
                f"{row.weight_noise:.12g}", str(row.trials),
                f"{row.estimate:.12g}", f"{row.stderr:.12g}",
                str(row.master_seed),
            )))
        return "\n".join(lines) + "\n"


def base_manifest(cfg: ExperimentConfig, experiment: str, **extra) -> dict:
    manifest = {"experiment": experiment, "method": cfg.method,
                "master_seed": cfg.master_seed, "version": __version__}
    manifest.update(extra)
    return manifest


def record_with(cfg: ExperimentConfig, movie, conn):
    if cfg.method == "hebb":
        return record_hebb(movie, conn)
    if cfg.method == "qp":
        return record_minnorm_qp(movie, conn, margin=cfg.qp_margin,
                                 max_iters=cfg.qp_max_iters, tol=cfg.qp_tol)
    if cfg.method == "agd":
        return record_analog_gd(movie, conn, eta=cfg.agd_eta,
                                max_epochs=cfg.agd_max_epochs,
                                eps_stop=cfg.agd_eps_stop)
    return record_discrete_gd(movie, conn, eta=cfg.dgd_eta,
                              d_margin=cfg.dgd_margin,
                              max_epochs=cfg.dgd_max_epochs)


def _corruption_trial(cfg: ExperimentConfig, conn, trial: int) -> bool:
    """Fresh movie, fresh recording, one noisy retrieval; True if corrupted."""
    rng = cfg.trial_rng(trial)
    movie = random_movie(cfg.lattice.cell_count, cfg.frames, cfg.duty, rng)
    weights, _ = record_with(cfg, movie, conn)
    if cfg.weight_noise > 0:
        weights = perturb_weights(weights, cfg.weight_noise, rng)
    probe = flip_pixels(movie.frames[0], cfg.flip_fraction, rng)
    trace = run(weights, conn, probe, movie, 0,
                cfg.horizon if cfg.horizon is not None else cfg.frames)
    return trace.status == CORRUPTED


def _map_trials(fn, n_trials: int, threads: int,
                stop_above: int | None = None):
    """Evaluate fn(t) for t = 0..n-1, optionally stopping early.

    With stop_above set, evaluation ends at the smallest prefix whose count
    of True outcomes exceeds stop_above; the stop point depends only on the
    outcome sequence, never on the worker layout.  Returns (outcomes list
    over the evaluated prefix, prefix length).
    """
    outcomes: list = []
    if threads <= 1:
        count = 0
        for t in range(n_trials):
            out = fn(t)
            outcomes.append(out)
            count += bool(out)
            if stop_above is not None and count > stop_above:
                return outcomes, t + 1
        return outcomes, n_trials
    with ThreadPoolExecutor(max_workers=threads) as pool:
        done = 0
        count = 0
        while done < n_trials:
            wave = range(done, min(done + threads, n_trials))
            for out in pool.map(fn, wave):
                outcomes.append(out)
                done += 1
                count += bool(out)
                if stop_above is not None and count > stop_above:
                    return outcomes, done
    return outcomes, n_trials


def corruption_prob(cfg: ExperimentConfig) -> tuple[float, float]:
    """Corrupted-retrieval fraction over independent movies, with its s.e.

    Each trial records a fresh random movie, optionally perturbs the weights,
    flips round(f*N) pixels of frame 1, and retrieves for one full cycle.
    """
    conn = build_connectivity(cfg.lattice)
    outcomes, n = _map_trials(lambda t: _corruption_trial(cfg, conn, t),
                              cfg.trials, cfg.threads)
    p_hat = sum(outcomes) / n
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / n)


def _equilibrium_trial(cfg: ExperimentConfig, conn, trial: int) -> float:
    rng = cfg.trial_rng(trial)
    movie = random_movie(cfg.lattice.cell_count, cfg.frames, cfg.duty, rng)
    weights, _ = record_hebb(movie, conn)
    trace = run(weights, conn, movie.frames[0], movie, 0, 2 * cfg.frames)
    tail = trace.wrong_counts[cfg.frames + 1:]
    return float(tail.mean()) / cfg.lattice.cell_count


def equilibrium_error(cfg: ExperimentConfig) -> tuple[float, float]:
    """Stationary wrong-pixel fraction of correlation-recorded retrieval.

    Runs the readout for 2Q steps from a clean frame and averages the wrong
    fraction over the last Q steps, so error feedback onto later frames is
    included in the estimate.  Only meaningful for the hebb method.
    """
    if cfg.method != "hebb":
        raise UnsupportedMethodError(
            f"equilibrium error is defined for hebb recording only, "
            f"got {cfg.method!r}")
    conn = build_connectivity(cfg.lattice)
    outcomes, n = _map_trials(lambda t: _equilibrium_trial(cfg, conn, t),
                              cfg.trials, cfg.threads)
    values = np.asarray(outcomes, dtype=np.float64)
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, stderr


@dataclass(frozen=True)
class CapacityProbe:
    frames: int
    trials_used: int
    estimate: float
    full_budget: bool


@dataclass(frozen=True)
class CapacityResult:
    q_max: int
    bracket: tuple[int, int]
    probes: tuple[CapacityProbe, ...]

    @property
    def q_lo(self) -> int:
        return self.bracket[0]

    @property
    def q_hi(self) -> int:
        return self.bracket[1]


def _probe(cfg: ExperimentConfig, frames: int, target_p: float,
           early_stop: bool) -> CapacityProbe:
    probe_cfg = replace(cfg, frames=frames,
                        seed_path=(*cfg.seed_path, frames))
    if cfg.method == "hebb":
        # fraction estimate, not a count; always runs the full budget
        p_hat, _ = equilibrium_error(probe_cfg)
        return CapacityProbe(frames=frames, trials_used=probe_cfg.trials,
                             estimate=p_hat, full_budget=True)
    conn = build_connectivity(probe_cfg.lattice)
    stop_above = int(math.floor(target_p * probe_cfg.trials)) \
        if early_stop else None
    outcomes, n = _map_trials(
        lambda t: _corruption_trial(probe_cfg, conn, t),
        probe_cfg.trials, probe_cfg.threads, stop_above=stop_above)
    return CapacityProbe(frames=frames, trials_used=n,
                         estimate=sum(outcomes) / n,
                         full_budget=(n == probe_cfg.trials))


def _probe_is_good(probe: CapacityProbe, target_p: float) -> bool:
    # an early-stopped probe has, by construction, already exceeded target
    return probe.full_budget and probe.estimate <= target_p


def capacity(cfg: ExperimentConfig, target_p: float = 0.01,
             resolution: int = 1,
             probe_log: list | None = None) -> CapacityResult:
    """Largest frame count whose failure estimate stays at or below target.

    Bisects Q over [1, 4M] assuming the failure probability is nondecreasing
    in Q, with a fixed trial budget per probe (hebb probes use the
    equilibrium error, everything else the corruption probability).  Returns
    the last good Q and the bracketing interval of width <= resolution.
    """
    if not 0.0 < target_p < 1.0:
        raise ConfigError(f"target_p must lie in (0, 1), got {target_p}")
    if resolution < 1:
        raise ConfigError(f"resolution must be >= 1, got {resolution}")
    probes: list[CapacityProbe] = []

    def decide(frames: int) -> bool:
        probe = _probe(cfg, frames, target_p, early_stop=True)
        probes.append(probe)
        if probe_log is not None:
            probe_log.append(probe)
        return _probe_is_good(probe, target_p)

    if not decide(1):
        raise ConfigError(
            f"bracket failure: estimate exceeds target {target_p} already "
            f"at Q = 1")
    lo = 1
    hi = CAPACITY_UPPER_FACTOR * cfg.lattice.connectivity
    if decide(hi):
        return CapacityResult(q_max=hi, bracket=(hi, hi),
                              probes=tuple(probes))
    while hi - lo > resolution:
        mid = (lo + hi) // 2
        if decide(mid):
            lo = mid
        else:
            hi = mid
    return CapacityResult(q_max=lo, bracket=(lo, hi), probes=tuple(probes))


def noise_sweep(cfg: ExperimentConfig, flip_values) -> SweepResult:
    """Corruption probability at each input flip fraction."""
    rows = []
    for k, f in enumerate(flip_values):
        point = replace(cfg, flip_fraction=float(f),
                        seed_path=(*cfg.seed_path, k))
        p_hat, stderr = corruption_prob(point)
        rows.append(SweepRow(
            experiment="sweep-noise", method=cfg.method, lattice=cfg.lattice,
            frames=cfg.frames, duty=cfg.duty, flip_fraction=float(f),
            weight_noise=cfg.weight_noise, trials=point.trials,
            estimate=p_hat, stderr=stderr, master_seed=cfg.master_seed))
    return SweepResult(rows=rows,
                       manifest=base_manifest(cfg, "sweep-noise",
                                              Q=cfg.frames,
                                              trials=cfg.trials))


def weight_noise_sweep(cfg: ExperimentConfig, noise_values) -> SweepResult:
    """Corruption probability at each relative weight-noise rms."""
    rows = []
    for k, r in enumerate(noise_values):
        point = replace(cfg, weight_noise=float(r),
                        seed_path=(*cfg.seed_path, k))
        p_hat, stderr = corruption_prob(point)
        rows.append(SweepRow(
            experiment="sweep-weight-noise", method=cfg.method,
            lattice=cfg.lattice, frames=cfg.frames, duty=cfg.duty,
            flip_fraction=cfg.flip_fraction, weight_noise=float(r),
            trials=point.trials, estimate=p_hat, stderr=stderr,
            master_seed=cfg.master_seed))
    return SweepResult(rows=rows,
                       manifest=base_manifest(cfg, "sweep-weight-noise",
                                              Q=cfg.frames,
                                              trials=cfg.trials))


def duty_law(q_max_half: float, duty: float) -> float:
    """Empirical capacity-vs-duty curve anchored at duty 1/2."""
    return q_max_half * math.sqrt(0.25 / (duty * (1.0 - duty)))


def duty_sweep(cfg: ExperimentConfig, duty_values, target_p: float = 0.01,
               resolution: int = 1) -> SweepResult:
    """Capacity at each duty cycle, next to the square-root reference law.

    Emits one measured row per duty (estimate = Q_max, stderr = half the
    bisection bracket) and one duty-law row predicting Q_max from the
    measured duty-0.5 value.
    """
    if cfg.method != "dgd":
        raise UnsupportedMethodError(
            f"the duty sweep is defined for dgd recording, got {cfg.method!r}")
    points = [float(d) for d in duty_values]
    if not all(0.0 < d < 1.0 for d in points):
        raise ConfigError("every duty value must lie in (0, 1)")
    ref_duty = 0.5
    work = list(points)
    if ref_duty not in work:
        work.append(ref_duty)
    results = {}
    for k, d in enumerate(work):
        sub = replace(cfg, duty=d, seed_path=(*cfg.seed_path, k))
        results[d] = capacity(sub, target_p=target_p, resolution=resolution)
    rows = []
    for d in points:
        res = results[d]
        rows.append(SweepRow(
            experiment="sweep-duty", method=cfg.method, lattice=cfg.lattice,
            frames=res.q_max, duty=d, flip_fraction=cfg.flip_fraction,
            weight_noise=cfg.weight_noise, trials=cfg.trials,
            estimate=float(res.q_max),
            stderr=(res.q_hi - res.q_lo) / 2.0,
            master_seed=cfg.master_seed))
    for d in points:
        predicted = duty_law(float(results[ref_duty].q_max), d)
        rows.append(SweepRow(
            experiment="duty-law", method=cfg.method, lattice=cfg.lattice,
            frames=results[ref_duty].q_max, duty=d,
            flip_fraction=cfg.flip_fraction, weight_noise=cfg.weight_noise,
            trials=cfg.trials, estimate=predicted, stderr=0.0,
            master_seed=cfg.master_seed))
    return SweepResult(rows=rows,
                       manifest=base_manifest(
                           cfg, "sweep-duty", target_p=target_p,
                           q_max_half=results[ref_duty].q_max))


def repeated_noise_run(cfg: ExperimentConfig, attempts: int) -> list:
    """Fast mode: one recording, many independent noisy retrieval attempts.

    Records a single movie (trial stream 0) and replays retrieval under
    `attempts` fresh noise draws, the protocol behind repeated-noise trace
    figures.  Returns the list of traces.
    """
    conn = build_connectivity(cfg.lattice)
    rng = cfg.trial_rng(0)
    movie = random_movie(cfg.lattice.cell_count, cfg.frames, cfg.duty, rng)
    weights, _ = record_with(cfg, movie, conn)
    traces = []
    for k in range(attempts):
        attempt_rng = np.random.default_rng(
            (cfg.master_seed, *cfg.seed_path, 1, k))
        attempt_weights = weights
        if cfg.weight_noise > 0:
            attempt_weights = perturb_weights(weights, cfg.weight_noise,
                                              attempt_rng)
        probe = flip_pixels(movie.frames[0], cfg.flip_fraction, attempt_rng)
        traces.append(run(attempt_weights, conn, probe, movie, 0,
                          cfg.horizon if cfg.horizon is not None
                          else cfg.frames))
    return traces
