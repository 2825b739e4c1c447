"""Ternary CAM baseline: row storage, discharge-rate matching, error MC.

Each stored bit occupies a complementary pair of binary-state devices, so a
bank of Q frames of N pixels uses 2*N*Q devices.  Matching feeds a probe to
all rows at once; a row discharges at a rate set by the summed conductances
of its mismatching-pair devices, and the slowest row wins.  The discharge
transient itself is collapsed to that rate comparison.
"""

from dataclasses import dataclass

import numpy as np

from .analytics import tcam_confusion_prob
from .errors import DimensionError
from .lattice import Movie

V0 = 1.0
NOISE_CLIP_SIGMAS = 4.0
_MC_CHUNK = 4096


@dataclass(frozen=True)
class TcamBank:
    """Stored rows plus the conductance model of the underlying devices."""

    rows: np.ndarray  # (Q, N) int8 bipolar
    g_on: float
    g_off: float
    sigma_g: float

    @property
    def frame_count(self) -> int:
        return self.rows.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.rows.shape[1]

    @property
    def memristor_count(self) -> int:
        return 2 * self.rows.shape[0] * self.rows.shape[1]


def store(movie: Movie, g_on: float = 1.0, g_off: float = 0.0,
          sigma_g: float = 0.0) -> TcamBank:
    """Load a movie's frames into bank rows, one frame per row."""
    if movie.frame_count < 1:
        raise DimensionError("cannot store an empty movie")
    if not g_on > g_off >= 0:
        raise ValueError(f"need g_on > g_off >= 0, got {g_on}, {g_off}")
    if sigma_g < 0:
        raise ValueError(f"sigma_g must be >= 0, got {sigma_g}")
    return TcamBank(rows=movie.frames.copy(), g_on=g_on, g_off=g_off,
                    sigma_g=sigma_g)


def match(bank: TcamBank, probe: np.ndarray, seed=None,
          clamp: dict[str, tuple[float, float]] | None = None,
          ) -> tuple[int, np.ndarray]:
    """Pick the stored row with the slowest discharge for this probe.

    Every cell contributes one conductance draw: g_off*(1 + sigma*xi) where
    the cell matches the probe, g_on*(1 + sigma*xi) where it does not, with
    xi standard normal.  Draws are clamped per state, by default at +-4
    sigma around the nominal value; `clamp` overrides the (low, high) bounds
    for states "off" and "on".  Ties go to the lowest row index.  With
    sigma_g = 0 and g_off = 0 this is exact minimum-Hamming matching.
    """
    probe = np.asarray(probe, dtype=np.int8)
    if probe.shape != (bank.pixel_count,):
        raise DimensionError(
            f"probe has shape {probe.shape}, bank rows have "
            f"{bank.pixel_count} pixels"
        )
    mismatch = bank.rows != probe
    nominal = np.where(mismatch, bank.g_on, bank.g_off)
    if bank.sigma_g > 0:
        rng = np.random.default_rng(seed)
        draws = nominal * (1.0 + bank.sigma_g *
                           rng.standard_normal(bank.rows.shape))
        if clamp is None:
            clamp = {
                "off": (bank.g_off * (1 - NOISE_CLIP_SIGMAS * bank.sigma_g),
                        bank.g_off * (1 + NOISE_CLIP_SIGMAS * bank.sigma_g)),
                "on": (bank.g_on * (1 - NOISE_CLIP_SIGMAS * bank.sigma_g),
                       bank.g_on * (1 + NOISE_CLIP_SIGMAS * bank.sigma_g)),
            }
        off_lo, off_hi = clamp["off"]
        on_lo, on_hi = clamp["on"]
        lo = np.where(mismatch, on_lo, off_lo)
        hi = np.where(mismatch, on_hi, off_hi)
        draws = np.clip(draws, lo, hi)
    else:
        draws = nominal
    rates = V0 * draws.sum(axis=1)
    return int(np.argmin(rates)), rates


def per_retrieval_error(pixels: int, frames: int,
                        corrupted_fraction: float) -> float:
    """Chance that any of the Q-1 independent distractor rows out-matches.

    Aggregates the per-distractor confusion probability as
    1 - (1 - p)^(Q - 1).
    """
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    p1 = tcam_confusion_prob(pixels, corrupted_fraction)
    return 1.0 - (1.0 - p1) ** (frames - 1)


def retrieval_error_mc(pixels: int, frames: int, corrupted_fraction: float,
                       trials: int, seed) -> tuple[float, float]:
    """Monte Carlo wrong-row match probability for an ideal bank.

    Per trial: a fresh random movie is stored with sigma_g = 0 and
    g_off = 0, the first frame is corrupted by flipping round(f*N) pixels,
    and the trial errs when some other row sits strictly closer in Hamming
    distance (ties keep the true row, which has the lowest index).  Returns
    the error fraction and its binomial standard error.  Trials are drawn in
    fixed-size chunks with chunk-derived streams, so the result does not
    depend on any worker layout.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    n, q = int(pixels), int(frames)
    k_flip = int(round(corrupted_fraction * n))
    errors = 0
    done = 0
    chunk_index = 0
    while done < trials:
        size = min(_MC_CHUNK, trials - done)
        rng = np.random.default_rng((_as_seed_entropy(seed), chunk_index))
        rows = np.where(rng.random((size, q, n)) < 0.5, 1, -1).astype(np.int8)
        probes = rows[:, 0, :].copy()
        if k_flip > 0:
            # one flip set per trial, uniform without replacement
            order = np.argsort(rng.random((size, n)), axis=1)[:, :k_flip]
            np.put_along_axis(probes, order,
                              -np.take_along_axis(probes, order, axis=1),
                              axis=1)
        dist = (rows != probes[:, None, :]).sum(axis=2)
        errors += int(np.count_nonzero(dist[:, 1:].min(axis=1) < dist[:, 0])
                      ) if q > 1 else 0
        done += size
        chunk_index += 1
    p_hat = errors / trials
    stderr = float(np.sqrt(p_hat * (1.0 - p_hat) / trials))
    return p_hat, stderr


def _as_seed_entropy(seed):
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise TypeError("retrieval_error_mc needs an integer master seed")
