"""Globally-synchronous threshold readout and retrieval bookkeeping.

One step computes every cell's pre-activation from the same previous frame
and thresholds it through sgn (sgn(0) = +1), so the update order of cells can
never matter.  A retrieval run replays the dynamics from an input frame and
scores each produced frame against the recorded movie, cyclically.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError
from .lattice import ConnectivityMap, Movie

RECOVERED = "Recovered"
CORRUPTED = "Corrupted"


@dataclass(frozen=True)
class RetrievalTrace:
    """Wrong-pixel counts along one retrieval, plus the verdict.

    wrong_counts[0] scores the input frame itself; entry k scores the k-th
    produced frame against truth frame (start_index + k) mod Q.  The verdict
    is Recovered exactly when the counts reach zero and remain zero through
    the last step.
    """

    wrong_counts: np.ndarray
    status: str
    steps_run: int

    def wrong_fractions(self, n_pixels: int) -> np.ndarray:
        return self.wrong_counts / float(n_pixels)

    def to_csv_lines(self, n_pixels: int) -> list[str]:
        lines = ["step,wrong_count,wrong_fraction"]
        for k, c in enumerate(self.wrong_counts):
            lines.append(f"{k},{int(c)},{c / n_pixels:.12g}")
        lines.append(self.status)
        return lines


def step(weights: np.ndarray, conn: ConnectivityMap,
         frame: np.ndarray) -> np.ndarray:
    """Advance one synchronous step: sgn of each cell's weighted input sum."""
    if weights.shape != conn.neighbors.shape:
        raise DimensionError(
            f"weights {weights.shape} do not match connectivity "
            f"{conn.neighbors.shape}"
        )
    frame = np.asarray(frame, dtype=np.int8)
    if frame.shape[0] != conn.cell_count:
        raise DimensionError(
            f"frame has {frame.shape[0]} pixels, lattice has "
            f"{conn.cell_count} cells"
        )
    h = _kernels.preact(weights, conn.neighbors, frame)
    return np.where(h >= 0.0, 1, -1).astype(np.int8)


def run(weights: np.ndarray, conn: ConnectivityMap, input_frame: np.ndarray,
        truth: Movie, start_index: int = 0,
        horizon: int | None = None) -> RetrievalTrace:
    """Iterate the readout for `horizon` steps and score against the movie.

    start_index names the truth frame the input is supposed to be; the
    default horizon of Q steps walks one full cycle of the movie.
    """
    if truth.pixel_count != conn.cell_count:
        raise DimensionError(
            f"movie has {truth.pixel_count} pixels, lattice has "
            f"{conn.cell_count} cells"
        )
    q_count = truth.frame_count
    if horizon is None:
        horizon = q_count
    if horizon < 1:
        raise DimensionError(f"horizon must be >= 1, got {horizon}")
    frame = np.asarray(input_frame, dtype=np.int8)
    counts = np.empty(horizon + 1, dtype=np.int64)
    counts[0] = int(np.count_nonzero(frame != truth.frames[start_index % q_count]))
    for k in range(1, horizon + 1):
        frame = step(weights, conn, frame)
        counts[k] = int(np.count_nonzero(
            frame != truth.frames[(start_index + k) % q_count]))
    status = RECOVERED if counts[-1] == 0 else CORRUPTED
    return RetrievalTrace(wrong_counts=counts, status=status,
                          steps_run=horizon)


def perturb_weights(weights: np.ndarray, rel_rms: float,
                    seed) -> np.ndarray:
    """Add zero-mean Gaussian noise scaled to the matrix-wide weight rms.

    The noise standard deviation is rel_rms * rms(weights), identical for
    every synapse; the input matrix is left untouched.  Callers wanting fresh
    noise per retrieval attempt pass a fresh seed (or generator) each time.
    """
    if rel_rms < 0:
        raise ValueError(f"relative rms must be >= 0, got {rel_rms}")
    if rel_rms == 0:
        return weights.copy()
    rng = np.random.default_rng(seed)
    sigma = rel_rms * float(np.sqrt(np.mean(weights * weights)))
    return weights + rng.normal(0.0, sigma, size=weights.shape)
