"""Weight recording: correlation, min-norm QP, and two gradient recorders.

All recorders treat the movie as cyclic (frame Q is followed by frame 1), so
Q frames define exactly Q transitions and a retrieved movie can loop.  Each
cell's weight row is trained independently of every other row, against the
transitions restricted to that cell's connectivity window.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, DimensionError, FormatError
from .lattice import ConnectivityMap, LatticeConfig, Movie

WEIGHT_MAGIC = "W1"

# paper-scale iteration defaults; desk-scale sweeps usually pass tighter caps
QP_MARGIN = 1.0
QP_MAX_ITERS = 2000
QP_TOL = 1e-8
AGD_ETA = 1e-3
AGD_MAX_EPOCHS = 100_000
AGD_EPS_STOP = 0.1
DGD_ETA = 0.01
DGD_MARGIN = 1.0
DGD_MAX_EPOCHS = 100_000


@dataclass(frozen=True)
class RecordingReport:
    """Outcome summary of one recording run.

    violations counts transition constraints that still sit below the
    recorder's own termination threshold; converged implies zero violations.
    """

    converged: bool
    epochs_used: int
    violations: int
    weight_rms: float


def _check_movie(movie: Movie, conn: ConnectivityMap) -> None:
    if movie.pixel_count != conn.cell_count:
        raise DimensionError(
            f"movie has {movie.pixel_count} pixels, connectivity map has "
            f"{conn.cell_count} cells"
        )


def _rms(weights: np.ndarray) -> float:
    return float(np.sqrt(np.mean(weights * weights)))


def record_hebb(movie: Movie, conn: ConnectivityMap
                ) -> tuple[np.ndarray, RecordingReport]:
    """Correlation recording: w_ij = (1/Q) sum_q s_i(q+1) * s_j(q).

    One pass, always converges; every Q*w_ij is an integer in [-Q, Q].
    """
    _check_movie(movie, conn)
    frames = movie.frames
    q_count = movie.frame_count
    nxt = np.roll(frames, -1, axis=0).astype(np.float64)
    weights = np.zeros((conn.cell_count, conn.connectivity), dtype=np.float64)
    for q in range(q_count):
        weights += nxt[q][:, None] * frames[q][conn.neighbors]
    weights /= q_count
    report = RecordingReport(converged=True, epochs_used=1, violations=0,
                             weight_rms=_rms(weights))
    return weights, report


def record_minnorm_qp(movie: Movie, conn: ConnectivityMap,
                      margin: float = QP_MARGIN,
                      max_iters: int = QP_MAX_ITERS,
                      tol: float = QP_TOL,
                      ) -> tuple[np.ndarray, RecordingReport]:
    """Per-cell minimum-norm weights subject to margin constraints.

    Each cell's row must satisfy target * (w . inputs) >= margin for all Q
    transitions; among the feasible rows the Euclidean-shortest one is
    returned (Hildreth dual coordinate ascent, see _kernels.qp_row).
    Rows that cannot be satisfied within max_iters passes keep their
    best-effort iterate and are counted in the report.
    """
    _check_movie(movie, conn)
    if margin <= 0:
        raise ConfigError(f"margin must be positive, got {margin}")
    weights, passes, violations = _kernels.qp_all(
        movie.frames, conn.neighbors, float(margin), int(max_iters),
        float(tol))
    total_viol = int(violations.sum())
    report = RecordingReport(converged=(total_viol == 0),
                             epochs_used=int(passes.max()),
                             violations=total_viol,
                             weight_rms=_rms(weights))
    return weights, report


def record_analog_gd(movie: Movie, conn: ConnectivityMap,
                     eta: float = AGD_ETA,
                     max_epochs: int = AGD_MAX_EPOCHS,
                     eps_stop: float = AGD_EPS_STOP,
                     ) -> tuple[np.ndarray, RecordingReport]:
    """Delta-rule recording toward exact +-1 pre-activations.

    Starting from zero weights, sweeps transitions in order each epoch and
    applies dw = -eta * error * input, error = (w . inputs) - target.  A cell
    stops when all its errors fall below eps_stop in magnitude, or at
    max_epochs.
    """
    _check_movie(movie, conn)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    weights, epochs, violations = _kernels.agd_all(
        movie.frames, conn.neighbors, float(eta), int(max_epochs),
        float(eps_stop))
    total_viol = int(violations.sum())
    report = RecordingReport(converged=(total_viol == 0),
                             epochs_used=int(epochs.max()),
                             violations=total_viol,
                             weight_rms=_rms(weights))
    return weights, report


def record_discrete_gd(movie: Movie, conn: ConnectivityMap,
                       eta: float = DGD_ETA,
                       d_margin: float = DGD_MARGIN,
                       max_epochs: int = DGD_MAX_EPOCHS,
                       ) -> tuple[np.ndarray, RecordingReport]:
    """Perceptron-style recording with a margin-shifted sign error.

    The error compares sgn(w . inputs - D * target) with the target, so a
    converged cell satisfies target * (w . inputs) >= D on every transition.
    Non-convergence at max_epochs is reported, not raised.
    """
    _check_movie(movie, conn)
    if eta <= 0:
        raise ConfigError(f"eta must be positive, got {eta}")
    if d_margin <= 0:
        raise ConfigError(f"margin parameter must be positive, got {d_margin}")
    weights, epochs, violations = _kernels.dgd_all(
        movie.frames, conn.neighbors, float(eta), float(d_margin),
        int(max_epochs))
    total_viol = int(violations.sum())
    report = RecordingReport(converged=(total_viol == 0),
                             epochs_used=int(epochs.max()),
                             violations=total_viol,
                             weight_rms=_rms(weights))
    return weights, report


RECORDERS = {
    "hebb": record_hebb,
    "qp": record_minnorm_qp,
    "agd": record_analog_gd,
    "dgd": record_discrete_gd,
}


def minnorm_row_bruteforce(inputs: np.ndarray, targets: np.ndarray,
                           margin: float = 1.0) -> np.ndarray | None:
    """Reference min-norm solver by active-set enumeration (tiny instances).

    Tries every subset of constraints as the active set, solves the
    equality-constrained least-norm problem on it, and returns the first
    solution satisfying both primal feasibility and nonnegative multipliers.
    Returns None when no subset certifies feasibility.  Exponential in the
    number of constraints; intended as an oracle for Q <= ~6.
    """
    a = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    q_count, m = a.shape
    signed = y[:, None] * a
    best = None
    best_norm = np.inf
    for r in range(q_count + 1):
        for subset in itertools.combinations(range(q_count), r):
            if r == 0:
                w = np.zeros(m)
                mu = np.empty(0)
            else:
                g = signed[list(subset)]
                gram = g @ g.T
                try:
                    mu = np.linalg.solve(gram, np.full(r, margin))
                except np.linalg.LinAlgError:
                    continue
                w = g.T @ mu
            if np.any(mu < -1e-10):
                continue
            if np.any(signed @ w < margin - 1e-9):
                continue
            norm = float(w @ w)
            if norm < best_norm - 1e-15:
                best_norm = norm
                best = w
    return best


def minnorm_row(inputs: np.ndarray, targets: np.ndarray,
                margin: float = QP_MARGIN, max_iters: int = QP_MAX_ITERS,
                tol: float = QP_TOL) -> tuple[np.ndarray, int, int]:
    """Single-row entry point for the dual coordinate ascent solver.

    Returns (weights, passes_used, residual_violations).  Inputs must be
    bipolar so that every row of `inputs` has squared norm M.
    """
    a = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    w = np.zeros(a.shape[1], dtype=np.float64)
    lam = np.zeros(a.shape[0], dtype=np.float64)
    passes, violations = _kernels.qp_row(a, y, float(margin), int(max_iters),
                                         float(tol), w, lam)
    return w, int(passes), int(violations)


def save_weights(weights: np.ndarray, cfg: LatticeConfig, path) -> None:
    """Write a weight matrix as text, 17 significant digits per value."""
    n, m = weights.shape
    if n != cfg.cell_count or m != cfg.connectivity:
        raise DimensionError(
            f"weight matrix {n}x{m} does not match lattice "
            f"{cfg.cell_count}x{cfg.connectivity}"
        )
    lines = [f"{WEIGHT_MAGIC} {cfg.side} {cfg.window}"]
    for row in weights:
        lines.append(" ".join(f"{w:.17g}" for w in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_weights(path) -> tuple[np.ndarray, LatticeConfig]:
    """Parse a weight file written by save_weights."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty weight file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != WEIGHT_MAGIC:
        raise FormatError(f"{path}: bad weight header {lines[0]!r}")
    try:
        cfg = LatticeConfig(side=int(head[1]), window=int(head[2]))
    except ValueError as exc:
        raise FormatError(f"{path}: malformed weight header: {exc}") from None
    body = [ln for ln in lines[1:] if ln]
    if len(body) != cfg.cell_count:
        raise FormatError(
            f"{path}: expected {cfg.cell_count} weight rows, got {len(body)}"
        )
    weights = np.empty((cfg.cell_count, cfg.connectivity), dtype=np.float64)
    for i, line in enumerate(body):
        parts = line.split()
        if len(parts) != cfg.connectivity:
            raise FormatError(
                f"{path}: row {i} has {len(parts)} weights, expected "
                f"{cfg.connectivity}"
            )
        try:
            weights[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}: row {i}: {exc}") from None
    if not np.all(np.isfinite(weights)):
        raise FormatError(f"{path}: weight file contains non-finite values")
    return weights, cfg
