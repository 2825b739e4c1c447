"""Toroidal square lattice, local connectivity windows, and random movies.

Cells live on an L x L grid with cyclic boundary conditions and are indexed
row-major, i = y * L + x.  Each cell is connected to the other cells of an
m x m window centered on it (m odd), so every cell has exactly M = m^2 - 1
neighbors.  A movie is an ordered stack of Q bipolar frames (one pixel per
cell); frames are generated i.i.d. with a configurable fraction of +1 pixels.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, FormatError

MOVIE_MAGIC = "ASTM1"


@dataclass(frozen=True)
class LatticeConfig:
    """Geometry of the cell grid and of each cell's connectivity window.

    side: cells per lattice edge (L).  window: edge of the square
    connectivity domain (m), odd, 3 <= m <= side.  window == side is allowed
    only for odd side, where the wrapped window covers every other cell
    exactly once.
    """

    side: int
    window: int

    def __post_init__(self):
        if self.side < 3:
            raise ConfigError(f"side must be >= 3, got {self.side}")
        if self.window % 2 == 0:
            raise ConfigError(f"window must be odd, got {self.window}")
        if self.window < 3:
            raise ConfigError(f"window must be >= 3, got {self.window}")
        if self.window > self.side:
            raise ConfigError(
                f"window {self.window} exceeds side {self.side}: wrapped "
                "offsets would hit the same cell twice"
            )
        if self.window == self.side and self.side % 2 == 0:
            raise ConfigError(
                f"window == side requires odd side, got side {self.side}"
            )

    @property
    def cell_count(self) -> int:
        return self.side * self.side

    @property
    def connectivity(self) -> int:
        return self.window * self.window - 1


@dataclass(frozen=True)
class ConnectivityMap:
    """Per-cell neighbor indices, in row-major window-offset order.

    neighbors[i, k] is the k-th neighbor of cell i, where k enumerates the
    (dy, dx) offsets of the window row by row with (0, 0) skipped.  The
    ordering is deterministic so weight files indexed by it are reproducible.
    """

    config: LatticeConfig
    neighbors: np.ndarray  # (N, M) int32

    @property
    def cell_count(self) -> int:
        return self.config.cell_count

    @property
    def connectivity(self) -> int:
        return self.config.connectivity


def build_connectivity(cfg: LatticeConfig) -> ConnectivityMap:
    """Build the neighbor table for every cell of the torus.

    Neighbors of cell (x, y) are the cells (x+dx mod L, y+dy mod L) for
    dy, dx in [-(m-1)/2, +(m-1)/2], excluding (0, 0), iterated row-major
    in (dy, dx).
    """
    L, m = cfg.side, cfg.window
    h = (m - 1) // 2
    offsets = [(dy, dx) for dy in range(-h, h + 1) for dx in range(-h, h + 1)
               if not (dy == 0 and dx == 0)]
    ys, xs = np.divmod(np.arange(L * L, dtype=np.int64), L)
    neighbors = np.empty((L * L, cfg.connectivity), dtype=np.int32)
    for k, (dy, dx) in enumerate(offsets):
        neighbors[:, k] = ((ys + dy) % L) * L + (xs + dx) % L
    return ConnectivityMap(config=cfg, neighbors=neighbors)


@dataclass
class Movie:
    """A sequence of bipolar frames plus the duty cycle used to generate it.

    frames is a (Q, N) int8 array with entries in {-1, +1}.  duty is
    generation metadata only; it does not constrain the realized pixel counts.
    """

    frames: np.ndarray
    duty: float = 0.5

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.int8)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise DimensionError("frames must be a (Q, N) array with Q >= 1")
        if not np.all(np.abs(self.frames) == 1):
            raise FormatError("movie pixels must all be -1 or +1")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def pixel_count(self) -> int:
        return self.frames.shape[1]


def random_movie(n_pixels: int, n_frames: int, duty: float, seed) -> Movie:
    """Generate n_frames frames of n_pixels i.i.d. bipolar pixels.

    Each pixel is +1 with probability duty, -1 otherwise, independently of
    everything else.  Deterministic given the seed.
    """
    if not 0.0 < duty < 1.0:
        raise ConfigError(f"duty must lie in (0, 1), got {duty}")
    if n_frames < 1:
        raise ConfigError(f"need at least one frame, got {n_frames}")
    rng = np.random.default_rng(seed)
    frames = np.where(rng.random((n_frames, n_pixels)) < duty, 1, -1)
    return Movie(frames=frames.astype(np.int8), duty=duty)


def flip_pixels(frame: np.ndarray, flip_fraction: float, seed) -> np.ndarray:
    """Negate exactly round(f*N) distinct pixels, chosen uniformly.

    The input is not modified.  flip_fraction = 0 returns an identical copy;
    flip_fraction = 1 returns the elementwise negation.
    """
    if not 0.0 <= flip_fraction <= 1.0:
        raise ConfigError(f"flip fraction must lie in [0, 1], got {flip_fraction}")
    frame = np.asarray(frame)
    n = frame.shape[0]
    k = int(round(flip_fraction * n))
    out = frame.copy()
    if k > 0:
        rng = np.random.default_rng(seed)
        idx = rng.choice(n, size=k, replace=False)
        out[idx] = -out[idx]
    return out


def save_movie(movie: Movie, cfg: LatticeConfig, path) -> None:
    """Write a movie as text: header, then one '0'/'1' line per frame."""
    if movie.pixel_count != cfg.cell_count:
        raise DimensionError(
            f"movie has {movie.pixel_count} pixels but lattice has "
            f"{cfg.cell_count} cells"
        )
    lines = [f"{MOVIE_MAGIC} {cfg.side} {cfg.window} {movie.frame_count} "
             f"{movie.duty!r}"]
    for frame in movie.frames:
        lines.append("".join("1" if p > 0 else "0" for p in frame))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_movie(path) -> tuple[Movie, LatticeConfig]:
    """Parse a movie file; rejects bad headers, line lengths, or characters."""
    with open(path) as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines:
        raise FormatError(f"{path}: empty movie file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != MOVIE_MAGIC:
        raise FormatError(f"{path}: bad movie header {lines[0]!r}")
    try:
        side, window, n_frames = int(head[1]), int(head[2]), int(head[3])
        duty = float(head[4])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed movie header: {exc}") from None
    cfg = LatticeConfig(side=side, window=window)
    body = [ln for ln in lines[1:] if ln]
    if len(body) != n_frames:
        raise FormatError(
            f"{path}: header promises {n_frames} frames, file has {len(body)}"
        )
    n = cfg.cell_count
    frames = np.empty((n_frames, n), dtype=np.int8)
    for q, line in enumerate(body):
        if len(line) != n:
            raise FormatError(
                f"{path}: frame {q} has {len(line)} pixels, expected {n}"
            )
        row = np.frombuffer(line.encode("ascii"), dtype=np.uint8)
        bad = (row != ord("0")) & (row != ord("1"))
        if bad.any():
            raise FormatError(
                f"{path}: frame {q} contains characters other than 0/1"
            )
        frames[q] = np.where(row == ord("1"), 1, -1)
    return Movie(frames=frames, duty=duty), cfg
