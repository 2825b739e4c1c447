"""Associative spatial-temporal memories on locally connected threshold nets.

Record a movie of bipolar frames into a weight matrix (four recording rules),
retrieve it with synchronous sign dynamics, and measure capacity and noise
tolerance against closed-form references, including a ternary-CAM baseline.
"""

from ._version import __version__
from .errors import AstmError, ConfigError, DimensionError, FormatError, \
    UnsupportedMethodError
from .lattice import ConnectivityMap, LatticeConfig, Movie, \
    build_connectivity, flip_pixels, load_movie, random_movie, save_movie
from .recording import RecordingReport, load_weights, record_analog_gd, \
    record_discrete_gd, record_hebb, record_minnorm_qp, save_weights
from .retrieval import CORRUPTED, RECOVERED, RetrievalTrace, perturb_weights, \
    run, step
from .analytics import condition_check, crossnet_capacity, erf, erfc, \
    hebb_pixel_error, hebb_pixel_error_asymptotic, tcam_capacity, \
    tcam_confusion_prob, tcam_confusion_prob_exact
from .tcam import TcamBank, match, per_retrieval_error, retrieval_error_mc, \
    store
from .harness import CapacityResult, ExperimentConfig, SweepResult, capacity, \
    corruption_prob, duty_sweep, equilibrium_error, noise_sweep, \
    repeated_noise_run, weight_noise_sweep

__all__ = [name for name in dir() if not name.startswith("_")]
