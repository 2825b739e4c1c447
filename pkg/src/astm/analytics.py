"""Closed-form error and capacity formulas, with their numerical oracles.

The error function pair is implemented in-repo (Maclaurin series below the
splice point, Laplace continued fraction above it) so that printed values do
not depend on platform libm behavior.  Every formula here is a pure function;
the *_quadrature / *_exact variants are independent cross-checks kept
deliberately separate from the closed forms they validate.
"""

import math

import numpy as np

_SQRT_PI = math.sqrt(math.pi)
_SERIES_CUTOFF = 2.0
_CF_DEPTH = 90


def _erf_series(x: float) -> float:
    """Maclaurin series for erf, accurate to ~1e-16 for |x| <= 2."""
    if x == 0.0:
        return 0.0
    x2 = x * x
    term = x  # x^(2n+1) / n!
    total = x
    for n in range(1, 200):
        term *= x2 / n
        contrib = term / (2 * n + 1)
        if n % 2:
            total -= contrib
        else:
            total += contrib
        if abs(contrib) < 1e-18 * abs(total):
            break
    return 2.0 / _SQRT_PI * total


def _erfc_cf(x: float) -> float:
    """Laplace continued fraction for erfc, accurate for x >= 2.

    sqrt(pi) * exp(x^2) * erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    evaluated by backward recurrence at fixed depth.
    """
    t = 0.0
    for k in range(_CF_DEPTH, 0, -1):
        t = (0.5 * k) / (x + t)
    return math.exp(-x * x) / (_SQRT_PI * (x + t))


def erfc(x: float) -> float:
    """Complementary error function, max absolute error below 1e-14."""
    x = float(x)
    if x < 0.0:
        return 2.0 - erfc(-x)
    if x < _SERIES_CUTOFF:
        return 1.0 - _erf_series(x)
    return _erfc_cf(x)


def erf(x: float) -> float:
    """Error function, the complement of erfc."""
    x = float(x)
    if x < 0.0:
        return -erf(-x)
    if x < _SERIES_CUTOFF:
        return _erf_series(x)
    return 1.0 - _erfc_cf(x)


def hebb_pixel_error(connectivity: int, frames: int) -> float:
    """Single-pixel readout error probability after correlation recording.

    For Q random frames on cells with M inputs each, the signal term competes
    with M(Q-1) zero-mean crosstalk terms; the Gaussian approximation of the
    crosstalk sum gives 0.5 * erfc(sqrt(M / 2Q)).
    """
    if connectivity < 1 or frames < 1:
        raise ValueError("connectivity and frames must be >= 1")
    return 0.5 * erfc(math.sqrt(connectivity / (2.0 * frames)))


def hebb_pixel_error_asymptotic(connectivity: int, frames: int) -> float:
    """Small-error limit of hebb_pixel_error, valid for 1 << Q << M."""
    if connectivity < 1 or frames < 1:
        raise ValueError("connectivity and frames must be >= 1")
    m, q = float(connectivity), float(frames)
    return math.sqrt(q / (2.0 * math.pi * m)) * math.exp(-m / (2.0 * q))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def gaussian_upper_tail(z0: float, width: float = 16.0,
                        panel: float = 0.5) -> float:
    """Integral of the standard normal density over [z0, z0 + width].

    Composite 32-point Gauss-Legendre quadrature; the truncated tail beyond
    z0 + width is negligible relative to the result for any z0 >= 0.
    """
    total = 0.0
    a = z0
    while a < z0 + width - 1e-12:
        b = min(a + panel, z0 + width)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        t = mid + half * _GL_NODES
        total += half * float(np.sum(_GL_WEIGHTS * np.exp(-0.5 * t * t)))
        a = b
    return total / math.sqrt(2.0 * math.pi)


def hebb_pixel_error_quadrature(connectivity: int, frames: int) -> float:
    """Crosstalk-sum tail probability by direct numerical quadrature.

    Independent oracle for hebb_pixel_error: integrates the Gaussian density
    of the crosstalk sum (variance M*Q) beyond the signal magnitude M, which
    reduces to the normal tail beyond sqrt(M/Q).
    """
    return gaussian_upper_tail(math.sqrt(connectivity / float(frames)))


def tcam_confusion_prob(pixels: int, corrupted_fraction: float) -> float:
    """Probability that one random stored row out-matches a corrupted probe.

    A random row sits at Hamming distance ~ Binomial(N, 1/2) from the probe;
    in the Gaussian approximation the chance that it falls below the probe's
    own distance f*N is 0.5*(erf((2f-1)*sqrt(N/2)) - erf(-sqrt(N/2))),
    computed here in the cancellation-free erfc form.
    """
    if pixels < 1:
        raise ValueError("pixels must be >= 1")
    if not 0.0 <= corrupted_fraction <= 1.0:
        raise ValueError("corrupted fraction must lie in [0, 1]")
    s = math.sqrt(pixels / 2.0)
    p = 0.5 * (erfc((1.0 - 2.0 * corrupted_fraction) * s) - erfc(s))
    return min(max(p, 0.0), 1.0)


def tcam_confusion_prob_exact(pixels: int, corrupted_fraction: float) -> float:
    """Exact binomial-tail counterpart of tcam_confusion_prob.

    Sums P(distance < f*N) for distance ~ Binomial(N, 1/2); the comparison is
    strict, so an integer f*N itself is excluded.
    """
    if pixels < 1:
        raise ValueError("pixels must be >= 1")
    if not 0.0 <= corrupted_fraction <= 1.0:
        raise ValueError("corrupted fraction must lie in [0, 1]")
    fn = corrupted_fraction * pixels
    # strict "< f*N": integers exclude the boundary term
    if abs(fn - round(fn)) < 1e-9:
        k_end = int(round(fn))
    else:
        k_end = math.ceil(fn)
    total = sum(math.comb(pixels, k) for k in range(k_end))
    return total / (2 ** pixels)


def tcam_capacity(memristors: int, pixels: int) -> float:
    """Frames storable in a two-device-per-bit CAM with n memristors: n/2N."""
    if memristors < 1 or pixels < 1:
        raise ValueError("memristors and pixels must be >= 1")
    return memristors / (2.0 * pixels)


def crossnet_capacity(memristors: int, pixels: int) -> float:
    """Frames storable in a differential-weight crossbar network: n/N.

    Uses the best-recording rule of thumb Q_max ~ 2M together with the
    n = 2MN device count of differential weights.
    """
    if memristors < 1 or pixels < 1:
        raise ValueError("memristors and pixels must be >= 1")
    return memristors / float(pixels)


def condition_check(g_off_max: float, g_on_max: float) -> bool:
    """Whether worst-case device fluctuations can produce a wrong CAM match.

    A perfect-fit row discharges at up to N*g_off_max while a fully mismatched
    row discharges at no less than about half of N*g_on_max, so a wrong match
    under simultaneous worst-case draws requires strictly
    g_off_max > g_on_max / 2.
    """
    if g_off_max <= 0 or g_on_max <= 0:
        raise ValueError("conductances must be positive")
    return g_off_max > 0.5 * g_on_max
