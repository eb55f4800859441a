"""Discrete-time building blocks shared across the toolkit.

Impulse responses here are short FIR sequences: plain 1-D float arrays, plus
a sample rate so that mixed-rate operations fail loudly instead of silently
producing garbage. Spectral quantities (magnitude responses, smoothing,
design weights) all live on one uniform DFT grid so they stay bin-compatible
with each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import convolution_matrix as _scipy_convolution_matrix

__all__ = [
    "ImpulseResponse",
    "FrequencyGrid",
    "convolve",
    "convolution_matrix",
    "delay",
    "magnitude_response",
    "fractional_octave_smooth",
]


def _clean_samples(samples, what: str = "impulse response") -> np.ndarray:
    arr = np.array(samples, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{what} must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite samples")
    return arr


@dataclass(frozen=True, eq=False)
class ImpulseResponse:
    """A finite impulse response tied to a sample rate.

    The sample array is copied and validated on construction, so downstream
    code can rely on float dtype and finite values.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", _clean_samples(self.samples))
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform DFT grid; bin l sits at l * sample_rate_hz / fft_size."""

    fft_size: int
    sample_rate_hz: float

    def __post_init__(self):
        if int(self.fft_size) != self.fft_size or self.fft_size < 2:
            raise ValueError("fft_size must be an integer of at least 2")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.arange(self.fft_size) * (self.sample_rate_hz / self.fft_size)


def _payload(h, what: str = "impulse response") -> np.ndarray:
    if isinstance(h, ImpulseResponse):
        return h.samples
    return _clean_samples(h, what)


def convolve(h1, h2):
    """Full linear convolution, length len(h1) + len(h2) - 1.

    Takes either two ImpulseResponse objects (rates must agree; the result
    keeps the rate) or two plain arrays. Mixing the two styles is refused
    because the result's rate would be a guess.
    """
    wrapped1 = isinstance(h1, ImpulseResponse)
    wrapped2 = isinstance(h2, ImpulseResponse)
    if wrapped1 != wrapped2:
        raise ValueError("convolve expects two ImpulseResponse objects or two arrays, not a mix")
    if wrapped1 and h1.sample_rate_hz != h2.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: {h1.sample_rate_hz} Hz vs {h2.sample_rate_hz} Hz"
        )
    out = np.convolve(_payload(h1), _payload(h2))
    if wrapped1:
        return ImpulseResponse(out, h1.sample_rate_hz)
    return out


def convolution_matrix(h, num_cols: int) -> np.ndarray:
    """Tall Toeplitz matrix T with T @ x == convolve(h, x) for len(x) == num_cols.

    Column j holds h delayed by j samples; the shape is
    (len(h) + num_cols - 1, num_cols).
    """
    if int(num_cols) != num_cols or num_cols < 1:
        raise ValueError("num_cols must be a positive integer")
    return _scipy_convolution_matrix(_payload(h), int(num_cols), mode="full")


def delay(h, num_samples: int):
    """Prepend num_samples zeros: a pure delay, magnitude response unchanged."""
    if int(num_samples) != num_samples or num_samples < 0:
        raise ValueError("delay must be a nonnegative integer number of samples")
    x = _payload(h)
    out = np.concatenate([np.zeros(int(num_samples)), x])
    if isinstance(h, ImpulseResponse):
        return ImpulseResponse(out, h.sample_rate_hz)
    return out


def magnitude_response(h, grid: FrequencyGrid) -> np.ndarray:
    """|DFT| of h on the grid, length fft_size.

    The upper half is mirrored from the lower half, so the output is exactly
    conjugate-symmetric (entry l equals entry fft_size - l for l >= 1). An
    ImpulseResponse input must match the grid's sample rate, and h must fit
    inside the grid.
    """
    x = _payload(h)
    n = grid.fft_size
    if isinstance(h, ImpulseResponse) and h.sample_rate_hz != grid.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: response at {h.sample_rate_hz} Hz, grid at {grid.sample_rate_hz} Hz"
        )
    if x.size > n:
        raise ValueError(f"impulse response of length {x.size} does not fit fft_size {n}")
    half = np.abs(np.fft.rfft(x, n))
    out = np.empty(n)
    out[: half.size] = half
    out[half.size:] = half[1 : n - half.size + 1][::-1]
    return out


def fractional_octave_smooth(values, grid: FrequencyGrid, fraction: float = 1.0 / 6.0) -> np.ndarray:
    """Smooth a magnitude-like spectrum with a rectangular fractional-octave window.

    Each positive-frequency bin is replaced by the arithmetic mean over the
    bins whose centre frequencies lie within +-fraction/2 octave around it,
    clipped to the positive half of the grid. The DC bin (no geometric band
    exists at 0 Hz) and, for even sizes, the Nyquist bin pass through
    unchanged; the upper half mirrors the lower so conjugate symmetry is
    preserved.

    Parameters
    ----------
    values : array, length fft_size, nonnegative
    grid : FrequencyGrid
    fraction : octave fraction of the full window width, default 1/6

    Returns
    -------
    array of the same length.
    """
    v = np.asarray(values, dtype=float)
    n = grid.fft_size
    if v.shape != (n,):
        raise ValueError(f"expected {n} spectrum values, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("spectrum contains non-finite values")
    if np.any(v < 0):
        raise ValueError("smoothing expects nonnegative magnitude values")
    if not fraction > 0:
        raise ValueError("fraction must be positive")

    freqs = grid.frequencies_hz
    half_idx = n // 2
    edge = 2.0 ** (fraction / 2.0)
    out = v.copy()
    # range stops before the Nyquist bin when n is even
    for l in range(1, (n + 1) // 2):
        lo = freqs[l] / edge
        hi = freqs[l] * edge
        k0 = max(int(np.searchsorted(freqs[: half_idx + 1], lo, side="left")), 1)
        k1 = int(np.searchsorted(freqs[: half_idx + 1], hi, side="right")) - 1
        window = v[k0 : k1 + 1]
        # anchored on the centre bin so constant inputs come back bit-exact
        out[l] = v[l] + np.mean(window - v[l])
        out[n - l] = out[l]
    return out
