"""Equalizer design: system assembly, target reduction, regularized solving.

The chain being shaped is loudspeaker -> eardrum on top of the processed
microphone pickup, and the goal is to make the aided ear look like the open
ear. Working directly on the full acoustic transfer functions gives a
rank-deficient system (the forward path contributes common zeros), so the
practical route divides it out and fits the relative transfer function with
the loudspeaker responses alone. A slack delay on the target absorbs
acausal components, and a log-normal spectral weight concentrates the
regularization where vent leakage dominates anyway.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .signals import (
    FrequencyGrid,
    ImpulseResponse,
    convolution_matrix,
    fractional_octave_smooth,
    magnitude_response,
)
from .scenario import MeasurementSet, Scenario, scenario_fingerprint

__all__ = [
    "VARIANTS",
    "NumericsError",
    "DesignConfig",
    "LinearSystem",
    "EqualizerFilter",
    "default_fft_size",
    "assemble_atf_system",
    "solve_ls_atf",
    "reduce_to_rtf",
    "frequency_weights",
    "weights_from_ratio",
    "solve_regularized",
    "solve_robust",
    "design_filter",
]

VARIANTS = ("LS_ATF", "RLS", "R_DELTA_LS", "FR_DELTA_LS", "MFR_DELTA_LS")

# singular values below this fraction of the largest count as rank loss
RANK_RTOL = 1e-10

# ridge used when a plain-RLS config leaves the strength unspecified
STABILITY_LAMBDA = 1e-8

_DEFAULT_LAMBDA = {
    "LS_ATF": 0.0,
    "RLS": STABILITY_LAMBDA,
    "R_DELTA_LS": 0.1,
    "FR_DELTA_LS": 0.1,
    "MFR_DELTA_LS": 0.1,
}


class NumericsError(RuntimeError):
    """The linear algebra gave up: rank-deficient or singular design system."""


def default_fft_size(speaker_length: int, filter_length: int) -> int:
    """Smallest power of two giving at least 4 bins per modeled tap."""
    n = 4 * (speaker_length + filter_length - 1)
    return 1 << max(n - 1, 1).bit_length()


@dataclass(frozen=True)
class DesignConfig:
    """Solver settings.

    acausal_delay and reg_lambda default per variant: the delay-free
    variants (LS_ATF, RLS) get 0 slack, RLS gets a tiny stability ridge,
    and the delayed variants get the delay-32 / lambda-0.1 operating point
    that behaves well at the default scene dimensions. fft_size None means
    "derive from the scenario when needed".
    """

    variant: str = "MFR_DELTA_LS"
    filter_length: int = 99
    acausal_delay: int | None = None
    reg_lambda: float | None = None
    reg_beta: float = 1.0
    fft_size: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if int(self.filter_length) != self.filter_length or self.filter_length < 1:
            raise ValueError("filter_length must be a positive integer")
        if self.acausal_delay is None:
            object.__setattr__(
                self, "acausal_delay", 0 if self.variant in ("LS_ATF", "RLS") else 32
            )
        if int(self.acausal_delay) != self.acausal_delay or self.acausal_delay < 0:
            raise ValueError("acausal_delay must be a nonnegative integer")
        if self.variant in ("LS_ATF", "RLS") and self.acausal_delay != 0:
            raise ValueError(f"variant {self.variant} does not take an acausal delay")
        if self.reg_lambda is None:
            object.__setattr__(self, "reg_lambda", _DEFAULT_LAMBDA[self.variant])
        if not self.reg_lambda >= 0:
            raise ValueError("reg_lambda must be nonnegative")
        if not self.reg_beta > 0:
            raise ValueError("reg_beta must be positive")
        if self.fft_size is not None and (
            int(self.fft_size) != self.fft_size or self.fft_size < 2
        ):
            raise ValueError("fft_size must be an integer of at least 2, or None")


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """One least-squares problem: matrix @ coefficients ~ target.

    The coefficient vector concatenates the per-loudspeaker filters, so the
    matrix has num_loudspeakers * filter_length columns. acausal_delay is
    carried along so the solution remembers how the target was shifted.
    """

    matrix: np.ndarray
    target: np.ndarray
    num_loudspeakers: int
    filter_length: int
    acausal_delay: int = 0
    weights: np.ndarray | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        t = np.asarray(self.target, dtype=float)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "target", t)
        if m.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if t.shape != (m.shape[0],):
            raise ValueError(
                f"target length {t.shape} does not match matrix rows {m.shape[0]}"
            )
        if m.shape[1] != self.num_loudspeakers * self.filter_length:
            raise ValueError(
                f"matrix has {m.shape[1]} columns, expected "
                f"{self.num_loudspeakers} * {self.filter_length}"
            )
        if self.weights is not None:
            object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


@dataclass(frozen=True, eq=False)
class EqualizerFilter:
    """Designed FIR filters, one row per loudspeaker."""

    coefficients: np.ndarray
    acausal_delay: int = 0
    config: dict = field(default_factory=dict)
    scenario_fingerprint: str = ""

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 2:
            raise ValueError("coefficients must be a 2-D array (loudspeakers x taps)")
        if not np.all(np.isfinite(coef)):
            raise ValueError("coefficients contain non-finite values")
        object.__setattr__(self, "coefficients", coef)

    @property
    def num_loudspeakers(self) -> int:
        return self.coefficients.shape[0]

    @property
    def filter_length(self) -> int:
        return self.coefficients.shape[1]

    def to_dict(self) -> dict:
        return {
            "num_loudspeakers": self.num_loudspeakers,
            "filter_length": self.filter_length,
            "d_H": self.acausal_delay,
            "coefficients": self.coefficients.tolist(),
            "config": dict(self.config),
            "scenario_fingerprint": self.scenario_fingerprint,
        }


def _chain(*irs: np.ndarray) -> np.ndarray:
    out = irs[0]
    for nxt in irs[1:]:
        out = np.convolve(out, nxt)
    return out


def _raw_target(ms: MeasurementSet, g: ImpulseResponse, rows: int, shift: int) -> np.ndarray:
    """Processed open-ear response minus leakage, delayed by `shift`, zero-padded."""
    open_branch = np.convolve(g.samples, ms.h_open.samples)
    v = np.zeros(rows)
    v[shift : shift + open_branch.size] += open_branch
    v[shift : shift + len(ms.h_occ)] -= ms.h_occ.samples
    return v


def _check_rates(ms: MeasurementSet, g: ImpulseResponse) -> None:
    if ms.sample_rate_hz != g.sample_rate_hz:
        raise ValueError(
            f"sample rate mismatch: scene at {ms.sample_rate_hz} Hz, forward path at {g.sample_rate_hz} Hz"
        )


def assemble_atf_system(ms: MeasurementSet, g: ImpulseResponse, filter_length: int) -> LinearSystem:
    """Full acoustic-transfer-function least-squares system.

    The block matrix convolves each candidate filter with forward path,
    microphone pickup and its loudspeaker response; the target is the
    processed open-ear response with the leakage already subtracted. Useful
    as a reference point; the matrix is structurally rank deficient because
    every block shares the forward-path-and-microphone factor.
    """
    if int(filter_length) != filter_length or filter_length < 1:
        raise ValueError("filter_length must be a positive integer")
    _check_rates(ms, g)
    filter_length = int(filter_length)
    blocks = [
        convolution_matrix(_chain(g.samples, ms.h_m.samples, d_n.samples), filter_length)
        for d_n in ms.d
    ]
    matrix = np.hstack(blocks)
    target = _raw_target(ms, g, matrix.shape[0], 0)
    return LinearSystem(matrix, target, ms.num_loudspeakers, filter_length, 0)


def solve_ls_atf(system: LinearSystem) -> EqualizerFilter:
    """Minimum-norm least-squares solution of the full-ATF system."""
    coef, _, _, _ = np.linalg.lstsq(system.matrix, system.target, rcond=RANK_RTOL)
    return EqualizerFilter(
        coef.reshape(system.num_loudspeakers, system.filter_length),
        system.acausal_delay,
    )


def reduce_to_rtf(
    ms: MeasurementSet,
    g: ImpulseResponse,
    filter_length: int,
    acausal_delay: int = 0,
) -> LinearSystem:
    """Divide the shared forward factor out of the full system.

    The target becomes the least-squares FIR fit of the relative transfer
    function (open ear over processed microphone path, leakage folded in),
    delayed by acausal_delay so anticausal content gets taps to land on.
    The matrix is the concatenation of the loudspeaker convolution matrices
    with acausal_delay zero rows appended; those rows line up with target
    taps that no causal filter can reach.

    Raises NumericsError when the forward path through the microphone is
    rank deficient (for example a zero-gain path).
    """
    if int(filter_length) != filter_length or filter_length < 1:
        raise ValueError("filter_length must be a positive integer")
    if int(acausal_delay) != acausal_delay or acausal_delay < 0:
        raise ValueError("acausal_delay must be a nonnegative integer")
    _check_rates(ms, g)
    filter_length = int(filter_length)
    acausal_delay = int(acausal_delay)

    n_taps = ms.speaker_length + filter_length - 1 + acausal_delay
    through_mic = np.convolve(g.samples, ms.h_m.samples)
    lhs = convolution_matrix(through_mic, n_taps)
    v = _raw_target(ms, g, lhs.shape[0], acausal_delay)

    singulars = np.linalg.svd(lhs, compute_uv=False)
    if singulars[0] == 0.0 or singulars[-1] <= RANK_RTOL * singulars[0]:
        raise NumericsError(
            "forward path through the device microphone is rank deficient; "
            "cannot reduce to a relative transfer function"
        )
    target, _, _, _ = np.linalg.lstsq(lhs, v, rcond=None)

    rows = n_taps
    matrix = np.zeros((rows, ms.num_loudspeakers * filter_length))
    body = ms.speaker_length + filter_length - 1
    for n, d_n in enumerate(ms.d):
        matrix[:body, n * filter_length : (n + 1) * filter_length] = convolution_matrix(
            d_n.samples, filter_length
        )
    return LinearSystem(matrix, target, ms.num_loudspeakers, filter_length, acausal_delay)


def weights_from_ratio(ratio, reg_beta: float, grid: FrequencyGrid) -> np.ndarray:
    """Log-normal regularization weight for a given leakage-to-target ratio.

    The ratio is smoothed over 1/6 octave first; the weight is the log-normal
    density in the smoothed ratio with spread sigma^2 = beta * ln(10)/20, so
    it peaks where leakage and target are comparable and fades where either
    side dominates. Bins where the smoothed ratio is zero get weight zero.
    """
    if not reg_beta > 0:
        raise ValueError("reg_beta must be positive")
    smoothed = fractional_octave_smooth(np.asarray(ratio, dtype=float), grid)
    sigma = np.sqrt(np.log(10.0) / 20.0 * reg_beta)
    w = np.zeros(grid.fft_size)
    pos = smoothed > 0
    w[pos] = np.exp(-0.5 * (np.log(smoothed[pos]) / sigma) ** 2) / (
        np.sqrt(2.0 * np.pi) * sigma * smoothed[pos]
    )
    return w


def frequency_weights(measurements, g: ImpulseResponse, reg_beta: float, grid: FrequencyGrid):
    """Leakage ratio V and regularization weight W on the grid.

    V is |leakage| over |processed open-ear target|, built from set-averaged
    magnitude spectra; pass one MeasurementSet or a sequence of them. Both
    returned arrays have length fft_size and are conjugate-symmetric.
    """
    if isinstance(measurements, MeasurementSet):
        measurements = [measurements]
    measurements = list(measurements)
    if not measurements:
        raise ValueError("at least one measurement set is required")
    for ms in measurements:
        _check_rates(ms, g)
    leak = np.mean(
        [magnitude_response(ms.h_occ.samples, grid) for ms in measurements], axis=0
    )
    open_gain = np.mean(
        [
            magnitude_response(np.convolve(g.samples, ms.h_open.samples), grid)
            for ms in measurements
        ],
        axis=0,
    )
    if np.any(open_gain == 0.0):
        bad = int(np.flatnonzero(open_gain == 0.0)[0])
        raise NumericsError(
            f"processed open-ear response vanishes at bin {bad}; leakage ratio undefined"
        )
    ratio = leak / open_gain
    return ratio, weights_from_ratio(ratio, reg_beta, grid)


def _spectral_penalty(weights: np.ndarray, num_loudspeakers: int, filter_length: int) -> np.ndarray:
    """Quadratic form of the weighted-spectrum seminorm, one block per loudspeaker.

    With the DFT scaled by 1/sqrt(fft_size) the penalty for all-ones weights
    is exactly the identity, which keeps lambda comparable between the
    identity-regularized and frequency-weighted variants. The block is the
    Toeplitz autocorrelation of the squared weight curve.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise ValueError("weights must be a 1-D spectrum")
    if w.size < filter_length:
        raise ValueError(
            f"weight spectrum of length {w.size} cannot constrain {filter_length} taps"
        )
    acorr = np.fft.ifft(w**2).real
    block = scipy.linalg.toeplitz(acorr[:filter_length])
    return scipy.linalg.block_diag(*([block] * num_loudspeakers))


def _solve_normal_equations(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.solve(gram, rhs, assume_a="pos")
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericsError(
            "regularized normal equations are singular; the scene is not "
            "invertible at this regularization strength"
        ) from exc


def solve_regularized(
    system: LinearSystem,
    reg_lambda: float,
    weights: np.ndarray | None = None,
    grid: FrequencyGrid | None = None,
) -> EqualizerFilter:
    """Ridge or spectrally weighted least squares on one design system.

    Without weights the penalty is reg_lambda times the plain coefficient
    energy; with weights it is reg_lambda times the weighted spectral energy
    of the filters. A grid, when given, must match the weight vector length.
    """
    if not reg_lambda >= 0:
        raise ValueError("reg_lambda must be nonnegative")
    sys_weights = weights if weights is not None else system.weights
    m = system.matrix
    gram = m.T @ m
    if sys_weights is None:
        gram[np.diag_indices_from(gram)] += reg_lambda
    else:
        if grid is not None and np.asarray(sys_weights).size != grid.fft_size:
            raise ValueError(
                f"weights length {np.asarray(sys_weights).size} does not match fft_size {grid.fft_size}"
            )
        gram += reg_lambda * _spectral_penalty(
            sys_weights, system.num_loudspeakers, system.filter_length
        )
    coef = _solve_normal_equations(gram, m.T @ system.target)
    return EqualizerFilter(
        coef.reshape(system.num_loudspeakers, system.filter_length),
        system.acausal_delay,
    )


def _resolve_fft_size(config: DesignConfig, speaker_length: int) -> int:
    if config.fft_size is not None:
        return int(config.fft_size)
    return default_fft_size(speaker_length, config.filter_length)


def solve_robust(scenario: Scenario, g: ImpulseResponse, config: DesignConfig) -> EqualizerFilter:
    """Multi-set weighted design: one filter serving every measurement set.

    Per-set systems are reduced individually and their normal equations
    averaged, so a set count change leaves the regularization strength
    comparable and a scenario of identical copies solves exactly like a
    single set. Weights come from the set-averaged spectra.
    """
    grid = FrequencyGrid(
        _resolve_fft_size(config, scenario.sets[0].speaker_length), scenario.sample_rate_hz
    )
    systems = [
        reduce_to_rtf(ms, g, config.filter_length, config.acausal_delay)
        for ms in scenario.sets
    ]
    gram = None
    rhs = None
    for system in systems:
        m = system.matrix
        gram = m.T @ m if gram is None else gram + m.T @ m
        part = m.T @ system.target
        rhs = part if rhs is None else rhs + part
    gram /= scenario.num_sets
    rhs /= scenario.num_sets

    _, weights = frequency_weights(scenario.sets, g, config.reg_beta, grid)
    gram += config.reg_lambda * _spectral_penalty(
        weights, scenario.num_loudspeakers, config.filter_length
    )
    coef = _solve_normal_equations(gram, rhs)
    return EqualizerFilter(
        coef.reshape(scenario.num_loudspeakers, config.filter_length),
        config.acausal_delay,
        _config_echo(config, scenario),
        scenario_fingerprint(scenario),
    )


def _config_echo(config: DesignConfig, scenario: Scenario) -> dict:
    return {
        "variant": config.variant,
        "L_A": config.filter_length,
        "d_H": config.acausal_delay,
        "lambda": config.reg_lambda,
        "beta": config.reg_beta,
        "L_FFT": _resolve_fft_size(config, scenario.sets[0].speaker_length),
    }


def design_filter(scenario: Scenario, g: ImpulseResponse, config: DesignConfig) -> EqualizerFilter:
    """Design under the configured variant.

    The single-set variants (everything except MFR_DELTA_LS) work on the
    first measurement set of the scenario; the multi-set variant averages
    over all of them.
    """
    first = scenario.sets[0]
    if config.variant == "LS_ATF":
        filt = solve_ls_atf(assemble_atf_system(first, g, config.filter_length))
    elif config.variant in ("RLS", "R_DELTA_LS"):
        system = reduce_to_rtf(first, g, config.filter_length, config.acausal_delay)
        filt = solve_regularized(system, config.reg_lambda)
    elif config.variant == "FR_DELTA_LS":
        grid = FrequencyGrid(
            _resolve_fft_size(config, first.speaker_length), scenario.sample_rate_hz
        )
        system = reduce_to_rtf(first, g, config.filter_length, config.acausal_delay)
        _, weights = frequency_weights(first, g, config.reg_beta, grid)
        filt = solve_regularized(system, config.reg_lambda, weights, grid)
    else:
        return solve_robust(scenario, g, config)
    return replace(
        filt,
        config=_config_echo(config, scenario),
        scenario_fingerprint=scenario_fingerprint(scenario),
    )
