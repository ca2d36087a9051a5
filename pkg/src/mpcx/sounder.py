"""Idealized MIMO sounder forward model.

Synthesizes the spatial frequency response of a static multipath channel
measured by uniform linear arrays at TX and RX, plus the critically sampled
angle-delay (virtual) representation and measurement noise.

Conventions used throughout the package:

* Angles are spatial frequencies in cycles, range [-0.5, 0.5] at critical
  (half-wavelength) element spacing.
* The steering vector element m is exp(+j*2*pi*theta*m); the TX side of the
  channel enters through its conjugate.
* The frequency axis is a uniform n_freq-point grid on [-W/2, +W/2) and all
  frequency integrals are replaced by sample means over that grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PathParams:
    """One multipath component: complex gain, delay and angle parameters.

    Parameters
    ----------
    gain : complex
        Linear complex path amplitude.
    delay : float
        Propagation delay in seconds, >= 0.
    aod : float
        Angle of departure as a spatial frequency in cycles, in [-0.5, 0.5].
    aoa : float
        Angle of arrival as a spatial frequency in cycles, in [-0.5, 0.5].
    """

    gain: complex
    delay: float
    aod: float
    aoa: float

    def __post_init__(self):
        if not -0.5 <= self.aod <= 0.5:
            raise ValueError(f"aod {self.aod} outside [-0.5, 0.5] cycles")
        if not -0.5 <= self.aoa <= 0.5:
            raise ValueError(f"aoa {self.aoa} outside [-0.5, 0.5] cycles")
        if self.delay < 0:
            raise ValueError(f"delay {self.delay} must be >= 0")

    @property
    def power(self) -> float:
        return abs(self.gain) ** 2


@dataclass(frozen=True)
class SounderConfig:
    """Array sizes and sampling parameters of the idealized sounder.

    ``carrier_hz`` only documents the physical-angle mapping; it enters no
    computation here.
    """

    n_tx: int
    n_rx: int
    bandwidth_hz: float
    n_freq: int
    carrier_hz: float = 28e9

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1 or self.n_freq < 1:
            raise ValueError("n_tx, n_rx and n_freq must be positive integers")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.carrier_hz <= 0:
            raise ValueError("carrier_hz must be positive")

    @property
    def delay_res(self) -> float:
        "Delay resolution 1/W in seconds."
        return 1.0 / self.bandwidth_hz

    @property
    def aod_res(self) -> float:
        "TX spatial-frequency resolution 1/n_tx in cycles."
        return 1.0 / self.n_tx

    @property
    def aoa_res(self) -> float:
        "RX spatial-frequency resolution 1/n_rx in cycles."
        return 1.0 / self.n_rx

    @property
    def duration(self) -> float:
        "Observation duration T = n_freq / W in seconds."
        return self.n_freq / self.bandwidth_hz

    @property
    def freq_grid(self) -> np.ndarray:
        "Uniform baseband frequency samples on [-W/2, +W/2)."
        w = self.bandwidth_hz
        return -w / 2.0 + np.arange(self.n_freq) * (w / self.n_freq)


@dataclass(frozen=True)
class FrequencyResponse:
    """Complex response tensor indexed (rx antenna, tx antenna, frequency sample)."""

    values: np.ndarray
    config: SounderConfig

    def __post_init__(self):
        expected = (self.config.n_rx, self.config.n_tx, self.config.n_freq)
        if self.values.shape != expected:
            raise ValueError(
                f"response shape {self.values.shape} does not match config {expected}"
            )

    @property
    def freq_grid(self) -> np.ndarray:
        return self.config.freq_grid

    @property
    def power(self) -> float:
        "Total squared Frobenius power summed over all tensor entries."
        return float(np.sum(np.abs(self.values) ** 2))


@dataclass(frozen=True)
class VirtualCoefficients:
    """Angle-delay channel coefficients on the critical resolution lattice.

    ``values[i, k, l]`` is the coefficient at RX spatial frequency i/n_rx,
    TX spatial frequency k/n_tx and delay l/W, for l = 0..L.
    """

    values: np.ndarray
    L: int


def resolvable_delays(tau_max: float, bandwidth_hz: float) -> int:
    """Number of resolvable delays L = ceil(tau_max * W).

    A small downward nudge guards against float noise pushing an exact
    integer product over the next ceiling.
    """
    x = tau_max * bandwidth_hz
    return int(math.ceil(x - 1e-9 * max(1.0, abs(x))))


def spatial_frequency(phi_deg, spacing_ratio: float = 0.5):
    """Map a physical angle (degrees from broadside) to spatial frequency in cycles.

    theta = (d / lambda) * sin(phi).  At critical spacing d/lambda = 0.5 the
    result lies in [-0.5, 0.5].
    """
    phi = np.asarray(phi_deg, dtype=float)
    if np.any(phi < -90.0) or np.any(phi > 90.0):
        raise ValueError("physical angle must lie in [-90, 90] degrees")
    if spacing_ratio <= 0:
        raise ValueError("spacing_ratio must be positive")
    out = spacing_ratio * np.sin(np.deg2rad(phi))
    return float(out) if np.isscalar(phi_deg) else out


def steering_vector(theta: float, n: int) -> np.ndarray:
    """Length-n array steering vector with element m equal to exp(+j*2*pi*theta*m)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.exp(2j * np.pi * theta * np.arange(n))


def synthesize_response(config: SounderConfig, paths: list[PathParams]) -> FrequencyResponse:
    """Generate the sounder's spatial frequency response for a set of paths.

    values[r, t, k] = sum_n gain_n * exp(+j2pi*aoa_n*r) * exp(-j2pi*aod_n*t)
                            * exp(-j2pi*delay_n*f_k)

    The superposition is linear in the path list; an empty list yields the
    all-zero response.

    Raises
    ------
    ValueError
        If any path delay is >= the observation duration T (such a delay
        aliases on the sampled frequency grid).
    """
    values = np.zeros((config.n_rx, config.n_tx, config.n_freq), dtype=complex)
    if paths:
        t_obs = config.duration
        for p in paths:
            if p.delay >= t_obs:
                raise ValueError(
                    f"path delay {p.delay} s >= observation duration {t_obs} s"
                )
        rx = np.arange(config.n_rx)
        tx = np.arange(config.n_tx)
        freqs = config.freq_grid
        for p in paths:
            a_rx = np.exp(2j * np.pi * p.aoa * rx)
            a_tx = np.exp(-2j * np.pi * p.aod * tx)
            a_f = np.exp(-2j * np.pi * p.delay * freqs)
            values += p.gain * a_rx[:, None, None] * a_tx[None, :, None] * a_f[None, None, :]
    return FrequencyResponse(values=values, config=config)


def add_awgn(
    response: FrequencyResponse, noise_power_per_sample: float, seed: int
) -> FrequencyResponse:
    """Add independent circular complex Gaussian noise to every tensor entry.

    ``noise_power_per_sample`` is the variance of each complex entry (real and
    imaginary parts each carry half of it).  Output is deterministic for a
    fixed seed.
    """
    if noise_power_per_sample < 0:
        raise ValueError("noise power must be >= 0")
    if noise_power_per_sample == 0:
        return FrequencyResponse(values=response.values.copy(), config=response.config)
    rng = np.random.default_rng(seed)
    shape = response.values.shape
    sigma = math.sqrt(noise_power_per_sample / 2.0)
    noise = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return FrequencyResponse(values=response.values + noise, config=response.config)


def virtual_coefficients(response: FrequencyResponse, tau_max: float) -> VirtualCoefficients:
    """Angle-delay coefficients of a response on the critical lattice.

    Evaluates, for i = 0..n_rx-1, k = 0..n_tx-1, l = 0..L,

    Hv[i, k, l] = (1 / (n_rx*n_tx*n_freq)) *
        sum_{r,t,m} conj(a_rx(i/n_rx))_r * H[r,t,m] * a_tx(k/n_tx)_t
                    * exp(+j2pi*(l/W)*f_m)

    which is the frequency integral of the sampled representation replaced by
    the uniform sample mean.
    """
    cfg = response.config
    if tau_max > cfg.duration:
        raise ValueError(f"tau_max {tau_max} exceeds observation duration {cfg.duration}")
    L = resolvable_delays(tau_max, cfg.bandwidth_hz)
    h = response.values
    # DFT along rx: (1/n_rx) sum_r exp(-j2pi i r / n_rx) H
    out = np.fft.fft(h, axis=0) / cfg.n_rx
    # inverse DFT along tx already carries the 1/n_tx factor
    out = np.fft.ifft(out, axis=1)
    # delay axis: (1/n_freq) sum_m exp(+j2pi (l/W) f_m) H
    #   = (-1)^l * ifft along freq, truncated to l = 0..L
    out = np.fft.ifft(out, axis=2)[:, :, : L + 1]
    signs = (-1.0) ** np.arange(L + 1)
    out = out * signs[None, None, :]
    return VirtualCoefficients(values=out, L=L)


def reconstruct_from_virtual(
    coeffs: VirtualCoefficients, config: SounderConfig
) -> FrequencyResponse:
    """Evaluate the sampled (virtual) representation back on the frequency grid.

    Inverse of :func:`virtual_coefficients` for channels supported on the
    critical lattice.
    """
    v = coeffs.values
    if v.ndim != 3 or v.shape[0] != config.n_rx or v.shape[1] != config.n_tx:
        raise ValueError(
            f"coefficient shape {v.shape} inconsistent with config "
            f"({config.n_rx}, {config.n_tx}, L+1)"
        )
    if v.shape[2] > config.n_freq:
        raise ValueError("more delay taps than frequency samples")
    n_rx, n_tx, n_l = v.shape
    basis_rx = np.exp(
        2j * np.pi * np.outer(np.arange(n_rx), np.arange(n_rx)) / n_rx
    )  # [r, i]
    basis_tx = np.exp(
        -2j * np.pi * np.outer(np.arange(n_tx), np.arange(n_tx)) / n_tx
    )  # [t, k]
    delays = np.arange(n_l) / config.bandwidth_hz
    basis_f = np.exp(-2j * np.pi * np.outer(delays, config.freq_grid))  # [l, m]
    values = np.einsum("ikl,ri,tk,lm->rtm", v, basis_rx, basis_tx, basis_f, optimize=True)
    return FrequencyResponse(values=values, config=config)


def signal_space_dimension(config: SounderConfig) -> int:
    "Dimension of the space-frequency measurement space, n_tx * n_rx * n_freq."
    return config.n_tx * config.n_rx * config.n_freq


def filter_by_dynamic_range(paths: list[PathParams], dr_db: float) -> list[PathParams]:
    """Keep paths whose power is within ``dr_db`` of the strongest path.

    Retains exactly the paths with |gain|^2 >= max_power / 10^(dr_db/10),
    preserving input order.
    """
    if not paths:
        raise ValueError("path list must be non-empty")
    if dr_db <= 0:
        raise ValueError("dynamic range must be positive (dB)")
    powers = np.array([p.power for p in paths])
    threshold = powers.max() / 10.0 ** (dr_db / 10.0)
    return [p for p, pw in zip(paths, powers) if pw >= threshold]
