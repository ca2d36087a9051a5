"""Multipath component extraction.

Implements greedy matching pursuit on the oversampled beamspace grid, a
driver that interleaves peak picking with least-squares amplitude refitting
on a commit schedule, and a path-wise expectation-maximization refinement
pass.  All estimators are deterministic functions of their inputs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .beamspace import (
    BeamspaceGrid,
    GridSpec,
    beamspace_point,
    beamspace_transform,
    subtract_path,
)
from .sounder import FrequencyResponse, PathParams, SounderConfig, synthesize_response

logger = logging.getLogger(__name__)

# condition-number ceiling beyond which a dictionary Gram matrix is treated
# as numerically singular
GRAM_CONDITION_LIMIT = 1e12


class DegenerateGeometryError(ValueError):
    """Raised when LS geometry columns are too close to linearly dependent.

    ``pairs`` holds (index_a, index_b, coherence) triples for the most nearly
    duplicate column pairs, most coherent first.
    """

    def __init__(self, condition: float, pairs: list[tuple[int, int, float]]):
        self.condition = condition
        self.pairs = pairs
        detail = ", ".join(f"({a},{b}) coherence {c:.6f}" for a, b, c in pairs[:5])
        super().__init__(
            f"LS dictionary numerically singular (condition {condition:.3e}); "
            f"near-duplicate geometry columns: {detail}"
        )


@dataclass(frozen=True)
class ExtractionConfig:
    """Knobs of the greedy-LS driver.

    ``k_dom`` is the total committed-path budget; each outer iteration detects
    ``k_g`` candidate peaks, refits their amplitudes by LS against the current
    residual, and commits the ``k_up`` strongest.
    """

    k_dom: int
    k_g: int = 4
    k_up: int = 2
    grid: GridSpec = field(default_factory=GridSpec)
    residual_stop: float = 1e-6
    final_global_ls: bool = True
    refine_peaks: bool = False

    def __post_init__(self):
        if self.k_dom < 1:
            raise ValueError("k_dom must be >= 1")
        if not 1 <= self.k_up <= self.k_g:
            raise ValueError(
                f"require 1 <= k_up <= k_g, got k_up={self.k_up}, k_g={self.k_g}"
            )
        if self.residual_stop < 0:
            raise ValueError("residual_stop must be >= 0")


@dataclass
class ExtractionTrace:
    """Per-commit and per-solve diagnostics of one greedy-LS run."""

    residual_power: list[float] = field(default_factory=list)
    committed_gain_power: list[float] = field(default_factory=list)
    ls_condition: list[float] = field(default_factory=list)
    initial_power: float = 0.0
    dropped_duplicates: int = 0


def find_peak(grid: BeamspaceGrid) -> tuple[float, float, float, complex]:
    """Coordinates and complex value of the maximum-magnitude grid entry.

    Exact magnitude ties resolve to the lowest (aoa, aod, delay) index triple
    in lexicographic order.  An all-zero grid reports peak value 0.
    """
    values = grid.values
    if values.size == 0:
        raise ValueError("empty beamspace grid")
    flat = int(np.argmax(np.abs(values)))
    i, j, l = np.unravel_index(flat, values.shape)
    return (
        float(grid.aoa_axis[i]),
        float(grid.aod_axis[j]),
        float(grid.delay_axis[l]),
        complex(values[i, j, l]),
    )


def _argmax_peak(values: np.ndarray) -> tuple[int, int, int, complex]:
    flat = int(np.argmax(np.abs(values)))
    i, j, l = np.unravel_index(flat, values.shape)
    return int(i), int(j), int(l), complex(values[i, j, l])


def _parabolic_offset(y_lo: float, y_0: float, y_hi: float) -> float:
    "Vertex offset in [-0.5, 0.5] grid steps of the parabola through 3 samples."
    denom = y_lo - 2.0 * y_0 + y_hi
    if denom >= 0:  # not a proper local maximum
        return 0.0
    return float(np.clip(0.5 * (y_lo - y_hi) / denom, -0.5, 0.5))


def _refine_peak(
    values: np.ndarray, i: int, j: int, l: int, grid: BeamspaceGrid
) -> tuple[float, float, float]:
    """Sub-grid peak coordinates by per-axis quadratic interpolation of |value|.

    Angle axes wrap periodically; the delay axis skips refinement at its
    edges.  Offsets are clamped to half a grid step per axis.
    """
    n_aoa, n_aod, n_tau = values.shape
    mag = np.abs
    d_aoa = _parabolic_offset(
        mag(values[(i - 1) % n_aoa, j, l]), mag(values[i, j, l]),
        mag(values[(i + 1) % n_aoa, j, l]))
    d_aod = _parabolic_offset(
        mag(values[i, (j - 1) % n_aod, l]), mag(values[i, j, l]),
        mag(values[i, (j + 1) % n_aod, l]))
    if 0 < l < n_tau - 1:
        d_tau = _parabolic_offset(
            mag(values[i, j, l - 1]), mag(values[i, j, l]),
            mag(values[i, j, l + 1]))
    else:
        d_tau = 0.0
    aoa = float(grid.aoa_axis[i]) + d_aoa / n_aoa
    if aoa < -0.5:
        aoa += 1.0
    aod = float(grid.aod_axis[j]) + d_aod / n_aod
    if aod < -0.5:
        aod += 1.0
    tau_step = float(grid.delay_axis[1] - grid.delay_axis[0]) if n_tau > 1 else 0.0
    tau = max(0.0, float(grid.delay_axis[l]) + d_tau * tau_step)
    return aoa, aod, tau


def greedy_extract(
    response: FrequencyResponse, spec: GridSpec, count: int
) -> list[PathParams]:
    """Plain greedy matching pursuit (iterative peak subtraction).

    Repeats ``count`` times: locate the strongest beamspace peak, record its
    grid coordinates and complex value as a path estimate, subtract that
    path's analytic beamspace response, continue on the residual grid.
    Returns the estimates in detection order; stops early only if the
    residual grid becomes exactly zero.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    cfg = response.config
    grid = beamspace_transform(response, spec)
    values = grid.values
    aoa_ax, aod_ax, tau_ax = grid.aoa_axis, grid.aod_axis, grid.delay_axis
    estimates: list[PathParams] = []
    for _ in range(count):
        i, j, l, val = _argmax_peak(values)
        if val == 0:
            break
        path = PathParams(gain=val, delay=float(tau_ax[l]), aod=float(aod_ax[j]),
                          aoa=float(aoa_ax[i]))
        estimates.append(path)
        subtract_path(values, path, spec, cfg)
    return estimates


def _dictionary_gram(
    geometry: list[tuple[float, float, float]], config: SounderConfig
) -> np.ndarray:
    """Gram matrix of the space-frequency dictionary columns, assembled from
    closed-form per-axis inner products (the full columns are never built)."""
    from .beamspace import angle_kernel, delay_kernel

    delays = np.array([g[0] for g in geometry])
    aods = np.array([g[1] for g in geometry])
    aoas = np.array([g[2] for g in geometry])
    d_rx = angle_kernel(aoas[None, :] - aoas[:, None], config.n_rx)
    d_tx = angle_kernel(aods[:, None] - aods[None, :], config.n_tx)
    d_f = delay_kernel(
        delays[:, None] - delays[None, :], config.bandwidth_hz, config.n_freq
    )
    scale = config.n_rx * config.n_tx * config.n_freq
    return scale * d_rx * d_tx * d_f


def _matched_filter_rhs(
    response: FrequencyResponse, geometry: list[tuple[float, float, float]]
) -> np.ndarray:
    "Dictionary-column inner products with the response (A^H h), one per geometry."
    cfg = response.config
    delays = np.array([g[0] for g in geometry])
    aods = np.array([g[1] for g in geometry])
    aoas = np.array([g[2] for g in geometry])
    a_rx = np.exp(-2j * np.pi * np.outer(np.arange(cfg.n_rx), aoas))  # [r, k]
    a_tx = np.exp(2j * np.pi * np.outer(np.arange(cfg.n_tx), aods))  # [t, k]
    a_f = np.exp(2j * np.pi * np.outer(cfg.freq_grid, delays))  # [m, k]
    return np.einsum("rk,tk,mk,rtm->k", a_rx, a_tx, a_f, response.values, optimize=True)


def _coherence_pairs(gram: np.ndarray) -> list[tuple[int, int, float]]:
    "Column pairs ranked by normalized coherence, most coherent first."
    k = gram.shape[0]
    norm = np.sqrt(np.abs(np.diag(gram)))
    coh = np.abs(gram) / np.outer(norm, norm)
    pairs = [(a, b, float(coh[a, b])) for a in range(k) for b in range(a + 1, k)]
    pairs.sort(key=lambda p: -p[2])
    return pairs


def ls_amplitudes(
    response: FrequencyResponse,
    geometry: list[tuple[float, float, float]],
    config: SounderConfig,
) -> np.ndarray:
    """Least-squares complex amplitudes for fixed path geometries.

    Solves the normal equations (A^H A) alpha = A^H h where column k of A is
    the space-frequency vector of a unit path at geometry (delay, aod, aoa).
    Neither A nor its columns are materialized: the Gram matrix comes from
    closed-form kernel products and the right-hand side from matched
    filtering.

    Raises
    ------
    DegenerateGeometryError
        If the Gram condition estimate exceeds ``GRAM_CONDITION_LIMIT``; the
        error names the most nearly duplicate geometry pairs.
    """
    if not geometry:
        raise ValueError("geometry list must be non-empty")
    dim = config.n_rx * config.n_tx * config.n_freq
    if len(geometry) >= dim:
        raise ValueError(f"{len(geometry)} paths >= signal space dimension {dim}")
    if response.config != config:
        raise ValueError("response and config disagree")
    gram = _dictionary_gram(geometry, config)
    condition = float(np.linalg.cond(gram))
    if not np.isfinite(condition) or condition > GRAM_CONDITION_LIMIT:
        raise DegenerateGeometryError(condition, _coherence_pairs(gram))
    rhs = _matched_filter_rhs(response, geometry)
    return np.linalg.solve(gram, rhs)


def ls_condition(
    geometry: list[tuple[float, float, float]], config: SounderConfig
) -> float:
    "Condition number of the dictionary Gram matrix for a geometry set."
    return float(np.linalg.cond(_dictionary_gram(geometry, config)))


def _ls_with_dedup(
    response: FrequencyResponse,
    geometry: list[tuple[float, float, float]],
    config: SounderConfig,
) -> tuple[np.ndarray, float, list[int], int]:
    """LS solve that drops later near-duplicate columns until well posed.

    Returns (amplitudes, condition, kept original indices, dropped count).
    """
    kept = list(range(len(geometry)))
    dropped = 0
    while True:
        subset = [geometry[i] for i in kept]
        try:
            amps = ls_amplitudes(response, subset, config)
            cond = ls_condition(subset, config)
            return amps, cond, kept, dropped
        except DegenerateGeometryError as err:
            if len(kept) == 1:
                raise
            a, b, coh = err.pairs[0]
            drop_local = max(a, b)
            logger.info(
                "dropping near-duplicate LS candidate %d (coherence %.6f with %d)",
                kept[drop_local], coh, kept[min(a, b)],
            )
            del kept[drop_local]
            dropped += 1


def greedy_ls(
    response: FrequencyResponse,
    config: SounderConfig,
    xcfg: ExtractionConfig,
) -> tuple[list[PathParams], ExtractionTrace]:
    """Greedy matching pursuit with in-loop LS amplitude refitting.

    Outer loop, repeated until ``k_dom`` paths are committed or the residual
    power ratio falls below ``residual_stop``:

    1. run ``k_g`` greedy peak-pick-and-subtract steps on a scratch copy of
       the current residual grid;
    2. LS-refit the amplitudes of those candidates against the current
       residual response (degenerate candidates are dropped, later one
       first);
    3. commit the ``k_up`` candidates with the largest refitted power.  Each
       commit subtracts the candidate's exact single-path response from the
       frequency-domain residual, using the exactly optimal single-path
       amplitude for the residual at commit time, so the recorded residual
       power never increases.  Scratch subtractions from step 1 are never
       carried over.

    If ``final_global_ls`` is set, one LS refit of all committed geometries
    against the original measurement replaces the committed amplitudes at the
    end (exact duplicate geometries are merged by dropping the later one).
    With ``refine_peaks``, candidate coordinates are nudged off-grid by
    per-axis quadratic interpolation around each detected peak; estimates
    are grid-quantized otherwise.

    Returns the committed paths in commit order plus an
    :class:`ExtractionTrace` with residual power after each commit.
    """
    if response.config != config:
        raise ValueError("response and config disagree")
    spec = xcfg.grid
    cfg = config
    residual = response.values.copy()
    res_fr = FrequencyResponse(values=residual, config=cfg)
    trace = ExtractionTrace(initial_power=float(np.sum(np.abs(residual) ** 2)))
    if trace.initial_power == 0:
        return [], trace

    grid = beamspace_transform(res_fr, spec)
    gvals = grid.values
    aoa_ax, aod_ax, tau_ax = grid.aoa_axis, grid.aod_axis, grid.delay_axis
    committed: list[PathParams] = []

    while len(committed) < xcfg.k_dom:
        res_power = float(np.sum(np.abs(residual) ** 2))
        if res_power / trace.initial_power <= xcfg.residual_stop:
            break

        # step 1: k_g scratch peak picks (raw CLEAN subtraction, not committed)
        work = gvals.copy()
        candidates: list[PathParams] = []
        for _ in range(xcfg.k_g):
            i, j, l, val = _argmax_peak(work)
            if val == 0:
                break
            if xcfg.refine_peaks:
                aoa, aod, tau = _refine_peak(work, i, j, l, grid)
            else:
                aoa, aod, tau = float(aoa_ax[i]), float(aod_ax[j]), float(tau_ax[l])
            cand = PathParams(gain=val, delay=tau, aod=aod, aoa=aoa)
            candidates.append(cand)
            subtract_path(work, cand, spec, cfg)
        if not candidates:
            break

        # step 2: joint LS against the current residual ranks the candidates
        geometry = [(c.delay, c.aod, c.aoa) for c in candidates]
        amps, cond, kept, dropped = _ls_with_dedup(res_fr, geometry, cfg)
        trace.ls_condition.append(cond)
        trace.dropped_duplicates += dropped
        order = np.argsort(-np.abs(amps) ** 2, kind="stable")

        # step 3: commit the strongest k_up with exact per-commit amplitudes
        n_commit = min(xcfg.k_up, xcfg.k_dom - len(committed), len(kept))
        for rank in range(n_commit):
            cand = candidates[kept[int(order[rank])]]
            alpha = beamspace_point(res_fr, cand.aoa, cand.aod, cand.delay)
            path = PathParams(gain=alpha, delay=cand.delay, aod=cand.aod, aoa=cand.aoa)
            committed.append(path)
            residual -= synthesize_response(cfg, [path]).values
            subtract_path(gvals, path, spec, cfg)
            trace.residual_power.append(float(np.sum(np.abs(residual) ** 2)))
            trace.committed_gain_power.append(abs(alpha) ** 2)

    if xcfg.final_global_ls and committed:
        committed = _global_refit(response, committed, cfg, trace)
    return committed, trace


def _global_refit(
    response: FrequencyResponse,
    paths: list[PathParams],
    config: SounderConfig,
    trace: ExtractionTrace,
) -> list[PathParams]:
    "Refit all committed amplitudes jointly against the original measurement."
    unique: list[PathParams] = []
    seen: set[tuple[float, float, float]] = set()
    for p in paths:
        key = (p.delay, p.aod, p.aoa)
        if key in seen:
            logger.info("merging exact duplicate committed geometry %s", key)
            trace.dropped_duplicates += 1
            continue
        seen.add(key)
        unique.append(p)
    geometry = [(p.delay, p.aod, p.aoa) for p in unique]
    amps, cond, kept, dropped = _ls_with_dedup(response, geometry, config)
    trace.ls_condition.append(cond)
    trace.dropped_duplicates += dropped
    return [
        PathParams(gain=complex(a), delay=unique[i].delay,
                   aod=unique[i].aod, aoa=unique[i].aoa)
        for a, i in zip(amps, kept)
    ]


def reconstruct(paths: list[PathParams], config: SounderConfig) -> FrequencyResponse:
    "Frequency response of an estimated path set (same formula as synthesis)."
    return synthesize_response(config, paths)


def reconstruction_error(estimate: FrequencyResponse, truth: FrequencyResponse) -> float:
    """Normalized mean-square reconstruction error.

    Squared Frobenius deviation summed over the frequency grid, divided by
    the total squared Frobenius norm of the truth (0 for a perfect match,
    1 for an all-zero estimate).
    """
    if estimate.values.shape != truth.values.shape:
        raise ValueError("estimate and truth shapes differ")
    denom = float(np.sum(np.abs(truth.values) ** 2))
    if denom == 0:
        raise ValueError("truth response has zero power")
    return float(np.sum(np.abs(estimate.values - truth.values) ** 2)) / denom


def sage_refine(
    response: FrequencyResponse,
    paths: list[PathParams],
    config: SounderConfig,
    spec: GridSpec,
    sweeps: int,
) -> tuple[list[PathParams], list[float]]:
    """Path-wise expectation-maximization refinement of existing estimates.

    Each sweep revisits every path k: the measurement minus all other current
    path responses isolates path k plus residual (E-step); its beamspace peak
    re-estimates the geometry and the peak value re-estimates the amplitude
    (M-step, full-grid search).  Returns the refined paths and the normalized
    reconstruction error after each sweep; for grid-quantized inputs the
    error sequence is non-increasing.
    """
    if not paths:
        raise ValueError("path list must be non-empty")
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if response.config != config:
        raise ValueError("response and config disagree")
    current = list(paths)
    components = [synthesize_response(config, [p]).values for p in current]
    total = np.sum(components, axis=0)
    errors: list[float] = []
    for _ in range(sweeps):
        for k in range(len(current)):
            isolated = response.values - total + components[k]
            grid = beamspace_transform(
                FrequencyResponse(values=isolated, config=config), spec
            )
            i, j, l, val = _argmax_peak(grid.values)
            new = PathParams(
                gain=val,
                delay=float(grid.delay_axis[l]),
                aod=float(grid.aod_axis[j]),
                aoa=float(grid.aoa_axis[i]),
            )
            total = total - components[k]
            components[k] = synthesize_response(config, [new]).values
            total = total + components[k]
            current[k] = new
        estimate = FrequencyResponse(values=total.copy(), config=config)
        errors.append(reconstruction_error(estimate, response))
    return current, errors
