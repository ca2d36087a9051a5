import numpy as np
import pytest

from mpcx import (
    FrequencyResponse,
    PathParams,
    SounderConfig,
    add_awgn,
    filter_by_dynamic_range,
    reconstruct_from_virtual,
    resolvable_delays,
    signal_space_dimension,
    spatial_frequency,
    steering_vector,
    synthesize_response,
    virtual_coefficients,
)
from mpcx.sounder import VirtualCoefficients

DESK = SounderConfig(n_tx=8, n_rx=8, bandwidth_hz=1e9, n_freq=32)


def synth_oracle(config, paths):
    "Independent scalar-loop evaluation of the forward model."
    out = np.zeros((config.n_rx, config.n_tx, config.n_freq), dtype=complex)
    for r in range(config.n_rx):
        for t in range(config.n_tx):
            for k, f in enumerate(config.freq_grid):
                for p in paths:
                    out[r, t, k] += (
                        p.gain
                        * np.exp(2j * np.pi * p.aoa * r)
                        * np.exp(-2j * np.pi * p.aod * t)
                        * np.exp(-2j * np.pi * p.delay * f)
                    )
    return out


def test_spatial_frequency_values():
    assert spatial_frequency(0.0) == 0.0
    assert spatial_frequency(90.0) == pytest.approx(0.5, abs=1e-15)
    assert spatial_frequency(30.0) == pytest.approx(0.25, abs=1e-15)
    assert spatial_frequency(-90.0) == pytest.approx(-0.5, abs=1e-15)


def test_spatial_frequency_rejects_out_of_range():
    with pytest.raises(ValueError):
        spatial_frequency(90.5)
    with pytest.raises(ValueError):
        spatial_frequency(-120.0)


def test_steering_vector_known_values():
    assert np.allclose(steering_vector(0.0, 4), np.ones(4))
    assert np.allclose(steering_vector(0.5, 2), [1, -1])
    assert np.allclose(steering_vector(0.25, 4), [1, 1j, -1, -1j])


def test_steering_vector_norm():
    rng = np.random.default_rng(3)
    for _ in range(20):
        theta = rng.uniform(-0.5, 0.5)
        n = int(rng.integers(1, 40))
        v = steering_vector(theta, n)
        assert np.linalg.norm(v) ** 2 == pytest.approx(n, rel=1e-12)


def test_path_params_validation():
    PathParams(gain=1 + 0j, delay=0.0, aod=0.5, aoa=-0.5)
    with pytest.raises(ValueError):
        PathParams(gain=1 + 0j, delay=-1e-9, aod=0.0, aoa=0.0)
    with pytest.raises(ValueError):
        PathParams(gain=1 + 0j, delay=0.0, aod=0.6, aoa=0.0)
    with pytest.raises(ValueError):
        PathParams(gain=1 + 0j, delay=0.0, aod=0.0, aoa=-0.51)


def test_config_resolutions_exact():
    cfg = SounderConfig(n_tx=35, n_rx=35, bandwidth_hz=1e9, n_freq=233)
    assert cfg.delay_res * cfg.bandwidth_hz == 1.0
    assert cfg.aod_res * cfg.n_tx == 1.0
    assert cfg.aoa_res * cfg.n_rx == 1.0
    assert cfg.delay_res == 1e-9
    assert cfg.duration == 233e-9


def test_freq_grid_layout():
    grid = DESK.freq_grid
    assert len(grid) == DESK.n_freq
    assert grid[0] == -DESK.bandwidth_hz / 2
    steps = np.diff(grid)
    assert np.allclose(steps, DESK.bandwidth_hz / DESK.n_freq)
    assert grid[-1] < DESK.bandwidth_hz / 2


def test_synthesize_trivial_path_is_all_ones():
    resp = synthesize_response(DESK, [PathParams(gain=1 + 0j, delay=0.0,
                                                 aod=0.0, aoa=0.0)])
    assert np.allclose(resp.values, 1.0)


def test_synthesize_matches_scalar_loop_oracle():
    cfg = SounderConfig(n_tx=4, n_rx=4, bandwidth_hz=1e9, n_freq=8)
    path = PathParams(gain=2 + 0j, delay=cfg.delay_res, aod=0.0, aoa=cfg.aoa_res)
    resp = synthesize_response(cfg, [path])
    assert np.allclose(resp.values, synth_oracle(cfg, [path]), atol=1e-12)


def test_synthesize_linearity():
    rng = np.random.default_rng(5)
    mk = lambda: PathParams(gain=complex(rng.normal(), rng.normal()),
                            delay=rng.uniform(0, DESK.duration * 0.9),
                            aod=rng.uniform(-0.5, 0.5),
                            aoa=rng.uniform(-0.5, 0.5))
    a = [mk() for _ in range(3)]
    b = [mk() for _ in range(2)]
    combined = synthesize_response(DESK, a + b)
    split = synthesize_response(DESK, a).values + synthesize_response(DESK, b).values
    assert np.allclose(combined.values, split, atol=1e-12)


def test_synthesize_empty_and_delay_range():
    assert np.all(synthesize_response(DESK, []).values == 0)
    late = PathParams(gain=1 + 0j, delay=DESK.duration, aod=0.0, aoa=0.0)
    with pytest.raises(ValueError):
        synthesize_response(DESK, [late])


def test_response_shape_validation():
    with pytest.raises(ValueError):
        FrequencyResponse(values=np.zeros((2, 2, 2), dtype=complex), config=DESK)


def test_awgn_zero_power_is_identity():
    resp = synthesize_response(DESK, [PathParams(1 + 0j, 1e-9, 0.1, -0.2)])
    noisy = add_awgn(resp, 0.0, seed=9)
    assert np.array_equal(noisy.values, resp.values)


def test_awgn_seeded_determinism():
    resp = synthesize_response(DESK, [PathParams(1 + 0j, 1e-9, 0.1, -0.2)])
    a = add_awgn(resp, 0.5, seed=42)
    b = add_awgn(resp, 0.5, seed=42)
    assert np.array_equal(a.values, b.values)
    c = add_awgn(resp, 0.5, seed=43)
    assert not np.array_equal(a.values, c.values)


def test_awgn_sample_variance():
    # 8*8*32 = 2048 entries per run; accumulate runs for ~10^5 samples
    resp = FrequencyResponse(values=np.zeros((8, 8, 32), dtype=complex),
                             config=DESK)
    samples = []
    for seed in range(50):
        samples.append(add_awgn(resp, 1.0, seed=seed).values.ravel())
    noise = np.concatenate(samples)
    assert noise.size >= 1e5
    var = np.mean(np.abs(noise) ** 2)
    assert abs(var - 1.0) < 0.02


def test_awgn_negative_power_rejected():
    resp = synthesize_response(DESK, [])
    with pytest.raises(ValueError):
        add_awgn(resp, -0.1, seed=0)


def test_resolvable_delays_counts():
    assert resolvable_delays(128e-9, 1e9) == 128
    assert resolvable_delays(128.4e-9, 1e9) == 129
    assert resolvable_delays(0.0, 1e9) == 0


def on_grid_path(rng, cfg, l_max):
    "Random path on the critical virtual lattice."
    i = int(rng.integers(0, cfg.n_rx))
    k = int(rng.integers(0, cfg.n_tx))
    l = int(rng.integers(0, l_max + 1))
    aoa = i / cfg.n_rx
    if aoa > 0.5:
        aoa -= 1.0
    aod = k / cfg.n_tx
    if aod > 0.5:
        aod -= 1.0
    gain = complex(rng.normal(), rng.normal())
    return PathParams(gain=gain, delay=l / cfg.bandwidth_hz, aod=aod, aoa=aoa), (i, k, l)


def test_virtual_coefficients_on_grid_isolation():
    rng = np.random.default_rng(17)
    tau_max = 20 / DESK.bandwidth_hz
    path, (i0, k0, l0) = on_grid_path(rng, DESK, 20)
    resp = synthesize_response(DESK, [path])
    coeffs = virtual_coefficients(resp, tau_max)
    assert coeffs.values.shape == (8, 8, 21)
    peak = coeffs.values[i0, k0, l0]
    assert abs(peak - path.gain) < 1e-9 * abs(path.gain)
    rest = coeffs.values.copy()
    rest[i0, k0, l0] = 0.0
    assert np.max(np.abs(rest)) < 1e-9 * abs(path.gain)


def test_virtual_coefficients_zero_response():
    resp = synthesize_response(DESK, [])
    coeffs = virtual_coefficients(resp, 10e-9)
    assert np.all(coeffs.values == 0)


def test_virtual_coefficients_tau_max_guard():
    resp = synthesize_response(DESK, [])
    with pytest.raises(ValueError):
        virtual_coefficients(resp, DESK.duration * 1.01)


def test_virtual_round_trip_on_grid():
    rng = np.random.default_rng(23)
    tau_max = 24 / DESK.bandwidth_hz
    for _ in range(20):
        n_paths = int(rng.integers(1, 4))
        paths = [on_grid_path(rng, DESK, 24)[0] for _ in range(n_paths)]
        resp = synthesize_response(DESK, paths)
        back = reconstruct_from_virtual(virtual_coefficients(resp, tau_max), DESK)
        err = np.linalg.norm(back.values - resp.values) / np.linalg.norm(resp.values)
        assert err < 1e-9


def test_reconstruct_from_virtual_single_coefficient():
    values = np.zeros((8, 8, 5), dtype=complex)
    i0, k0, l0 = 3, 6, 2
    values[i0, k0, l0] = 1.5 - 0.5j
    resp = reconstruct_from_virtual(VirtualCoefficients(values=values, L=4), DESK)
    oracle = np.zeros((8, 8, 32), dtype=complex)
    for r in range(8):
        for t in range(8):
            for m, f in enumerate(DESK.freq_grid):
                oracle[r, t, m] = (
                    (1.5 - 0.5j)
                    * np.exp(2j * np.pi * i0 / 8 * r)
                    * np.exp(-2j * np.pi * k0 / 8 * t)
                    * np.exp(-2j * np.pi * (l0 / DESK.bandwidth_hz) * f)
                )
    assert np.allclose(resp.values, oracle, atol=1e-12)


def test_reconstruct_from_virtual_shape_guard():
    values = np.zeros((4, 8, 3), dtype=complex)
    with pytest.raises(ValueError):
        reconstruct_from_virtual(VirtualCoefficients(values=values, L=2), DESK)


def test_signal_space_dimension_products():
    assert signal_space_dimension(SounderConfig(1, 1, 1e9, 1)) == 1
    assert signal_space_dimension(SounderConfig(2, 3, 1e9, 5)) == 30


def test_filter_by_dynamic_range_basics():
    mk = lambda db: PathParams(gain=10 ** (db / 20.0) + 0j, delay=0.0,
                               aod=0.0, aoa=0.0)
    equal = [mk(0.0) for _ in range(4)]
    assert filter_by_dynamic_range(equal, 10.0) == equal
    tiers = [mk(0.0), mk(-50.0), mk(-120.0)]
    assert filter_by_dynamic_range(tiers, 100.0) == tiers[:2]
    with pytest.raises(ValueError):
        filter_by_dynamic_range([], 10.0)


def test_filter_by_dynamic_range_brute_force():
    rng = np.random.default_rng(29)
    paths = [
        PathParams(gain=10 ** (rng.uniform(-110.0, 0.0) / 20.0)
                   * np.exp(1j * rng.uniform(0, 2 * np.pi)),
                   delay=0.0, aod=0.0, aoa=0.0)
        for _ in range(252)
    ]
    kept = filter_by_dynamic_range(paths, 100.0)
    threshold = max(p.power for p in paths) / 10.0 ** 10.0
    oracle = [p for p in paths if p.power >= threshold]
    assert kept == oracle
