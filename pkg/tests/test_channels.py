import numpy as np
import pytest

from wsrbeam.channels import (
    CoopChannelSample,
    dbm_to_watt,
    hex_centers,
    pathloss_db,
    pathloss_gain,
    place_coop_network,
    place_network,
    sample_channels,
    sample_coop_channels,
)
from wsrbeam.errors import InvalidArgumentError


def test_dbm_to_watt_reference_points():
    assert dbm_to_watt(30.0) == pytest.approx(1.0, abs=0)
    assert dbm_to_watt(0.0) == pytest.approx(1e-3, rel=1e-15)
    assert dbm_to_watt(38.0) == pytest.approx(10.0 ** 0.8, rel=1e-15)


def test_pathloss_reference_points():
    assert pathloss_db(1.0) == pytest.approx(128.1, abs=1e-12)
    assert pathloss_db(0.1) == pytest.approx(90.5, rel=1e-12)
    # 128.1 + 37.6*log10(0.05), evaluated independently in 64-bit arithmetic.
    assert pathloss_db(0.05) == pytest.approx(128.1 + 37.6 * np.log10(0.05), rel=1e-15)
    assert pathloss_db(0.05) == pytest.approx(79.1812721630343, rel=1e-12)


def test_pathloss_monotone_and_rejects_nonpositive():
    rng = np.random.default_rng(7)
    s = np.sort(rng.uniform(0.01, 10.0, 50))
    vals = pathloss_db(s)
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(InvalidArgumentError):
        pathloss_db(0.0)
    with pytest.raises(InvalidArgumentError):
        pathloss_db(-1.0)


def test_place_network_single_cell():
    geom = place_network(1, 1.0, rng_seed=0)
    assert geom.bs_xy.shape == (1, 2)
    assert np.allclose(geom.bs_xy[0], 0.0)
    assert np.linalg.norm(geom.ue_xy[0] - geom.bs_xy[0]) <= 1.0


def test_place_network_hex_ring_spacing():
    geom = place_network(7, 0.5, rng_seed=0)
    dists = np.linalg.norm(geom.bs_xy[1:] - geom.bs_xy[0], axis=1)
    assert np.allclose(dists, 1.0, rtol=1e-12)


def test_place_network_two_ring_extent():
    # Two full rings: opposite ring-2 corners sit 8*d apart.
    geom = place_network(19, 1.0, rng_seed=3)
    pair = geom.bs_xy[:, None, :] - geom.bs_xy[None, :, :]
    assert np.max(np.linalg.norm(pair, axis=-1)) == pytest.approx(8.0, rel=1e-12)


def test_place_network_ue_constraints():
    geom = place_network(19, 0.4, rng_seed=11)
    d = np.linalg.norm(geom.ue_xy - geom.bs_xy, axis=1)
    assert np.all(d <= 0.4 + 1e-12)
    assert np.all(d >= 0.01)


def test_place_network_rejects_bad_args():
    with pytest.raises(InvalidArgumentError):
        place_network(0, 1.0, 0)
    with pytest.raises(InvalidArgumentError):
        place_network(3, 0.0, 0)


def test_hex_centers_truncates_spiral():
    full = hex_centers(19, 1.0)
    part = hex_centers(10, 1.0)
    assert np.allclose(full[:10], part)


def test_sample_channels_deterministic():
    geom = place_network(4, 0.7, rng_seed=5)
    a = sample_channels(geom, 6, rng_seed=9)
    b = sample_channels(geom, 6, rng_seed=9)
    for j in range(4):
        for k in range(4):
            assert np.array_equal(a.chan[j][k], b.chan[j][k])
    assert np.array_equal(a.alpha, b.alpha)
    c = sample_channels(geom, 6, rng_seed=10)
    assert not np.array_equal(a.chan[0][0], c.chan[0][0])


def test_sample_channels_noise_and_power_constants():
    geom = place_network(2, 0.5, rng_seed=1)
    s = sample_channels(geom, 4, rng_seed=1)
    # -174 dBm/Hz over 10 MHz: 10^((-174-30)/10) * 1e7 W.
    assert np.allclose(s.sigma2, 10.0 ** ((-174.0 - 30.0) / 10.0) * 1e7, rtol=1e-15)
    assert np.allclose(s.sigma2, 3.9810717055349695e-14, rtol=1e-12)
    assert np.allclose(s.power, 10.0 ** 0.8, rtol=1e-15)
    assert np.array_equal(s.alpha, np.ones(2))


def test_sample_channels_weighted_mode_normalized():
    geom = place_network(5, 0.5, rng_seed=2)
    s = sample_channels(geom, 4, rng_seed=2, weighted=True)
    assert abs(s.alpha.sum() - 1.0) < 1e-12
    assert np.all(s.alpha >= 0)


def test_sample_channels_second_moment_matches_pathloss():
    # Monte-Carlo estimate of E|h_i|^2 against the linear pathloss gain.
    geom = place_network(1, 1.0, rng_seed=4)
    dist = geom.distances()[0, 0]
    gain = pathloss_gain(dist)
    acc = 0.0
    n_draws = 10_000
    for i in range(n_draws):
        s = sample_channels(geom, 4, rng_seed=100_000 + i)
        acc += np.mean(np.abs(s.chan[0][0]) ** 2)
    assert acc / n_draws == pytest.approx(gain, rel=0.05)


def test_sample_channels_heterogeneous_nt():
    geom = place_network(3, 0.5, rng_seed=6)
    s = sample_channels(geom, [2, 5, 3], rng_seed=6)
    assert s.nt == (2, 5, 3)
    assert len(s.chan[1][0]) == 5
    assert len(s.chan[2][2]) == 3


def test_sample_channels_rejects_mismatch():
    geom = place_network(3, 0.5, rng_seed=6)
    with pytest.raises(InvalidArgumentError):
        sample_channels(geom, [2, 5], rng_seed=6)
    with pytest.raises(InvalidArgumentError):
        sample_channels(geom, 0, rng_seed=6)


def test_coop_sampling_shapes_and_determinism():
    geom = place_coop_network(2, 3, 0.5, rng_seed=8)
    s = sample_coop_channels(geom, 4, rng_seed=8)
    assert isinstance(s, CoopChannelSample)
    assert s.n_tx == 2 and s.n_rx == 3
    assert len(s.alpha) == 3 and len(s.power) == 2
    t = sample_coop_channels(geom, 4, rng_seed=8)
    assert np.array_equal(s.chan[1][2], t.chan[1][2])
