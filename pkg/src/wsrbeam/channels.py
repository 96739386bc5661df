"""Synthetic network geometries and Rayleigh/pathloss channel samples.

Units: distances in km, powers in watts. dB/dBm values appear only at the
conversion boundary (`pathloss_db`, `dbm_to_watt`).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

# Urban-macro pathloss constants: 128.1 + 37.6 log10(s[km]) dB.
PATHLOSS_FIXED_DB = 128.1
PATHLOSS_SLOPE_DB = 37.6

DEFAULT_POWER_DBM = 38.0
DEFAULT_NOISE_DBM_PER_HZ = -174.0
DEFAULT_BANDWIDTH_HZ = 10e6

# UEs never sit closer than 10 m to their BS (pathloss diverges at s -> 0).
MIN_BS_UE_DISTANCE_KM = 0.01

# Axial steps that walk one hex ring counter-clockwise starting from (m, 0).
_RING_STEPS = [(-1, 1), (-1, 0), (0, -1), (1, -1), (1, 0), (0, 1)]

# Salts keep the placement / channel / coop RNG streams disjoint per seed.
_SALT_PLACE = 0x01
_SALT_PLACE_COOP = 0x02
_SALT_CHAN = 0x03
_SALT_CHAN_COOP = 0x04


def dbm_to_watt(p_dbm: float) -> float:
    """Convert dBm to watts: 30 dBm -> 1 W."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def pathloss_db(s_km) -> float:
    """Distance-dependent pathloss in dB for a BS-UE distance in km."""
    s_km = np.asarray(s_km, dtype=float)
    if np.any(s_km <= 0):
        raise InvalidArgumentError("pathloss_db requires distance > 0")
    out = PATHLOSS_FIXED_DB + PATHLOSS_SLOPE_DB * np.log10(s_km)
    return float(out) if out.ndim == 0 else out


def pathloss_gain(s_km):
    """Linear-scale amplitude-squared gain 10^(-pathloss_db/10)."""
    return 10.0 ** (-np.asarray(pathloss_db(s_km)) / 10.0)


def hex_centers(count: int, d_km: float) -> np.ndarray:
    """First `count` BS positions of a hex tiling with spacing 2*d_km.

    Spiral order: center cell first, then complete rings counter-clockwise.
    Ring m holds 6m cells, so counts 1, 7, 19, 37, ... fill whole rings and
    any other count truncates the outermost ring.
    """
    e1 = np.array([2.0 * d_km, 0.0])
    e2 = np.array([d_km, np.sqrt(3.0) * d_km])
    coords = [(0, 0)]
    m = 1
    while len(coords) < count:
        a, b = m, 0
        for step in _RING_STEPS:
            for _ in range(m):
                coords.append((a, b))
                a, b = a + step[0], b + step[1]
        m += 1
    coords = coords[:count]
    return np.array([a * e1 + b * e2 for a, b in coords])


def _draw_ue_offsets(rng: np.random.Generator, n: int, d_km: float) -> np.ndarray:
    """Uniform points on the disc of radius d_km, at least 10 m from the center."""
    out = np.empty((n, 2))
    for i in range(n):
        while True:
            r = d_km * np.sqrt(rng.uniform())
            if r >= MIN_BS_UE_DISTANCE_KM:
                break
        theta = rng.uniform(0.0, 2.0 * np.pi)
        out[i] = (r * np.cos(theta), r * np.sin(theta))
    return out


@dataclass
class NetworkGeometry:
    """BS/UE positions (km) for a K-link interference network."""

    bs_xy: np.ndarray          # (K, 2)
    ue_xy: np.ndarray          # (K, 2)
    half_distance_km: float

    @property
    def n_links(self) -> int:
        return self.bs_xy.shape[0]

    def distances(self) -> np.ndarray:
        """(K, K) matrix of BS_j -> UE_k distances."""
        diff = self.bs_xy[:, None, :] - self.ue_xy[None, :, :]
        return np.linalg.norm(diff, axis=-1)


@dataclass
class CoopGeometry:
    """BS/UE positions (km) for a cooperative network (K_t BSs, K_r UEs)."""

    bs_xy: np.ndarray          # (K_t, 2)
    ue_xy: np.ndarray          # (K_r, 2)
    half_distance_km: float

    def distances(self) -> np.ndarray:
        diff = self.bs_xy[:, None, :] - self.ue_xy[None, :, :]
        return np.linalg.norm(diff, axis=-1)


def place_network(n_links: int, d_km: float, rng_seed: int) -> NetworkGeometry:
    """Hex BS layout plus one uniformly placed UE per cell."""
    if n_links < 1:
        raise InvalidArgumentError(f"n_links must be >= 1, got {n_links}")
    if d_km <= MIN_BS_UE_DISTANCE_KM:
        raise InvalidArgumentError(f"cell radius must exceed {MIN_BS_UE_DISTANCE_KM} km, got {d_km}")
    rng = np.random.default_rng(np.random.SeedSequence((_SALT_PLACE, rng_seed)))
    bs = hex_centers(n_links, d_km)
    ue = bs + _draw_ue_offsets(rng, n_links, d_km)
    return NetworkGeometry(bs_xy=bs, ue_xy=ue, half_distance_km=d_km)


def place_coop_network(n_tx: int, n_rx: int, d_km: float, rng_seed: int) -> CoopGeometry:
    """Hex layout of n_tx BSs; UE k placed in the cell of BS (k mod n_tx)."""
    if n_tx < 1 or n_rx < 1:
        raise InvalidArgumentError("n_tx and n_rx must be >= 1")
    if d_km <= MIN_BS_UE_DISTANCE_KM:
        raise InvalidArgumentError(f"cell radius must exceed {MIN_BS_UE_DISTANCE_KM} km, got {d_km}")
    rng = np.random.default_rng(np.random.SeedSequence((_SALT_PLACE_COOP, rng_seed)))
    bs = hex_centers(n_tx, d_km)
    anchors = bs[np.arange(n_rx) % n_tx]
    ue = anchors + _draw_ue_offsets(rng, n_rx, d_km)
    return CoopGeometry(bs_xy=bs, ue_xy=ue, half_distance_km=d_km)


@dataclass
class ChannelSample:
    """One interference-channel realization.

    ``chan[j][k]`` is the complex channel vector from BS_j to UE_k with
    length ``nt[j]`` (per-BS antenna counts may differ).
    """

    chan: list                 # K x K nested list of complex (nt[j],) vectors
    alpha: np.ndarray          # (K,) rate weights
    sigma2: np.ndarray         # (K,) noise powers, W
    power: np.ndarray          # (K,) power budgets, W
    nt: tuple                  # per-BS antenna counts

    @property
    def n_links(self) -> int:
        return len(self.chan)

    def validate(self):
        k = self.n_links
        if not (len(self.alpha) == len(self.sigma2) == len(self.power) == len(self.nt) == k):
            raise InvalidArgumentError("inconsistent ChannelSample field lengths")
        if np.any(self.alpha < 0):
            raise InvalidArgumentError("rate weights must be nonnegative")
        if np.any(self.sigma2 <= 0) or np.any(self.power <= 0):
            raise InvalidArgumentError("noise powers and power budgets must be positive")
        for j in range(k):
            for kk in range(k):
                if len(self.chan[j][kk]) != self.nt[j]:
                    raise InvalidArgumentError(f"channel ({j},{kk}) length != nt[{j}]")
        return self


@dataclass
class CoopChannelSample:
    """One cooperative-multicell realization: chan[j][k] for BS_j -> UE_k."""

    chan: list                 # K_t x K_r nested list of complex (nt[j],) vectors
    alpha: np.ndarray          # (K_r,)
    sigma2: np.ndarray         # (K_r,)
    power: np.ndarray          # (K_t,)
    nt: tuple                  # per-BS antenna counts, length K_t

    @property
    def n_tx(self) -> int:
        return len(self.chan)

    @property
    def n_rx(self) -> int:
        return len(self.chan[0])

    def validate(self):
        if not (len(self.alpha) == len(self.sigma2) == self.n_rx):
            raise InvalidArgumentError("alpha/sigma2 must have length n_rx")
        if not (len(self.power) == len(self.nt) == self.n_tx):
            raise InvalidArgumentError("power/nt must have length n_tx")
        for j in range(self.n_tx):
            if len(self.chan[j]) != self.n_rx:
                raise InvalidArgumentError("ragged coop channel matrix")
            for k in range(self.n_rx):
                if len(self.chan[j][k]) != self.nt[j]:
                    raise InvalidArgumentError(f"channel ({j},{k}) length != nt[{j}]")
        return self


def _rayleigh(rng: np.random.Generator, gain: float, nt: int, array_normalized: bool) -> np.ndarray:
    # Circularly-symmetric complex Gaussian; by default the per-entry second
    # moment equals the pathloss gain, with `array_normalized` the whole
    # vector's expected energy does (published full-scale rate tables follow
    # the latter convention).
    z = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
    scale = gain / nt if array_normalized else gain
    return np.sqrt(scale / 2.0) * z


def _draw_alpha(rng: np.random.Generator, k: int, weighted: bool) -> np.ndarray:
    if not weighted:
        return np.ones(k)
    u = rng.uniform(size=k)
    return u / u.sum()


def sample_channels(
    geometry: NetworkGeometry,
    nt,
    rng_seed: int,
    *,
    weighted: bool = False,
    power_dbm: float = DEFAULT_POWER_DBM,
    noise_dbm_per_hz: float = DEFAULT_NOISE_DBM_PER_HZ,
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ,
    array_normalized: bool = False,
) -> ChannelSample:
    """Draw Rayleigh-faded channels with pathloss for one network geometry.

    ``nt`` is either a single antenna count or a per-BS sequence. Deterministic
    given (geometry, rng_seed).
    """
    k = geometry.n_links
    nt = tuple(int(n) for n in (np.full(k, nt, dtype=int) if np.isscalar(nt) else np.asarray(nt, dtype=int)))
    if len(nt) != k:
        raise InvalidArgumentError(f"need {k} antenna counts, got {len(nt)}")
    if any(n < 1 for n in nt):
        raise InvalidArgumentError("antenna counts must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((_SALT_CHAN, rng_seed)))
    dist = geometry.distances()
    gains = pathloss_gain(dist)
    chan = [[_rayleigh(rng, gains[j, kk], nt[j], array_normalized) for kk in range(k)] for j in range(k)]
    sigma2 = np.full(k, dbm_to_watt(noise_dbm_per_hz) * bandwidth_hz)
    power = np.full(k, dbm_to_watt(power_dbm))
    alpha = _draw_alpha(rng, k, weighted)
    return ChannelSample(chan=chan, alpha=alpha, sigma2=sigma2, power=power, nt=nt).validate()


def sample_coop_channels(
    geometry: CoopGeometry,
    nt,
    rng_seed: int,
    *,
    weighted: bool = False,
    power_dbm: float = DEFAULT_POWER_DBM,
    noise_dbm_per_hz: float = DEFAULT_NOISE_DBM_PER_HZ,
    bandwidth_hz: float = DEFAULT_BANDWIDTH_HZ,
    array_normalized: bool = False,
) -> CoopChannelSample:
    """Coop analogue of `sample_channels`; one channel per (BS, UE) pair."""
    n_tx, n_rx = geometry.bs_xy.shape[0], geometry.ue_xy.shape[0]
    nt = tuple(int(n) for n in (np.full(n_tx, nt, dtype=int) if np.isscalar(nt) else np.asarray(nt, dtype=int)))
    if len(nt) != n_tx:
        raise InvalidArgumentError(f"need {n_tx} antenna counts, got {len(nt)}")
    if any(n < 1 for n in nt):
        raise InvalidArgumentError("antenna counts must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((_SALT_CHAN_COOP, rng_seed)))
    dist = geometry.distances()
    gains = pathloss_gain(dist)
    chan = [[_rayleigh(rng, gains[j, kk], nt[j], array_normalized) for kk in range(n_rx)] for j in range(n_tx)]
    sigma2 = np.full(n_rx, dbm_to_watt(noise_dbm_per_hz) * bandwidth_hz)
    power = np.full(n_tx, dbm_to_watt(power_dbm))
    alpha = _draw_alpha(rng, n_rx, weighted)
    return CoopChannelSample(chan=chan, alpha=alpha, sigma2=sigma2, power=power, nt=nt).validate()
