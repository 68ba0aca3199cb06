"""Measurement mathematics for rotating-horn scan records.

Covers the angular side (per-degree power profile, omni-equivalent average,
path gain, nominal and effective azimuth gain) and the temporal side
(per-turn power series, method-of-moments Rician K estimation, turn-to-turn
fluctuation, Doppler spectrum), plus the small distribution-fitting helpers
the reporting layer shares.

All power averaging happens in linear milliwatts; dB values only enter and
leave at the interfaces. Every function here is pure and safe to call
concurrently; the random sampler takes an explicit seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal

from .records import AzimuthPattern, ScanRecord, SounderConfig

N_BINS = 360  # one-degree azimuth bins
FIXED_ANGLE_WINDOW_DEG = 2.0  # samples within +/- this of the bin center count


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


class SeriesMode(Enum):
    """How the per-turn power series is extracted from a record."""

    FIXED_ANGLE = "fixed_angle"
    PER_TURN_BEST = "per_turn_best"


@dataclass(frozen=True)
class AngularProfile:
    """Time-averaged angular power profile on a 1-degree grid.

    Bins are centered on integer degrees (instrument convention: angular
    position recorded at 1-degree resolution): ``bins_mw[k]`` is the
    linear-mean power of all samples whose azimuth rounds to k degrees,
    across all turns, and ``occupancy[k]`` counts those samples. Bins with
    zero occupancy hold 0 and are excluded from every downstream average.
    """

    bins_mw: np.ndarray
    occupancy: np.ndarray

    @property
    def occupied(self) -> np.ndarray:
        return self.occupancy > 0

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.occupancy))

    @property
    def is_well_sampled(self) -> bool:
        """At least 144 occupied bins, the single-turn floor at full spin
        speed (2.5 degrees per sample)."""
        return self.n_occupied >= 144

    def bins_dbm(self) -> np.ndarray:
        """Per-bin power in dBm, -inf where unoccupied."""
        out = np.full(N_BINS, -np.inf)
        occ = self.occupied
        out[occ] = linear_to_db(self.bins_mw[occ])
        return out


@dataclass(frozen=True)
class TemporalSeries:
    """One power value per turn at a fixed pointing policy."""

    values_dbm: np.ndarray
    dt_s: float
    interpolated_turns: tuple[int, ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values_dbm, dtype=float)
        if v.size < 2:
            raise ValueError("temporal series needs at least 2 turns")
        if self.dt_s <= 0:
            raise ValueError("dt_s must be positive")
        object.__setattr__(self, "values_dbm", v)

    def values_mw(self) -> np.ndarray:
        return db_to_linear(self.values_dbm)


@dataclass(frozen=True)
class RicianFit:
    """Method-of-moments Rician fit; k_db is +/-inf at the degenerate ends."""

    k_db: float
    omega_dbm: float


@dataclass(frozen=True)
class LogNormalDb:
    """Normal fit to dB-domain samples (log-normal in linear units)."""

    mu_db: float
    sigma_db: float

    def __post_init__(self):
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be >= 0")


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided power spectral density with its frequency resolution."""

    freq_hz: np.ndarray
    psd: np.ndarray
    df_hz: float

    def total_power(self) -> float:
        return float(np.sum(self.psd) * self.df_hz)


class EmpiricalCdf:
    """Right-continuous empirical CDF with order-statistic quantiles."""

    def __init__(self, samples):
        values = np.sort(np.asarray(samples, dtype=float))
        if values.size == 0:
            raise ValueError("empirical CDF needs at least one sample")
        self.values = values

    @property
    def n(self) -> int:
        return self.values.size

    def cdf(self, x):
        return np.searchsorted(self.values, np.asarray(x, dtype=float),
                               side="right") / self.n

    def quantile(self, q: float) -> float:
        if not 0.0 < q <= 1.0:
            raise ValueError("quantile must be in (0, 1]")
        idx = max(int(math.ceil(q * self.n)) - 1, 0)
        return float(self.values[idx])

    def to_table(self) -> tuple[np.ndarray, np.ndarray]:
        """(value, cumulative probability) pairs for two-column export."""
        return self.values, np.arange(1, self.n + 1) / self.n


@dataclass(frozen=True)
class FluctuationStats:
    """Turn-to-turn |power change| distribution and beam-switching gain."""

    delta_cdf: EmpiricalCdf
    p90_db: float
    beamswitch_gain_db: float | None = None


# ---------------------------------------------------------------------------
# Angular operations
# ---------------------------------------------------------------------------

def angular_profile(record: ScanRecord) -> AngularProfile:
    """Linear-mean power per 1-degree azimuth bin across all turns."""
    idx = np.rint(record.azimuth_deg).astype(int) % N_BINS
    occupancy = np.bincount(idx, minlength=N_BINS)
    sums = np.bincount(idx, weights=db_to_linear(record.power_dbm), minlength=N_BINS)
    bins = np.zeros(N_BINS)
    occ = occupancy > 0
    bins[occ] = sums[occ] / occupancy[occ]
    return AngularProfile(bins_mw=bins, occupancy=occupancy)


def azimuth_average_power(profile: AngularProfile) -> float:
    """Omni-equivalent average power in dBm: linear mean over occupied bins."""
    if profile.n_occupied == 0:
        raise ValueError("profile has no occupied bins")
    return float(linear_to_db(np.mean(profile.bins_mw[profile.occupied])))


def nominal_azimuth_gain(pattern: AzimuthPattern) -> float:
    """Peak-to-average ratio of the antenna azimuth pattern, dB."""
    return pattern.nominal_gain_db


def effective_azimuth_gain(profile: AngularProfile) -> float:
    """Peak-to-average ratio of the measured time-averaged profile, dB.

    This is the azimuth gain a beam-pointing antenna actually realizes once
    scattering spreads power over angle; it cannot exceed the nominal
    pattern gain (up to binning error).
    """
    if profile.n_occupied == 0:
        raise ValueError("profile has no occupied bins")
    peak = linear_to_db(profile.bins_mw[profile.occupied].max())
    return float(peak - azimuth_average_power(profile))


def compute_path_gain(record: ScanRecord, sounder: SounderConfig) -> float:
    """Omni-equivalent path gain in dB (negative for physical links).

    Removes transmit power, transmit antenna gain, and the receive
    elevation gain from the azimuth-averaged received power, leaving a
    quantity referenced to omnidirectional antennas.
    """
    avg_dbm = azimuth_average_power(angular_profile(record))
    return (avg_dbm - sounder.tx_power_dbm - sounder.tx_gain_dbi
            - sounder.rx_elevation_gain_db)


def best_on_average_angle(profile: AngularProfile) -> int:
    """Bin index of the maximal time-averaged power; ties go to the lowest index."""
    if profile.n_occupied == 0:
        raise ValueError("profile has no occupied bins")
    masked = np.where(profile.occupied, profile.bins_mw, -np.inf)
    return int(np.argmax(masked))


# ---------------------------------------------------------------------------
# Temporal operations
# ---------------------------------------------------------------------------

def _circular_offset_deg(az: np.ndarray, center_deg: float) -> np.ndarray:
    d = np.abs(az - center_deg) % 360.0
    return np.minimum(d, 360.0 - d)


def temporal_series(record: ScanRecord, mode: SeriesMode,
                    bin_index: int | None = None) -> TemporalSeries:
    """One power value per turn.

    FIXED_ANGLE: linear mean of each turn's samples within +/-2 degrees of
    the bin center; turns with no sample in the window are filled by linear
    interpolation from neighboring turns and flagged. PER_TURN_BEST: each
    turn's maximal 1-degree-bin power (the instantaneous best direction).
    """
    turns = np.unique(record.turn_index)
    if turns.size < 2:
        raise ValueError("record needs at least 2 turns for a temporal series")
    dt = record.duration_s / turns.size
    turn_pos = np.searchsorted(turns, record.turn_index)
    power_mw = db_to_linear(record.power_dbm)

    if mode is SeriesMode.FIXED_ANGLE:
        if bin_index is None:
            raise ValueError("fixed_angle mode needs a bin_index")
        center = float(bin_index % N_BINS)
        mask = _circular_offset_deg(record.azimuth_deg, center) <= FIXED_ANGLE_WINDOW_DEG
        sums = np.bincount(turn_pos[mask], weights=power_mw[mask], minlength=turns.size)
        counts = np.bincount(turn_pos[mask], minlength=turns.size)
        values = np.full(turns.size, np.nan)
        hit = counts > 0
        values[hit] = sums[hit] / counts[hit]
        gaps = np.flatnonzero(~hit)
        if gaps.size == turns.size:
            raise ValueError("bin never observed in any turn")
        if gaps.size:
            values[~hit] = np.interp(gaps.astype(float), np.flatnonzero(hit).astype(float),
                                     values[hit])
        return TemporalSeries(values_dbm=linear_to_db(values), dt_s=dt,
                              interpolated_turns=tuple(int(g) for g in gaps))

    if mode is SeriesMode.PER_TURN_BEST:
        bin_idx = np.rint(record.azimuth_deg).astype(int) % N_BINS
        flat = turn_pos * N_BINS + bin_idx
        sums = np.bincount(flat, weights=power_mw, minlength=turns.size * N_BINS)
        counts = np.bincount(flat, minlength=turns.size * N_BINS)
        means = np.full(turns.size * N_BINS, -np.inf)
        occ = counts > 0
        means[occ] = sums[occ] / counts[occ]
        best = means.reshape(turns.size, N_BINS).max(axis=1)
        return TemporalSeries(values_dbm=linear_to_db(best), dt_s=dt)

    raise ValueError(f"unknown mode {mode!r}")


def estimate_k_factor_mom(series: TemporalSeries) -> RicianFit:
    """Rician K from the first two moments of linear power.

    With V = var(G)/mean(G)^2: K = sqrt(1-V) / (1 - sqrt(1-V)). V >= 1 maps
    to -inf (Rayleigh or worse); zero variance maps to +inf.
    """
    g = series.values_mw()
    mean = g.mean()
    if mean <= 0:
        raise ValueError("series has no power")
    omega_dbm = float(linear_to_db(mean))
    v = g.var(ddof=1) / mean ** 2
    if v == 0.0:
        return RicianFit(k_db=math.inf, omega_dbm=omega_dbm)
    if v >= 1.0:
        return RicianFit(k_db=-math.inf, omega_dbm=omega_dbm)
    s = math.sqrt(1.0 - v)
    k = s / (1.0 - s)
    return RicianFit(k_db=float(linear_to_db(k)), omega_dbm=omega_dbm)


def sample_rician(k_db: float, omega_dbm: float, n: int, seed: int,
                  dt_s: float = 0.2) -> TemporalSeries:
    """Draw n Rician power samples with mean linear power omega.

    k_db = +inf gives a constant series; k_db = -inf the Rayleigh limit
    (exponentially distributed power). Deterministic per seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    omega = float(db_to_linear(omega_dbm))
    if math.isinf(k_db) and k_db > 0:
        power = np.full(n, omega)
    else:
        k = 0.0 if (math.isinf(k_db) and k_db < 0) else 10.0 ** (k_db / 10.0)
        rng = np.random.default_rng(seed)
        sigma = math.sqrt(omega / (2.0 * (k + 1.0)))
        re = rng.normal(math.sqrt(omega * k / (k + 1.0)), sigma, n)
        im = rng.normal(0.0, sigma, n)
        power = re ** 2 + im ** 2
    return TemporalSeries(values_dbm=linear_to_db(power), dt_s=dt_s)


def turn_fluctuation_stats(series: TemporalSeries,
                           per_turn_best: TemporalSeries | None = None) -> FluctuationStats:
    """Distribution of |power change| between consecutive turns.

    When the matching per-turn-best series is supplied, also reports the
    beam-switching gain: the dB advantage (in mean linear power) of
    re-aiming every turn over holding the best-on-average direction.
    """
    deltas = np.abs(np.diff(series.values_dbm))
    cdf = EmpiricalCdf(deltas)
    gain = None
    if per_turn_best is not None:
        gain = float(linear_to_db(per_turn_best.values_mw().mean())
                     - linear_to_db(series.values_mw().mean()))
    return FluctuationStats(delta_cdf=cdf, p90_db=cdf.quantile(0.9),
                            beamswitch_gain_db=gain)


def doppler_spectrum(series: TemporalSeries) -> PowerSpectrum:
    """One-sided PSD of the amplitude proxy over [0, 1/(2 dt)].

    The sounder records power only, so the spectrum is computed on the
    mean-removed square root of linear power (an amplitude-envelope proxy):
    Hann window, 50% overlap, averaged segments of min(length, 64) samples.
    """
    x = np.sqrt(series.values_mw())
    if x.size < 8:
        raise ValueError("series shorter than one spectral segment (need >= 8 turns)")
    x = x - x.mean()
    nperseg = min(x.size, 64)
    freq, psd = signal.welch(x, fs=1.0 / series.dt_s, window="hann",
                             nperseg=nperseg, noverlap=nperseg // 2,
                             detrend=False, scaling="density")
    return PowerSpectrum(freq_hz=freq, psd=psd, df_hz=float(freq[1] - freq[0]))


# ---------------------------------------------------------------------------
# Distribution helpers
# ---------------------------------------------------------------------------

def fit_lognormal_db(samples_db) -> LogNormalDb:
    """Sample mean and unbiased standard deviation of dB-domain values."""
    x = np.asarray(samples_db, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    return LogNormalDb(mu_db=float(x.mean()), sigma_db=float(x.std(ddof=1)))


def empirical_cdf(samples) -> EmpiricalCdf:
    return EmpiricalCdf(samples)
