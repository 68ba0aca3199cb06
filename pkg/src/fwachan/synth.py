"""Synthetic scan-record generation from a declared scene truth.

The synthesizer is the oracle for the measurement pipeline: it plants a
known path gain, angular power layout, and temporal fading statistic, then
emulates the spinning-horn acquisition so the downstream estimators can be
checked against planted truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .records import AzimuthPattern, ScanRecord, Scenario, SounderConfig

_CHUNK = 1 << 20  # samples per synthesis chunk, keeps peak memory flat

# The spinner is not phase-locked to the sample clock: detune the rotation
# rate by a small fixed factor so successive turns interleave their azimuth
# sampling. Without this, rates that divide evenly (e.g. 300 rpm at 740 Hz)
# revisit the same azimuth lattice every turn and leave most 1-degree bins
# empty no matter how long the record runs.
_ROTATION_DETUNE = 1.0 + 0.001 * (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SceneTruth:
    """Planted ground truth for one synthetic link.

    ``specular_paths`` holds (azimuth_deg, relative_power_db) pairs and
    ``diffuse_floor_db`` the relative level of an azimuthally uniform
    component; relative powers are normalized internally so the
    omni-equivalent received power matches ``path_gain_db`` plus the link
    budget. ``k_factor_db`` sets per-component Rician temporal fading
    (``inf`` disables it); fading is redrawn once per turn, i.e. the scene
    coherence time is long compared to one rotation.
    """

    path_gain_db: float
    specular_paths: tuple[tuple[float, float], ...] = ()
    diffuse_floor_db: float | None = None
    k_factor_db: float = math.inf
    turns: int = 51  # ~10.2 s at 300 rpm, comfortably compliant
    rpm: float = 300.0
    sample_rate_hz: float = 740.0
    rng_seed: int = 0
    # Link metadata carried into the generated record.
    link_id: str = "synthetic"
    street_id: str = "synthetic"
    scenario: Scenario = Scenario.OPEN_FIELD
    distance_m: float = 100.0

    def __post_init__(self):
        if self.turns < 1:
            raise ValueError("turns must be >= 1")
        if not self.specular_paths and self.diffuse_floor_db is None:
            raise ValueError("scene needs at least one specular path or a diffuse floor")
        object.__setattr__(self, "specular_paths",
                           tuple((float(a), float(p)) for a, p in self.specular_paths))


def _component_fractions(truth: SceneTruth) -> np.ndarray:
    """Relative component powers normalized to sum to 1.

    Order: specular paths as declared, then the diffuse component (if any).
    """
    rel = [p for _, p in truth.specular_paths]
    if truth.diffuse_floor_db is not None:
        rel.append(truth.diffuse_floor_db)
    lin = 10.0 ** (np.asarray(rel, dtype=float) / 10.0)
    return lin / lin.sum()


def _rician_power_factors(rng: np.random.Generator, k_db: float,
                          shape: tuple[int, ...]) -> np.ndarray:
    """Unit-mean multiplicative power fading factors."""
    if math.isinf(k_db) and k_db > 0:
        return np.ones(shape)
    k = 0.0 if (math.isinf(k_db) and k_db < 0) else 10.0 ** (k_db / 10.0)
    sigma = math.sqrt(1.0 / (2.0 * (k + 1.0)))
    re = rng.normal(math.sqrt(k / (k + 1.0)), sigma, shape)
    im = rng.normal(0.0, sigma, shape)
    return re ** 2 + im ** 2


def synthesize_scan_record(truth: SceneTruth, sounder: SounderConfig) -> ScanRecord:
    """Emulate a spinning-horn acquisition of the declared scene.

    Samples arrive at ``sample_rate_hz`` while the horn advances at ``rpm``;
    each sample's power is the scene angular power seen through the receive
    azimuth pattern, scaled so the omni-equivalent average equals the truth
    link budget, with the noise floor added in the linear domain. Output is
    deterministic for a given ``rng_seed``.
    """
    if truth.rpm <= 0:
        raise ValueError("rpm must be positive")
    if truth.sample_rate_hz <= 0:
        raise ValueError("sample_rate_hz must be positive")

    rps = truth.rpm / 60.0 * _ROTATION_DETUNE
    rate = truth.sample_rate_hz
    n = int(round(truth.turns * rate / rps))
    if n < 1:
        raise ValueError("scene produces no samples; raise sample_rate_hz or turns")

    pattern: AzimuthPattern = sounder.rx_azimuth_pattern
    fractions = _component_fractions(truth)
    n_spec = len(truth.specular_paths)

    # Omni-equivalent receive level: P_T + G_T + path gain + elevation gain.
    level_dbm = (sounder.tx_power_dbm + sounder.tx_gain_dbi
                 + truth.path_gain_db + sounder.rx_elevation_gain_db)
    level_mw = 10.0 ** (level_dbm / 10.0)
    floor_mw = 10.0 ** (sounder.noise_floor_dbm / 10.0)

    rng = np.random.default_rng(truth.rng_seed)
    fading = _rician_power_factors(rng, truth.k_factor_db, (truth.turns, fractions.size))

    time_s = np.empty(n)
    azimuth_deg = np.empty(n)
    power_mw = np.empty(n)
    turn_index = np.empty(n, dtype=int)

    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        k = np.arange(start, stop)
        t = k / rate
        az = (360.0 * rps * t) % 360.0
        turn = np.minimum((rps * t).astype(int), truth.turns - 1)

        p = np.zeros(stop - start)
        for i, (path_az, _) in enumerate(truth.specular_paths):
            gain = pattern.normalized_linear_at(az - path_az)
            p += fractions[i] * gain * fading[turn, i]
        if truth.diffuse_floor_db is not None:
            p += fractions[-1] * fading[turn, n_spec]

        time_s[start:stop] = t
        azimuth_deg[start:stop] = az
        power_mw[start:stop] = level_mw * p + floor_mw
        turn_index[start:stop] = turn

    return ScanRecord(
        link_id=truth.link_id,
        street_id=truth.street_id,
        scenario=truth.scenario,
        distance_m=truth.distance_m,
        time_s=time_s,
        azimuth_deg=azimuth_deg,
        power_dbm=10.0 * np.log10(power_mw),
        turn_index=turn_index,
    )


# ---------------------------------------------------------------------------
# Scene config files: JSON, single object or {"scenes": [...]}.
# ---------------------------------------------------------------------------

def _scene_from_dict(raw: dict) -> SceneTruth:
    kf = raw.get("k_factor_db", "inf")
    if isinstance(kf, str):
        kf = float(kf)  # accepts "inf" / "-inf"
    kwargs = dict(
        path_gain_db=float(raw["path_gain_db"]),
        specular_paths=tuple((float(p["azimuth_deg"]), float(p["relative_power_db"]))
                             for p in raw.get("specular_paths", [])),
        diffuse_floor_db=(None if raw.get("diffuse_floor_db") is None
                          else float(raw["diffuse_floor_db"])),
        k_factor_db=kf,
        turns=int(raw.get("turns", 51)),
        rpm=float(raw.get("rpm", 300.0)),
        sample_rate_hz=float(raw.get("sample_rate_hz", 740.0)),
        rng_seed=int(raw.get("rng_seed", 0)),
    )
    for key in ("link_id", "street_id", "distance_m"):
        if key in raw:
            kwargs[key] = raw[key]
    if "scenario" in raw:
        kwargs["scenario"] = Scenario(raw["scenario"])
    return SceneTruth(**kwargs)


def load_scene_truths(path: str | Path) -> list[SceneTruth]:
    """Load one or more scene configs from a JSON file."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict) and "scenes" in payload:
        payload = payload["scenes"]
    if isinstance(payload, dict):
        payload = [payload]
    if not payload:
        raise ValueError("no scenes in config")
    return [_scene_from_dict(raw) for raw in payload]
