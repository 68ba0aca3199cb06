"""Rotating-horn scan records: data model, file I/O, and validation.

A scan record holds one link's measurement: a stream of (time, azimuth,
power) samples taken while a directive horn spins on a mast, plus the link
metadata needed downstream (IDs, scenario, Tx-Rx distance). Records are
read and written in two equivalent formats, a block CSV and a JSON list,
both lossless for float round-tripping.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

# A record is considered statistically usable ("compliant") when it holds
# at least this many full turns over at least this long a window.
COMPLIANT_MIN_TURNS = 37
COMPLIANT_MIN_DURATION_S = 10.0

CSV_META_HEADER = "link_id,street_id,scenario,distance_m"
CSV_SAMPLE_HEADER = "time_s,azimuth_deg,power_dbm,turn_index"


class Scenario(Enum):
    """Link deployment geometry."""

    SAME_STREET = "same_street"
    OTHER_STREET = "other_street"
    VISUAL_LOS = "visual_los"
    OPEN_FIELD = "open_field"


class ScanParseError(ValueError):
    """Malformed scan-record file; ``row`` is the 1-based offending line."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class AzimuthPattern:
    """Antenna azimuth power pattern sampled on a uniform full-circle grid.

    ``gains_db[k]`` is the gain at azimuth ``k * step_deg``; the grid wraps
    at 360 degrees. Absolute level is arbitrary: every consumer works with
    peak-to-average or normalized shapes.
    """

    gains_db: np.ndarray
    step_deg: float

    def __post_init__(self):
        g = np.asarray(self.gains_db, dtype=float)
        if g.ndim != 1 or g.size < 8:
            raise ValueError("pattern needs at least 8 samples on the circle")
        if abs(g.size * self.step_deg - 360.0) > 1e-6:
            raise ValueError("pattern grid must cover exactly 360 degrees")
        object.__setattr__(self, "gains_db", g)

    @property
    def azimuths_deg(self) -> np.ndarray:
        return np.arange(self.gains_db.size) * self.step_deg

    def linear_mean(self) -> float:
        """Circular mean of the pattern in linear power units."""
        return float(np.mean(10.0 ** (self.gains_db / 10.0)))

    @property
    def nominal_gain_db(self) -> float:
        """Peak-to-average ratio of the pattern, in dB."""
        return float(self.gains_db.max() - 10.0 * np.log10(self.linear_mean()))

    def gain_db_at(self, azimuth_deg: np.ndarray | float) -> np.ndarray:
        """Gain at arbitrary azimuths, dB-linear interpolation with wraparound."""
        az = np.asarray(azimuth_deg, dtype=float) % 360.0
        idx = az / self.step_deg
        lo = np.floor(idx).astype(int) % self.gains_db.size
        hi = (lo + 1) % self.gains_db.size
        frac = idx - np.floor(idx)
        return (1.0 - frac) * self.gains_db[lo] + frac * self.gains_db[hi]

    def normalized_linear_at(self, azimuth_deg: np.ndarray | float) -> np.ndarray:
        """Linear pattern scaled so its circular mean is exactly 1."""
        return 10.0 ** (self.gain_db_at(azimuth_deg) / 10.0) / self.linear_mean()


def horn_pattern(hpbw_deg: float = 10.0, sidelobe_floor_db: float = -22.16,
                 step_deg: float = 0.25) -> AzimuthPattern:
    """Gaussian-mainlobe horn azimuth cut with a uniform sidelobe floor.

    The default floor is calibrated so a 10-degree horn has a 14.5 dB
    peak-to-average azimuth gain, matching the nominal azimuth gain of the
    measurement horn modeled throughout this package.
    """
    if hpbw_deg <= 0:
        raise ValueError("hpbw_deg must be positive")
    az = np.arange(0.0, 360.0, step_deg)
    off = np.minimum(az, 360.0 - az)  # angle from boresight at 0 deg
    lin = 10.0 ** (-1.2 * (off / hpbw_deg) ** 2) + 10.0 ** (sidelobe_floor_db / 10.0)
    return AzimuthPattern(gains_db=10.0 * np.log10(lin), step_deg=step_deg)


def uniform_pattern(gain_db: float = 0.0, step_deg: float = 1.0) -> AzimuthPattern:
    """Azimuthally omnidirectional pattern (0 dB peak-to-average)."""
    n = int(round(360.0 / step_deg))
    return AzimuthPattern(gains_db=np.full(n, float(gain_db)), step_deg=step_deg)


@dataclass(frozen=True)
class SounderConfig:
    """Narrowband sounder link-budget terms.

    Defaults mirror the measurement system modeled here: 22 dBm CW transmit
    power into a 10 dBi horn, a 24 dBi (10 degree) receive horn, and a
    -126 dBm noise floor.
    """

    tx_power_dbm: float = 22.0
    tx_gain_dbi: float = 10.0
    rx_total_gain_dbi: float = 24.0
    rx_azimuth_pattern: AzimuthPattern = field(default_factory=horn_pattern)
    noise_floor_dbm: float = -126.0

    @property
    def rx_azimuth_gain_db(self) -> float:
        return self.rx_azimuth_pattern.nominal_gain_db

    @property
    def rx_elevation_gain_db(self) -> float:
        """Total gain with the azimuth (peak-to-average) part removed."""
        return self.rx_total_gain_dbi - self.rx_azimuth_gain_db


def default_sounder() -> SounderConfig:
    return SounderConfig()


def sounder_from_dict(raw: dict) -> SounderConfig:
    """Build a sounder config from a parsed JSON object.

    The pattern is either parametric ({"hpbw_deg", "sidelobe_floor_db"}) or
    explicit ({"step_deg", "gains_db": [...]}).
    """
    kwargs = {k: float(raw[k]) for k in
              ("tx_power_dbm", "tx_gain_dbi", "rx_total_gain_dbi", "noise_floor_dbm")
              if k in raw}
    pat = raw.get("rx_azimuth_pattern")
    if pat is not None:
        if "gains_db" in pat:
            kwargs["rx_azimuth_pattern"] = AzimuthPattern(
                gains_db=np.asarray(pat["gains_db"], dtype=float),
                step_deg=float(pat["step_deg"]))
        else:
            kwargs["rx_azimuth_pattern"] = horn_pattern(
                hpbw_deg=float(pat.get("hpbw_deg", 10.0)),
                sidelobe_floor_db=float(pat.get("sidelobe_floor_db", -22.16)),
                step_deg=float(pat.get("step_deg", 0.25)))
    return SounderConfig(**kwargs)


def load_sounder_config(path: str | Path) -> SounderConfig:
    return sounder_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ScanRecord:
    """One link's rotating-horn measurement.

    Sample arrays are parallel and ordered in time. Instances are treated
    as immutable; operations never modify the arrays in place. Invariants
    beyond basic shape (monotone time, azimuth range, turn count) are
    checked by :func:`validate_record`, which reports rather than raises so
    that defective records can still be inspected.
    """

    link_id: str
    street_id: str
    scenario: Scenario
    distance_m: float
    time_s: np.ndarray
    azimuth_deg: np.ndarray
    power_dbm: np.ndarray
    turn_index: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_s, dtype=float)
        az = np.asarray(self.azimuth_deg, dtype=float)
        p = np.asarray(self.power_dbm, dtype=float)
        turn = np.asarray(self.turn_index, dtype=int)
        if not (t.size == az.size == p.size == turn.size):
            raise ValueError("sample arrays must have equal length")
        if t.size == 0:
            raise ValueError("record has no samples")
        if not self.distance_m > 0:
            raise ValueError("distance_m must be positive")
        for name, arr in (("time_s", t), ("azimuth_deg", az),
                          ("power_dbm", p), ("turn_index", turn)):
            object.__setattr__(self, name, arr)

    @property
    def n_samples(self) -> int:
        return self.time_s.size

    @property
    def n_turns(self) -> int:
        return int(np.unique(self.turn_index).size)

    @property
    def duration_s(self) -> float:
        return float(self.time_s[-1] - self.time_s[0])

    @property
    def median_dt_s(self) -> float:
        if self.n_samples < 2:
            return 0.0
        return float(np.median(np.diff(self.time_s)))

    @property
    def is_compliant(self) -> bool:
        """True when the record supports the full temporal statistics suite.

        The duration test closes the half-open sampling window by adding one
        median sample interval, so a 10 s acquisition that stops one sample
        short of t=10 still counts.
        """
        span = self.duration_s + self.median_dt_s
        return self.n_turns >= COMPLIANT_MIN_TURNS and span >= COMPLIANT_MIN_DURATION_S


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_record`; empty ``violations`` means clean."""

    violations: tuple[str, ...]
    n_turns: int
    duration_s: float
    samples_per_turn: float
    compliant: bool

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_record(record: ScanRecord) -> ValidationReport:
    """Report invariant violations and summary statistics for a record.

    Never raises: defective records produce a populated violation list.
    """
    violations: list[str] = []
    t = record.time_s
    az = record.azimuth_deg

    if np.any(np.diff(t) <= 0):
        violations.append("non-monotone time")
    if np.any((az < 0.0) | (az >= 360.0)):
        violations.append("azimuth out of [0, 360)")

    # Total azimuth travel, unwrapped assuming forward rotation.
    if record.n_samples >= 2:
        travel = float(np.sum(np.mod(np.diff(az), 360.0)))
    else:
        travel = 0.0
    if travel < 355.0:
        violations.append("record spans less than one full turn")

    if record.n_turns < COMPLIANT_MIN_TURNS:
        violations.append("insufficient turns for temporal statistics")
    span = record.duration_s + record.median_dt_s
    if span < COMPLIANT_MIN_DURATION_S:
        violations.append("record shorter than 10 s")

    return ValidationReport(
        violations=tuple(violations),
        n_turns=record.n_turns,
        duration_s=record.duration_s,
        samples_per_turn=record.n_samples / max(record.n_turns, 1),
        compliant=record.is_compliant,
    )


# ---------------------------------------------------------------------------
# File I/O
#
# CSV layout: repeated blocks of
#     link_id,street_id,scenario,distance_m
#     <values>
#     time_s,azimuth_deg,power_dbm,turn_index
#     <one row per sample>
# JSON layout: {"records": [{...metadata, "samples": [[t, az, p, turn], ...]}]}
# ---------------------------------------------------------------------------

def _check_sample(row: int, time_s: float, azimuth_deg: float, prev_time: float | None):
    if not 0.0 <= azimuth_deg < 360.0:
        raise ScanParseError(f"azimuth {azimuth_deg!r} out of [0, 360)", row)
    if prev_time is not None and time_s <= prev_time:
        raise ScanParseError(f"non-monotone timestamp {time_s!r}", row)


def _parse_scenario(value: str, row: int | None = None) -> Scenario:
    try:
        return Scenario(value)
    except ValueError:
        raise ScanParseError(f"unknown scenario {value!r}", row) from None


def _parse_csv(path: Path) -> list[ScanRecord]:
    records: list[ScanRecord] = []
    meta = None
    columns: list[list] = [[], [], [], []]
    expecting = "meta_header"
    prev_time: float | None = None

    def flush():
        nonlocal meta, columns, prev_time
        if meta is None:
            return
        if not columns[0]:
            raise ScanParseError(f"record {meta[0]!r} has no samples")
        records.append(ScanRecord(
            link_id=meta[0], street_id=meta[1], scenario=meta[2],
            distance_m=meta[3],
            time_s=np.array(columns[0]), azimuth_deg=np.array(columns[1]),
            power_dbm=np.array(columns[2]), turn_index=np.array(columns[3]),
        ))
        meta = None
        columns = [[], [], [], []]
        prev_time = None

    with open(path, encoding="utf-8") as fh:
        for row, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line == CSV_META_HEADER:
                flush()
                expecting = "meta_values"
                continue
            if expecting == "meta_header":
                raise ScanParseError(f"expected header {CSV_META_HEADER!r}", row)
            if expecting == "meta_values":
                parts = line.split(",")
                if len(parts) != 4:
                    raise ScanParseError("metadata needs 4 fields", row)
                try:
                    distance = float(parts[3])
                except ValueError:
                    raise ScanParseError(f"bad distance {parts[3]!r}", row) from None
                if distance <= 0:
                    raise ScanParseError(f"non-positive distance {distance!r}", row)
                meta = (parts[0], parts[1], _parse_scenario(parts[2], row), distance)
                expecting = "sample_header"
                continue
            if expecting == "sample_header":
                if line != CSV_SAMPLE_HEADER:
                    raise ScanParseError(f"expected header {CSV_SAMPLE_HEADER!r}", row)
                expecting = "samples"
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ScanParseError("sample row needs 4 fields", row)
            try:
                t, az, p = float(parts[0]), float(parts[1]), float(parts[2])
                turn = int(parts[3])
            except ValueError:
                raise ScanParseError(f"malformed sample row {line!r}", row) from None
            _check_sample(row, t, az, prev_time)
            prev_time = t
            columns[0].append(t)
            columns[1].append(az)
            columns[2].append(p)
            columns[3].append(turn)

    flush()
    if not records:
        raise ScanParseError("no records")
    return records


def _parse_json(path: Path) -> list[ScanRecord]:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScanParseError(f"invalid JSON: {exc}") from None
    raw = payload.get("records") if isinstance(payload, dict) else payload
    if not isinstance(raw, list) or not raw:
        raise ScanParseError("no records")
    records = []
    for entry in raw:
        if not isinstance(entry, dict):
            raise ScanParseError("record entries must be objects")
        samples = entry.get("samples", [])
        if not samples:
            raise ScanParseError(f"record {entry.get('link_id')!r} has no samples")
        prev_time = None
        for i, s in enumerate(samples):
            if len(s) != 4:
                raise ScanParseError("sample needs 4 fields", i + 1)
            _check_sample(i + 1, float(s[0]), float(s[1]), prev_time)
            prev_time = float(s[0])
        arr = np.asarray(samples, dtype=float)
        try:
            distance = float(entry["distance_m"])
            link_id, street_id = str(entry["link_id"]), str(entry["street_id"])
            scenario = _parse_scenario(str(entry["scenario"]))
        except KeyError as exc:
            raise ScanParseError(f"record missing field {exc}") from None
        if distance <= 0:
            raise ScanParseError(f"non-positive distance {distance!r}")
        records.append(ScanRecord(
            link_id=link_id, street_id=street_id, scenario=scenario,
            distance_m=distance,
            time_s=arr[:, 0], azimuth_deg=arr[:, 1], power_dbm=arr[:, 2],
            turn_index=arr[:, 3].astype(int),
        ))
    return records


def parse_scan_dataset(path: str | Path, fmt: str = "csv") -> list[ScanRecord]:
    """Load all scan records from a file.

    ``fmt`` is ``"csv"`` or ``"json"``. Range and monotonicity violations
    raise :class:`ScanParseError` naming the offending row; records that are
    merely non-compliant (too few turns, too short) load fine and carry
    ``is_compliant == False``.
    """
    path = Path(path)
    if not path.is_file():
        raise ScanParseError(f"cannot read {path}")
    if fmt == "csv":
        return _parse_csv(path)
    if fmt == "json":
        return _parse_json(path)
    raise ValueError(f"unknown format {fmt!r}")


def write_scan_dataset(records: list[ScanRecord], path: str | Path, fmt: str = "csv") -> None:
    """Serialize records losslessly (floats via repr, so parse round-trips)."""
    path = Path(path)
    if fmt == "csv":
        lines = []
        for rec in records:
            lines.append(CSV_META_HEADER)
            lines.append(f"{rec.link_id},{rec.street_id},{rec.scenario.value},"
                         f"{float(rec.distance_m)!r}")
            lines.append(CSV_SAMPLE_HEADER)
            for t, az, p, turn in zip(rec.time_s, rec.azimuth_deg, rec.power_dbm, rec.turn_index):
                lines.append(f"{float(t)!r},{float(az)!r},{float(p)!r},{int(turn):d}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    elif fmt == "json":
        payload = {"records": [{
            "link_id": rec.link_id,
            "street_id": rec.street_id,
            "scenario": rec.scenario.value,
            "distance_m": float(rec.distance_m),
            "samples": [[float(t), float(az), float(p), int(turn)] for t, az, p, turn in
                        zip(rec.time_s, rec.azimuth_deg, rec.power_dbm, rec.turn_index)],
        } for rec in records]}
        path.write_text(json.dumps(payload), encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")
