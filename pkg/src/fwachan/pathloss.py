"""Closed-form propagation models and regression machinery.

Friis free space, the two-ray ground-reflection model with a complex
Fresnel coefficient, slope-intercept power-law models with log-normal
shadow fading, the 36.814 UMi NLOS baseline, and a small named catalog of
fitted models. Regression is ordinary least squares of path gain on
10*log10(distance) with Student-t 90% confidence intervals.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.constants import c as SPEED_OF_LIGHT

CONFIDENCE = 0.90  # two-sided level for all reported intervals


class Polarization(Enum):
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"


@dataclass(frozen=True)
class TwoRayGeometry:
    """Geometry and ground parameters for the two-ray model."""

    h_tx_m: float = 1.0
    h_rx_m: float = 3.0
    freq_hz: float = 28e9
    epsilon_r: float = 5.0
    loss_tangent: float = 0.1
    polarization: Polarization = Polarization.VERTICAL

    def __post_init__(self):
        if self.h_tx_m <= 0 or self.h_rx_m <= 0:
            raise ValueError("antenna heights must be positive")
        if self.epsilon_r <= 1:
            raise ValueError("epsilon_r must exceed 1")
        if self.loss_tangent < 0:
            raise ValueError("loss_tangent must be >= 0")

    @property
    def epsilon_complex(self) -> complex:
        # Convention eps = eps_r * (1 - j tan(delta)) keeps |gamma| <= 1.
        return self.epsilon_r * (1.0 - 1j * self.loss_tangent)


@dataclass(frozen=True)
class PowerLawModel:
    """Slope-intercept path-gain model: A + 10 n log10(d) + N(0, sigma).

    ``intercept_db`` is the 1-m intercept A, ``slope`` the distance exponent
    n (negative for physical links), ``sigma_db`` the RMS shadow-fading
    deviation. Confidence fields are 90% two-sided half-widths when known.
    """

    intercept_db: float
    slope: float
    sigma_db: float
    ci_intercept_db: float | None = None
    ci_slope: float | None = None
    n_points: int = 0
    label: str = ""
    valid_range_m: tuple[float, float] | None = None
    source: str = ""

    def __post_init__(self):
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be >= 0")


@dataclass(frozen=True)
class FitDataset:
    """(distance, path gain) points for regression."""

    distances_m: np.ndarray
    path_gain_db: np.ndarray
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.distances_m, dtype=float)
        g = np.asarray(self.path_gain_db, dtype=float)
        if d.size != g.size:
            raise ValueError("distance and gain arrays must match")
        if np.any(d <= 0):
            raise ValueError("all distances must be positive")
        object.__setattr__(self, "distances_m", d)
        object.__setattr__(self, "path_gain_db", g)

    @property
    def n(self) -> int:
        return self.distances_m.size


@dataclass(frozen=True)
class CommonSlopeFit:
    """Joint fit of two datasets sharing one distance slope."""

    slope: float
    intercept_a_db: float
    intercept_b_db: float
    rms_db: float

    @property
    def intercept_gap_db(self) -> float:
        return self.intercept_a_db - self.intercept_b_db


# ---------------------------------------------------------------------------
# Closed-form models
# ---------------------------------------------------------------------------

def friis_path_gain(d_m, freq_hz: float):
    """Free-space path gain in dB: -20 log10(4 pi d / lambda)."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if freq_hz <= 0:
        raise ValueError("frequency must be positive")
    lam = SPEED_OF_LIGHT / freq_hz
    out = -20.0 * np.log10(4.0 * np.pi * d / lam)
    return float(out) if np.isscalar(d_m) else out


def fresnel_reflection(grazing_angle_rad, geom: TwoRayGeometry):
    """Complex reflection coefficient off a lossy dielectric half-space.

    ``grazing_angle_rad`` is measured from the surface; at grazing the
    coefficient tends to -1 for both polarizations.
    """
    theta = np.asarray(grazing_angle_rad, dtype=float)
    eps = geom.epsilon_complex
    s = np.sin(theta)
    root = np.sqrt(eps - np.cos(theta) ** 2)
    if geom.polarization is Polarization.VERTICAL:
        gamma = (eps * s - root) / (eps * s + root)
    else:
        gamma = (s - root) / (s + root)
    return complex(gamma) if np.isscalar(grazing_angle_rad) else gamma


def _elevation_weight(angle_rad, hpbw_deg: float):
    """Amplitude weight of a Gaussian beam aimed at the horizon."""
    angle_deg = np.degrees(angle_rad)
    return 10.0 ** (-1.2 * (angle_deg / hpbw_deg) ** 2 / 2.0)


def two_ray_path_gain(d_m, geom: TwoRayGeometry,
                      reflection_override: complex | None = None,
                      elevation_weighting: bool = False,
                      elevation_hpbw_deg: float = 10.0):
    """Coherent direct-plus-ground-reflection path gain in dB.

    ``d_m`` is the horizontal Tx-Rx separation. ``reflection_override``
    replaces the Fresnel coefficient (0 isolates the direct ray). Optional
    elevation weighting applies a Gaussian receive beam aimed at the
    horizon, modeling short links falling outside a narrow vertical beam.
    """
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    lam = SPEED_OF_LIGHT / geom.freq_hz
    k = 2.0 * np.pi / lam
    r_direct = np.sqrt(d ** 2 + (geom.h_tx_m - geom.h_rx_m) ** 2)
    r_reflect = np.sqrt(d ** 2 + (geom.h_tx_m + geom.h_rx_m) ** 2)
    theta = np.arctan2(geom.h_tx_m + geom.h_rx_m, d)
    if reflection_override is None:
        gamma = fresnel_reflection(theta, geom)
    else:
        gamma = reflection_override

    w_direct = 1.0
    w_reflect = 1.0
    if elevation_weighting:
        w_direct = _elevation_weight(np.arctan2(geom.h_tx_m - geom.h_rx_m, d),
                                     elevation_hpbw_deg)
        w_reflect = _elevation_weight(theta, elevation_hpbw_deg)

    field = (w_direct * np.exp(-1j * k * r_direct) / r_direct
             + gamma * w_reflect * np.exp(-1j * k * r_reflect) / r_reflect)
    out = 20.0 * np.log10(lam / (4.0 * np.pi) * np.abs(field))
    return float(out) if np.isscalar(d_m) else out


def first_fresnel_radius(d1_m: float, d2_m: float, freq_hz: float) -> float:
    """Radius of the first Fresnel zone at a point splitting the path d1/d2."""
    if d1_m < 0 or d2_m < 0:
        raise ValueError("segment lengths must be >= 0")
    total = d1_m + d2_m
    if total == 0:
        raise ValueError("d1 + d2 must be positive")
    lam = SPEED_OF_LIGHT / freq_hz
    return math.sqrt(lam * d1_m * d2_m / total)


UMI_VALID_RANGE_M = (10.0, 2000.0)


def umi_nlos_path_loss(d_m, freq_ghz: float):
    """36.814 UMi NLOS path loss in positive dB.

    PL = 22.7 + 36.7 log10(d) + 26 log10(f_GHz); warns outside the model's
    10-2000 m validity range.
    """
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0) or freq_ghz <= 0:
        raise ValueError("distance and frequency must be positive")
    if np.any(d < UMI_VALID_RANGE_M[0]) or np.any(d > UMI_VALID_RANGE_M[1]):
        warnings.warn("UMi NLOS model queried outside its 10-2000 m validity range",
                      stacklevel=2)
    out = 22.7 + 36.7 * np.log10(d) + 26.0 * np.log10(freq_ghz)
    return float(out) if np.isscalar(d_m) else out


# ---------------------------------------------------------------------------
# Power-law evaluation and regression
# ---------------------------------------------------------------------------

def power_law_eval(model: PowerLawModel, d_m):
    """Mean path gain of the model at distance d (no shadow fading)."""
    d = np.asarray(d_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = model.intercept_db + 10.0 * model.slope * np.log10(d)
    return float(out) if np.isscalar(d_m) else out


def power_law_sample(model: PowerLawModel, d_m, seed: int):
    """Model evaluation plus one N(0, sigma^2) shadow-fading draw per point."""
    mean = power_law_eval(model, d_m)
    rng = np.random.default_rng(seed)
    shadow = rng.normal(0.0, model.sigma_db, np.shape(d_m) if np.ndim(d_m) else None)
    return mean + shadow


def fit_power_law(data: FitDataset, fixed_intercept_db: float | None = None) -> PowerLawModel:
    """Least-squares slope-intercept fit in dB vs 10 log10(d) space.

    Reports the RMS residual as sigma_db and two-sided 90% Student-t
    confidence half-widths. With ``fixed_intercept_db`` only the slope is
    free (the visual-LOS convention of pinning the 1-m intercept to Friis).
    """
    x = 10.0 * np.log10(data.distances_m)
    y = data.path_gain_db
    if np.ptp(x) == 0:
        raise ValueError("degenerate dataset: all distances equal")

    if fixed_intercept_db is None:
        if data.n < 3:
            raise ValueError("free fit needs at least 3 points")
        xm = x.mean()
        sxx = float(np.sum((x - xm) ** 2))
        slope = float(np.sum((x - xm) * (y - y.mean())) / sxx)
        intercept = float(y.mean() - slope * xm)
        resid = y - (intercept + slope * x)
        dof = data.n - 2
        s2 = float(np.sum(resid ** 2) / dof) if dof > 0 else 0.0
        tval = stats.t.ppf(0.5 + CONFIDENCE / 2.0, dof) if dof > 0 else 0.0
        ci_slope = tval * math.sqrt(s2 / sxx)
        ci_intercept = tval * math.sqrt(s2 * (1.0 / data.n + xm ** 2 / sxx))
    else:
        if data.n < 2:
            raise ValueError("fixed-intercept fit needs at least 2 points")
        intercept = float(fixed_intercept_db)
        sxx = float(np.sum(x ** 2))
        slope = float(np.sum(x * (y - intercept)) / sxx)
        resid = y - (intercept + slope * x)
        dof = data.n - 1
        s2 = float(np.sum(resid ** 2) / dof)
        tval = stats.t.ppf(0.5 + CONFIDENCE / 2.0, dof)
        ci_slope = tval * math.sqrt(s2 / sxx)
        ci_intercept = 0.0

    return PowerLawModel(
        intercept_db=intercept, slope=slope, sigma_db=math.sqrt(s2),
        ci_intercept_db=float(ci_intercept), ci_slope=float(ci_slope),
        n_points=data.n, label=data.label or "fit",
        valid_range_m=(float(data.distances_m.min()), float(data.distances_m.max())),
        source="fit_power_law",
    )


def common_slope_fit(a: FitDataset, b: FitDataset) -> CommonSlopeFit:
    """Joint least squares: one shared slope, one intercept per dataset."""
    xa, xb = 10.0 * np.log10(a.distances_m), 10.0 * np.log10(b.distances_m)
    x = np.concatenate([xa, xb])
    if np.ptp(x) == 0:
        raise ValueError("degenerate datasets: all distances equal")
    y = np.concatenate([a.path_gain_db, b.path_gain_db])
    design = np.zeros((a.n + b.n, 3))
    design[:a.n, 0] = 1.0
    design[a.n:, 1] = 1.0
    design[:, 2] = x
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rms = math.sqrt(float(np.mean(resid ** 2)))
    return CommonSlopeFit(slope=float(coef[2]), intercept_a_db=float(coef[0]),
                          intercept_b_db=float(coef[1]), rms_db=rms)


# ---------------------------------------------------------------------------
# Model catalog
# ---------------------------------------------------------------------------

def _umi_2ghz_as_power_law() -> PowerLawModel:
    # Path gain form of the UMi NLOS loss at a fixed 2 GHz carrier, with the
    # standard's 4 dB shadow-fading deviation.
    intercept = -(22.7 + 26.0 * math.log10(2.0))
    return PowerLawModel(
        intercept_db=intercept, slope=-3.67, sigma_db=4.0,
        label="umi_nlos_2ghz", valid_range_m=UMI_VALID_RANGE_M,
        source="36.814 UMi NLOS at 2 GHz",
    )


BUILTIN_MODELS: dict[str, PowerLawModel] = {
    "same_street": PowerLawModel(
        intercept_db=-45.1, slope=-4.06, sigma_db=6.4,
        ci_intercept_db=1.4, ci_slope=0.08, n_points=1764,
        label="same_street", valid_range_m=(20.0, 200.0),
        source="28 GHz suburban campaign, same-street fit (NJ+Chile combined)"),
    "other_street": PowerLawModel(
        intercept_db=-80.3, slope=-3.13, sigma_db=4.8,
        ci_intercept_db=4.1, ci_slope=0.21, n_points=180,
        label="other_street", valid_range_m=(20.0, 200.0),
        source="28 GHz suburban campaign, other-street fit"),
    "visual_los": PowerLawModel(
        intercept_db=-61.4, slope=-2.44, sigma_db=4.2,
        ci_intercept_db=0.0, ci_slope=0.21, n_points=0,
        label="visual_los", valid_range_m=(20.0, 200.0),
        source="28 GHz suburban campaign, visual-LOS fit (Friis 1-m intercept)"),
    "nj_only": PowerLawModel(
        intercept_db=-48.6, slope=-3.87, sigma_db=6.0,
        ci_intercept_db=1.6, ci_slope=0.09, n_points=1322,
        label="nj_only", valid_range_m=(20.0, 200.0),
        source="28 GHz suburban campaign, NJ same-street subset"),
    "chile_only": PowerLawModel(
        intercept_db=-37.8, slope=-4.44, sigma_db=7.2,
        ci_intercept_db=2.8, ci_slope=0.16, n_points=442,
        label="chile_only", valid_range_m=(20.0, 200.0),
        source="28 GHz suburban campaign, Chile same-street subset"),
    "umi_nlos_2ghz": _umi_2ghz_as_power_law(),
}


def resolve_model(name_or_path: str) -> PowerLawModel:
    """Look up a built-in model by name, or load one from a catalog file."""
    if name_or_path in BUILTIN_MODELS:
        return BUILTIN_MODELS[name_or_path]
    path = Path(name_or_path)
    if path.is_file():
        catalog = load_catalog(path)
        if len(catalog) == 1:
            return next(iter(catalog.values()))
        raise ValueError(f"catalog {path} holds {len(catalog)} models; "
                         "reference one by name instead")
    raise KeyError(f"unknown model {name_or_path!r}; built-ins: "
                   f"{', '.join(sorted(BUILTIN_MODELS))}")


def model_to_dict(model: PowerLawModel) -> dict:
    out = {
        "intercept_db": model.intercept_db,
        "slope": model.slope,
        "sigma_db": model.sigma_db,
        "valid_range_m": list(model.valid_range_m) if model.valid_range_m else None,
        "source": model.source,
    }
    if model.ci_intercept_db is not None:
        out["ci_intercept_db"] = model.ci_intercept_db
    if model.ci_slope is not None:
        out["ci_slope"] = model.ci_slope
    if model.n_points:
        out["n_points"] = model.n_points
    return out


def save_catalog(models: dict[str, PowerLawModel], path: str | Path) -> None:
    payload = {name: model_to_dict(m) for name, m in models.items()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_catalog(path: str | Path) -> dict[str, PowerLawModel]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    catalog = {}
    for name, raw in payload.items():
        vr = raw.get("valid_range_m")
        catalog[name] = PowerLawModel(
            intercept_db=float(raw["intercept_db"]),
            slope=float(raw["slope"]),
            sigma_db=float(raw["sigma_db"]),
            ci_intercept_db=raw.get("ci_intercept_db"),
            ci_slope=raw.get("ci_slope"),
            n_points=int(raw.get("n_points", 0)),
            label=name,
            valid_range_m=tuple(vr) if vr else None,
            source=str(raw.get("source", "")),
        )
    return catalog


def without_shadowing(model: PowerLawModel) -> PowerLawModel:
    """Copy of a model with sigma forced to 0 (deterministic evaluation)."""
    return replace(model, sigma_db=0.0)
