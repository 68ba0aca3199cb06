"""Summary tables and figures from per-link metrics and rate curves.

Takes the delimited outputs of the metrics and simulate paths and produces
quantile summary tables, two-column CDF tables, and matplotlib figures
rendered to files alongside the CSVs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # headless rendering only
import matplotlib.pyplot as plt
import numpy as np

from .metrics import EmpiricalCdf, fit_lognormal_db
from .pathloss import BUILTIN_MODELS, FitDataset, power_law_eval

K_FLOOR_LABEL = "<=-20"  # CLI table form of the -inf (Rayleigh-or-worse) sentinel

METRICS_COLUMNS = ("link_id", "distance_m", "scenario", "path_gain_db",
                   "eff_azim_gain_db", "k_factor_db", "fluct_p90_db",
                   "beamswitch_gain_db", "warnings")
RATE_COLUMNS = ("distance_m", "gamma_q_db", "rate_bps", "config_label", "mode")


def format_k_db(k_db: float) -> str:
    if np.isneginf(k_db):
        return K_FLOOR_LABEL
    if np.isposinf(k_db):
        return "inf"
    return f"{k_db:.2f}"


def parse_k_db(text: str) -> float:
    if text == K_FLOOR_LABEL:
        return -np.inf
    return float(text)


def _float_or_nan(text: str) -> float:
    return float(text) if text not in ("", None) else float("nan")


def detect_table(path: Path) -> str | None:
    """Classify a CSV by header: 'metrics', 'rate', or None."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if set(METRICS_COLUMNS[:8]).issubset(header):
        return "metrics"
    if set(RATE_COLUMNS).issubset(header):
        return "rate"
    return None


def read_metrics_csv(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rows.append({
                "link_id": raw["link_id"],
                "distance_m": float(raw["distance_m"]),
                "scenario": raw["scenario"],
                "path_gain_db": float(raw["path_gain_db"]),
                "eff_azim_gain_db": float(raw["eff_azim_gain_db"]),
                "k_factor_db": (parse_k_db(raw["k_factor_db"])
                                if raw["k_factor_db"] else float("nan")),
                "fluct_p90_db": _float_or_nan(raw["fluct_p90_db"]),
                "beamswitch_gain_db": _float_or_nan(raw["beamswitch_gain_db"]),
                "warnings": raw.get("warnings", ""),
            })
    return rows


def read_rate_csv(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for raw in csv.DictReader(fh):
            rows.append({
                "distance_m": float(raw["distance_m"]),
                "gamma_q_db": float(raw["gamma_q_db"]),
                "rate_bps": float(raw["rate_bps"]),
                "config_label": raw["config_label"],
                "mode": raw["mode"],
            })
    return rows


def read_fit_dataset(path: Path) -> FitDataset:
    """(distance, path gain) points from any CSV carrying those two columns."""
    distances, gains = [], []
    with open(path, encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "distance_m" not in fields or "path_gain_db" not in fields:
            raise ValueError(f"{path} lacks distance_m/path_gain_db columns")
        for raw in reader:
            distances.append(float(raw["distance_m"]))
            gains.append(float(raw["path_gain_db"]))
    if not distances:
        raise ValueError(f"{path} holds no data rows")
    return FitDataset(distances_m=np.asarray(distances),
                      path_gain_db=np.asarray(gains), label=path.stem)


def _finite(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return arr[np.isfinite(arr)]


def summarize_metrics(rows: list[dict]) -> list[dict]:
    """Per-scenario quantile summary of the metrics table.

    Reports link counts, path-gain median, effective-azimuth-gain quantiles
    with a log-normal (in dB) fit, the K-factor median, and fluctuation /
    beam-switching medians, one row per scenario plus an ``all`` row.
    """
    out = []
    scenarios = sorted({r["scenario"] for r in rows})
    for scenario in scenarios + ["all"]:
        group = [r for r in rows if scenario == "all" or r["scenario"] == scenario]
        if not group:
            continue
        eff = _finite([r["eff_azim_gain_db"] for r in group])
        k = np.asarray([r["k_factor_db"] for r in group], dtype=float)
        k = k[~np.isnan(k)]  # keep +/-inf sentinels, drop missing values
        k_finite = _finite(k)
        fluct = _finite([r["fluct_p90_db"] for r in group])
        beam = _finite([r["beamswitch_gain_db"] for r in group])
        summary = {
            "scenario": scenario,
            "n_links": len(group),
            "path_gain_median_db": float(np.median([r["path_gain_db"] for r in group])),
            "eff_gain_p10_db": float(np.quantile(eff, 0.10)) if eff.size else float("nan"),
            "eff_gain_median_db": float(np.median(eff)) if eff.size else float("nan"),
            "eff_gain_p90_db": float(np.quantile(eff, 0.90)) if eff.size else float("nan"),
            "k_factor_median_db": format_k_db(float(np.median(k))) if k.size else "",
            "fluct_p90_median_db": float(np.median(fluct)) if fluct.size else float("nan"),
            "beamswitch_median_db": float(np.median(beam)) if beam.size else float("nan"),
        }
        if eff.size >= 2:
            fit = fit_lognormal_db(eff)
            summary["eff_gain_fit_mu_db"] = fit.mu_db
            summary["eff_gain_fit_sigma_db"] = fit.sigma_db
        if k_finite.size >= 2:
            fit = fit_lognormal_db(k_finite)
            summary["k_factor_fit_mu_db"] = fit.mu_db
            summary["k_factor_fit_sigma_db"] = fit.sigma_db
        out.append(summary)
    return out


def cdf_table(values) -> tuple[np.ndarray, np.ndarray]:
    return EmpiricalCdf(_finite(values)).to_table()


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=150, format="png")  # explicit: path may be a temp name
    plt.close(fig)
    return path


def plot_cdf(values_by_label: dict[str, np.ndarray], xlabel: str,
             path: Path, title: str = "") -> Path | None:
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for label, values in values_by_label.items():
        v = _finite(values)
        if v.size == 0:
            continue
        x, p = EmpiricalCdf(v).to_table()
        ax.step(x, p, where="post", label=f"{label} (n={v.size})")
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    ax.set_xlabel(xlabel)
    ax.set_ylabel("CDF")
    ax.set_ylim(0, 1)
    ax.grid(alpha=0.4)
    ax.legend()
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_path_gain(rows: list[dict], path: Path) -> Path | None:
    fig, ax = plt.subplots(figsize=(6, 4))
    plotted = False
    for scenario in sorted({r["scenario"] for r in rows}):
        group = [r for r in rows if r["scenario"] == scenario]
        d = [r["distance_m"] for r in group]
        g = [r["path_gain_db"] for r in group]
        ax.semilogx(d, g, "o", ms=4, alpha=0.7, label=scenario)
        plotted = True
    if not plotted:
        plt.close(fig)
        return None
    d_line = np.logspace(np.log10(20), np.log10(200), 100)
    for name in ("same_street", "other_street"):
        ax.semilogx(d_line, power_law_eval(BUILTIN_MODELS[name], d_line),
                    "-", lw=1, label=f"{name} model")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("path gain (dB)")
    ax.grid(alpha=0.4, which="both")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_rate_curves(rate_rows: list[dict], path: Path) -> Path | None:
    if not rate_rows:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    labels = sorted({(r["config_label"], r["mode"]) for r in rate_rows})
    for label, mode in labels:
        group = [r for r in rate_rows
                 if r["config_label"] == label and r["mode"] == mode]
        group.sort(key=lambda r: r["distance_m"])
        d = [r["distance_m"] for r in group]
        rate = [r["rate_bps"] / 1e6 for r in group]
        ax.semilogy(d, rate, lw=1.5, label=f"{label} / {mode}")
    ax.set_xlabel("distance (m)")
    ax.set_ylabel("90%-coverage rate (Mbit/s)")
    ax.grid(alpha=0.4, which="both")
    ax.legend(fontsize=8)
    return _save(fig, path)
