"""Command-line front end.

Subcommands: metrics (per-link channel statistics from scan records), fit
(power-law regression to a path-gain table), synth (scan records from scene
configs), tworay (two-ray curve), simulate (Monte Carlo coverage rates),
report (summary tables plus rendered figures).

Every run stages its outputs and commits them atomically only on success,
then writes a JSON manifest next to them recording command, inputs, config
digest, seed, and tool version. Randomized subcommands require an explicit
--seed so reruns are reproducible. Errors exit nonzero with a single
machine-parsable line on stderr; no partial outputs are left behind.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, coverage, metrics, pathloss, report, synth
from .records import (ScanParseError, default_sounder, load_sounder_config,
                      parse_scan_dataset, validate_record, write_scan_dataset)

PROG = "fwachan"


class CliError(Exception):
    """User-facing failure; rendered as one line on stderr."""


@dataclass
class RunManifest:
    command: str
    inputs: list[str]
    config_digest: str
    seed: int | None
    tool_version: str
    outputs: list[str]


class OutputStager:
    """Collects outputs as temp files and renames them only on success."""

    def __init__(self):
        self._staged: list[tuple[Path, Path]] = []

    def _tmp_for(self, path: Path) -> Path:
        tmp = path.with_name(path.name + f".tmp{os.getpid()}")
        tmp.parent.mkdir(parents=True, exist_ok=True)
        return tmp

    def stage_text(self, path: Path, text: str) -> Path:
        tmp = self._tmp_for(path)
        tmp.write_text(text, encoding="utf-8")
        self._staged.append((tmp, path))
        return path

    def stage_file(self, path: Path) -> Path:
        """Reserve a final path; returns the temp path for direct writing."""
        tmp = self._tmp_for(path)
        self._staged.append((tmp, path))
        return tmp

    def unstage(self, path: Path) -> None:
        for tmp, final in list(self._staged):
            if final == path:
                tmp.unlink(missing_ok=True)
                self._staged.remove((tmp, final))

    @property
    def outputs(self) -> list[Path]:
        return [final for _, final in self._staged]

    def commit(self):
        for tmp, final in self._staged:
            os.replace(tmp, final)
        self._staged.clear()

    def abort(self):
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()


@contextmanager
def staged_outputs():
    stager = OutputStager()
    try:
        yield stager
        stager.commit()
    except BaseException:
        stager.abort()
        raise


def _digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()[:16]


def _config_digest(config_arg: str | None) -> str:
    if config_arg is None:
        return "default"
    path = Path(config_arg)
    if path.is_file():
        return _digest(path.read_bytes())
    return _digest(config_arg)


def _write_manifest(stager: OutputStager, manifest_path: Path, command: str,
                    inputs: list[str], config_arg: str | None, seed: int | None):
    manifest = RunManifest(
        command=command,
        inputs=[str(p) for p in inputs],
        config_digest=_config_digest(config_arg),
        seed=seed,
        tool_version=__version__,
        outputs=[str(p) for p in stager.outputs],
    )
    stager.stage_text(manifest_path, json.dumps(asdict(manifest), indent=2) + "\n")


def _parse_distances(spec: str) -> np.ndarray:
    try:
        start, stop, step = (float(tok) for tok in spec.split(":"))
    except ValueError:
        raise CliError(f"bad --distances {spec!r}, expected start:stop:step") from None
    if step <= 0 or stop <= start or start <= 0:
        raise CliError(f"bad --distances {spec!r}: need 0 < start < stop and step > 0")
    return np.arange(start, stop, step)


def _detect_format(path: Path) -> str:
    return "json" if path.suffix.lower() == ".json" else "csv"


def _fmt(value: float, digits: int = 4) -> str:
    return f"{value:.{digits}f}"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_metrics(args) -> int:
    sounder = load_sounder_config(args.config) if args.config else default_sounder()
    records = parse_scan_dataset(args.input, _detect_format(Path(args.input)))

    lines = [",".join(report.METRICS_COLUMNS)]
    psd_tables: list[tuple[str, metrics.PowerSpectrum]] = []
    for rec in records:
        rep = validate_record(rec)
        profile = metrics.angular_profile(rec)
        path_gain = metrics.compute_path_gain(rec, sounder)
        eff = metrics.effective_azimuth_gain(profile)
        k_str = fluct_str = beam_str = ""
        warn = list(rep.violations)
        if rec.n_turns >= 2:
            best = metrics.best_on_average_angle(profile)
            fixed = metrics.temporal_series(rec, metrics.SeriesMode.FIXED_ANGLE, best)
            ptb = metrics.temporal_series(rec, metrics.SeriesMode.PER_TURN_BEST)
            fit = metrics.estimate_k_factor_mom(fixed)
            fluct = metrics.turn_fluctuation_stats(fixed, ptb)
            k_str = report.format_k_db(fit.k_db)
            fluct_str = _fmt(fluct.p90_db)
            beam_str = _fmt(fluct.beamswitch_gain_db)
            if args.psd_output and rec.n_turns >= 8:
                psd_tables.append((rec.link_id, metrics.doppler_spectrum(fixed)))
        else:
            warn.append("too few turns for temporal statistics")
        lines.append(",".join([
            rec.link_id, f"{rec.distance_m:.6g}", rec.scenario.value,
            _fmt(path_gain), _fmt(eff), k_str, fluct_str, beam_str,
            ";".join(warn),
        ]))

    with staged_outputs() as stager:
        out = Path(args.output)
        stager.stage_text(out, "\n".join(lines) + "\n")
        for link_id, spectrum in psd_tables:
            psd_lines = ["freq_hz,psd"]
            psd_lines += [f"{f:.6f},{p:.8e}" for f, p in
                          zip(spectrum.freq_hz, spectrum.psd)]
            stager.stage_text(Path(args.psd_output) / f"{link_id}_doppler.csv",
                              "\n".join(psd_lines) + "\n")
        _write_manifest(stager, out.with_suffix(out.suffix + ".manifest.json"),
                        "metrics", [args.input], args.config, None)
    return 0


def cmd_fit(args) -> int:
    dataset = report.read_fit_dataset(Path(args.input))
    model = pathloss.fit_power_law(dataset, fixed_intercept_db=args.fixed_intercept)
    name = args.model or "fit"

    x = 10.0 * np.log10(dataset.distances_m)
    resid = dataset.path_gain_db - (model.intercept_db + model.slope * x)
    resid_lines = ["distance_m,residual_db"]
    resid_lines += [f"{d:.6g},{r:.4f}" for d, r in zip(dataset.distances_m, resid)]

    with staged_outputs() as stager:
        out = Path(args.output)
        stager.stage_text(out, json.dumps({name: pathloss.model_to_dict(model)},
                                          indent=2) + "\n")
        stager.stage_text(out.with_name(out.stem + "_residuals.csv"),
                          "\n".join(resid_lines) + "\n")
        _write_manifest(stager, out.with_suffix(out.suffix + ".manifest.json"),
                        "fit", [args.input], None, None)
    print(f"{name}: intercept {model.intercept_db:.2f} dB, slope {model.slope:.3f}, "
          f"sigma {model.sigma_db:.2f} dB (n={model.n_points})")
    return 0


def cmd_synth(args) -> int:
    scenes = synth.load_scene_truths(args.config)
    sounder = default_sounder()
    records = []
    for i, scene in enumerate(scenes):
        # --seed overrides scene seeds; the offset keeps scenes independent.
        records.append(synth.synthesize_scan_record(
            replace(scene, rng_seed=args.seed + i), sounder))

    with staged_outputs() as stager:
        out = Path(args.output)
        tmp = stager.stage_file(out)
        write_scan_dataset(records, tmp, _detect_format(out))
        _write_manifest(stager, out.with_suffix(out.suffix + ".manifest.json"),
                        "synth", [args.config], args.config, args.seed)
    return 0


def cmd_tworay(args) -> int:
    if args.config:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if "polarization" in raw:
            raw["polarization"] = pathloss.Polarization(raw["polarization"])
        try:
            geom = pathloss.TwoRayGeometry(**raw)
        except TypeError as exc:
            raise CliError(f"invalid two-ray config: {exc}") from None
    else:
        geom = pathloss.TwoRayGeometry()
    distances = _parse_distances(args.distances)
    two_ray = pathloss.two_ray_path_gain(distances, geom)
    friis = pathloss.friis_path_gain(distances, geom.freq_hz)

    lines = ["distance_m,two_ray_gain_db,friis_gain_db"]
    lines += [f"{d:.6g},{t:.4f},{f:.4f}" for d, t, f in zip(distances, two_ray, friis)]
    with staged_outputs() as stager:
        out = Path(args.output)
        stager.stage_text(out, "\n".join(lines) + "\n")
        _write_manifest(stager, out.with_suffix(out.suffix + ".manifest.json"),
                        "tworay", [], args.config, None)
    return 0


def cmd_simulate(args) -> int:
    try:
        cfg = coverage.load_system_config(args.config or "fwa28_same_street")
        if args.model:
            cfg = coverage.with_model(cfg, args.model)
        if args.mode:
            cfg = coverage.with_mode(cfg, coverage.GainReductionMode(args.mode))
        plan = coverage.SimulationPlan(
            distances_m=_parse_distances(args.distances),
            links_per_distance=args.links,
            coverage_quantile=args.quantile,
            seed=args.seed,
        )
    except (ValueError, KeyError) as exc:
        raise CliError(str(exc)) from None

    points = coverage.rate_vs_distance(cfg, plan, workers=args.workers)
    label = cfg.label or "config"
    mode = cfg.gain_reduction_mode.value
    lines = [",".join(report.RATE_COLUMNS)]
    lines += [f"{p.distance_m:.6g},{p.gamma_db:.4f},{p.rate_bps:.1f},{label},{mode}"
              for p in points]

    with staged_outputs() as stager:
        out = Path(args.output)
        stager.stage_text(out, "\n".join(lines) + "\n")
        _write_manifest(stager, out.with_suffix(out.suffix + ".manifest.json"),
                        "simulate", [], args.config, args.seed)
    return 0


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _two_col(name: str, x, p) -> str:
    lines = [f"{name},cdf"]
    lines += [f"{xv:.4f},{pv:.6f}" for xv, pv in zip(x, p)]
    return "\n".join(lines) + "\n"


def _by_scenario(rows: list[dict], key: str) -> dict[str, np.ndarray]:
    out = {}
    for scenario in sorted({r["scenario"] for r in rows}):
        out[scenario] = np.asarray(
            [r[key] for r in rows if r["scenario"] == scenario], dtype=float)
    return out


def _stage_figure(stager: OutputStager, path: Path, render) -> None:
    tmp = stager.stage_file(path)
    if render(tmp) is None:  # nothing plottable: drop the reservation
        stager.unstage(path)


def cmd_report(args) -> int:
    metrics_rows: list[dict] = []
    rate_rows: list[dict] = []
    for raw in args.input:
        path = Path(raw)
        if not path.is_file():
            raise CliError(f"cannot read {path}")
        kind = report.detect_table(path)
        if kind == "metrics":
            metrics_rows.extend(report.read_metrics_csv(path))
        elif kind == "rate":
            rate_rows.extend(report.read_rate_csv(path))
        else:
            raise CliError(f"unrecognized table header in {path}")
    if not metrics_rows and not rate_rows:
        raise CliError("no usable rows in inputs")

    outdir = Path(args.output)
    with staged_outputs() as stager:
        if metrics_rows:
            summary = report.summarize_metrics(metrics_rows)
            cols: list[str] = []
            for row in summary:
                cols.extend(c for c in row if c not in cols)
            lines = [",".join(cols)]
            for row in summary:
                lines.append(",".join(_cell(row.get(c, "")) for c in cols))
            stager.stage_text(outdir / "summary.csv", "\n".join(lines) + "\n")

            x, p = report.cdf_table([r["eff_azim_gain_db"] for r in metrics_rows])
            stager.stage_text(outdir / "eff_gain_cdf.csv",
                              _two_col("eff_azim_gain_db", x, p))
            k = np.asarray([r["k_factor_db"] for r in metrics_rows])
            if np.isfinite(k).any():
                x, p = report.cdf_table(k)
                stager.stage_text(outdir / "k_factor_cdf.csv",
                                  _two_col("k_factor_db", x, p))

            _stage_figure(stager, outdir / "eff_gain_cdf.png",
                          lambda path: report.plot_cdf(
                              _by_scenario(metrics_rows, "eff_azim_gain_db"),
                              "effective azimuth gain (dB)", path))
            _stage_figure(stager, outdir / "k_factor_cdf.png",
                          lambda path: report.plot_cdf(
                              _by_scenario(metrics_rows, "k_factor_db"),
                              "temporal K-factor (dB)", path))
            _stage_figure(stager, outdir / "path_gain_vs_distance.png",
                          lambda path: report.plot_path_gain(metrics_rows, path))

        if rate_rows:
            _stage_figure(stager, outdir / "rate_vs_distance.png",
                          lambda path: report.plot_rate_curves(rate_rows, path))

        _write_manifest(stager, outdir / "manifest.json", "report",
                        list(args.input), None, None)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Suburban fixed-wireless-access channel toolkit")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="per-link channel metrics from scan records")
    p.add_argument("--input", required=True, help="scan-record file (.csv or .json)")
    p.add_argument("--config", help="sounder config JSON (default: built-in sounder)")
    p.add_argument("--output", required=True, help="metrics CSV to write")
    p.add_argument("--psd-output",
                   help="also write per-link Doppler PSDs (two-column CSVs) here")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("fit", help="power-law fit to a (distance, path gain) table")
    p.add_argument("--input", required=True,
                   help="CSV with distance_m and path_gain_db columns")
    p.add_argument("--output", required=True, help="catalog JSON to write")
    p.add_argument("--model", help="catalog entry name (default: fit)")
    p.add_argument("--fixed-intercept", type=float, default=None,
                   help="pin the 1-m intercept (dB) and fit only the slope")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="synthesize scan records from scene configs")
    p.add_argument("--config", required=True, help="scene truth JSON")
    p.add_argument("--seed", required=True, type=int,
                   help="RNG seed (overrides scene seeds)")
    p.add_argument("--output", required=True, help="scan-record file to write")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("tworay", help="two-ray vs free-space path gain table")
    p.add_argument("--config", help="geometry JSON (default: 1 m / 3 m masts at 28 GHz)")
    p.add_argument("--distances", default="20:200:1", help="start:stop:step in meters")
    p.add_argument("--output", required=True, help="CSV to write")
    p.set_defaults(func=cmd_tworay)

    p = sub.add_parser("simulate", help="Monte Carlo coverage-rate curve")
    p.add_argument("--config", help="system config preset name or JSON path")
    p.add_argument("--model", help="override the path-loss catalog model")
    p.add_argument("--mode", choices=[m.value for m in coverage.GainReductionMode],
                   help="override the gain-reduction mode")
    p.add_argument("--distances", default="20:200:3", help="start:stop:step in meters")
    p.add_argument("--links", type=int, default=10000, help="links per distance")
    p.add_argument("--quantile", type=float, default=0.10,
                   help="coverage quantile (0.10 = SNR exceeded by 90%% of links)")
    p.add_argument("--seed", required=True, type=int, help="RNG seed")
    p.add_argument("--workers", type=int, default=1,
                   help="worker threads across distances (output identical for any count)")
    p.add_argument("--output", required=True, help="rate CSV to write")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="summary tables and figures from CSV outputs")
    p.add_argument("--input", required=True, nargs="+",
                   help="metrics and/or simulate CSVs")
    p.add_argument("--output", required=True, help="output directory")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except (ScanParseError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        message = str(exc).replace("\n", " ")
        print(f"{PROG}: error: {message}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
