"""Configuration-driven batch front end.

A JSON config file describes one experiment family; ``snr_db`` and ``b``
may be lists, in which case the Cartesian product of the swept axes is
executed. Results stream to CSV (one row per point and scheme, flushed per
point) with a JSON mirror carrying per-channel arrays and the final bit
allocations.

Exit codes: 0 success, 1 run error, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bitalloc, channel, evaluation
from .quantizer import distortion_table, quantizer_mse, _unit_quantizer

__all__ = [
    "ExperimentConfig",
    "PointRecord",
    "parse_config",
    "run_sweep",
    "write_results",
    "main",
]

CSV_COLUMNS = [
    "snr_db", "b", "scheme",
    "mean_se_apx", "stderr_se_apx", "mean_se_sim", "stderr_se_sim",
    "mean_ee", "total_power_w", "mean_iterations", "seed",
]

_REQUIRED_KEYS = {"Nt", "Nr", "Ns", "snr_db", "b"}
_KNOWN_KEYS = _REQUIRED_KEYS | {
    "Pt", "b_max", "varsigma", "b_total", "eps", "max_iter", "I2",
    "scoring_max_iter", "sv", "seed", "schemes", "num_channels",
    "num_qd_samples", "sim_se", "output_dir", "carrier_frequency_hz",
}
_KNOWN_SV_KEYS = {"num_clusters", "rays_per_cluster", "angle_spread_deg"}


class ConfigError(ValueError):
    """Raised for malformed or infeasible experiment configurations."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description, possibly with swept axes."""

    nt: int
    nr: int
    ns: int
    snr_db: tuple[float, ...]
    b: tuple[int, ...]
    pt: float = 1.0
    b_max: int = 8
    varsigma: float = 1.0
    b_total: int | None = None
    eps: float = 1e-4
    max_iter: int = 500
    i2: int = 15
    scoring_max_iter: int = 30
    sv: channel.SVParams = field(default_factory=channel.SVParams)
    seed: int = 0
    schemes: tuple[str, ...] = ("WF", "AltMinBF")
    num_channels: int = 1000
    num_qd_samples: int = 10**5
    sim_se: bool = False
    output_dir: str = "results"
    carrier_frequency_hz: float = 28e9  # metadata only; not used in any computation

    def points(self) -> list[tuple[dict, evaluation.PointConfig]]:
        """Expand swept axes into (axes, point-config) pairs."""
        out = []
        for snr in self.snr_db:
            for b in self.b:
                axes = {"snr_db": snr, "b": b}
                cfg = evaluation.PointConfig(
                    nt=self.nt, nr=self.nr, ns=self.ns, snr_db=snr, pt=self.pt,
                    b=b, b_max=self.b_max, varsigma=self.varsigma,
                    b_total=self.b_total, eps=self.eps, max_iter=self.max_iter,
                    i2=self.i2, scoring_max_iter=self.scoring_max_iter,
                    sv=self.sv, sim_se=self.sim_se,
                    num_qd_samples=self.num_qd_samples,
                )
                out.append((axes, cfg))
        return out

    def validate(self) -> None:
        for axes, cfg in self.points():
            try:
                cfg.validate(self.schemes)
            except ValueError as exc:
                raise ConfigError(f"infeasible point {axes}: {exc}") from exc


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def parse_config(path) -> ExperimentConfig:
    """Load and validate a JSON experiment config.

    Unknown keys are rejected; missing required keys and infeasible
    cross-field combinations raise :class:`ConfigError` with the offending
    key or point named.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - set(raw)
    if missing:
        raise ConfigError(f"missing required config keys: {sorted(missing)}")

    sv_raw = raw.get("sv", {})
    if not isinstance(sv_raw, dict):
        raise ConfigError("'sv' must be an object")
    unknown_sv = set(sv_raw) - _KNOWN_SV_KEYS
    if unknown_sv:
        raise ConfigError(f"unknown sv keys: {sorted(unknown_sv)}")

    schemes = tuple(raw.get("schemes", ("WF", "AltMinBF")))
    bad = [s for s in schemes if s not in evaluation.SCHEMES]
    if bad:
        raise ConfigError(
            f"unknown schemes {bad}; valid schemes are {list(evaluation.SCHEMES)}"
        )

    try:
        config = ExperimentConfig(
            nt=int(raw["Nt"]),
            nr=int(raw["Nr"]),
            ns=int(raw["Ns"]),
            snr_db=tuple(float(x) for x in _as_list(raw["snr_db"])),
            b=tuple(int(x) for x in _as_list(raw["b"])),
            pt=float(raw.get("Pt", 1.0)),
            b_max=int(raw.get("b_max", 8)),
            varsigma=float(raw.get("varsigma", 1.0)),
            b_total=None if raw.get("b_total") is None else int(raw["b_total"]),
            eps=float(raw.get("eps", 1e-4)),
            max_iter=int(raw.get("max_iter", 500)),
            i2=int(raw.get("I2", 15)),
            scoring_max_iter=int(raw.get("scoring_max_iter", 30)),
            sv=channel.SVParams(**sv_raw),
            seed=int(raw.get("seed", 0)),
            schemes=schemes,
            num_channels=int(raw.get("num_channels", 1000)),
            num_qd_samples=int(raw.get("num_qd_samples", 10**5)),
            sim_se=bool(raw.get("sim_se", False)),
            output_dir=str(raw.get("output_dir", "results")),
            carrier_frequency_hz=float(raw.get("carrier_frequency_hz", 28e9)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    config.validate()
    return config


def _fmt(value) -> str:
    """Serialize one CSV cell; floats carry 17 significant digits."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".17g")
    return str(value)


@dataclass(frozen=True)
class PointRecord:
    axes: dict
    result: evaluation.ExperimentResult


def _rows_of(record: PointRecord) -> list[dict]:
    rows = []
    for scheme, out in record.result.outcomes.items():
        rows.append({
            "snr_db": float(record.axes["snr_db"]),
            "b": record.axes["b"],
            "scheme": scheme,
            "mean_se_apx": out.mean_se_apx,
            "stderr_se_apx": out.stderr_se_apx,
            "mean_se_sim": out.mean_se_sim,
            "stderr_se_sim": out.stderr_se_sim,
            "mean_ee": out.mean_ee,
            "total_power_w": out.mean_power_w,
            "mean_iterations": out.mean_iterations,
            "seed": record.result.seed,
        })
    return rows


def _json_record(record: PointRecord) -> dict:
    result = record.result
    schemes = {}
    for scheme, out in result.outcomes.items():
        schemes[scheme] = {
            "mean_se_apx": out.mean_se_apx,
            "stderr_se_apx": out.stderr_se_apx,
            "mean_se_sim": None if out.se_sim is None else out.mean_se_sim,
            "stderr_se_sim": None if out.se_sim is None else out.stderr_se_sim,
            "mean_ee": out.mean_ee,
            "total_power_w": out.mean_power_w,
            "mean_iterations": out.mean_iterations,
            "se_apx_per_channel": out.se_apx.tolist(),
            "se_sim_per_channel": None if out.se_sim is None else out.se_sim.tolist(),
            "ee_per_channel": out.ee.tolist(),
            "allocations": [list(a) for a in out.allocations],
            "failures": out.failures,
        }
    cfg = dataclasses.asdict(result.config)
    cfg["sv"] = dataclasses.asdict(result.config.sv)
    return {
        "axes": record.axes,
        "seed": result.seed,
        "num_channels": result.num_channels,
        "config": cfg,
        "schemes": schemes,
    }


def write_results(records: list[PointRecord], format: str, path) -> None:
    """Write collected point records as CSV rows or a JSON document."""
    path = Path(path)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for record in records:
                for row in _rows_of(record):
                    writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    elif format == "json":
        doc = {"points": [_json_record(r) for r in records]}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
    else:
        raise ValueError(f"unknown results format {format!r}")


def _dump_quantizers(config: ExperimentConfig, out_dir: Path) -> None:
    table = distortion_table()
    doc = {}
    for b in sorted(set(config.b)):
        q = _unit_quantizer(b, "lloyd_max")
        doc[str(b)] = {
            "bits": b,
            "thresholds": q.thresholds.tolist(),
            "codebook": q.codebook.tolist(),
            "gamma": table.gamma(b),
            "mse": quantizer_mse(q),
        }
    with open(out_dir / "quantizers.json", "w") as fh:
        json.dump(doc, fh, indent=1)


def _oracle_outcome(cfg: evaluation.PointConfig, seed: int,
                    num_channels: int) -> evaluation.SchemeOutcome:
    """Exhaustive-search scheme row over the same channel ensemble."""
    ses, ees, powers, allocs = [], [], [], []
    for c in range(num_channels):
        H = channel.saleh_valenzuela(
            cfg.nt, cfg.nr, cfg.sv, seed=evaluation.derive_seed(seed, 0, c)
        ).H
        alloc, se = bitalloc.exhaustive_search(
            H, pt=cfg.pt, sigma_n2=cfg.sigma_n2, ns=cfg.ns,
            b_max=cfg.b_max,
            b_total=cfg.nr * cfg.b if cfg.b_total is None else cfg.b_total,
            varsigma=cfg.varsigma, eps=cfg.eps, max_iter=cfg.max_iter,
        )
        p_tot = evaluation.total_power(alloc.bits)
        ses.append(se)
        ees.append(evaluation.energy_efficiency(se, p_tot))
        powers.append(p_tot)
        allocs.append(alloc.bits)
    return evaluation.SchemeOutcome(
        scheme="ES",
        se_apx=np.asarray(ses),
        se_sim=None,
        ee=np.asarray(ees),
        power_w=np.asarray(powers),
        iterations=np.zeros(len(ses)),
        allocations=allocs,
        failures=0,
    )


def run_sweep(config: ExperimentConfig, output_dir=None,
              oracle: bool = False, progress=print) -> int:
    """Execute all sweep points, streaming results to disk per point.

    The CSV is rewritten and flushed after each point so an interrupted
    run keeps every completed point. Returns a process exit status (0 on
    success, 1 if any point raised).
    """
    out_dir = Path(output_dir if output_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "results.csv"
    json_path = out_dir / "results.json"
    records: list[PointRecord] = []
    points = config.points()
    status = 0
    for i, (axes, cfg) in enumerate(points):
        if progress:
            progress(f"[{i + 1}/{len(points)}] snr_db={axes['snr_db']:g} b={axes['b']}")
        try:
            result = evaluation.run_experiment(
                cfg, config.schemes, config.num_channels, config.seed
            )
            if oracle:
                result.outcomes["ES"] = _oracle_outcome(
                    cfg, config.seed, config.num_channels
                )
        except Exception as exc:
            if progress:
                progress(f"point {axes} failed: {exc}")
            status = 1
            break
        records.append(PointRecord(axes=axes, result=result))
        write_results(records, "csv", csv_path)
        write_results(records, "json", json_path)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qmimo",
        description="Batch SE/EE experiments for MIMO links with low-resolution ADCs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run the sweep described by a JSON config")
    run_p.add_argument("config", help="path to the JSON experiment config")
    run_p.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
    run_p.add_argument("--channels", type=int, default=None,
                       help="override the number of channel realizations")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the master seed")
    run_p.add_argument("--dump-quantizers", action="store_true",
                       help="also write thresholds/codebooks/gamma per used resolution")
    run_p.add_argument("--oracle", action="store_true",
                       help="add an exhaustive-search comparison row (small instances only)")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
        if args.channels is not None:
            config = dataclasses.replace(config, num_channels=args.channels)
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
        if args.oracle:
            if config.b_max ** config.nr > 10**6:
                raise ConfigError(
                    f"--oracle needs b_max^Nr <= 1e6, got "
                    f"{config.b_max}^{config.nr} = {config.b_max**config.nr:.3g}"
                )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.output_dir if args.output_dir else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.dump_quantizers:
        _dump_quantizers(config, out_dir)
    try:
        return run_sweep(config, output_dir=out_dir, oracle=args.oracle)
    except Exception as exc:
        print(f"run error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
