"""Batch sweep harness: config parsing, seeded parallel trials, CSV output.

A sweep varies one axis (M, N, K, B or none), runs every configured
(optimizer, ordering) scheme on shared per-trial channel realizations, and
writes one deterministic CSV of per-trial rows plus per-cell aggregate
rows.  Wall-clock times go to a sidecar file so the results file is byte
identical across reruns.
"""

from __future__ import annotations

import csv
import io
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np
import yaml

from .channel import ScenarioConfig, dbm_from_mw
from .orchestrator import ORDERING_SCHEMES, RunResult, Variant, run_trial

AXES = ("M", "N", "K", "B", "none")

CSV_FIELDS = (
    "row_type",
    "axis",
    "axis_value",
    "optimizer",
    "ordering",
    "bits",
    "trial",
    "seed",
    "power_mw",
    "power_dbm",
    "outer_iterations",
    "termination_reason",
    "n_trials",
    "n_feasible",
    "n_converged",
    "mean_power_dbm",
    "feasibility_rate",
)


@dataclass(frozen=True)
class Scheme:
    optimizer: Variant
    ordering: str

    @classmethod
    def parse(cls, spec) -> "Scheme":
        if isinstance(spec, Scheme):
            return spec
        if isinstance(spec, str):
            opt, _, order = spec.partition(":")
            return cls(Variant(opt), order or "eigen")
        if isinstance(spec, dict):
            unknown = set(spec) - {"optimizer", "ordering"}
            if unknown:
                raise ConfigError(f"scheme entry has unknown keys {sorted(unknown)}")
            return cls(Variant(spec.get("optimizer", "dc")), spec.get("ordering", "eigen"))
        raise ConfigError(f"cannot parse scheme from {spec!r}")

    def label(self) -> str:
        return f"{self.optimizer.value}:{self.ordering}"


@dataclass
class SweepSpec:
    base: ScenarioConfig = field(default_factory=ScenarioConfig)
    axis: str = "none"
    values: tuple = (None,)
    schemes: tuple = (Scheme(Variant.DC, "eigen"),)
    n_trials: int = 100
    bits: int | None = None  # None = continuous phases
    out: str = "results.csv"
    workers: int = 1

    def validate(self) -> None:
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("sweep value list is empty")
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for s in self.schemes:
            if s.ordering not in ORDERING_SCHEMES:
                raise ConfigError(f"unknown ordering scheme {s.ordering!r}")
        for v in self.values:
            if self.axis in ("M", "N", "K") and (not isinstance(v, int) or v < 0):
                raise ConfigError(f"axis {self.axis} values must be nonnegative integers")
            if self.axis == "B" and v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError("axis B values must be positive integers or null (continuous)")


class ConfigError(ValueError):
    pass


_SCENARIO_FIELDS = {f.name for f in fields(ScenarioConfig)}
_SWEEP_KEYS = {"axis", "values", "schemes", "n_trials", "bits", "out", "workers"}


def _coerce_scenario(raw: dict) -> ScenarioConfig:
    unknown = set(raw) - _SCENARIO_FIELDS
    if unknown:
        raise ConfigError(f"scenario: unknown keys {sorted(unknown)}")
    kwargs = dict(raw)
    for key in ("bs_pos", "ris_pos"):
        if key in kwargs:
            kwargs[key] = tuple(float(x) for x in kwargs[key])
    if "user_region" in kwargs:
        kwargs["user_region"] = tuple(tuple(float(x) for x in r) for r in kwargs["user_region"])
    if "user_positions" in kwargs and kwargs["user_positions"] is not None:
        kwargs["user_positions"] = tuple(tuple(float(x) for x in p) for p in kwargs["user_positions"])
    if "rate_min" in kwargs and isinstance(kwargs["rate_min"], (list, tuple)):
        kwargs["rate_min"] = tuple(float(x) for x in kwargs["rate_min"])
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def parse_config(text: str) -> SweepSpec:
    """Parse the YAML sweep configuration.

    An empty document yields all defaults (standard drop geometry, -30 dB
    reference loss, exponents 3.5/2/2.2, -80 dBm noise, 1.5 bit/cu rates).
    Unknown keys and out-of-range values raise :class:`ConfigError` naming
    the offending section and field.
    """
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level of the config must be a mapping")
    unknown = set(raw) - {"scenario", "sweep"}
    if unknown:
        raise ConfigError(f"unknown top-level sections {sorted(unknown)}")

    base = _coerce_scenario(raw.get("scenario") or {})
    sweep = raw.get("sweep") or {}
    if not isinstance(sweep, dict):
        raise ConfigError("sweep: must be a mapping")
    unknown = set(sweep) - _SWEEP_KEYS
    if unknown:
        raise ConfigError(f"sweep: unknown keys {sorted(unknown)}")

    spec = SweepSpec(base=base)
    if "axis" in sweep:
        spec.axis = str(sweep["axis"])
    if "values" in sweep:
        vals = sweep["values"]
        if not isinstance(vals, (list, tuple)):
            raise ConfigError("sweep.values must be a list")
        spec.values = tuple(_parse_axis_value(v) for v in vals)
    if "schemes" in sweep:
        entries = sweep["schemes"]
        if not isinstance(entries, (list, tuple)) or not entries:
            raise ConfigError("sweep.schemes must be a non-empty list")
        try:
            spec.schemes = tuple(Scheme.parse(e) for e in entries)
        except ValueError as exc:
            raise ConfigError(f"sweep.schemes: {exc}") from exc
    if "n_trials" in sweep:
        spec.n_trials = int(sweep["n_trials"])
    if "bits" in sweep:
        spec.bits = _parse_axis_value(sweep["bits"])
    if "out" in sweep:
        spec.out = str(sweep["out"])
    if "workers" in sweep:
        spec.workers = int(sweep["workers"])
    spec.validate()
    return spec


def _parse_axis_value(v):
    if v is None or (isinstance(v, str) and v.lower() in ("continuous", "cont", "inf")):
        return None
    return int(v)


def config_for_cell(spec: SweepSpec, value):
    """(ScenarioConfig, bits) for one axis value."""
    if spec.axis == "none":
        return spec.base, spec.bits
    if spec.axis == "B":
        return spec.base, value
    return replace(spec.base, **{spec.axis: int(value)}), spec.bits


def _format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _trial_row(spec, value, scheme, trial, result: RunResult) -> dict:
    power = result.total_power_mw
    return {
        "row_type": "trial",
        "axis": spec.axis,
        "axis_value": "continuous" if spec.axis == "B" and value is None else _format_value(value),
        "optimizer": scheme.optimizer.value,
        "ordering": scheme.ordering,
        "bits": "continuous" if result.quantization_bits is None else str(result.quantization_bits),
        "trial": str(trial),
        "seed": f"{spec.base.seed}:{trial}",
        "power_mw": _format_value(power),
        "power_dbm": _format_value(None if power is None else float(dbm_from_mw(power))),
        "outer_iterations": str(result.outer_iterations),
        "termination_reason": result.termination_reason.value,
    }


def _error_row(spec, value, scheme, trial, exc) -> dict:
    return {
        "row_type": "trial",
        "axis": spec.axis,
        "axis_value": "continuous" if spec.axis == "B" and value is None else _format_value(value),
        "optimizer": scheme.optimizer.value,
        "ordering": scheme.ordering,
        "bits": "continuous" if spec.bits is None else str(spec.bits),
        "trial": str(trial),
        "seed": f"{spec.base.seed}:{trial}",
        "power_mw": "",
        "power_dbm": "",
        "outer_iterations": "",
        "termination_reason": f"error:{type(exc).__name__}",
    }


def _aggregate_row(spec, value, scheme, rows) -> dict:
    feasible = [float(r["power_dbm"]) for r in rows if r["power_dbm"]]
    converged = sum(1 for r in rows if r["termination_reason"] == "converged")
    return {
        "row_type": "aggregate",
        "axis": spec.axis,
        "axis_value": rows[0]["axis_value"] if rows else _format_value(value),
        "optimizer": scheme.optimizer.value,
        "ordering": scheme.ordering,
        "bits": rows[0]["bits"] if rows else "",
        "n_trials": str(len(rows)),
        "n_feasible": str(len(feasible)),
        "n_converged": str(converged),
        "mean_power_dbm": _format_value(float(np.mean(feasible)) if feasible else None),
        "feasibility_rate": _format_value(len(feasible) / len(rows) if rows else None),
    }


def _run_task(args):
    spec, value, scheme, trial = args
    config, bits = config_for_cell(spec, value)
    started = time.perf_counter()
    try:
        result = run_trial(
            config,
            (spec.base.seed, trial),
            ordering_scheme=scheme.ordering,
            variant=scheme.optimizer,
            bits=bits,
        )
        row = _trial_row(spec, value, scheme, trial, result)
    except Exception as exc:  # failures become rows, never abort the sweep
        row = _error_row(spec, value, scheme, trial, exc)
    return time.perf_counter() - started, row


def run_sweep(spec: SweepSpec, out_path: str | None = None):
    """Run all (axis value, scheme, trial) cells and write the CSV.

    Trials are dispatched to a process pool when ``spec.workers > 1``;
    rows are assembled in a fixed (value, scheme, trial) order regardless
    of completion order, so the output is deterministic.  Aggregates
    average dBm over feasible trials and report feasibility/convergence
    counts per cell.  Returns the list of row dicts.
    """
    spec.validate()
    out_path = spec.out if out_path is None else out_path
    tasks = [
        (spec, value, scheme, trial)
        for value in spec.values
        for scheme in spec.schemes
        for trial in range(spec.n_trials)
    ]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(_run_task, tasks))
    else:
        outcomes = [_run_task(t) for t in tasks]

    rows, timings = [], []
    idx = 0
    for value in spec.values:
        for scheme in spec.schemes:
            cell_rows = []
            for trial in range(spec.n_trials):
                elapsed, row = outcomes[idx]
                idx += 1
                cell_rows.append(row)
                timings.append((row["axis_value"], scheme.label(), trial, elapsed))
            rows.extend(cell_rows)
            rows.append(_aggregate_row(spec, value, scheme, cell_rows))

    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_csv(rows))
        with open(_timing_path(out_path), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["axis_value", "scheme", "trial", "wall_time_s"])
            for value, label, trial, elapsed in timings:
                writer.writerow([value, label, trial, f"{elapsed:.6f}"])
    return rows


def render_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _timing_path(out_path: str) -> str:
    return out_path + ".timing.csv" if not out_path.endswith(".csv") else out_path[:-4] + ".timing.csv"


def summarize(rows) -> str:
    """Plain-text table of the aggregate rows."""
    lines = [f"{'axis':>6} {'value':>10} {'scheme':>16} {'bits':>10} {'mean dBm':>10} "
             f"{'feas':>6} {'conv':>6} {'trials':>6}"]
    for row in rows:
        if row.get("row_type") != "aggregate":
            continue
        lines.append(
            f"{row['axis']:>6} {row['axis_value'] or '-':>10} "
            f"{row['optimizer'] + ':' + row['ordering']:>16} {row['bits'] or '-':>10} "
            f"{row['mean_power_dbm'][:10] if row['mean_power_dbm'] else 'n/a':>10} "
            f"{row['n_feasible']:>6} {row['n_converged']:>6} {row['n_trials']:>6}"
        )
    return "\n".join(lines)
