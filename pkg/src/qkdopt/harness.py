"""Experiment harness: configuration files, budget sweeps, result emission.

A sweep runs the genetic optimizer at each total-budget level, rates the two
fixed baseline splits for comparison, and optionally cross-checks against the
brute-force grid.  Results serialize to a fixed-column CSV (reported rates
clamped at zero — a negative key rate means "no key", not "negative key")
or to JSON, which additionally preserves the raw unclamped rates and the
per-generation fitness history.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Callable

import numpy as np

from .budget import EpsilonBudget, Family, baseline_budgets
from .cga import CgaConfig, run as run_cga
from .cv_rate import CvProtocolParams, cv_key_rate
from .dv_rate import DvProtocolParams, dv_key_rate
from .oracle import GridSpec, grid_search

__all__ = [
    "ConfigError",
    "SweepSpec",
    "SweepRecord",
    "SweepResult",
    "default_eps_levels",
    "load_config",
    "loads_config",
    "dump_config",
    "run_sweep",
    "emit_results",
    "CSV_COLUMNS",
]

CSV_COLUMNS = [
    "eps_total",
    "eps_pe_opt",
    "eps_cor_opt",
    "eps_sec_opt",
    "rate_opt_bps",
    "rate_sym_bps",
    "rate_asym_bps",
    "rate_oracle_bps",
]

#: Sweep levels used when a config gives none: one level per decade.
_DEFAULT_LEVELS = {
    Family.CV: tuple(10.0**e for e in range(-12, -4)),
    Family.DV: tuple(10.0**e for e in range(-17, -4)),
}


class ConfigError(ValueError):
    """A configuration file failed to parse or validate."""


def default_eps_levels(family: Family) -> tuple[float, ...]:
    """Decade grid of total budgets swept by default for ``family``."""
    return _DEFAULT_LEVELS[family]


@dataclass(frozen=True)
class SweepSpec:
    """Everything needed to reproduce one sweep, bit for bit.

    ``params`` must match ``family``; ``restarts`` independent optimizer
    runs are made per level (best kept).  With a fixed ``cga.rng_seed`` the
    per-level generators derive deterministically from
    ``(seed, level index, restart index)``, so two runs of the same spec
    emit identical bytes.
    """

    family: Family
    params: CvProtocolParams | DvProtocolParams
    cga: CgaConfig = CgaConfig()
    eps_levels: tuple[float, ...] = ()
    include_baselines: bool = True
    include_oracle: bool = False
    oracle_points: int = 200
    restarts: int = 1
    paper_sign_xi: bool = False
    output_path: str | None = None

    def __post_init__(self) -> None:
        expected = CvProtocolParams if self.family is Family.CV else DvProtocolParams
        if not isinstance(self.params, expected):
            raise ConfigError(
                f"params type {type(self.params).__name__} does not match "
                f"family {self.family.value}"
            )
        if not self.eps_levels:
            object.__setattr__(self, "eps_levels", default_eps_levels(self.family))
        levels = self.eps_levels
        if any(not (0.0 < lv < 1.0) for lv in levels):
            raise ConfigError("every eps level must lie in (0, 1)")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError("eps_levels must be strictly increasing")
        if self.oracle_points < 2:
            raise ConfigError("oracle_points must be at least 2")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")

    def rate_fn(self) -> Callable[[EpsilonBudget], float]:
        """Budget-to-bits/s closure for this spec's protocol."""
        if self.family is Family.CV:
            return lambda budget: cv_key_rate(
                self.params, budget, subtractive_xi=self.paper_sign_xi
            ).rate_bits_per_sec
        return lambda budget: dv_key_rate(self.params, budget).rate_bits_per_sec


@dataclass(frozen=True)
class SweepRecord:
    """Outcome at one total-budget level; raw (unclamped) rates in bits/s."""

    eps_total: float
    budget_opt: EpsilonBudget | None = None
    rate_opt: float | None = None
    rate_sym: float | None = None
    rate_asym: float | None = None
    rate_oracle: float | None = None
    fitness_history: list[float] | None = field(default=None, repr=False)
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    records: list[SweepRecord]


def _level_rng(seed: int | None, level: int, restart: int) -> np.random.Generator:
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng([seed, level, restart])


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run the optimizer (and comparisons) at every requested eps level.

    A level that raises a domain error — for instance a block that
    degenerates at the configured sizes — is recorded with its message and
    the sweep moves on.
    """
    rate = spec.rate_fn()
    records: list[SweepRecord] = []
    for idx, total in enumerate(spec.eps_levels):
        try:
            records.append(_run_level(spec, rate, idx, total))
        except (ValueError, ArithmeticError, OverflowError) as err:
            records.append(SweepRecord(eps_total=total, error=str(err)))
    return SweepResult(spec=spec, records=records)


def _run_level(
    spec: SweepSpec,
    rate: Callable[[EpsilonBudget], float],
    idx: int,
    total: float,
) -> SweepRecord:
    best = None
    for restart in range(spec.restarts):
        rng = _level_rng(spec.cga.rng_seed, idx, restart)
        result = run_cga(spec.cga, total, spec.family, rate, rng=rng)
        if best is None or result.best_fitness > best.best_fitness:
            best = result
    rate_opt = best.best_fitness if best.best_budget is not None else None
    rate_sym = rate_asym = None
    if spec.include_baselines:
        (_, sym), (_, asym) = baseline_budgets(total, spec.family)
        rate_sym = rate(sym)
        rate_asym = rate(asym)
    rate_oracle = None
    if spec.include_oracle:
        grid = grid_search(
            GridSpec(points_per_axis=spec.oracle_points), total, spec.family, rate
        )
        rate_oracle = grid.best_fitness if grid.best_budget is not None else None
    return SweepRecord(
        eps_total=total,
        budget_opt=best.best_budget,
        rate_opt=rate_opt,
        rate_sym=rate_sym,
        rate_asym=rate_asym,
        rate_oracle=rate_oracle,
        fitness_history=list(best.fitness_history),
    )


def _clamped(rate: float | None) -> str:
    if rate is None:
        return ""
    return repr(max(rate, 0.0))


def emit_results(result: SweepResult, fmt: str = "csv", path: str | None = None) -> str:
    """Serialize a sweep; returns the text and optionally writes it to ``path``.

    CSV holds one row per level with the fixed column set
    :data:`CSV_COLUMNS`; reported rates are clamped at zero and cells for
    disabled or failed computations are left empty.  JSON mirrors the CSV
    content and additionally carries raw rates, the winning budget, the
    fitness history and any per-level error.
    """
    if fmt == "csv":
        text = _emit_csv(result)
    elif fmt == "json":
        text = _emit_json(result)
    else:
        raise ValueError(f"unknown output format {fmt!r} (expected 'csv' or 'json')")
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def _emit_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in result.records:
        budget = rec.budget_opt
        writer.writerow(
            [
                repr(rec.eps_total),
                "" if budget is None else repr(budget.eps_pe),
                "" if budget is None else repr(budget.eps_cor),
                "" if budget is None else repr(budget.eps_sec),
                _clamped(rec.rate_opt),
                _clamped(rec.rate_sym),
                _clamped(rec.rate_asym),
                _clamped(rec.rate_oracle),
            ]
        )
    return buf.getvalue()


def _raw(rate: float | None) -> float | None:
    if rate is None or not math.isfinite(rate):
        return None
    return rate


def _emit_json(result: SweepResult) -> str:
    records = []
    for rec in result.records:
        budget = None
        if rec.budget_opt is not None:
            budget = {
                "eps_pe": rec.budget_opt.eps_pe,
                "eps_cor": rec.budget_opt.eps_cor,
                "eps_sec": rec.budget_opt.eps_sec,
            }
        records.append(
            {
                "eps_total": rec.eps_total,
                "budget_opt": budget,
                "rates_raw": {
                    "opt": _raw(rec.rate_opt),
                    "sym": _raw(rec.rate_sym),
                    "asym": _raw(rec.rate_asym),
                    "oracle": _raw(rec.rate_oracle),
                },
                "rates_clamped": {
                    "opt": None if rec.rate_opt is None else max(rec.rate_opt, 0.0),
                    "sym": None if rec.rate_sym is None else max(rec.rate_sym, 0.0),
                    "asym": None if rec.rate_asym is None else max(rec.rate_asym, 0.0),
                    "oracle": None
                    if rec.rate_oracle is None
                    else max(rec.rate_oracle, 0.0),
                },
                "fitness_history": rec.fitness_history,
                "error": rec.error,
            }
        )
    doc = {
        "family": result.spec.family.value,
        "eps_levels": list(result.spec.eps_levels),
        "records": records,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- configuration files ---------------------------------------------------
#
# INI-style text with four sections.  [budget] names the protocol family;
# [protocol] holds the family's physical parameters (any subset — the rest
# take the family defaults); [cga] the optimizer hyperparameters; [sweep]
# the level list and output switches.  Unknown sections or keys are errors.

_PROTOCOL_FIELDS = {
    Family.CV: {f.name for f in fields(CvProtocolParams)},
    Family.DV: {f.name for f in fields(DvProtocolParams)},
}
_CGA_FIELDS = {f.name for f in fields(CgaConfig)}
_SWEEP_KEYS = {
    "eps_levels",
    "include_baselines",
    "include_oracle",
    "oracle_points",
    "restarts",
    "output_path",
}
_PROTOCOL_EXTRA = {"paper_sign_xi"}
_INT_FIELDS = {
    "block_size",
    "discretization",
    "population",
    "iterations",
    "rng_seed",
    "oracle_points",
    "restarts",
}
_BOOL_FIELDS = {"include_baselines", "include_oracle", "paper_sign_xi"}


def load_config(path: str) -> SweepSpec:
    """Read a sweep spec from an INI file; see :func:`loads_config`."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return loads_config(text)


def loads_config(text: str) -> SweepSpec:
    """Parse and validate a sweep spec from INI text.

    Collects every problem it can find — unknown keys, malformed values,
    violated parameter bounds — into a single :class:`ConfigError`.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from err

    problems: list[str] = []
    known_sections = {"budget", "protocol", "cga", "sweep"}
    for section in parser.sections():
        if section not in known_sections:
            problems.append(f"unknown section [{section}]")

    family = None
    if not parser.has_section("budget") or not parser.has_option("budget", "family"):
        problems.append("missing required key 'family' in section [budget]")
    else:
        for key in parser["budget"]:
            if key != "family":
                problems.append(f"unknown key '{key}' in section [budget]")
        raw = parser.get("budget", "family").strip().lower()
        if raw in ("cv", "dv"):
            family = Family(raw)
        else:
            problems.append(f"family must be 'cv' or 'dv', got '{raw}'")
    if family is None:
        raise ConfigError("; ".join(problems))

    params, paper_sign_xi = _parse_protocol(parser, family, problems)
    cga = _parse_cga(parser, problems)
    sweep_kwargs = _parse_sweep(parser, problems)

    if problems:
        raise ConfigError("; ".join(problems))
    try:
        return SweepSpec(
            family=family,
            params=params,
            cga=cga,
            paper_sign_xi=paper_sign_xi,
            **sweep_kwargs,
        )
    except (ConfigError, ValueError) as err:
        raise ConfigError(str(err)) from err


def _convert(key: str, raw: str) -> Any:
    if key in _BOOL_FIELDS:
        lowered = raw.strip().lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got '{raw}'")
    if key in _INT_FIELDS:
        return int(raw)
    return float(raw)


def _parse_protocol(parser, family, problems):
    cls = CvProtocolParams if family is Family.CV else DvProtocolParams
    allowed = _PROTOCOL_FIELDS[family] | _PROTOCOL_EXTRA
    kwargs: dict[str, Any] = {}
    paper_sign_xi = False
    if parser.has_section("protocol"):
        for key, raw in parser["protocol"].items():
            if key not in allowed:
                problems.append(f"unknown key '{key}' in section [protocol]")
                continue
            try:
                value = _convert(key, raw)
            except ValueError as err:
                problems.append(f"bad value for protocol.{key}: {err}")
                continue
            if key == "paper_sign_xi":
                paper_sign_xi = value
            else:
                kwargs[key] = value
    if paper_sign_xi and family is Family.DV:
        problems.append("paper_sign_xi applies only to the CV family")
    try:
        params = cls(**kwargs)
    except ValueError as err:
        problems.append(f"[protocol] {err}")
        params = cls()
    return params, paper_sign_xi


def _parse_cga(parser, problems):
    kwargs: dict[str, Any] = {}
    if parser.has_section("cga"):
        for key, raw in parser["cga"].items():
            if key not in _CGA_FIELDS:
                problems.append(f"unknown key '{key}' in section [cga]")
                continue
            try:
                kwargs[key] = _convert(key, raw)
            except ValueError as err:
                problems.append(f"bad value for cga.{key}: {err}")
    try:
        return CgaConfig(**kwargs)
    except ValueError as err:
        problems.append(f"[cga] {err}")
        return CgaConfig()


def _parse_sweep(parser, problems):
    kwargs: dict[str, Any] = {}
    if not parser.has_section("sweep"):
        return kwargs
    for key, raw in parser["sweep"].items():
        if key not in _SWEEP_KEYS:
            problems.append(f"unknown key '{key}' in section [sweep]")
            continue
        if key == "eps_levels":
            try:
                levels = tuple(
                    float(tok) for tok in raw.replace(",", " ").split() if tok
                )
            except ValueError as err:
                problems.append(f"bad value for sweep.eps_levels: {err}")
                continue
            kwargs["eps_levels"] = levels
        elif key == "output_path":
            kwargs["output_path"] = raw.strip()
        else:
            try:
                kwargs[key] = _convert(key, raw)
            except ValueError as err:
                problems.append(f"bad value for sweep.{key}: {err}")
    return kwargs


def dump_config(spec: SweepSpec) -> str:
    """Render a spec back to INI text; ``loads_config`` round-trips it."""
    lines = ["[budget]", f"family = {spec.family.value}", "", "[protocol]"]
    for f in fields(type(spec.params)):
        value = getattr(spec.params, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_format_value(value)}")
    if spec.family is Family.CV:
        lines.append(f"paper_sign_xi = {_format_value(spec.paper_sign_xi)}")
    lines.append("")
    lines.append("[cga]")
    for f in fields(CgaConfig):
        value = getattr(spec.cga, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {_format_value(value)}")
    lines.append("")
    lines.append("[sweep]")
    lines.append("eps_levels = " + " ".join(repr(lv) for lv in spec.eps_levels))
    lines.append(f"include_baselines = {_format_value(spec.include_baselines)}")
    lines.append(f"include_oracle = {_format_value(spec.include_oracle)}")
    lines.append(f"oracle_points = {spec.oracle_points}")
    lines.append(f"restarts = {spec.restarts}")
    if spec.output_path is not None:
        lines.append(f"output_path = {spec.output_path}")
    return "\n".join(lines) + "\n"


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
