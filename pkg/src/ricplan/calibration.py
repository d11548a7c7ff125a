"""Calibration data for the migration and energy models.

A CalibrationSet holds every fitted coefficient the models consume, keyed by
strategy, traffic class, state size (rho, in MB) and maintenance period (nu,
in seconds) where applicable.  Shipped defaults cover the measured operating
points; user files may override any subset and may use "*" wildcard keys,
with the most specific key winning on lookup.

Units follow the measurement tables: watts, virtual cores, gigabytes and
seconds, except sigma (defrag-downtime slope) which is stored in milliseconds
exactly as measured and converted to seconds by the accessor models use.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

SDL = "sdl"
SM_MR = "sm-mr"
SM_MD = "sm-md"
STRATEGIES = (SDL, SM_MR, SM_MD)
METRICS = ("E", "CPU", "MEM", "DISK")
WILDCARD = "*"


class CalibrationError(ValueError):
    """Raised for malformed calibration documents."""


class CalibrationLookupError(KeyError):
    """Raised when a requested coefficient is not calibrated.

    Missing keys are hard errors, never interpolated: planning with a made-up
    coefficient is worse than refusing to plan.
    """

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"no calibration entry for {self.key}"


@dataclass(frozen=True)
class CalibrationSet:
    """Immutable bag of fitted coefficients.

    kpi:         strategy -> rho_mb -> {delta_d, b_d, delta_m, b_m} [s/xApp, s]
    sigma_ms:    class -> rho_mb -> nu_s -> slope [ms/xApp]
    sdl_linear:  class -> metric -> {delta, b} (per-class backend share terms)
    sm_overhead: strategy -> metric -> constant (cores for CPU, W for E)
    xapp_load:   class -> metric -> per-xApp coefficient p
    server_idle: metric -> idle coefficient q
    """

    kpi: dict = field(default_factory=dict)
    sigma_ms: dict = field(default_factory=dict)
    sdl_linear: dict = field(default_factory=dict)
    sm_overhead: dict = field(default_factory=dict)
    xapp_load: dict = field(default_factory=dict)
    server_idle: dict = field(default_factory=dict)


@dataclass(frozen=True)
class MeasurementSeries:
    """One measured KPI/resource series destined for an affine fit."""

    predictor: tuple
    response: tuple
    label: str = ""

    def __post_init__(self):
        if len(self.predictor) != len(self.response):
            raise ValueError("predictor and response must have equal length")
        if len(self.predictor) < 2:
            raise ValueError("need at least 2 measurement points")
        if len(set(self.predictor)) != len(self.predictor):
            raise ValueError("predictor values must be distinct")


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    rms: float


class DegenerateFitError(ValueError):
    """Raised when a series cannot pin down a slope."""


def default_calibration() -> CalibrationSet:
    """The shipped coefficient tables.

    KPI slopes are per migrated xApp.  Downtime and migration-duration
    intercepts for the stateful strategies are zero (the measured lines pass
    through the origin); sm-mr downtime and duration share one slope.
    """
    kpi = {
        SM_MR: {
            1.0: {"delta_d": 10.55, "b_d": 0.0, "delta_m": 10.55, "b_m": 0.0},
            10.0: {"delta_d": 11.73, "b_d": 0.0, "delta_m": 11.73, "b_m": 0.0},
            100.0: {"delta_d": 23.3, "b_d": 0.0, "delta_m": 23.3, "b_m": 0.0},
        },
        SM_MD: {
            1.0: {"delta_d": 5.74, "b_d": 0.0, "delta_m": 20.28, "b_m": 0.0},
            10.0: {"delta_d": 6.49, "b_d": 0.0, "delta_m": 23.02, "b_m": 0.0},
            100.0: {"delta_d": 13.3, "b_d": 0.0, "delta_m": 48.2, "b_m": 0.0},
        },
        # backend-assisted migration is state-size independent; downtime is zero
        SDL: {
            WILDCARD: {"delta_d": 0.0, "b_d": 0.0, "delta_m": 0.08, "b_m": 4.27},
        },
    }
    sigma_ms = {
        "A": {1.0: {1.0: 16.62}},
        "B": {1.0: {1.0: 17.07}},
        "C": {1.0: {1.0: 7.71}},
        "D": {1.0: {1.0: 11.62}},
    }
    sdl_linear = {
        "A": {
            "E": {"delta": -0.18, "b": 32.35},
            "CPU": {"delta": -0.00, "b": 5.32},
            "MEM": {"delta": 0.04, "b": 0.20},
            "DISK": {"delta": 0.01, "b": 0.00},
        },
        "B": {
            "E": {"delta": -0.09, "b": 33.60},
            "CPU": {"delta": 0.03, "b": 5.57},
            "MEM": {"delta": 0.04, "b": 0.17},
            "DISK": {"delta": 0.01, "b": 0.00},
        },
        "C": {
            "E": {"delta": -0.10, "b": 35.48},
            "CPU": {"delta": -0.03, "b": 4.97},
            "MEM": {"delta": 0.02, "b": 1.82},
            "DISK": {"delta": 0.00, "b": 0.00},
        },
        "D": {
            "E": {"delta": -0.06, "b": 40.20},
            "CPU": {"delta": -0.01, "b": 5.00},
            "MEM": {"delta": 0.08, "b": 1.04},
            "DISK": {"delta": 0.03, "b": 0.00},
        },
    }
    sm_overhead = {
        SM_MR: {"CPU": 0.40, "E": 17.87, "MEM": 0.0, "DISK": 0.0},
        SM_MD: {"CPU": 0.76, "E": 27.56, "MEM": 0.0, "DISK": 0.0},
    }
    xapp_load = {
        "A": {"E": 3.43, "CPU": 0.47, "MEM": 0.52, "DISK": 0.0},
        "B": {"E": 16.48, "CPU": 2.86, "MEM": 0.52, "DISK": 0.0},
        "C": {"E": 3.43, "CPU": 0.47, "MEM": 0.52, "DISK": 0.0},
        "D": {"E": 16.48, "CPU": 2.86, "MEM": 0.52, "DISK": 0.0},
    }
    server_idle = {"E": 120.0, "CPU": 0.1, "MEM": 5.7, "DISK": 3.2}
    return CalibrationSet(
        kpi=kpi,
        sigma_ms=sigma_ms,
        sdl_linear=sdl_linear,
        sm_overhead=sm_overhead,
        xapp_load=xapp_load,
        server_idle=server_idle,
    )


# ---------------------------------------------------------------------------
# loading / validation

_TOP_BLOCKS = ("kpi", "sigma", "sdl_linear", "sm_overhead", "xapp_load", "server_idle")
_KPI_COEFFS = ("delta_d", "b_d", "delta_m", "b_m")


def _parse_axis_key(raw, where: str):
    """File keys for rho/nu are decimal strings or the wildcard."""
    if raw == WILDCARD:
        return WILDCARD
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise CalibrationError(f"{where}: bad numeric key {raw!r}") from None


def _require_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CalibrationError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise CalibrationError(f"{where}: non-finite value")
    return float(value)


def load_calibration(source) -> CalibrationSet:
    """Build a CalibrationSet from a JSON document merged over the defaults.

    `source` may be a mapping, a path to a JSON file, or None (defaults only).
    Unknown blocks or keys are rejected; sigma values and KPI slopes must be
    non-negative (backend-share slopes may legitimately be negative).
    """
    if source is None:
        doc: Mapping[str, Any] = {}
    elif isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    elif isinstance(source, Mapping):
        doc = source
    else:
        raise CalibrationError(f"unsupported calibration source {type(source).__name__}")
    if not isinstance(doc, Mapping):
        raise CalibrationError("calibration document must be a JSON object")

    base = default_calibration()
    kpi = copy.deepcopy(base.kpi)
    sigma_ms = copy.deepcopy(base.sigma_ms)
    sdl_linear = copy.deepcopy(base.sdl_linear)
    sm_overhead = copy.deepcopy(base.sm_overhead)
    xapp_load = copy.deepcopy(base.xapp_load)
    server_idle = copy.deepcopy(base.server_idle)

    for block in doc:
        if block not in _TOP_BLOCKS:
            raise CalibrationError(f"unknown calibration block {block!r}")

    for strategy, by_rho in doc.get("kpi", {}).items():
        if strategy not in STRATEGIES:
            raise CalibrationError(f"kpi: unknown strategy {strategy!r}")
        for raw_rho, coeffs in by_rho.items():
            rho = _parse_axis_key(raw_rho, f"kpi.{strategy}")
            slot = kpi.setdefault(strategy, {}).setdefault(rho, {})
            for name, value in coeffs.items():
                if name not in _KPI_COEFFS:
                    raise CalibrationError(f"kpi.{strategy}.{raw_rho}: unknown coefficient {name!r}")
                v = _require_number(value, f"kpi.{strategy}.{raw_rho}.{name}")
                if name.startswith("delta") and v < 0:
                    raise CalibrationError(f"kpi.{strategy}.{raw_rho}.{name}: slope must be >= 0")
                slot[name] = v
            missing = [c for c in _KPI_COEFFS if c not in slot]
            if missing:
                raise CalibrationError(
                    f"kpi.{strategy}.{raw_rho}: incomplete entry, missing {missing}"
                )

    for cls, by_rho in doc.get("sigma", {}).items():
        for raw_rho, by_nu in by_rho.items():
            rho = _parse_axis_key(raw_rho, f"sigma.{cls}")
            for raw_nu, value in by_nu.items():
                nu = _parse_axis_key(raw_nu, f"sigma.{cls}.{raw_rho}")
                v = _require_number(value, f"sigma.{cls}.{raw_rho}.{raw_nu}")
                if v < 0:
                    raise CalibrationError(
                        f"sigma.{cls}.{raw_rho}.{raw_nu}: sigma must be >= 0, got {value}"
                    )
                sigma_ms.setdefault(cls, {}).setdefault(rho, {})[nu] = v

    for cls, by_metric in doc.get("sdl_linear", {}).items():
        for metric, pair in by_metric.items():
            if metric not in METRICS:
                raise CalibrationError(f"sdl_linear.{cls}: unknown metric {metric!r}")
            slot = sdl_linear.setdefault(cls, {}).setdefault(metric, {})
            for name, value in pair.items():
                if name not in ("delta", "b"):
                    raise CalibrationError(f"sdl_linear.{cls}.{metric}: unknown key {name!r}")
                slot[name] = _require_number(value, f"sdl_linear.{cls}.{metric}.{name}")
            if "delta" not in slot or "b" not in slot:
                raise CalibrationError(f"sdl_linear.{cls}.{metric}: needs both delta and b")

    for strategy, by_metric in doc.get("sm_overhead", {}).items():
        if strategy not in (SM_MR, SM_MD):
            raise CalibrationError(f"sm_overhead: unknown strategy {strategy!r}")
        for metric, value in by_metric.items():
            if metric not in METRICS:
                raise CalibrationError(f"sm_overhead.{strategy}: unknown metric {metric!r}")
            sm_overhead.setdefault(strategy, {})[metric] = _require_number(
                value, f"sm_overhead.{strategy}.{metric}"
            )

    for cls, by_metric in doc.get("xapp_load", {}).items():
        for metric, value in by_metric.items():
            if metric not in METRICS:
                raise CalibrationError(f"xapp_load.{cls}: unknown metric {metric!r}")
            v = _require_number(value, f"xapp_load.{cls}.{metric}")
            if v < 0:
                raise CalibrationError(f"xapp_load.{cls}.{metric}: must be >= 0")
            xapp_load.setdefault(cls, {})[metric] = v

    for metric, value in doc.get("server_idle", {}).items():
        if metric not in METRICS:
            raise CalibrationError(f"server_idle: unknown metric {metric!r}")
        v = _require_number(value, f"server_idle.{metric}")
        if v < 0:
            raise CalibrationError(f"server_idle.{metric}: must be >= 0")
        server_idle[metric] = v

    return CalibrationSet(
        kpi=kpi,
        sigma_ms=sigma_ms,
        sdl_linear=sdl_linear,
        sm_overhead=sm_overhead,
        xapp_load=xapp_load,
        server_idle=server_idle,
    )


def _axis_key_out(key):
    return WILDCARD if key == WILDCARD else repr(float(key))


def serialize_calibration(cal: CalibrationSet) -> dict:
    """JSON-ready document that load_calibration maps back to `cal`."""
    doc: dict = {
        "kpi": {},
        "sigma": {},
        "sdl_linear": copy.deepcopy(cal.sdl_linear),
        "sm_overhead": copy.deepcopy(cal.sm_overhead),
        "xapp_load": copy.deepcopy(cal.xapp_load),
        "server_idle": dict(cal.server_idle),
    }
    for strategy, by_rho in cal.kpi.items():
        doc["kpi"][strategy] = {
            _axis_key_out(rho): dict(coeffs) for rho, coeffs in by_rho.items()
        }
    for cls, by_rho in cal.sigma_ms.items():
        doc["sigma"][cls] = {
            _axis_key_out(rho): {_axis_key_out(nu): v for nu, v in by_nu.items()}
            for rho, by_nu in by_rho.items()
        }
    return doc


# ---------------------------------------------------------------------------
# lookup

def _resolve(mapping: Mapping, key, path: str):
    """Exact key first, wildcard as fallback."""
    if key in mapping:
        return mapping[key]
    if WILDCARD in mapping:
        return mapping[WILDCARD]
    raise CalibrationLookupError(path)


def kpi_coeffs(cal: CalibrationSet, strategy: str, rho_mb) -> dict:
    """{delta_d, b_d, delta_m, b_m} for a (strategy, state size) pair.

    rho_mb may be None for strategies calibrated state-size independent.
    """
    by_rho = cal.kpi.get(strategy)
    if by_rho is None:
        raise CalibrationLookupError(f"kpi.{strategy}")
    key = WILDCARD if rho_mb is None else rho_mb
    return _resolve(by_rho, key, f"kpi.{strategy}.rho={rho_mb}")


def _sigma_ms(cal: CalibrationSet, cls: str, rho_mb, nu_s) -> float:
    by_rho = _resolve(cal.sigma_ms, cls, f"sigma.{cls}")
    by_nu = _resolve(by_rho, rho_mb, f"sigma.{cls}.rho={rho_mb}")
    return _resolve(by_nu, nu_s, f"sigma.{cls}.rho={rho_mb}.nu={nu_s}")


def sigma_seconds(cal: CalibrationSet, cls: str, rho_mb, nu_s) -> float:
    """Defrag-downtime slope in seconds per xApp for (class, rho, nu)."""
    return _sigma_ms(cal, cls, rho_mb, nu_s) / 1000.0


def sdl_term(cal: CalibrationSet, cls: str, metric: str) -> tuple:
    by_metric = _resolve(cal.sdl_linear, cls, f"sdl_linear.{cls}")
    pair = by_metric.get(metric)
    if pair is None:
        raise CalibrationLookupError(f"sdl_linear.{cls}.{metric}")
    return pair["delta"], pair["b"]


def sm_overhead_coeff(cal: CalibrationSet, strategy: str, metric: str) -> float:
    by_metric = cal.sm_overhead.get(strategy)
    if by_metric is None or metric not in by_metric:
        raise CalibrationLookupError(f"sm_overhead.{strategy}.{metric}")
    return by_metric[metric]


def load_coeff(cal: CalibrationSet, cls: str, metric: str) -> float:
    by_metric = _resolve(cal.xapp_load, cls, f"xapp_load.{cls}")
    if metric not in by_metric:
        raise CalibrationLookupError(f"xapp_load.{cls}.{metric}")
    return by_metric[metric]


def idle_coeff(cal: CalibrationSet, metric: str) -> float:
    if metric not in cal.server_idle:
        raise CalibrationLookupError(f"server_idle.{metric}")
    return cal.server_idle[metric]


def lookup(cal: CalibrationSet, block: str, **key):
    """Generic coefficient lookup, mainly for tests and the CLI.

    Examples: lookup(cal, "kpi", strategy="sm-md", rho_mb=10, coeff="delta_m"),
    lookup(cal, "sigma", cls="C", rho_mb=1, nu_s=1), lookup(cal, "xapp_load",
    cls="B", metric="E").  Sigma is returned in ms as calibrated.
    """
    if block == "kpi":
        coeffs = kpi_coeffs(cal, key["strategy"], key.get("rho_mb"))
        return coeffs[key["coeff"]]
    if block == "sigma":
        return _sigma_ms(cal, key["cls"], key["rho_mb"], key["nu_s"])
    if block == "sdl_linear":
        delta, b = sdl_term(cal, key["cls"], key["metric"])
        return delta if key["coeff"] == "delta" else b
    if block == "sm_overhead":
        return sm_overhead_coeff(cal, key["strategy"], key["metric"])
    if block == "xapp_load":
        return load_coeff(cal, key["cls"], key["metric"])
    if block == "server_idle":
        return idle_coeff(cal, key["metric"])
    raise CalibrationLookupError(block)


# ---------------------------------------------------------------------------
# fitting

def fit_linear(series: MeasurementSeries) -> LinearFit:
    """Ordinary least squares y = slope*x + intercept, with residual RMS."""
    x = np.asarray(series.predictor, dtype=float)
    y = np.asarray(series.response, dtype=float)
    if len(np.unique(x)) < 2:
        raise DegenerateFitError("need at least 2 distinct predictor values")
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(residual**2)))
    return LinearFit(slope=float(slope), intercept=float(intercept), rms=rms)


def read_measurement_csv(path, label: str = "") -> MeasurementSeries:
    """Parse a two-column `predictor,response` CSV into a series."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if [h.strip() for h in header] != ["predictor", "response"]:
            raise ValueError(f"{path}: expected header 'predictor,response'")
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns")
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric value") from None
    if len(xs) < 2:
        raise DegenerateFitError(f"{path}: need at least 2 rows")
    try:
        return MeasurementSeries(predictor=tuple(xs), response=tuple(ys),
                                 label=label)
    except ValueError as exc:
        # numerically parseable but unusable for a fit
        raise DegenerateFitError(f"{path}: {exc}") from None
