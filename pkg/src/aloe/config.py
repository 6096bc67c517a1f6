"""YAML configuration: case specs, strategy settings, scale schedules.

A case spec is either a preset name (``case1``, ``case2``, ``case3``) or a
mapping.  Mappings may name a ``preset`` and override any of its fields, or
set ``kind: data`` to build a truth from a numeric table::

    cases:
      - case1
      - {preset: case3, grad_eps: 0.45}
      - kind: data
        name: crystal
        path: energies.csv
        outlier_cutoff: 50.0
        A: 0.0
        B: 3.6
        divisions: 17
        sub_box: [0.4, 2.0]
        signal_variance: 1.0
        lengthscale: 2.5
        noise_variance: 0.01
        grad_eps: 0.7
        eig_eps: 1.2
        beta_sqrt: 4.0
        gamma_sqrt: 1.0
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from aloe.acquisition import STRATEGY_NAMES, AcquisitionStrategy, strategy_from_name
from aloe.bench.cases import SyntheticCase, data_case, get_case, gp_truth_from_data, load_table
from aloe.classify import ScaleSchedule, Thresholds
from aloe.errors import ConfigError, UsageError
from aloe.kernel import KernelParams

CASE_FIELDS = {
    "name", "A", "B", "divisions", "sub_box", "signal_variance", "lengthscale", "noise_variance",
    "grad_eps", "eig_eps", "beta_sqrt", "gamma_sqrt", "minima",
}
DATA_FIELDS = CASE_FIELDS | {"kind", "path", "outlier_cutoff", "truth_signal_variance",
                             "truth_lengthscale", "truth_noise_variance"}


def _freeze(spec) -> str:
    return json.dumps(spec, sort_keys=True)


def case_from_spec(spec: str | dict) -> SyntheticCase:
    try:
        return _case_cached(_freeze(spec))
    except (UsageError, TypeError, ValueError, OSError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad case spec {spec!r}: {exc}") from exc


@functools.lru_cache(maxsize=32)
def _case_cached(frozen: str) -> SyntheticCase:
    spec = json.loads(frozen)
    if isinstance(spec, str):
        return get_case(spec)
    if not isinstance(spec, dict):
        raise ConfigError(f"case spec must be a name or a mapping, got {type(spec).__name__}")
    if spec.get("kind", "synthetic") == "data":
        return _data_case(spec)
    unknown = set(spec) - CASE_FIELDS - {"preset", "kind"}
    if unknown:
        raise ConfigError(f"unknown case keys: {sorted(unknown)}")
    if "preset" not in spec:
        raise ConfigError("a synthetic case mapping needs a 'preset'")
    case = get_case(spec["preset"])
    return case.with_overrides(**_overrides(case, spec))


def _overrides(case, spec) -> dict[str, Any]:
    kw: dict[str, Any] = {}
    for key in ("name", "A", "B", "divisions", "grad_eps", "eig_eps", "beta_sqrt", "gamma_sqrt"):
        if key in spec:
            kw[key] = spec[key]
    if "sub_box" in spec:
        kw["sub_box"] = tuple(float(v) for v in spec["sub_box"])
    if "noise_variance" in spec:
        kw["sigma2"] = float(spec["noise_variance"])
    if "signal_variance" in spec or "lengthscale" in spec:
        kw["kernel"] = KernelParams(
            float(spec.get("signal_variance", case.kernel.signal_variance)),
            float(spec.get("lengthscale", case.kernel.lengthscale)),
        )
    if "minima" in spec:
        kw["minima"] = tuple(tuple(float(v) for v in m) for m in spec["minima"])
    return kw


def _data_case(spec) -> SyntheticCase:
    unknown = set(spec) - DATA_FIELDS
    if unknown:
        raise ConfigError(f"unknown data-case keys: {sorted(unknown)}")
    for key in ("path", "A", "B", "divisions", "sub_box", "lengthscale", "noise_variance"):
        if key not in spec:
            raise ConfigError(f"data case needs {key!r}")
    model = KernelParams(float(spec.get("signal_variance", 1.0)), float(spec["lengthscale"]))
    truth_kernel = KernelParams(
        float(spec.get("truth_signal_variance", model.signal_variance)),
        float(spec.get("truth_lengthscale", model.lengthscale)),
    )
    records = load_table(spec["path"])
    truth = gp_truth_from_data(
        records, truth_kernel, float(spec.get("truth_noise_variance", spec["noise_variance"])),
        spec.get("outlier_cutoff"),
    )
    extra = {k: spec[k] for k in ("grad_eps", "eig_eps", "beta_sqrt", "gamma_sqrt") if k in spec}
    return data_case(
        spec.get("name", Path(spec["path"]).stem), truth, float(spec["A"]), float(spec["B"]),
        int(spec["divisions"]), spec["sub_box"], float(spec["noise_variance"]),
        minima=spec.get("minima"), kernel=model, **extra,
    )


def case_name(spec) -> str:
    return spec if isinstance(spec, str) else spec.get("name") or spec.get("preset") or Path(spec["path"]).stem


@dataclass(frozen=True)
class BenchConfig:
    cases: tuple = ("case1", "case2", "case3")
    strategies: tuple[str, ...] = STRATEGY_NAMES
    repetitions: int = 50
    horizon: int = 200
    master_seed: int = 0
    workers: int = 1
    mode: str = "finite"
    initial_points: int = 1
    schedule: dict | None = None  # overrides each case's fixed scales
    neighbor: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repetitions < 1 or self.horizon < 1:
            raise ConfigError("repetitions and horizon must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.mode not in ("finite", "infinite"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for s in self.strategies:
            if s not in STRATEGY_NAMES:
                raise ConfigError(f"unknown strategy {s!r}; expected one of {STRATEGY_NAMES}")
        names = [case_name(c) for c in self.cases]
        if len(set(names)) != len(names):
            raise ConfigError(f"case names must be unique, got {names}")

    def strategy(self, name: str) -> AcquisitionStrategy:
        try:
            return strategy_from_name(name, **(self.neighbor if name == "Neighbor" else {}))
        except (UsageError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc


def schedule_for(case: SyntheticCase, override: dict | None) -> ScaleSchedule:
    if not override:
        return ScaleSchedule("fixed", case.beta_sqrt, case.gamma_sqrt)
    try:
        return ScaleSchedule(**override)
    except (UsageError, TypeError) as exc:
        raise ConfigError(f"bad schedule {override!r}: {exc}") from exc


def thresholds_for(case: SyntheticCase) -> Thresholds:
    return Thresholds.uniform(case.dim, case.grad_eps, case.eig_eps)


def load_yaml(path) -> dict:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return doc


def bench_config(doc: dict) -> BenchConfig:
    allowed = set(BenchConfig.__dataclass_fields__)
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = dict(doc)
    for key in ("cases", "strategies"):
        if key in kw:
            if not isinstance(kw[key], (list, tuple)) or not kw[key]:
                raise ConfigError(f"{key!r} must be a non-empty list")
            kw[key] = tuple(kw[key])
    try:
        cfg = BenchConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    for spec in cfg.cases:
        case_from_spec(spec)
    return cfg
