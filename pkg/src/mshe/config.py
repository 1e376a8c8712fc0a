"""JSON run configuration: schema, defaults and validation."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .analysis import random_unit_field
from .dynamics import FlowParams, SchemeConfig
from .errors import ConfigError
from .field import Domain, DomainSpec, Field, build_domain

__all__ = ["InitSpec", "OutputSpec", "SweepSpec", "RunConfig", "parse_config", "load_config", "initial_field"]

SCHEMA_VERSION = 1

# key -> (default, required)
_SECTIONS = {
    "domain": {"length": 1.0, "n_modes": 64, "dealias": None},
    "params": {"n": None, "a": 0.0, "dealias": None},
    "init": {"kind": "random", "k": None, "seed": 0, "n_active": 8, "path": None},
    "scheme": {"scheme": "imex_euler", "dt": 1e-5, "t_end": 0.02, "record_every": 1,
               "energy_guard": False, "rhs_form": "closed"},
    "outputs": {"trajectory_path": None, "report_path": None, "checkpoint_path": None, "figures": True},
    "sweep": {"seeds": 32, "rng_seed": 0, "n_active": 8, "workers": None},
}
_REQUIRED = {("params", "n")}
_TOP_LEVEL = set(_SECTIONS) | {"schema_version"}
_INIT_KINDS = ("mode", "random", "file")


@dataclass(frozen=True)
class InitSpec:
    kind: str = "random"
    k: int | None = None
    seed: int = 0
    n_active: int = 8
    path: str | None = None


@dataclass(frozen=True)
class OutputSpec:
    trajectory_path: str | None = None
    report_path: str | None = None
    checkpoint_path: str | None = None
    figures: bool = True


@dataclass(frozen=True)
class SweepSpec:
    seeds: int = 32
    rng_seed: int = 0
    n_active: int = 8
    workers: int | None = None


@dataclass(frozen=True)
class RunConfig:
    domain: DomainSpec
    params: FlowParams
    init: InitSpec
    scheme: SchemeConfig
    outputs: OutputSpec = dc_field(default_factory=OutputSpec)
    sweep: SweepSpec = dc_field(default_factory=SweepSpec)

    def to_dict(self):
        """Resolved configuration with every default filled in."""
        return {
            "schema_version": SCHEMA_VERSION,
            "domain": asdict(self.domain),
            "params": asdict(self.params),
            "init": asdict(self.init),
            "scheme": asdict(self.scheme),
            "outputs": asdict(self.outputs),
            "sweep": asdict(self.sweep),
        }

    def build_domain(self) -> Domain:
        return build_domain(self.domain)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _expect(cond, key, message):
    if not cond:
        raise ConfigError(f"{key}: {message}", key=key)


def _check_writable(path, key):
    parent = Path(path).resolve().parent
    _expect(parent.is_dir(), key, f"directory {str(parent)!r} does not exist")
    _expect(os.access(parent, os.W_OK), key, f"directory {str(parent)!r} is not writable")


def _merge(doc):
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in doc:
        if key not in _TOP_LEVEL:
            raise ConfigError(f"unknown key {key!r}", key=key)
    version = doc.get("schema_version", SCHEMA_VERSION)
    _expect(version == SCHEMA_VERSION, "schema_version", f"unsupported version {version!r}")
    merged = {}
    for section, defaults in _SECTIONS.items():
        given = doc.get(section, {})
        if not isinstance(given, dict):
            raise ConfigError(f"{section} must be an object", key=section)
        for key in given:
            if key not in defaults:
                raise ConfigError(f"unknown key {section}.{key}", key=key)
        values = dict(defaults)
        values.update(given)
        for sec, key in _REQUIRED:
            if sec == section and given.get(key) is None:
                raise ConfigError(f"missing required key {section}.{key}", key=key)
        merged[section] = values
    return merged


def parse_config(text) -> RunConfig:
    """Parse and validate a JSON configuration document (string or dict).

    Every error names the offending key.
    """
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc}") from exc
    else:
        doc = text
    m = _merge(doc)

    d = m["domain"]
    _expect(_is_real(d["length"]) and d["length"] > 0, "length", "must be a positive number")
    _expect(_is_int(d["n_modes"]) and d["n_modes"] >= 4, "n_modes", "must be an integer >= 4")
    _expect(d["dealias"] is None or isinstance(d["dealias"], bool), "dealias", "must be true, false or null")
    domain = DomainSpec(float(d["length"]), d["n_modes"], d["dealias"])

    p = m["params"]
    _expect(_is_int(p["n"]) and p["n"] >= 1, "n", "must be an integer >= 1")
    _expect(_is_real(p["a"]), "a", "must be a finite number")
    _expect(p["dealias"] is None or isinstance(p["dealias"], bool), "dealias", "must be true, false or null")
    params = FlowParams(p["n"], float(p["a"]), p["dealias"])

    i = m["init"]
    _expect(i["kind"] in _INIT_KINDS, "kind", f"must be one of {_INIT_KINDS}")
    if i["kind"] == "mode":
        _expect(_is_int(i["k"]) and 1 <= i["k"] <= domain.n_modes, "k", f"must be an integer in 1..{domain.n_modes}")
    if i["kind"] == "file":
        _expect(isinstance(i["path"], str) and Path(i["path"]).is_file(), "path", "must name an existing file")
    _expect(_is_int(i["seed"]) and i["seed"] >= 0, "seed", "must be a non-negative integer")
    _expect(_is_int(i["n_active"]) and i["n_active"] >= 1, "n_active", "must be a positive integer")
    init = InitSpec(i["kind"], i["k"], i["seed"], i["n_active"], i["path"])

    s = m["scheme"]
    _expect(_is_real(s["dt"]) and s["dt"] > 0, "dt", "must be a positive number")
    _expect(_is_real(s["t_end"]) and s["t_end"] >= s["dt"], "t_end", "must be a number >= dt")
    _expect(_is_int(s["record_every"]) and s["record_every"] >= 1, "record_every", "must be a positive integer")
    _expect(isinstance(s["energy_guard"], bool), "energy_guard", "must be a boolean")
    scheme = SchemeConfig(s["scheme"], float(s["dt"]), float(s["t_end"]), s["record_every"],
                          s["energy_guard"], s["rhs_form"])

    o = m["outputs"]
    for key in ("trajectory_path", "report_path", "checkpoint_path"):
        if o[key] is not None:
            _expect(isinstance(o[key], str), key, "must be a string path")
            _check_writable(o[key], key)
    _expect(isinstance(o["figures"], bool), "figures", "must be a boolean")
    outputs = OutputSpec(o["trajectory_path"], o["report_path"], o["checkpoint_path"], o["figures"])

    w = m["sweep"]
    _expect(_is_int(w["seeds"]) and w["seeds"] >= 1, "seeds", "must be a positive integer")
    _expect(_is_int(w["rng_seed"]) and w["rng_seed"] >= 0, "rng_seed", "must be a non-negative integer")
    _expect(_is_int(w["n_active"]) and w["n_active"] >= 1, "n_active", "must be a positive integer")
    _expect(w["workers"] is None or (_is_int(w["workers"]) and w["workers"] >= 1), "workers",
            "must be a positive integer or null")
    sweep = SweepSpec(w["seeds"], w["rng_seed"], w["n_active"], w["workers"])

    return RunConfig(domain, params, init, scheme, outputs, sweep)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", key="config") from exc
    return parse_config(text)


def read_modes_file(path, domain: Domain, key="path"):
    """Mode coefficients from a JSON document carrying a ``modes`` list."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read modes from {path}: {exc}", key=key) from exc
    modes = doc.get("modes") if isinstance(doc, dict) else None
    if modes is None:
        raise ConfigError(f"{path} has no 'modes' entry", key=key)
    if len(modes) != domain.n_modes:
        raise ConfigError(f"{path} has {len(modes)} modes, domain has {domain.n_modes}", key=key)
    return np.asarray(modes, dtype=float)


def initial_field(cfg: RunConfig, domain: Domain | None = None) -> Field:
    domain = domain or cfg.build_domain()
    init = cfg.init
    if init.kind == "mode":
        return domain.basis(init.k)
    if init.kind == "random":
        return random_unit_field(domain, np.random.default_rng(init.seed), init.n_active)
    return Field.from_modes(domain, read_modes_file(init.path, domain))
