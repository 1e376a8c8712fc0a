"""CSV time series, JSON report documents and checkpoints.

Floats are written so that they parse back to the identical double:
``%.17g`` in CSV, Python's shortest round-trip ``repr`` in JSON.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import AttractorReport, ConvergenceReport, DecayFit, ThetaEstimate
from .dynamics import FlowParams, SchemeConfig, Trajectory, integrate
from .errors import ConfigError, MSHEError
from .field import Domain, DomainSpec, Field, build_domain
from .stationary import Equilibrium, StabilityReport

__all__ = [
    "SCHEMA_VERSION",
    "TIMESERIES_COLUMNS",
    "emit_timeseries",
    "read_timeseries",
    "write_document",
    "read_document",
    "equilibrium_doc",
    "stability_doc",
    "decay_fit_doc",
    "theta_doc",
    "convergence_doc",
    "attractor_doc",
    "trajectory_summary_doc",
    "Checkpoint",
    "checkpoint_from",
    "write_checkpoint",
    "load_checkpoint",
    "resume",
]

SCHEMA_VERSION = 1
TIMESERIES_COLUMNS = ("t", "energy", "l2_norm", "v_norm_sq", "residual_M", "dissipation_integral")


class OutputError(MSHEError, OSError):
    """Writing or reading an output file failed."""


def _fmt(x):
    return "%.17g" % x


def emit_timeseries(traj: Trajectory, path) -> None:
    """Write the per-record diagnostics as CSV, one row per record in time order."""
    if len(traj) == 0:
        raise ValueError("trajectory has no records")
    cols = (traj.times, traj.energy, traj.l2_norm, traj.v_norm_sq, traj.residual_norm,
            traj.dissipation_integral)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(TIMESERIES_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write time series to {path}: {exc}") from exc


def read_timeseries(path) -> dict:
    """Columns of a CSV written by :func:`emit_timeseries` as float arrays."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
    except (OSError, StopIteration, ValueError) as exc:
        raise ConfigError(f"cannot read time series {path}: {exc}", key="input") from exc
    if tuple(header) != TIMESERIES_COLUMNS:
        raise ConfigError(f"{path}: unexpected header {header}", key="input")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            return repr(v)
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_document(doc: dict, path, config=None) -> None:
    """Write a JSON document stamped with the schema version and config."""
    body = {"schema_version": SCHEMA_VERSION}
    body.update(doc)
    if config is not None:
        body["config"] = config
    try:
        Path(path).write_text(json.dumps(_jsonable(body), indent=2) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def read_document(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read document {path}: {exc}", key="input") from exc


def _params(params: FlowParams):
    return {"n": params.n, "a": params.a, "dealias": params.dealias}


def equilibrium_doc(eq: Equilibrium, energy_value=None) -> dict:
    doc = {
        "kind": "equilibrium",
        "mu": eq.mu,
        "residual_norm": eq.residual_norm,
        "iterations": eq.iterations,
        "length": eq.field.domain.length,
        "n_modes": eq.field.domain.n_modes,
        "modes": eq.field.modes,
    }
    if energy_value is not None:
        doc["energy"] = energy_value
    if eq.params is not None:
        doc["params"] = _params(eq.params)
    return doc


def stability_doc(report: StabilityReport, eq: Equilibrium | None = None) -> dict:
    doc = {
        "kind": "stability",
        "classification": report.classification,
        "slowest_rate": report.slowest_rate,
        "symmetry_defect": report.symmetry_defect,
        "tangent_symmetry_defect": report.tangent_symmetry_defect,
        "eigenvalues": report.eigenvalues,
        "tangent_rates": report.tangent_rates,
    }
    if eq is not None:
        doc["equilibrium"] = {"mu": eq.mu, "residual_norm": eq.residual_norm, "modes": eq.field.modes}
    return doc


def decay_fit_doc(fit: DecayFit, column=None) -> dict:
    doc = {
        "kind": "decay_fit",
        "model": fit.model,
        "kappa1": fit.kappa1,
        "kappa2": fit.kappa2,
        "kappa": fit.kappa,
        "exponent": fit.exponent,
        "window": list(fit.window),
        "r_squared": fit.r_squared,
        "n_points": fit.n_points,
    }
    if column is not None:
        doc["column"] = column
    return doc


def theta_doc(est: ThetaEstimate, limit_energy=None) -> dict:
    doc = {
        "kind": "theta",
        "theta": est.theta,
        "slope": est.slope,
        "intercept": est.intercept,
        "window": list(est.window),
        "n_points": est.n_points,
        "r_squared": est.r_squared,
    }
    if limit_energy is not None:
        doc["limit_energy"] = limit_energy
    return doc


def convergence_doc(rep: ConvergenceReport) -> dict:
    return {
        "kind": "convergence",
        "converged": rep.converged,
        "l2_distance": rep.l2_distance,
        "v_distance": rep.v_distance,
        "terminal_residual": rep.terminal_residual,
        "cauchy_tail": rep.cauchy_tail,
        "sign": rep.sign,
    }


def attractor_doc(rep: AttractorReport) -> dict:
    return {
        "kind": "attractor",
        "seeds": rep.seeds,
        "unconverged": rep.unconverged,
        "bound_violations": rep.bound_violations,
        "monotonicity_violations": rep.monotonicity_violations,
        "endpoint_energy_violations": rep.endpoint_energy_violations,
        "states_checked": rep.states_checked,
        "clusters": [
            {
                "members": c.members,
                "max_distance": c.max_distance,
                "mu": c.representative.mu,
                "residual_norm": c.representative.residual_norm,
                "dominant_mode": int(np.argmax(np.abs(c.representative.field.modes))) + 1,
                "modes": c.representative.field.modes,
            }
            for c in rep.clusters
        ],
        "per_seed": [
            {
                "index": r.index,
                "initial_energy": r.initial_energy,
                "final_energy": r.final_energy,
                "mu": r.mu,
                "error": r.error,
            }
            for r in rep.seed_results
        ],
    }


def trajectory_summary_doc(traj: Trajectory) -> dict:
    """Invariant monitors of a run: norm defects, energy identity, a-priori bounds."""
    y0 = traj.initial_energy
    n = traj.params.n
    rhs_sq = traj.rhs_norm_sq
    ratio = traj.pre_defect / np.maximum(10.0 * traj.cfg.dt * rhs_sq, np.finfo(float).tiny)
    identity = float(traj.energy[-1] - traj.energy[0]
                     + traj.dissipation_integral[-1] - traj.dissipation_integral[0])
    return {
        "kind": "trajectory_summary",
        "completed": traj.completed,
        "records": len(traj),
        "steps": len(traj.pre_defect),
        "final_time": traj.final_time,
        "initial_energy": y0,
        "final_energy": float(traj.energy[-1]),
        "final_residual": float(traj.residual_norm[-1]),
        "max_norm_defect": float(np.max(traj.norm_defect)),
        "max_pre_defect": float(np.max(traj.pre_defect)) if len(traj.pre_defect) else 0.0,
        "max_pre_defect_ratio": float(np.max(ratio)) if len(ratio) else 0.0,
        "energy_identity_defect": identity,
        "max_energy_increase": float(np.max(np.diff(traj.step_energy))) if len(traj.step_energy) > 1 else 0.0,
        "max_v_norm_sq_over_2Y0": float(np.max(traj.step_v_norm_sq) / (2.0 * y0)),
        "max_l2n_2n_over_2nY0": float(np.max(traj.step_l2n_2n) / (2.0 * n * y0)),
    }


# -- checkpoints ----------------------------------------------------------------


@dataclass(frozen=True)
class Checkpoint:
    step: int
    time: float
    dt: float
    modes: np.ndarray
    params: FlowParams
    domain: DomainSpec
    dissipation_integral: float
    initial_energy: float


def checkpoint_from(traj: Trajectory) -> Checkpoint:
    return Checkpoint(
        step=traj.final_step,
        time=traj.final_time,
        dt=traj.cfg.dt,
        modes=traj.modes[-1].copy(),
        params=traj.params,
        domain=traj.domain.spec,
        dissipation_integral=float(traj.dissipation_integral[-1]),
        initial_energy=traj.initial_energy,
    )


def write_checkpoint(ckpt: Checkpoint, path, config=None) -> None:
    doc = {
        "kind": "checkpoint",
        "step": ckpt.step,
        "time": ckpt.time,
        "dt": ckpt.dt,
        "dissipation_integral": ckpt.dissipation_integral,
        "initial_energy": ckpt.initial_energy,
        "params": _params(ckpt.params),
        "domain": {"length": ckpt.domain.length, "n_modes": ckpt.domain.n_modes,
                   "dealias": ckpt.domain.dealias},
        "modes": ckpt.modes,
    }
    write_document(doc, path, config)


def load_checkpoint(path) -> Checkpoint:
    doc = read_document(path)
    if doc.get("kind") != "checkpoint":
        raise ConfigError(f"{path} is not a checkpoint document", key="resume")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}", key="resume")
    try:
        p = doc["params"]
        d = doc["domain"]
        return Checkpoint(
            step=int(doc["step"]),
            time=float(doc["time"]),
            dt=float(doc["dt"]),
            modes=np.asarray(doc["modes"], dtype=float),
            params=FlowParams(p["n"], p["a"], p["dealias"]),
            domain=DomainSpec(d["length"], d["n_modes"], d["dealias"]),
            dissipation_integral=float(doc["dissipation_integral"]),
            initial_energy=float(doc["initial_energy"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed checkpoint ({exc})", key="resume") from exc


def resume(ckpt: Checkpoint, cfg: SchemeConfig, domain: Domain | None = None, n_steps=None) -> Trajectory:
    """Continue a run from ``ckpt`` for ``cfg.n_steps`` more steps (or ``n_steps``)."""
    if cfg.dt != ckpt.dt:
        raise ConfigError(f"checkpoint dt {ckpt.dt!r} differs from configured dt {cfg.dt!r}", key="dt")
    domain = domain or build_domain(ckpt.domain)
    u = Field.from_modes(domain, ckpt.modes)
    return integrate(
        u, ckpt.params, cfg,
        start_step=ckpt.step,
        dissipation0=ckpt.dissipation_integral,
        initial_energy=ckpt.initial_energy,
        n_steps=n_steps,
        normalize=False,
    )
