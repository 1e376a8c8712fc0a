"""Post-processing of trajectories: decay fits, Lojasiewicz exponent,
convergence checks and the ensemble sweep over random initial data."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import linregress

from .dynamics import FlowParams, SchemeConfig, Trajectory, energy, integrate
from .errors import ConfigError, ConvergenceError, DivergenceError, EstimationError
from .field import Domain, Field
from .stationary import Equilibrium, find_equilibrium

__all__ = [
    "DecayFit",
    "ThetaEstimate",
    "ConvergenceReport",
    "Cluster",
    "AttractorReport",
    "fit_decay",
    "distance_series",
    "lojasiewicz_from_series",
    "estimate_lojasiewicz",
    "verify_convergence",
    "random_unit_field",
    "attractor_sweep",
    "THETA_WINDOW",
]

log = logging.getLogger(__name__)

THETA_WINDOW = (1e-10, 1e-2)
MIN_FIT_POINTS = 10
AUTO_MARGIN = 1e-3
CLUSTER_TOL = 1e-4
BOUND_SLACK = 1e-6
MONOTONE_TOL = 1e-8
TAIL_MAX_STATES = 4000


@dataclass(frozen=True)
class DecayFit:
    """``y ~ kappa1 exp(-kappa2 t)`` or ``y ~ kappa (1 + t)^(-exponent)``.

    Fields of the model not selected are ``None``.
    """

    model: str
    window: tuple
    r_squared: float
    n_points: int
    kappa1: float | None = None
    kappa2: float | None = None
    kappa: float | None = None
    exponent: float | None = None

    @property
    def rate(self):
        return self.kappa2 if self.model == "exponential" else self.exponent

    def predict(self, t):
        t = np.asarray(t, dtype=float)
        if self.model == "exponential":
            return self.kappa1 * np.exp(-self.kappa2 * t)
        return self.kappa * (1.0 + t) ** (-self.exponent)


@dataclass(frozen=True)
class ThetaEstimate:
    theta: float
    slope: float
    intercept: float
    window: tuple
    n_points: int
    r_squared: float


def _loglinear(x, logy):
    if np.ptp(x) == 0:
        raise EstimationError("fit abscissae are all equal")
    reg = linregress(x, logy)
    r2 = reg.rvalue**2 if np.isfinite(reg.rvalue) else 1.0
    return reg.slope, reg.intercept, float(min(max(r2, 0.0), 1.0))


def fit_decay(times, values, model="auto", t_min=None, t_max=None) -> DecayFit:
    """Least-squares fit of a decay law on a log scale.

    Points outside ``[t_min, t_max]``, non-finite points and values below
    ``100 * eps * max(values)`` are discarded; at least ten must remain.
    ``model="auto"`` keeps the exponential law unless the polynomial law
    improves ``r_squared`` by more than ``AUTO_MARGIN``; over windows with
    ``t << 1`` the two are nearly indistinguishable since
    ``log(1 + t) ~ t``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape:
        raise ValueError("times and values must have the same shape")
    keep = np.isfinite(t) & np.isfinite(y)
    if t_min is not None:
        keep &= t >= t_min
    if t_max is not None:
        keep &= t <= t_max
    if not np.any(keep):
        raise EstimationError("no points inside the fit window")
    floor = 100.0 * np.finfo(float).eps * np.max(np.abs(y[keep]))
    keep &= y > floor
    if keep.sum() < MIN_FIT_POINTS:
        raise EstimationError(f"only {int(keep.sum())} usable points in the fit window (need {MIN_FIT_POINTS})")
    t, y = t[keep], y[keep]
    window = (float(t.min()), float(t.max()))
    logy = np.log(y)
    if model not in ("exponential", "polynomial", "auto"):
        raise ValueError(f"unknown model {model!r}")

    fits = []
    if model in ("exponential", "auto"):
        s, b, r2 = _loglinear(t, logy)
        fits.append(DecayFit("exponential", window, r2, len(t), kappa1=math.exp(b), kappa2=float(-s)))
    if model in ("polynomial", "auto"):
        if np.any(t <= -1.0):
            raise EstimationError("polynomial model needs t > -1")
        s, b, r2 = _loglinear(np.log1p(t), logy)
        fits.append(DecayFit("polynomial", window, r2, len(t), kappa=math.exp(b), exponent=float(-s)))
    fits = [f for f in fits if f.rate > 0] if model == "auto" else fits
    if not fits:
        raise EstimationError("data do not decay")
    best = fits[0]
    if len(fits) == 2 and fits[1].r_squared > fits[0].r_squared + AUTO_MARGIN:
        best = fits[1]
    if not best.rate > 0:
        raise EstimationError(f"fitted {best.model} rate {best.rate:.6g} is not positive")
    return best


def distance_series(traj: Trajectory, target: Field, sign_align=True):
    """L2 distance of every recorded state to ``target`` (or ``-target``)."""
    diff = np.linalg.norm(traj.modes - target.modes, axis=1)
    if sign_align:
        diff = np.minimum(diff, np.linalg.norm(traj.modes + target.modes, axis=1))
    return diff


def lojasiewicz_from_series(energies, residuals, limit_energy, window=THETA_WINDOW) -> ThetaEstimate:
    """Regress ``log residual`` on ``log |energy - limit_energy|``.

    Only records with the energy gap inside ``window`` are used; the slope
    is ``1 - theta``.
    """
    gap = np.abs(np.asarray(energies, dtype=float) - limit_energy)
    res = np.asarray(residuals, dtype=float)
    lo, hi = window
    keep = (gap >= lo) & (gap <= hi) & (res > 0) & np.isfinite(res)
    if keep.sum() < 3:
        raise EstimationError(
            f"{int(keep.sum())} records with energy gap in [{lo:g}, {hi:g}]; need at least 3"
        )
    slope, intercept, r2 = _loglinear(np.log(gap[keep]), np.log(res[keep]))
    if not 0 < slope <= 1:
        raise EstimationError(f"regression slope {slope:.6g} outside (0, 1]")
    return ThetaEstimate(
        theta=float(1.0 - slope),
        slope=float(slope),
        intercept=float(intercept),
        window=(float(lo), float(hi)),
        n_points=int(keep.sum()),
        r_squared=r2,
    )


def estimate_lojasiewicz(traj: Trajectory, eq: Equilibrium, window=THETA_WINDOW) -> ThetaEstimate:
    if traj.residual_norm[-1] > 1e-6:
        raise EstimationError(
            f"trajectory has not approached the equilibrium (terminal residual {traj.residual_norm[-1]:.3e})"
        )
    y_eq = energy(eq.field, traj.params)
    return lojasiewicz_from_series(traj.energy, traj.residual_norm, y_eq, window)


@dataclass(frozen=True)
class ConvergenceReport:
    """Terminal distances use whichever of ``+phi`` / ``-phi`` is closer (``sign``)."""

    l2_distance: float
    v_distance: float
    terminal_residual: float
    cauchy_tail: float
    converged: bool
    sign: int
    tail_states: int


def verify_convergence(traj: Trajectory, eq: Equilibrium, residual_tol=1e-8, tail_tol=1e-6) -> ConvergenceReport:
    """Terminal distance to ``eq``, terminal residual and Cauchy tail.

    The tail is the diameter of the recorded states with ``t >= T/2``
    (thinned evenly to at most 4000 states).
    """
    final = traj.modes[-1]
    phi = eq.field.modes
    plus = final - phi
    minus = final + phi
    sign, diff = (1, plus) if plus @ plus <= minus @ minus else (-1, minus)
    vw = traj.domain.v_weights
    t_half = traj.times[0] + 0.5 * (traj.times[-1] - traj.times[0])
    tail = traj.modes[traj.times >= t_half]
    if len(tail) > TAIL_MAX_STATES:
        idx = np.unique(np.linspace(0, len(tail) - 1, TAIL_MAX_STATES).round().astype(int))
        tail = tail[idx]
    cauchy = float(pdist(tail).max()) if len(tail) > 1 else 0.0
    residual = float(traj.residual_norm[-1])
    return ConvergenceReport(
        l2_distance=float(np.sqrt(diff @ diff)),
        v_distance=float(np.sqrt(vw @ (diff * diff))),
        terminal_residual=residual,
        cauchy_tail=cauchy,
        converged=bool(residual <= residual_tol and cauchy <= tail_tol),
        sign=sign,
        tail_states=len(tail),
    )


# -- ensemble sweep ---------------------------------------------------------


def random_unit_field(domain: Domain, rng, n_active=8) -> Field:
    """Unit field with standard-normal coefficients on the first ``n_active`` modes."""
    c = np.zeros(domain.n_modes)
    k = min(n_active, domain.n_modes)
    c[:k] = rng.standard_normal(k)
    return Field.from_modes(domain, c / np.linalg.norm(c))


@dataclass(frozen=True)
class Cluster:
    representative: Equilibrium
    members: int
    max_distance: float


@dataclass
class AttractorReport:
    seeds: int
    clusters: list
    unconverged: int
    bound_violations: int
    monotonicity_violations: int
    states_checked: int
    endpoint_energy_violations: int
    seed_results: list = dc_field(default_factory=list, repr=False)


@dataclass(frozen=True)
class SeedResult:
    index: int
    initial_energy: float
    final_energy: float
    endpoint: np.ndarray | None
    mu: float | None
    residual: float | None
    iterations: int | None
    bound_violations: int
    monotonicity_violations: int
    states: int
    error: str | None


def _run_seed(args):
    index, u0_modes, domain, params, cfg = args
    u0 = Field.from_modes(domain, u0_modes)
    try:
        traj = integrate(u0, params, cfg)
        failure = None
    except DivergenceError as exc:
        traj = exc.trajectory
        failure = f"divergence: {exc}"
    y0 = traj.initial_energy
    n = params.n
    vn_cap = 2.0 * y0 * (1.0 + BOUND_SLACK)
    l2n_cap = 2.0 * n * y0 * (1.0 + BOUND_SLACK)
    bounds = int(np.sum((traj.step_v_norm_sq > vn_cap) | (traj.step_l2n_2n > l2n_cap)))
    mono = int(np.sum(np.diff(traj.step_energy) > MONOTONE_TOL * (1.0 + abs(y0))))
    states = len(traj.step_energy)
    final_energy = float(traj.step_energy[-1])
    if failure is not None:
        return SeedResult(index, y0, final_energy, None, None, None, None, bounds, mono, states, failure)
    try:
        eq = find_equilibrium(traj.final_field, params)
    except ConvergenceError as exc:
        return SeedResult(index, y0, final_energy, None, None, None, None, bounds, mono, states, f"polish: {exc}")
    return SeedResult(index, y0, final_energy, eq.field.modes.copy(), eq.mu, eq.residual_norm,
                      eq.iterations, bounds, mono, states, None)


def _map(func, jobs, workers):
    if workers is None:
        workers = os.cpu_count() or 1
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def attractor_sweep(
    seeds: int,
    params: FlowParams,
    cfg: SchemeConfig,
    rng_seed: int,
    domain: Domain,
    *,
    n_active: int = 8,
    initial_fields=None,
    workers: int | None = None,
    cluster_tol: float = CLUSTER_TOL,
) -> AttractorReport:
    """Integrate ``seeds`` random unit initial fields and group the limits.

    Seed ``i`` draws from ``numpy.random.default_rng([rng_seed, i])`` so the
    result is independent of execution order. Each endpoint is polished with
    :func:`find_equilibrium`; polished equilibria are grouped by
    sign-normalized L2 distance. Divergent or unpolishable runs count as
    unconverged. ``initial_fields`` overrides the random draws.
    """
    if isinstance(seeds, bool) or int(seeds) != seeds or seeds < 1:
        raise ConfigError(f"seeds must be a positive integer, got {seeds!r}", key="seeds")
    seeds = int(seeds)
    if initial_fields is not None:
        inits = [f.modes for f in initial_fields]
        if len(inits) != seeds:
            raise ConfigError("initial_fields length must equal seeds", key="seeds")
    else:
        inits = [random_unit_field(domain, np.random.default_rng([rng_seed, i]), n_active).modes
                 for i in range(seeds)]
    jobs = [(i, inits[i], domain, params, cfg) for i in range(seeds)]
    results = sorted(_map(_run_seed, jobs, workers), key=lambda r: r.index)

    reps, counts, spreads = [], [], []
    unconverged = 0
    for r in results:
        if r.endpoint is None:
            unconverged += 1
            log.warning("seed %d unconverged: %s", r.index, r.error)
            continue
        for j, rep in enumerate(reps):
            d = min(np.linalg.norm(r.endpoint - rep.modes), np.linalg.norm(r.endpoint + rep.modes))
            if d <= cluster_tol:
                counts[j] += 1
                spreads[j] = max(spreads[j], d)
                break
        else:
            reps.append(Equilibrium(Field.from_modes(domain, r.endpoint), r.mu, r.residual, r.iterations, params))
            counts.append(1)
            spreads.append(0.0)
    clusters = [Cluster(rep, c, s) for rep, c, s in zip(reps, counts, spreads)]
    return AttractorReport(
        seeds=seeds,
        clusters=clusters,
        unconverged=unconverged,
        bound_violations=sum(r.bound_violations for r in results),
        monotonicity_violations=sum(r.monotonicity_violations for r in results),
        states_checked=sum(r.states for r in results),
        endpoint_energy_violations=sum(
            1 for r in results if r.final_energy > r.initial_energy * (1.0 + 1e-12)),
        seed_results=results,
    )
