"""Projected modified Swift-Hohenberg flow on the unit L2 sphere.

The evolution is ``u_t = -A u + c(u) u - u^(2n-1)`` with
``c(u) = ||Δu||^2 + 2||∇u||^2 + ||u||_{2n}^{2n}``, which is the tangent
projection of ``-A u - a u - u^(2n-1)`` for unit ``u``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .errors import ConfigError, DivergenceError
from .field import Domain, Field, resolve_dealias
from .manifold import ManifoldState, project_tangent

__all__ = [
    "FlowParams",
    "SchemeConfig",
    "Trajectory",
    "DIVERGENCE_THRESHOLD",
    "rhs",
    "rhs_projected",
    "energy",
    "energy_gradient",
    "residual_M",
    "step",
    "integrate",
]

log = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e6
SCHEMES = ("imex_euler", "projected_rk4")
RHS_FORMS = ("closed", "projection")


@dataclass(frozen=True)
class FlowParams:
    """Nonlinearity index ``n`` (power ``2n-1``), linear coefficient ``a``.

    ``dealias=None`` defers to the domain flag and then to ``n >= 2``.
    """

    n: int = 1
    a: float = 0.0
    dealias: bool | None = None

    def __post_init__(self):
        n = self.n
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError(f"n must be an integer >= 1, got {n!r}", key="n")
        if not math.isfinite(self.a):
            raise ConfigError(f"a must be finite, got {self.a!r}", key="a")

    def dealias_for(self, domain):
        flag = self.dealias if self.dealias is not None else domain.spec.dealias
        return resolve_dealias(flag, self.n)


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping policy.

    ``rhs_form="projection"`` evaluates the explicit terms through the tangent
    projection of ``-A u - a u - u^(2n-1)`` instead of the ``a``-free closed form.
    """

    scheme: str = "imex_euler"
    dt: float = 1e-5
    t_end: float = 0.02
    record_every: int = 1
    energy_guard: bool = False
    rhs_form: str = "closed"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}", key="scheme")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt!r}", key="dt")
        if not (math.isfinite(self.t_end) and self.t_end >= self.dt):
            raise ConfigError(f"t_end must be >= dt, got {self.t_end!r}", key="t_end")
        re = self.record_every
        if isinstance(re, bool) or not isinstance(re, (int, np.integer)) or re < 1:
            raise ConfigError(f"record_every must be a positive integer, got {re!r}", key="record_every")
        if self.rhs_form not in RHS_FORMS:
            raise ConfigError(f"rhs_form must be one of {RHS_FORMS}", key="rhs_form")

    @property
    def n_steps(self):
        return int(round(self.t_end / self.dt))


class _Kernel:
    """Array-level evaluation of the flow terms for one (domain, params) pair."""

    def __init__(self, domain: Domain, params: FlowParams):
        self.domain = domain
        self.params = params
        self.n = int(params.n)
        self.power = 2 * self.n - 1
        self.dealias = params.dealias_for(domain)
        self.lam = domain.a_eigs
        self.vw = domain.v_weights

    def terms(self, c):
        """Return ``(Ac, g, l2sq, rq, l2n)`` with ``g`` the modes of ``u^(2n-1)``."""
        Ac = self.lam * c
        with np.errstate(over="raise", invalid="raise"):
            try:
                g = self.domain.power_modes(c, self.power, self.dealias)
            except FloatingPointError as exc:
                raise DivergenceError(f"overflow evaluating u^{self.power}") from exc
        l2sq = float(c @ c)
        rq = float(Ac @ c)
        l2n = float(g @ c)
        return Ac, g, l2sq, rq, l2n

    def rhs_from(self, c, Ac, g, rq, l2n):
        return (rq + l2n) * c - Ac - g

    def rhs_projection_from(self, c, Ac, g, l2sq):
        h = -Ac - self.params.a * c - g
        return h - (h @ c) * c

    def energy_from(self, c, l2n):
        return 0.5 * float(self.vw @ (c * c)) + l2n / (2 * self.n)

    def residual_from(self, c, Ac, g, l2sq, l2n):
        vn = float(self.vw @ (c * c))
        return (vn - l2sq + l2n) * c - Ac - g

    def rhs(self, c, form="closed"):
        Ac, g, l2sq, rq, l2n = self.terms(c)
        if form == "projection":
            return self.rhs_projection_from(c, Ac, g, l2sq)
        return self.rhs_from(c, Ac, g, rq, l2n)


def _kernel(u: Field, params: FlowParams):
    return _Kernel(u.domain, params)


def _finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(f"non-finite values in {what}")
    return arr


def rhs(u: Field, params: FlowParams) -> Field:
    """Closed-form projected right-hand side (independent of ``a``)."""
    k = _kernel(u, params)
    return Field.from_modes(u.domain, _finite(k.rhs(u.modes), "rhs"))


def rhs_projected(u: Field, params: FlowParams) -> Field:
    """``project_tangent(u, -A u - a u - u^(2n-1))`` evaluated literally."""
    k = _kernel(u, params)
    Ac, g, _, _, _ = k.terms(u.modes)
    h = Field.from_modes(u.domain, _finite(-Ac - params.a * u.modes - g, "rhs"))
    return project_tangent(u, h)


def energy(u: Field, params: FlowParams) -> float:
    k = _kernel(u, params)
    _, _, _, _, l2n = k.terms(u.modes)
    return k.energy_from(u.modes, l2n)


def energy_gradient(u: Field, params: FlowParams) -> Field:
    """``A u + u + u^(2n-1)``, the L2 gradient of the energy."""
    k = _kernel(u, params)
    Ac, g, _, _, _ = k.terms(u.modes)
    return Field.from_modes(u.domain, _finite(Ac + u.modes + g, "energy gradient"))


def residual_M(u: Field, params: FlowParams) -> Field:
    """``-A u + (||u||_V^2 - ||u||^2 + ||u||_{2n}^{2n}) u - u^(2n-1)``."""
    k = _kernel(u, params)
    Ac, g, l2sq, _, l2n = k.terms(u.modes)
    return Field.from_modes(u.domain, _finite(k.residual_from(u.modes, Ac, g, l2sq, l2n), "M(u)"))


# -- time stepping ---------------------------------------------------------


def _explicit(kern, c, form):
    """``rhs(c) + A c`` (the part treated explicitly by IMEX) and energy terms."""
    Ac, g, l2sq, rq, l2n = kern.terms(c)
    if form == "projection":
        r = kern.rhs_projection_from(c, Ac, g, l2sq)
    else:
        r = kern.rhs_from(c, Ac, g, rq, l2n)
    return r, (Ac, g, l2sq, rq, l2n)


def _raw_step(kern, c, dt, scheme, form, r=None):
    """One unnormalized step from unit ``c``; returns ``(u_star, rhs_at_c)``."""
    if r is None:
        r, _ = _explicit(kern, c, form)
    if scheme == "imex_euler":
        u_star = (c + dt * (r + kern.lam * c)) / (1.0 + dt * kern.lam)
    else:
        k1 = r
        k2 = kern.rhs(c + 0.5 * dt * k1, form)
        k3 = kern.rhs(c + 0.5 * dt * k2, form)
        k4 = kern.rhs(c + dt * k3, form)
        u_star = c + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return u_star, r


def _check_norms(kern, u_star, t):
    if not np.all(np.isfinite(u_star)):
        raise DivergenceError(f"non-finite state at t={t:.6g}", time=t)
    l2 = math.sqrt(float(u_star @ u_star))
    vn = float(kern.vw @ (u_star * u_star))
    if l2 > DIVERGENCE_THRESHOLD or math.sqrt(vn) > DIVERGENCE_THRESHOLD:
        raise DivergenceError(
            f"norm exceeded {DIVERGENCE_THRESHOLD:g} at t={t:.6g} (L2={l2:.3g}, V={math.sqrt(vn):.3g})",
            time=t,
        )
    return l2


def _advance(kern, c, dt, cfg, e_now, guard_tol, t, r=None):
    """Advance unit ``c`` by ``dt`` (with optional energy-guard halving).

    Returns ``(c_next, pre_defect, rhs)``.
    """
    u_star, r = _raw_step(kern, c, dt, cfg.scheme, cfg.rhs_form, r)
    l2 = _check_norms(kern, u_star, t + dt)
    c_next = u_star / l2
    pre_defect = abs(l2 - 1.0)
    if cfg.energy_guard:
        _, _, _, _, l2n = kern.terms(c_next)
        if kern.energy_from(c_next, l2n) > e_now + guard_tol:
            log.info("energy guard tripped at t=%.6g; retrying with dt/2", t)
            half = dt / 2.0
            mid, _, _ = _advance(kern, c, half, replace(cfg, energy_guard=False), e_now, guard_tol, t)
            c_next, _, _ = _advance(kern, mid, half, replace(cfg, energy_guard=False), e_now, guard_tol, t + half)
            _, _, _, _, l2n = kern.terms(c_next)
            if kern.energy_from(c_next, l2n) > e_now + guard_tol:
                raise DivergenceError(f"energy guard tripped twice consecutively at t={t:.6g}", time=t)
    return c_next, pre_defect, r


def step(state: ManifoldState, params: FlowParams, cfg: SchemeConfig) -> ManifoldState:
    """One step of the configured scheme followed by renormalization."""
    u = state.field
    kern = _kernel(u, params)
    c = u.modes
    _, _, _, _, l2n = kern.terms(c)
    e_now = kern.energy_from(c, l2n)
    c_next, _, _ = _advance(kern, c, cfg.dt, cfg, e_now, 1e-8 * (1.0 + abs(e_now)), 0.0)
    return ManifoldState(Field.from_modes(u.domain, c_next))


@dataclass
class Trajectory:
    """Recorded states and diagnostics of one integration.

    Per-record arrays share the length of ``times``. The ``step_*`` arrays
    hold one entry per time step (``step_energy`` one more, including the
    initial state) and back the per-step monitors.
    """

    domain: Domain
    params: FlowParams
    cfg: SchemeConfig
    times: np.ndarray
    steps: np.ndarray
    modes: np.ndarray
    energy: np.ndarray
    l2_norm: np.ndarray
    v_norm_sq: np.ndarray
    l2n_2n: np.ndarray
    residual_norm: np.ndarray
    dissipation_integral: np.ndarray
    step_energy: np.ndarray = dc_field(repr=False)
    step_v_norm_sq: np.ndarray = dc_field(repr=False)
    step_l2n_2n: np.ndarray = dc_field(repr=False)
    pre_defect: np.ndarray = dc_field(repr=False)
    rhs_norm_sq: np.ndarray = dc_field(repr=False)
    initial_energy: float = 0.0
    start_dissipation: float = 0.0
    completed: bool = True

    def __len__(self):
        return len(self.times)

    def field(self, i) -> Field:
        return Field.from_modes(self.domain, self.modes[i])

    @property
    def states(self):
        return [ManifoldState(self.field(i)) for i in range(len(self))]

    @property
    def final_field(self) -> Field:
        return self.field(-1)

    @property
    def final_time(self):
        return float(self.times[-1])

    @property
    def final_step(self):
        return int(self.steps[-1])

    @property
    def norm_defect(self):
        return np.abs(self.l2_norm - 1.0)


def integrate(
    u0: Field,
    params: FlowParams,
    cfg: SchemeConfig,
    *,
    start_step: int = 0,
    dissipation0: float = 0.0,
    initial_energy: float | None = None,
    n_steps: int | None = None,
    normalize: bool = True,
) -> Trajectory:
    """Integrate from ``u0`` (renormalized first) for ``cfg.n_steps`` steps.

    ``start_step``, ``dissipation0`` and ``initial_energy`` let a run resume
    from a checkpoint with continuous step numbering and accumulated
    dissipation; ``normalize=False`` then keeps the stored coefficients
    bit-for-bit. Times are ``step * dt``; records fall on absolute step
    numbers divisible by ``record_every`` plus the first and last step.

    Raises :class:`DivergenceError` with the partial trajectory attached.
    """
    if not np.any(u0.modes):
        raise ConfigError("initial field must be nonzero", key="init")
    kern = _kernel(u0, params)
    dt = cfg.dt
    total = cfg.n_steps if n_steps is None else int(n_steps)
    c = np.array(u0.modes, dtype=float)
    if normalize:
        c /= math.sqrt(float(c @ c))

    rec_steps, rec_modes = [], []
    rec = {k: [] for k in ("energy", "l2", "vn", "l2n", "res", "diss")}
    step_energy = np.empty(total + 1)
    step_vn = np.empty(total + 1)
    step_l2n = np.empty(total + 1)
    pre_defect = np.empty(total)
    rhs_sq = np.empty(total)
    diss = float(dissipation0)

    def record(k, c, terms, e):
        Ac, g, l2sq, _, l2n = terms
        res = kern.residual_from(c, Ac, g, l2sq, l2n)
        rec_steps.append(k)
        rec_modes.append(c.copy())
        rec["energy"].append(e)
        rec["l2"].append(math.sqrt(l2sq))
        rec["vn"].append(float(kern.vw @ (c * c)))
        rec["l2n"].append(l2n)
        rec["res"].append(math.sqrt(float(res @ res)))
        rec["diss"].append(diss)

    def build(done, n_done):
        m = np.array(rec_modes) if rec_modes else np.empty((0, u0.domain.n_modes))
        steps = np.array(rec_steps, dtype=np.int64)
        return Trajectory(
            domain=u0.domain,
            params=params,
            cfg=cfg,
            times=steps * dt,
            steps=steps,
            modes=m,
            energy=np.array(rec["energy"]),
            l2_norm=np.array(rec["l2"]),
            v_norm_sq=np.array(rec["vn"]),
            l2n_2n=np.array(rec["l2n"]),
            residual_norm=np.array(rec["res"]),
            dissipation_integral=np.array(rec["diss"]),
            step_energy=step_energy[: n_done + 1].copy(),
            step_v_norm_sq=step_vn[: n_done + 1].copy(),
            step_l2n_2n=step_l2n[: n_done + 1].copy(),
            pre_defect=pre_defect[:n_done].copy(),
            rhs_norm_sq=rhs_sq[:n_done].copy(),
            initial_energy=e0,
            start_dissipation=float(dissipation0),
            completed=done,
        )

    r, terms = _explicit(kern, c, cfg.rhs_form)
    e = kern.energy_from(c, terms[4])
    e0 = e if initial_energy is None else float(initial_energy)
    guard_tol = 1e-8 * (1.0 + abs(e0))
    step_energy[0] = e
    step_vn[0] = float(kern.vw @ (c * c))
    step_l2n[0] = terms[4]
    record(start_step, c, terms, e)
    i = 0
    try:
        for i in range(total):
            k = start_step + i
            c_next, pd, r = _advance(kern, c, dt, cfg, e, guard_tol, k * dt, r)
            pre_defect[i] = pd
            rhs_sq[i] = float(r @ r)
            dc = c_next - c
            diss += float(dc @ dc) / dt
            c = c_next
            r, terms = _explicit(kern, c, cfg.rhs_form)
            _finite(r, "rhs")
            e = kern.energy_from(c, terms[4])
            step_energy[i + 1] = e
            step_vn[i + 1] = float(kern.vw @ (c * c))
            step_l2n[i + 1] = terms[4]
            if (k + 1) % cfg.record_every == 0 or i + 1 == total:
                record(k + 1, c, terms, e)
    except DivergenceError as exc:
        exc.trajectory = build(False, i)
        if exc.time is None:
            exc.time = (start_step + i) * dt
        raise
    return build(True, total)
