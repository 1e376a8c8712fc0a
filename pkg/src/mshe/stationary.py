"""Equilibria of the projected flow and their linear stability.

An equilibrium is a unit field ``phi`` with ``A phi + phi^(2n-1) = mu phi``.
It is found by Newton's method on the bordered system

    F(c, mu) = (A c + g(c) - mu c,  (c.c - 1) / 2)

with dense mode-space Jacobian ``[[A + g'(c) - mu I, -c], [c^T, 0]]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh, null_space, solve

from .dynamics import FlowParams, _Kernel
from .errors import AssemblyError, ConfigError, ConvergenceError, DegenerateError
from .field import Field

__all__ = [
    "Equilibrium",
    "LinearizedOperator",
    "StabilityReport",
    "find_equilibrium",
    "assemble_linearization",
    "frechet_matrix",
    "flow_jacobian",
    "spectrum",
    "SYMMETRY_TOL",
    "DEGENERACY_TOL",
]

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-9
DEGENERACY_TOL = 1e-7
FD_STEP = 1e-5


@dataclass(frozen=True)
class Equilibrium:
    field: Field
    mu: float
    residual_norm: float
    iterations: int
    params: FlowParams | None = None

    @property
    def modes(self):
        return self.field.modes


@dataclass(frozen=True)
class LinearizedOperator:
    """Mode-space matrix of the linearization about ``base``.

    ``base`` and ``params`` may be omitted for a bare matrix; the spectrum
    then uses the matrix itself as the flow Jacobian with ``e_1`` as normal.
    """

    matrix: np.ndarray
    base: Equilibrium | None = None
    params: FlowParams | None = None

    @property
    def symmetry_defect(self):
        """``max|L - L^T| / max|L|`` of the full matrix."""
        return _relative_asymmetry(self.matrix)

    def normal(self):
        if self.base is not None:
            return self.base.field.modes
        e = np.zeros(self.matrix.shape[0])
        e[0] = 1.0
        return e

    def tangent_block(self, mat=None):
        """Compression of ``mat`` (default: the operator) to the complement of the normal."""
        basis = null_space(self.normal()[None, :])
        m = self.matrix if mat is None else mat
        return basis.T @ m @ basis


def _relative_asymmetry(m):
    scale = np.max(np.abs(m))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(m - m.T)) / scale)


@dataclass(frozen=True)
class StabilityReport:
    """Eigenvalues of the symmetric part of L, tangent rates, classification.

    ``symmetry_defect`` is the full-matrix relative asymmetry of L and
    ``tangent_symmetry_defect`` that of its compression to the tangent space.
    """

    eigenvalues: np.ndarray
    tangent_rates: np.ndarray
    classification: str
    symmetry_defect: float
    tangent_symmetry_defect: float

    @property
    def slowest_rate(self):
        """Largest tangent rate (least negative for a stable point)."""
        return float(self.tangent_rates[-1])


def _multiplication(kern, c):
    """Matrix of ``w -> (2n-1) P_N(u^(2n-2) w)``, the derivative of ``g``."""
    if kern.n == 1:
        return np.eye(kern.domain.n_modes)
    vals, _ = kern.domain.sample_padded(c, kern.power, kern.dealias)
    weights = kern.power * vals ** (kern.power - 1)
    return kern.domain.multiplication_matrix(weights, kern.power, kern.dealias)


def find_equilibrium(guess: Field, params: FlowParams, tol: float = 1e-10, max_iter: int = 50) -> Equilibrium:
    """Bordered Newton iteration from ``guess`` (normalized first).

    Converged when ``||M(phi)|| <= tol * (1 + |mu|)`` and the normalization
    row is satisfied to roundoff.
    """
    if not np.any(guess.modes):
        raise ConfigError("guess must be a nonzero field", key="guess")
    if not tol > 0:
        raise ConfigError("tol must be positive", key="tol")
    dom = guess.domain
    kern = _Kernel(dom, params)
    N = dom.n_modes
    c = guess.modes / np.sqrt(guess.modes @ guess.modes)
    Ac, g, l2sq, rq, l2n = kern.terms(c)
    mu = (rq + l2n) / l2sq
    jac = np.zeros((N + 1, N + 1))
    res = np.inf
    for it in range(max_iter + 1):
        Ac, g, l2sq, rq, l2n = kern.terms(c)
        phi = c / np.sqrt(l2sq)
        terms = kern.terms(phi)
        res_vec = kern.residual_from(phi, terms[0], terms[1], terms[2], terms[4])
        res = float(np.sqrt(res_vec @ res_vec))
        if res <= tol * (1.0 + abs(mu)) and abs(l2sq - 1.0) <= 1e-13:
            return Equilibrium(Field.from_modes(dom, phi), float(mu), res, it, params)
        if it == max_iter:
            break
        F = np.empty(N + 1)
        F[:N] = Ac + g - mu * c
        F[N] = 0.5 * (l2sq - 1.0)
        jac[:N, :N] = _multiplication(kern, c)
        jac[:N, :N] += np.diag(kern.lam - mu)
        jac[:N, N] = -c
        jac[N, :N] = c
        jac[N, N] = 0.0
        # row scaling removes the lambda_N spread before judging singularity
        rows = 1.0 / np.maximum(1.0, np.abs(np.diag(jac)))
        rows[N] = 1.0
        scaled = rows[:, None] * jac
        if not np.all(np.isfinite(scaled)) or np.linalg.cond(scaled) > 1e13:
            raise DegenerateError("singular bordered Jacobian", res, it)
        try:
            delta = solve(scaled, -rows * F)
        except LinAlgError as exc:
            raise DegenerateError(f"bordered Jacobian solve failed: {exc}", res, it) from exc
        c = c + delta[:N]
        mu = mu + delta[N]
        if not np.all(np.isfinite(c)) or not np.isfinite(mu):
            raise ConvergenceError("Newton iterate became non-finite", res, it)
    raise ConvergenceError(
        f"Newton did not converge in {max_iter} iterations (last residual {res:.3e})", res, max_iter
    )


def assemble_linearization(eq: Equilibrium, params: FlowParams) -> LinearizedOperator:
    """Dense matrix of

        L w = -A w + (||phi||_V^2 + ||phi||^2 + ||phi||_{2n}^{2n}) w
              + (2<phi, w>_V + 2<phi, w> + 2n <phi^(2n-1), w>) phi
              - (2n-1) phi^(2n-2) w

    acting on sine coefficients. The rank-one part is an outer product;
    the multiplication operator is assembled by collocation on the
    quadrature grid.
    """
    kern = _Kernel(eq.field.domain, params)
    phi = eq.field.modes
    _, g, l2sq, _, l2n = kern.terms(phi)
    vw = kern.vw
    vn = float(vw @ (phi * phi))
    mat = -np.diag(kern.lam) + (vn + l2sq + l2n) * np.eye(len(phi))
    mat += np.outer(phi, 2.0 * vw * phi + 2.0 * phi + 2 * kern.n * g)
    mat -= _multiplication(kern, phi)
    return LinearizedOperator(mat, eq, params)


def frechet_matrix(u: Field, params: FlowParams) -> np.ndarray:
    """Exact derivative of ``residual_M`` at ``u`` in mode space."""
    kern = _Kernel(u.domain, params)
    c = u.modes
    _, g, l2sq, _, l2n = kern.terms(c)
    vw = kern.vw
    vn = float(vw @ (c * c))
    mat = -np.diag(kern.lam) + (vn - l2sq + l2n) * np.eye(len(c))
    mat += np.outer(c, 2.0 * vw * c - 2.0 * c + 2 * kern.n * g)
    mat -= _multiplication(kern, c)
    return mat


def flow_jacobian(u: Field, params: FlowParams, eps: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of the closed-form right-hand side at ``u``."""
    kern = _Kernel(u.domain, params)
    c = u.modes
    N = len(c)
    jac = np.empty((N, N))
    for j in range(N):
        d = np.zeros(N)
        d[j] = eps
        jac[:, j] = (kern.rhs(c + d) - kern.rhs(c - d)) / (2.0 * eps)
    return jac


def spectrum(op: LinearizedOperator) -> StabilityReport:
    """Eigenvalues of ``op`` and the flow's tangent rates at its base point.

    The symmetry guard applies to ``op`` compressed to the tangent space of
    the sphere at the base field. Off that space the rank-one part
    ``(...) phi`` of L is not symmetric unless ``n = 1`` or ``phi`` is a
    single mode. Tangent rates are eigenvalues of the flow Jacobian compressed to the
    orthogonal complement of the base field. Classification: ``degenerate``
    if some rate is within ``1e-7`` (relative to the spectral radius) of
    zero, ``stable`` if all rates are negative, ``saddle`` otherwise.
    """
    tdefect = _relative_asymmetry(op.tangent_block())
    if tdefect > SYMMETRY_TOL:
        raise AssemblyError(f"linearized operator not symmetric on the tangent space (relative defect {tdefect:.3e})")
    mat = op.matrix
    eigenvalues = eigh(0.5 * (mat + mat.T), eigvals_only=True)
    if op.base is not None and op.params is not None:
        jac = flow_jacobian(op.base.field, op.params)
    else:
        jac = mat
    tangent = op.tangent_block(jac)
    rates = eigh(0.5 * (tangent + tangent.T), eigvals_only=True)
    radius = float(np.max(np.abs(rates))) if rates.size else 0.0
    if radius == 0.0 or np.min(np.abs(rates)) <= DEGENERACY_TOL * radius:
        cls = "degenerate"
    elif np.all(rates < 0):
        cls = "stable"
    else:
        cls = "saddle"
    return StabilityReport(np.asarray(eigenvalues), np.asarray(rates), cls, op.symmetry_defect, tdefect)
