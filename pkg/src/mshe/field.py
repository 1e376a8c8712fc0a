"""Sine-spectral function space on the interval (0, length).

Functions vanish at both ends together with their Laplacian (Navier data),
so the orthonormal basis ``e_k(x) = sqrt(2/length) sin(k pi x / length)``
diagonalizes the Laplacian, the biharmonic operator and ``A = Δ² - 2Δ``.
Grid samples live on the ``N`` interior points of a uniform mesh with
``N + 1`` intervals; the transform between samples and coefficients is an
orthonormal type-I DST, so the uniform-weight quadrature and the
coefficient inner product coincide exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np
from scipy.fft import dst

from .errors import ConfigError, DomainMismatchError, NonFiniteError

__all__ = [
    "DomainSpec",
    "Domain",
    "Field",
    "NormReport",
    "build_domain",
    "transform",
    "inner_product_l2",
    "apply_A",
    "apply_laplacian",
    "apply_biharmonic",
    "seminorms",
    "resolve_dealias",
]


@dataclass(frozen=True)
class DomainSpec:
    """Interval length, number of sine modes and the dealiasing policy.

    ``dealias=None`` means "decide from the nonlinearity index": on for
    ``n >= 2``, off for ``n = 1``.
    """

    length: float = 1.0
    n_modes: int = 64
    dealias: bool | None = None


def resolve_dealias(flag, n):
    """Turn a tri-state dealias flag into a bool for nonlinearity index ``n``."""
    if flag is None:
        return n >= 2
    return bool(flag)


class Domain:
    """Grid, eigenvalue tables and transforms for one :class:`DomainSpec`.

    Instances are read-only after construction and may be shared freely.
    """

    def __init__(self, spec: DomainSpec):
        length = spec.length
        n_modes = spec.n_modes
        if isinstance(n_modes, bool) or int(n_modes) != n_modes:
            raise ConfigError("n_modes must be an integer", key="n_modes")
        n_modes = int(n_modes)
        if not np.isfinite(length) or length <= 0:
            raise ConfigError(f"length must be positive, got {length!r}", key="length")
        if n_modes < 4:
            raise ConfigError(f"n_modes must be >= 4, got {n_modes}", key="n_modes")
        self.spec = DomainSpec(float(length), n_modes, spec.dealias)
        self.length = float(length)
        self.n_modes = n_modes
        self.h = self.length / (n_modes + 1)
        self.x = self.h * np.arange(1, n_modes + 1)
        self.k = np.arange(1, n_modes + 1)
        self.wavenumber = self.k * np.pi / self.length
        q2 = self.wavenumber**2
        self.laplacian_eigs = -q2
        self.biharmonic_eigs = q2**2
        self.a_eigs = q2**2 + 2.0 * q2
        # ||u||_V^2 = sum (1 + 2 q^2 + q^4) c_k^2
        self.v_weights = 1.0 + self.a_eigs
        self.quad_weight = self.h
        self._scale = np.sqrt((n_modes + 1) / self.length)
        for arr in (self.x, self.k, self.wavenumber, self.laplacian_eigs,
                    self.biharmonic_eigs, self.a_eigs, self.v_weights):
            arr.setflags(write=False)
        self._padded = {}

    def __repr__(self):
        return f"Domain(length={self.length}, n_modes={self.n_modes})"

    def __eq__(self, other):
        if not isinstance(other, Domain):
            return NotImplemented
        return self.length == other.length and self.n_modes == other.n_modes

    def __hash__(self):
        return hash((self.length, self.n_modes))

    # -- raw-array transforms -------------------------------------------
    def to_grid(self, modes):
        """Coefficients -> interior grid samples."""
        return self._scale * dst(modes, type=1, norm="ortho")

    def to_modes(self, values):
        """Interior grid samples -> coefficients."""
        return dst(values, type=1, norm="ortho") / self._scale

    def padded_size(self, power):
        """Mode count of the grid on which ``u**power`` is sampled alias-free.

        The quadrature of ``u**power * e_k`` with ``M + 1`` intervals is exact
        when ``(power + 1) * N < 2 * (M + 1)``.
        """
        need = ((power + 1) * (self.n_modes + 1) + 1) // 2
        return max(need - 1, self.n_modes)

    def _padded_scale(self, m):
        return np.sqrt((m + 1) / self.length)

    def quadrature_size(self, power, dealias):
        """Interior point count of the grid used for ``u**power`` products."""
        return self.padded_size(power) if dealias else self.n_modes

    def sample_padded(self, modes, power, dealias=False):
        """Samples of ``u`` on the quadrature grid for ``u**power`` and its weight."""
        m = self.quadrature_size(power, dealias)
        if m == self.n_modes:
            return self.to_grid(modes), self.quadrature_weight
        s = self._padded_scale(m)
        ext = np.zeros(m)
        ext[: self.n_modes] = modes
        return s * dst(ext, type=1, norm="ortho"), self.length / (m + 1)

    @property
    def quadrature_weight(self):
        return self.h

    def power_modes(self, modes, power, dealias=False):
        """Coefficients of the Galerkin projection of ``u**power``.

        With ``dealias`` the power is evaluated on a refined grid large
        enough that the projection onto the first ``N`` modes is exact.
        Otherwise it is plain collocation on the native grid.
        """
        if power == 1:
            return np.array(modes, dtype=float, copy=True)
        m = self.quadrature_size(power, dealias)
        if m == self.n_modes:
            return self.to_modes(self.to_grid(modes) ** power)
        s = self._padded_scale(m)
        vals, _ = self.sample_padded(modes, power, dealias)
        out = dst(vals**power, type=1, norm="ortho") / s
        return out[: self.n_modes]

    def multiplication_matrix(self, weight_values, power, dealias=False):
        """Mode-space matrix of ``w -> P_N(g * w)`` for samples ``g`` of a weight.

        ``weight_values`` are samples on the quadrature grid selected by
        ``power`` and ``dealias`` (as returned by :meth:`sample_padded`).
        The result is symmetric by construction.
        """
        m = self.quadrature_size(power, dealias)
        synth = self.synthesis_matrix(m)
        w = self.length / (m + 1)
        return w * (synth.T * weight_values) @ synth

    def synthesis_matrix(self, m=None):
        """Dense ``(m, N)`` matrix of basis samples on a grid with ``m + 1`` intervals."""
        if m is None:
            m = self.n_modes
        key = int(m)
        mat = self._padded.get(key)
        if mat is None:
            j = np.arange(1, key + 1)[:, None]
            mat = np.sqrt(2.0 / self.length) * np.sin(np.pi * j * self.k[None, :] / (key + 1))
            mat.setflags(write=False)
            self._padded[key] = mat
        return mat

    # -- convenience constructors ---------------------------------------
    def zeros(self):
        return Field.from_modes(self, np.zeros(self.n_modes))

    def basis(self, k):
        """The unit-norm sine mode ``e_k`` (1-based)."""
        if not 1 <= k <= self.n_modes:
            raise ConfigError(f"mode index {k} outside 1..{self.n_modes}", key="k")
        c = np.zeros(self.n_modes)
        c[k - 1] = 1.0
        return Field.from_modes(self, c)

    def sample(self, func):
        """Field with grid samples ``func(x)``."""
        return Field.from_values(self, np.asarray(func(self.x), dtype=float))


def build_domain(spec: DomainSpec | None = None, **kwargs) -> Domain:
    """Construct a :class:`Domain`; keyword arguments build the spec inline."""
    if spec is None:
        spec = DomainSpec(**kwargs)
    return Domain(spec)


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains non-finite entries")


@dataclass(frozen=True, eq=False)
class Field:
    """Real function on the grid, held both as samples and as sine coefficients."""

    domain: Domain
    modes: np.ndarray = dc_field(repr=False)
    values: np.ndarray = dc_field(repr=False)

    @classmethod
    def from_modes(cls, domain, modes):
        c = np.array(modes, dtype=float)
        if c.shape != (domain.n_modes,):
            raise ValueError(f"expected {domain.n_modes} coefficients, got shape {c.shape}")
        _check_finite(c, "mode vector")
        v = domain.to_grid(c)
        c.setflags(write=False)
        v.setflags(write=False)
        return cls(domain, c, v)

    @classmethod
    def from_values(cls, domain, values):
        v = np.array(values, dtype=float)
        if v.shape != (domain.n_modes,):
            raise ValueError(f"expected {domain.n_modes} samples, got shape {v.shape}")
        _check_finite(v, "grid samples")
        c = domain.to_modes(v)
        c.setflags(write=False)
        v.setflags(write=False)
        return cls(domain, c, v)

    def _same(self, other):
        if not isinstance(other, Field):
            return NotImplemented
        if other.domain != self.domain:
            raise DomainMismatchError(f"{self.domain!r} vs {other.domain!r}")
        return other

    def __add__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return Field.from_modes(self.domain, self.modes + other.modes)

    def __sub__(self, other):
        other = self._same(other)
        if other is NotImplemented:
            return other
        return Field.from_modes(self.domain, self.modes - other.modes)

    def __mul__(self, scalar):
        if isinstance(scalar, Field):
            return NotImplemented
        return Field.from_modes(self.domain, float(scalar) * self.modes)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Field.from_modes(self.domain, self.modes / float(scalar))

    def __neg__(self):
        return Field.from_modes(self.domain, -self.modes)

    @cached_property
    def l2(self):
        return float(np.sqrt(self.modes @ self.modes))


@dataclass(frozen=True)
class NormReport:
    l2: float
    h1_semi: float
    h2_semi: float
    v_norm_sq: float
    l2n_2n: float


def transform(f: Field, direction: str) -> Field:
    """Refill one representation from the other.

    ``"to_modes"`` recomputes the coefficients from the grid samples,
    ``"to_grid"`` the samples from the coefficients.
    """
    if direction == "to_modes":
        return Field.from_values(f.domain, f.values)
    if direction == "to_grid":
        return Field.from_modes(f.domain, f.modes)
    raise ValueError(f"direction must be 'to_modes' or 'to_grid', not {direction!r}")


def inner_product_l2(f: Field, g: Field) -> float:
    if f.domain != g.domain:
        raise DomainMismatchError(f"{f.domain!r} vs {g.domain!r}")
    return float(f.modes @ g.modes)


def apply_A(f: Field) -> Field:
    return Field.from_modes(f.domain, f.domain.a_eigs * f.modes)


def apply_laplacian(f: Field) -> Field:
    return Field.from_modes(f.domain, f.domain.laplacian_eigs * f.modes)


def apply_biharmonic(f: Field) -> Field:
    return Field.from_modes(f.domain, f.domain.biharmonic_eigs * f.modes)


def seminorms(f: Field, n: int = 1, dealias: bool | None = None) -> NormReport:
    """L2 norm, H1/H2 seminorms, V-norm squared and ``||u||_{2n}^{2n}``.

    The derivative seminorms are exact spectral sums. The ``L^{2n}`` term is
    a grid quadrature of ``u**(2n)``, on the refined grid when dealiasing
    (``dealias=None`` defers to the domain's flag, then to ``n >= 2``).
    """
    if n < 1 or int(n) != n:
        raise ConfigError(f"n must be a positive integer, got {n!r}", key="n")
    n = int(n)
    dom = f.domain
    c = f.modes
    c2 = c * c
    l2_sq = float(c2.sum())
    h1_sq = float((dom.wavenumber**2 * c2).sum())
    h2_sq = float((dom.biharmonic_eigs * c2).sum())
    flag = dom.spec.dealias if dealias is None else dealias
    if n == 1:
        l2n = l2_sq
    else:
        vals, w = dom.sample_padded(c, 2 * n - 1, resolve_dealias(flag, n))
        l2n = float(w * np.sum(vals ** (2 * n)))
    return NormReport(
        l2=float(np.sqrt(l2_sq)),
        h1_semi=float(np.sqrt(h1_sq)),
        h2_semi=float(np.sqrt(h2_sq)),
        v_norm_sq=l2_sq + 2.0 * h1_sq + h2_sq,
        l2n_2n=l2n,
    )
