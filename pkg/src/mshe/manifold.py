"""The unit L2 sphere and its tangent projection."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError
from .field import Field, inner_product_l2

__all__ = [
    "MANIFOLD_TOL",
    "ManifoldState",
    "project_tangent",
    "renormalize",
    "tangency_defect",
]

MANIFOLD_TOL = 1e-9


@dataclass(frozen=True)
class ManifoldState:
    field: Field

    @cached_property
    def norm_defect(self):
        return abs(self.field.l2 - 1.0)

    def on_manifold(self, tol=MANIFOLD_TOL):
        return self.norm_defect <= tol


def _require_nonzero(u, name="u"):
    if not np.any(u.modes):
        raise ConfigError(f"{name} must be a nonzero field", key=name)


def project_tangent(u: Field, h: Field) -> Field:
    """``h - <h, u> u``.

    Uses the computed inner product as is, without assuming ``||u|| = 1``.
    """
    _require_nonzero(u)
    coef = inner_product_l2(h, u)
    return Field.from_modes(u.domain, h.modes - coef * u.modes)


def renormalize(u: Field) -> Field:
    _require_nonzero(u)
    return Field.from_modes(u.domain, u.modes / np.sqrt(u.modes @ u.modes))


def tangency_defect(u: Field, h: Field) -> float:
    return abs(inner_product_l2(h, u))
