"""Orthonormal polynomial bases on standardized inputs.

Univariate families (Legendre on [-1, 1] under the uniform density,
probabilists' Hermite on the real line under the standard normal),
tensor-product multivariate polynomials addressed by multi-indices,
total-degree index sets in graded lexicographic order, and the affine
map between a physical box and the standard domain.

All polynomials are orthonormal, E[psi_a psi_b] = delta_ab, so moment
and variance formulas downstream carry no weight factors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    BasisTooLargeError,
    DegreeOverflowError,
    DomainViolationError,
    ShapeError,
    ValidationError,
)

MultiIndex = tuple[int, ...]

LEGENDRE = "legendre"
HERMITE = "hermite"
FAMILIES = (LEGENDRE, HERMITE)

DEFAULT_MAX_DEGREE = 30
DEFAULT_BASIS_CAP = 10**6

# slack accepted on the standard domain before "domain violation"
_DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class BasisSpec:
    """Per-dimension polynomial family plus standardization bounds.

    Legendre dimensions carry finite bounds (lower < upper) mapping the
    physical interval onto [-1, 1]; Hermite dimensions carry ``None``
    and are taken as already standard normal.
    """

    families: tuple[str, ...]
    bounds: tuple[tuple[float, float] | None, ...]

    def __post_init__(self):
        if len(self.families) != len(self.bounds):
            raise ShapeError("shape error: families and bounds lengths differ")
        if len(self.families) == 0:
            raise ValidationError("basis needs at least one dimension")
        for i, (fam, b) in enumerate(zip(self.families, self.bounds)):
            if fam not in FAMILIES:
                raise ValidationError(f"unknown family {fam!r} in dimension {i}")
            if fam == LEGENDRE:
                if b is None:
                    raise ValidationError(f"legendre dimension {i} needs bounds")
                lo, hi = b
                if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                    raise ValidationError(
                        f"legendre dimension {i} needs finite bounds with lo < hi")
            elif b is not None:
                raise ValidationError(f"hermite dimension {i} must not carry bounds")
        # cached arrays for vectorized standardization (hermite dims get
        # the identity map via lo=-1, hi=1 and an off mask entry)
        mask = np.array([f == LEGENDRE for f in self.families])
        lo = np.array([b[0] if b is not None else -1.0 for b in self.bounds])
        hi = np.array([b[1] if b is not None else 1.0 for b in self.bounds])
        object.__setattr__(self, "_legendre_mask", mask)
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def dimension(self) -> int:
        return len(self.families)

    @classmethod
    def legendre(cls, bounds) -> "BasisSpec":
        """All-Legendre spec from a sequence of (lo, hi) pairs."""
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        return cls(families=(LEGENDRE,) * len(bounds), bounds=bounds)

    def to_dict(self) -> dict:
        return {
            "families": list(self.families),
            "bounds": [None if b is None else [b[0], b[1]] for b in self.bounds],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BasisSpec":
        bounds = tuple(None if b is None else (float(b[0]), float(b[1]))
                       for b in data["bounds"])
        return cls(families=tuple(data["families"]), bounds=bounds)


def eval_univariate(family: str, degree: int, u: float,
                    max_degree: int = DEFAULT_MAX_DEGREE) -> float:
    """Value of the orthonormal polynomial of one family at one point."""
    if degree < 0:
        raise ValidationError("degree must be non-negative")
    if degree > max_degree:
        raise DegreeOverflowError(
            f"degree overflow: {degree} exceeds maximum {max_degree}")
    arr = np.array([float(u)])
    if family == LEGENDRE:
        _check_standard_domain(arr)
        return float(kernels.legendre_table(arr, degree)[0, degree])
    if family == HERMITE:
        return float(kernels.hermite_table(arr, degree)[0, degree])
    raise ValidationError(f"unknown family {family!r}")


def eval_basis(spec: BasisSpec, index: MultiIndex, u) -> float:
    """Tensor-product polynomial psi_index at one standardized point."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (spec.dimension,) or len(index) != spec.dimension:
        raise ShapeError("shape error: point/index dimension mismatch")
    value = 1.0
    for fam, a, ui in zip(spec.families, index, u):
        value *= eval_univariate(fam, a, ui)
    return value


def total_degree_set(dimension: int, max_degree: int,
                     cap: int = DEFAULT_BASIS_CAP) -> list[MultiIndex]:
    """All multi-indices with |alpha|_1 <= max_degree, graded-lex ordered.

    Graded by total degree; within a grade the first coordinate varies
    slowest and decreases, e.g. for two dimensions grade one lists
    (1, 0) before (0, 1).  Cardinality is binomial(M + p, p).
    """
    if dimension < 1 or max_degree < 0:
        raise ValidationError("need dimension >= 1 and max_degree >= 0")
    from math import comb

    size = comb(dimension + max_degree, max_degree)
    if size > cap:
        raise BasisTooLargeError(
            f"basis too large: {size} indices exceed cap {cap}")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total, -1, -1):
            for tail in compositions(total - head, parts - 1):
                yield (head,) + tail

    out: list[MultiIndex] = []
    for degree in range(max_degree + 1):
        out.extend(compositions(degree, dimension))
    return out


def indices_array(indices) -> np.ndarray:
    """Multi-index list as an (P, M) int64 array for the kernels."""
    return np.asarray(indices, dtype=np.int64).reshape(len(indices), -1)


def standardize(spec: BasisSpec, x) -> np.ndarray:
    """Map physical points into the standard domain.

    Legendre dimensions use u = (2x - lo - hi) / (hi - lo); Hermite
    dimensions pass through unchanged.  Accepts a single point (M,) or
    a stack (n, M).
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if pts.ndim != 2 or pts.shape[1] != spec.dimension:
        raise ShapeError("shape error: expected points of dimension "
                         f"{spec.dimension}")
    mask = spec._legendre_mask
    mapped = (2.0 * pts - spec._lo - spec._hi) / (spec._hi - spec._lo)
    bad = mask & (np.abs(mapped) > 1.0 + _DOMAIN_TOL)
    if np.any(bad):
        dim = int(np.nonzero(bad.any(axis=0))[0][0])
        raise DomainViolationError(
            f"domain violation in dimension {dim}: point outside "
            f"[{spec._lo[dim]!r}, {spec._hi[dim]!r}]")
    u = np.where(mask, np.clip(mapped, -1.0, 1.0), pts)
    return u[0] if single else u


def unstandardize(spec: BasisSpec, u) -> np.ndarray:
    """Inverse of :func:`standardize`."""
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    pts = u[None, :] if single else u
    if pts.ndim != 2 or pts.shape[1] != spec.dimension:
        raise ShapeError("shape error: expected points of dimension "
                         f"{spec.dimension}")
    mapped = spec._lo + (pts + 1.0) * 0.5 * (spec._hi - spec._lo)
    x = np.where(spec._legendre_mask, mapped, pts)
    return x[0] if single else x


def basis_tables(spec: BasisSpec, u_pts: np.ndarray, max_degree: int,
                 check_domain: bool = True) -> np.ndarray:
    """Per-dimension univariate value tables, stacked (M, n, max_degree+1)."""
    u_pts = np.atleast_2d(np.asarray(u_pts, dtype=np.float64))
    n, n_dim = u_pts.shape
    if n_dim != spec.dimension:
        raise ShapeError("shape error: points do not match basis dimension")
    tables = np.empty((n_dim, n, max_degree + 1))
    for m, fam in enumerate(spec.families):
        col = np.ascontiguousarray(u_pts[:, m])
        if fam == LEGENDRE:
            if check_domain:
                _check_standard_domain(col, dim=m)
            tables[m] = kernels.legendre_table(col, max_degree)
        else:
            tables[m] = kernels.hermite_table(col, max_degree)
    return tables


def basis_matrix(spec: BasisSpec, indices, u_pts,
                 max_degree: int = DEFAULT_MAX_DEGREE,
                 check_domain: bool = True) -> np.ndarray:
    """Evaluate all basis polynomials at all standardized points.

    Returns the (n, P) matrix with columns ordered as ``indices``.
    """
    idx = indices_array(indices)
    if idx.shape[1] != spec.dimension:
        raise ShapeError("shape error: indices do not match basis dimension")
    top = int(idx.max()) if idx.size else 0
    if top > max_degree:
        raise DegreeOverflowError(
            f"degree overflow: {top} exceeds maximum {max_degree}")
    tables = basis_tables(spec, u_pts, top, check_domain=check_domain)
    return kernels.basis_matrix(tables, idx)


def _check_standard_domain(u: np.ndarray, dim: int | None = None) -> None:
    bad = np.abs(u) > 1.0 + _DOMAIN_TOL
    if np.any(bad):
        where = f" in dimension {dim}" if dim is not None else ""
        worst = float(u[np.argmax(np.abs(u))])
        raise DomainViolationError(
            f"domain violation{where}: standardized value {worst!r} "
            "outside [-1, 1]")
