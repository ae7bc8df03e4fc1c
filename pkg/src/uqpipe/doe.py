"""Experimental designs: Latin hypercube sampling and box scaling.

Designs may be generated in chunks (each chunk an independent LHS);
note that the union of chunks is then *not* itself a Latin hypercube.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBoundsError, ShapeError, ValidationError


@dataclass(frozen=True)
class ExperimentalDesign:
    """Training input points in physical units.

    ``chunk_sizes`` records how the rows were generated; the sizes sum
    to the number of rows.
    """

    points: np.ndarray              # (K, M)
    bounds: tuple[tuple[float, float], ...]
    seed: int
    chunk_sizes: tuple[int, ...] = field(default=())

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ShapeError("shape error: design points must be a K x M matrix")
        if pts.shape[1] != len(self.bounds):
            raise ShapeError("shape error: bounds do not match design columns")
        if self.chunk_sizes and sum(self.chunk_sizes) != pts.shape[0]:
            raise ValidationError("chunk sizes do not sum to the design size")
        for i, (lo, hi) in enumerate(self.bounds):
            if np.any(pts[:, i] < lo) or np.any(pts[:, i] > hi):
                raise ValidationError(f"design point outside bounds in column {i}")
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


def lhs(n: int, dim: int, seed: int) -> np.ndarray:
    """Latin hypercube sample of n points in [0, 1]^dim.

    Per column, exactly one point falls in each stratum
    [(k-1)/n, k/n); positions within a stratum are uniform and the
    column permutations are independent.  Fully determined by the seed.
    """
    if n < 1 or dim < 1:
        raise ValidationError("need n >= 1 and dim >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((n, dim))
    for j in range(dim):
        perm = rng.permutation(n)
        out[:, j] = (perm + rng.random(n)) / n
    return out


def scale(bounds, unit_design: np.ndarray, seed: int = 0,
          chunk_sizes=()) -> ExperimentalDesign:
    """Affine map of a unit-hypercube design onto a physical box."""
    unit = np.asarray(unit_design, dtype=np.float64)
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    if unit.ndim != 2 or unit.shape[1] != len(bounds):
        raise ShapeError("shape error: unit design does not match bounds")
    if np.any(unit < 0.0) or np.any(unit > 1.0):
        raise ValidationError("unit design has entries outside [0, 1]")
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    if np.any(lo >= hi):
        raise DegenerateBoundsError("degenerate bounds: lower >= upper")
    pts = lo + unit * (hi - lo)
    return ExperimentalDesign(points=pts, bounds=bounds, seed=seed,
                              chunk_sizes=tuple(chunk_sizes))


def chunked_design(bounds, chunk_sizes, seed: int) -> ExperimentalDesign:
    """Concatenate independent LHS chunks and scale them onto the box.

    Chunk c uses the sub-seed derived from (seed, c), so any prefix of
    chunks is reproducible independently of the rest.
    """
    chunk_sizes = tuple(int(c) for c in chunk_sizes)
    if not chunk_sizes or any(c < 1 for c in chunk_sizes):
        raise ValidationError("chunk sizes must be positive")
    dim = len(bounds)
    blocks = []
    for ci, c in enumerate(chunk_sizes):
        sub = int(np.random.SeedSequence([seed, ci]).generate_state(1, np.uint64)[0])
        blocks.append(lhs(c, dim, sub))
    unit = np.vstack(blocks)
    return scale(bounds, unit, seed=seed, chunk_sizes=chunk_sizes)
