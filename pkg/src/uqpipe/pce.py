"""Sparse polynomial chaos expansions and the multi-output surrogate.

Each retained principal component is emulated by a sparse expansion
fitted with hybrid least-angle regression: the LAR path proposes
nested active sets, every set is refit by ordinary least squares with
the constant term, and the model with the lowest analytic leave-one-out
error wins.  The per-component expansions combine with the reduced
basis into a surrogate of the full output series.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import kernels, pca, polybasis
from ._lar import lar_path_iter, loo_error, select_path_model  # noqa: F401
from .doe import ExperimentalDesign
from .errors import (
    DegenerateTargetError,
    DomainViolationError,
    ShapeError,
    ValidationError,
)
from .polybasis import BasisSpec, MultiIndex

log = logging.getLogger(__name__)


def graded_lex_key(index: MultiIndex):
    """Sort key reproducing the order of :func:`polybasis.total_degree_set`."""
    return (sum(index), tuple(-v for v in index))


@dataclass(frozen=True)
class SparsePce:
    """Active multi-indices and coefficients of one scalar expansion."""

    spec: BasisSpec
    active: tuple[MultiIndex, ...]
    coeffs: np.ndarray
    loo_normalized: float
    degree_selected: int

    def __post_init__(self):
        if len(self.active) != len(set(self.active)):
            raise ValidationError("active multi-index list has duplicates")
        if len(self.active) != len(self.coeffs):
            raise ShapeError("shape error: active/coefficient lengths differ")
        object.__setattr__(self, "coeffs",
                           np.asarray(self.coeffs, dtype=np.float64))

    @property
    def dimension(self) -> int:
        return self.spec.dimension


def fit_lar(spec: BasisSpec, u_design: np.ndarray, targets: np.ndarray,
            candidate_set, *, loo_correction: bool = False,
            path_patience: int | None = None) -> SparsePce:
    """Fit one sparse expansion on a standardized design.

    ``candidate_set`` must contain the zero multi-index; the constant
    is always part of every refit model and never penalized.  Returned
    coefficients live in the unscaled orthonormal basis; ``active`` is
    sorted graded-lexicographically so serialized models reproduce.

    ``path_patience`` truncates the LAR walk once that many consecutive
    path models have failed to improve the leave-one-out score; None
    scores the full path.
    """
    u_design = np.asarray(u_design, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if u_design.ndim != 2 or u_design.shape[0] != y.shape[0]:
        raise ShapeError("shape error: design/target rows differ")
    if u_design.shape[0] < 2:
        raise ValidationError("need at least two training points")
    candidates = [tuple(int(v) for v in a) for a in candidate_set]
    if not candidates:
        raise ValidationError("candidate set is empty")
    zero = (0,) * spec.dimension
    if zero not in candidates:
        raise ValidationError("candidate set must contain the zero multi-index")
    if float(np.var(y)) <= 0.0:
        raise DegenerateTargetError("degenerate target: zero variance")

    psi = polybasis.basis_matrix(spec, candidates, u_design)
    zero_pos = candidates.index(zero)
    keep = [j for j in range(len(candidates)) if j != zero_pos]
    columns = psi[:, keep]

    events = lar_path_iter(columns, y)
    best_ids, best_loo = select_path_model(columns, y, events,
                                           patience=path_patience)

    design = np.column_stack([np.ones(y.shape[0]), columns[:, list(best_ids)]])
    coeffs, *_ = np.linalg.lstsq(design, y, rcond=None)
    if loo_correction:
        best_loo = loo_error(design, y, corrected=True)

    active = [zero] + [candidates[keep[j]] for j in best_ids]
    order = sorted(range(len(active)), key=lambda i: graded_lex_key(active[i]))
    active_sorted = tuple(active[i] for i in order)
    coeffs_sorted = coeffs[order]
    degree = max(sum(a) for a in candidates)
    return SparsePce(spec=spec, active=active_sorted, coeffs=coeffs_sorted,
                     loo_normalized=float(best_loo), degree_selected=degree)


def predict(pce: SparsePce, x, *, allow_extrapolation: bool = False) -> float:
    """Evaluate one expansion at a physical point.

    Points outside the training box raise a domain violation unless
    ``allow_extrapolation`` is set, which evaluates anyway (with a
    warning) since the recurrences are defined on the whole line.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (pce.dimension,):
        raise ShapeError("shape error: point dimension mismatch")
    u = _standard_point(pce.spec, x, allow_extrapolation)
    max_deg = max((max(a) for a in pce.active), default=0)
    table = _point_tables(pce.spec, u, max_deg)
    psi = kernels.basis_row(table, polybasis.indices_array(pce.active))
    return float(psi @ pce.coeffs)


def _standard_point(spec, x, allow_extrapolation):
    if not allow_extrapolation:
        return polybasis.standardize(spec, x)
    warnings.warn("extrapolating outside the training box", stacklevel=3)
    return _standardize_unchecked(spec, x)


def moments(pce: SparsePce) -> tuple[float, float]:
    """(mean, variance) read off the coefficients of an orthonormal basis."""
    zero = (0,) * pce.dimension
    mean = 0.0
    var = 0.0
    for a, c in zip(pce.active, pce.coeffs):
        if a == zero:
            mean = float(c)
        else:
            var += float(c) * float(c)
    return mean, var


@dataclass
class MultiOutputSurrogate:
    """Reduced basis plus one sparse expansion per retained component."""

    rb: pca.ReducedBasis
    pces: tuple[SparsePce, ...]
    _union: tuple[MultiIndex, ...] = field(init=False, repr=False)
    _union_arr: np.ndarray = field(init=False, repr=False)
    _stacked: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.pces) != self.rb.retained:
            raise ShapeError("shape error: component count mismatch")
        spec = self.pces[0].spec
        for p in self.pces:
            if p.spec != spec:
                raise ValidationError("all components must share one basis")
        union = sorted({a for p in self.pces for a in p.active},
                       key=graded_lex_key)
        coeffs = np.zeros((len(union), len(self.pces)))
        pos = {a: i for i, a in enumerate(union)}
        for col, p in enumerate(self.pces):
            for a, c in zip(p.active, p.coeffs):
                coeffs[pos[a], col] = c
        self._union = tuple(union)
        self._union_arr = polybasis.indices_array(union)
        self._stacked = coeffs
        # single-point fast path precomputation (all-Legendre case)
        self._all_legendre = all(f == polybasis.LEGENDRE
                                 for f in spec.families)
        self._max_deg = int(self._union_arr.max()) if self._union_arr.size else 0
        width = spec._hi - spec._lo
        self._std_scale = 2.0 / width             # u = scale * x + shift
        self._std_shift = -(spec._lo + spec._hi) / width
        self._eigvecs_c = np.ascontiguousarray(self.rb.eigvecs)
        self._mean_c = np.ascontiguousarray(self.rb.mean)

    @property
    def spec(self) -> BasisSpec:
        return self.pces[0].spec

    @property
    def output_length(self) -> int:
        return self.rb.output_length

    def union_indices(self) -> tuple[MultiIndex, ...]:
        return self._union

    def stacked_coeffs(self) -> np.ndarray:
        return self._stacked


def predict_components(surr: MultiOutputSurrogate, x,
                       *, allow_extrapolation: bool = False) -> np.ndarray:
    """Component scores at one point (M,) or a stack of points (n, M)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    spec = surr.spec
    max_deg = int(surr._union_arr.max()) if surr._union_arr.size else 0
    u = _standard_point(spec, x, allow_extrapolation)
    if single:
        table = _point_tables(spec, u, max_deg)
        psi = kernels.basis_row(table, surr._union_arr)
    else:
        tables = polybasis.basis_tables(spec, u, max_deg, check_domain=False)
        psi = kernels.basis_matrix(tables, surr._union_arr)
    return psi @ surr._stacked


def predict_series(surr: MultiOutputSurrogate, x,
                   *, allow_extrapolation: bool = False) -> np.ndarray:
    """Surrogate output series mean + sum_p z_p(x) phi_p.

    A single point gives a (T+1,) vector; a stack of n points gives
    (n, T+1).  The single-point all-Legendre case runs through one
    fused kernel call.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1 and surr._all_legendre and not allow_extrapolation:
        if x.shape[0] != surr._std_scale.shape[0]:
            raise ShapeError("shape error: point dimension mismatch")
        series, worst = kernels.legendre_series_point(
            x, surr._std_scale, surr._std_shift, surr._union_arr,
            surr._stacked, surr._eigvecs_c, surr._mean_c, surr._max_deg)
        if worst > 1.0 + 1e-9:
            raise DomainViolationError(
                "domain violation: point outside the training box")
        return series
    z = predict_components(surr, x, allow_extrapolation=allow_extrapolation)
    return surr.rb.mean + z @ surr.rb.eigvecs.T


def _point_tables(spec, u, max_deg):
    table = np.empty((spec.dimension, max_deg + 1))
    families = set(spec.families)
    if families == {polybasis.LEGENDRE}:
        return kernels.legendre_table(np.ascontiguousarray(u), max_deg)
    for m, fam in enumerate(spec.families):
        arr = np.array([u[m]])
        if fam == polybasis.LEGENDRE:
            table[m] = kernels.legendre_table(arr, max_deg)[0]
        else:
            table[m] = kernels.hermite_table(arr, max_deg)[0]
    return table


def _standardize_unchecked(spec, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    u = pts.copy()
    for i, (fam, b) in enumerate(zip(spec.families, spec.bounds)):
        if fam == polybasis.LEGENDRE:
            lo, hi = b
            u[:, i] = (2.0 * pts[:, i] - lo - hi) / (hi - lo)
    return u[0] if single else u


def fit_multi(design: ExperimentalDesign, outputs: np.ndarray,
              target_fraction: float, degree_range,
              *, threads: int = 1,
              loo_correction: bool = False,
              path_patience: int | None = 50) -> MultiOutputSurrogate:
    """Reduce the outputs, then fit every component over a degree range.

    For each retained component the candidate total degree with the
    lowest leave-one-out error wins (ties favor the lower degree).
    """
    degrees = list(range(int(degree_range[0]), int(degree_range[1]) + 1))
    if not degrees or degrees[0] < 0:
        raise ValidationError("degree range must be non-empty and non-negative")
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.shape[0] != design.size:
        raise ShapeError("shape error: outputs do not match the design")

    rb = pca.fit(outputs, target_fraction)
    scores = pca.scores(rb, outputs)
    spec = BasisSpec.legendre(design.bounds)
    u_design = polybasis.standardize(spec, design.points)

    smallest = comb(design.dimension + degrees[0], degrees[0])
    if design.size <= smallest:
        warnings.warn(
            f"training size {design.size} does not exceed the smallest "
            f"candidate basis ({smallest} terms); fits may be unreliable")

    candidate_cache = {p: polybasis.total_degree_set(design.dimension, p)
                       for p in degrees}

    def fit_component(p_idx: int) -> SparsePce:
        target = scores[:, p_idx]
        best = None
        for degree in degrees:
            fitted = fit_lar(spec, u_design, target, candidate_cache[degree],
                             loo_correction=loo_correction,
                             path_patience=path_patience)
            if best is None or fitted.loo_normalized < best.loo_normalized:
                best = fitted
        log.info("component %d: degree %d, %d active terms, loo %.3e",
                 p_idx, best.degree_selected, len(best.active),
                 best.loo_normalized)
        return best

    indices = range(rb.retained)
    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                pces = list(pool.map(fit_component, indices))
        else:
            pces = [fit_component(i) for i in indices]
    except (DegenerateTargetError, ValidationError) as exc:
        raise type(exc)(f"component fit failed: {exc}") from exc

    return MultiOutputSurrogate(rb=rb, pces=tuple(pces))


def surrogate_to_payload(surr: MultiOutputSurrogate) -> dict:
    from .io import encode_array

    return {
        "basis": surr.spec.to_dict(),
        "reduced_basis": surr.rb.to_payload(),
        "components": [
            {
                "active": [list(a) for a in p.active],
                "coeffs": encode_array(p.coeffs),
                "loo_normalized": p.loo_normalized,
                "degree_selected": p.degree_selected,
            }
            for p in surr.pces
        ],
    }


def surrogate_from_payload(payload: dict) -> MultiOutputSurrogate:
    from .io import decode_array

    spec = BasisSpec.from_dict(payload["basis"])
    rb = pca.ReducedBasis.from_payload(payload["reduced_basis"])
    pces = tuple(
        SparsePce(
            spec=spec,
            active=tuple(tuple(int(v) for v in a) for a in comp["active"]),
            coeffs=decode_array(comp["coeffs"]),
            loo_normalized=float(comp["loo_normalized"]),
            degree_selected=int(comp["degree_selected"]),
        )
        for comp in payload["components"]
    )
    return MultiOutputSurrogate(rb=rb, pces=pces)
