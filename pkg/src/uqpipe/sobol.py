"""Variance-based sensitivity indices from expansion coefficients.

Component-level first-order, subset and total Sobol indices come
directly from squared coefficients grouped by the exact support of
their multi-indices.  Time-variant first-order indices of the
reconstructed output series recombine the component quantities with
the eigenvector entries; the per-time variance in the denominator is
computed from the same coefficients (including cross-component
products) so numerator and denominator stay consistent under the
surrogate approximation.

A pick-freeze Monte Carlo estimator is included as the independent
oracle for all of the above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateFunctionError,
    DegeneratePceError,
    IncompatibleExpansionsError,
    ValidationError,
)
from .pce import MultiOutputSurrogate, SparsePce

# recombined indices may dip slightly negative from truncation; beyond
# this they are flagged
NEGATIVE_FLAG_TOL = -0.02


@dataclass
class SobolReport:
    """Long-format index collection ready for CSV export."""

    rows: list[tuple] = field(default_factory=list)
    # each row: (subject, input_name, index_type, value, flag)

    def add(self, subject: str, input_name: str, index_type: str,
            value: float, flag: str = ""):
        self.rows.append((subject, input_name, index_type, float(value), flag))

    def header(self):
        return ["subject", "input", "index_type", "value", "flag"]


def _support(index) -> frozenset:
    return frozenset(i for i, v in enumerate(index) if v > 0)


def _variance(pce: SparsePce) -> float:
    zero = (0,) * pce.dimension
    return float(sum(c * c for a, c in zip(pce.active, pce.coeffs) if a != zero))


def subset_index(pce: SparsePce, subset) -> float:
    """Sobol index of an input subset: exact-support coefficient grouping.

    ``subset`` holds zero-based input positions; the sum runs over
    multi-indices whose nonzero pattern equals the subset exactly.
    """
    subset = frozenset(int(i) for i in subset)
    if not subset:
        raise ValidationError("subset must be non-empty")
    if any(i < 0 or i >= pce.dimension for i in subset):
        raise ValidationError("subset indexes an unknown input")
    total = _variance(pce)
    if total <= 0.0:
        raise DegeneratePceError("degenerate pce: zero variance")
    num = sum(c * c for a, c in zip(pce.active, pce.coeffs)
              if _support(a) == subset)
    return float(num / total)


def total_index(pce: SparsePce, i: int) -> float:
    """Total Sobol index: every term whose multi-index involves input i."""
    if i < 0 or i >= pce.dimension:
        raise ValidationError("input position out of range")
    total = _variance(pce)
    if total <= 0.0:
        raise DegeneratePceError("degenerate pce: zero variance")
    num = sum(c * c for a, c in zip(pce.active, pce.coeffs) if a[i] > 0)
    return float(num / total)


def first_order_indices(pce: SparsePce) -> np.ndarray:
    """All first-order indices of one expansion."""
    return np.array([subset_index(pce, {i}) for i in range(pce.dimension)])


def total_indices(pce: SparsePce) -> np.ndarray:
    return np.array([total_index(pce, i) for i in range(pce.dimension)])


def cond_cov(pce_p: SparsePce, pce_q: SparsePce, i: int) -> float:
    """Covariance of the two conditional expectations given input i.

    Equals the coefficient cross-product over multi-indices supported
    exactly on {i} thanks to basis orthonormality.
    """
    if pce_p.spec != pce_q.spec:
        raise IncompatibleExpansionsError(
            "incompatible expansions: different bases")
    if i < 0 or i >= pce_p.dimension:
        raise ValidationError("input position out of range")
    coeffs_q = {a: c for a, c in zip(pce_q.active, pce_q.coeffs)}
    target = frozenset({i})
    out = 0.0
    for a, c in zip(pce_p.active, pce_p.coeffs):
        if _support(a) == target and a in coeffs_q:
            out += c * coeffs_q[a]
    return float(out)


def _stacked_nonconstant(surr: MultiOutputSurrogate):
    """(P, ncomp) coefficient matrix over the union of non-zero indices."""
    union = surr.union_indices()
    coeffs = surr.stacked_coeffs()
    zero = (0,) * surr.spec.dimension
    mask = np.array([a != zero for a in union])
    return [a for a, m in zip(union, mask) if m], coeffs[mask]


def timevariant_first_order(surr: MultiOutputSurrogate, i: int):
    """First-order index of every output Y_t with respect to input i.

    Returns (values, flags): values is a (T+1,) vector; flags marks
    times with near-zero variance ("undefined", value NaN) and
    truncation-induced negative values beyond the tolerance
    ("negative", value kept, not clamped).
    """
    if i < 0 or i >= surr.spec.dimension:
        raise ValidationError("input position out of range")
    union, coeffs = _stacked_nonconstant(surr)
    phi = surr.rb.eigvecs                     # (T+1, ncomp)

    cross_all = coeffs.T @ coeffs             # sum_a a_p a_q over alpha != 0
    sel = np.array([_support(a) == frozenset({i}) for a in union])
    coeffs_i = coeffs[sel]
    cross_i = coeffs_i.T @ coeffs_i           # restricted to support {i}

    var_t = np.einsum("tp,pq,tq->t", phi, cross_all, phi)
    num_t = np.einsum("tp,pq,tq->t", phi, cross_i, phi)

    values = np.full(var_t.shape, np.nan)
    flags = np.array([""] * var_t.shape[0], dtype=object)
    cutoff = 1e-12 * max(var_t.max(initial=0.0), 0.0)
    dead = var_t <= cutoff
    ok = ~dead
    values[ok] = num_t[ok] / var_t[ok]
    flags[dead] = "undefined"
    flags[(values < NEGATIVE_FLAG_TOL) & ok] = "negative"
    return values, flags


def timevariant_report(surr: MultiOutputSurrogate, input_names,
                       times=None) -> SobolReport:
    """Time-variant first-order indices for every input, long format."""
    report = SobolReport()
    n_out = surr.output_length
    labels = (np.asarray(times, dtype=np.float64)
              if times is not None else np.arange(n_out, dtype=np.float64))
    for i, name in enumerate(input_names):
        values, flags = timevariant_first_order(surr, i)
        for t in range(n_out):
            report.add(f"t={labels[t]:.10g}", name, "S1", values[t], flags[t])
    return report


def component_report(surr: MultiOutputSurrogate, input_names) -> SobolReport:
    """First-order and total indices of every retained component."""
    report = SobolReport()
    for p, expansion in enumerate(surr.pces):
        first = first_order_indices(expansion)
        tot = total_indices(expansion)
        for i, name in enumerate(input_names):
            report.add(f"z{p}", name, "S1", first[i])
            report.add(f"z{p}", name, "T", tot[i])
    return report


def mc_first_order_oracle(func, sampler, i: int, n: int, seed: int,
                          n_boot: int = 200):
    """Pick-freeze Monte Carlo estimate of a first-order index.

    ``func`` maps an (n, M) batch to (n,) outputs; ``sampler(rng, n)``
    draws inputs from the prior.  Two independent blocks A and B are
    drawn and a mixed block shares exactly column i with A (the other
    columns come from B), so that

        S_i ~ [mean(f(A) f(mixed)) - mean(f(A)) mean(f(B))] / var

    estimates Var[E[Y|X_i]] / Var[Y], with the variance taken over the
    pooled f(A), f(B) values.  The standard error comes from bootstrap
    resampling of the n evaluation triples.

    Returns (estimate, standard_error).
    """
    if n < 10**3:
        raise ValidationError("need at least 1000 samples")
    rng = np.random.default_rng(seed)
    block_a = sampler(rng, n)
    block_b = sampler(rng, n)
    mixed = block_b.copy()
    mixed[:, i] = block_a[:, i]
    f_a = np.asarray(func(block_a), dtype=np.float64)
    f_b = np.asarray(func(block_b), dtype=np.float64)
    f_m = np.asarray(func(mixed), dtype=np.float64)

    pooled = np.concatenate([f_a, f_b])
    var = float(np.var(pooled, ddof=1))
    if var <= 0.0:
        raise DegenerateFunctionError("degenerate function: zero variance")

    def estimate(fa, fb, fm):
        pool = np.concatenate([fa, fb])
        v = np.var(pool, ddof=1)
        return (np.mean(fa * fm) - np.mean(fa) * np.mean(fb)) / v

    value = float(estimate(f_a, f_b, f_m))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        take = rng.integers(0, n, size=n)
        boots[b] = estimate(f_a[take], f_b[take], f_m[take])
    return value, float(np.std(boots, ddof=1))
