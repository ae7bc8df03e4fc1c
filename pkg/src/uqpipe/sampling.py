"""Blocked random-walk Metropolis sampling and derivative-free MAP search.

The sampler works on any unnormalized log-density.  Per iteration each
block proposes a Gaussian step with its diagonal scale vector and
accepts by the Metropolis ratio; chains derive independent RNG streams
from (seed, chain index) and are bit-reproducible.  Exactly one
uniform and one normal vector are drawn per block update regardless of
the outcome, so the accept/reject stream depends only on log-density
*differences* (adding a constant changes nothing).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ChainInitError, ValidationError

LogDensity = Callable[[np.ndarray], float]


@dataclass
class RwmConfig:
    """Random-walk Metropolis settings.

    ``blocks`` groups parameter positions updated together (default one
    block with every parameter).  ``proposal_scales`` are per-parameter
    standard deviations of the Gaussian steps.  ``adapt_iterations``
    runs an optional Robbins-Monro pre-phase toward 0.3 acceptance
    (first per-component scale factors, then one factor per block); the
    tuned scales are frozen before the recorded run starts.
    """

    n_iterations: int
    n_chains: int = 1
    seed: int = 0
    blocks: Sequence[Sequence[int]] | None = None
    proposal_scales: np.ndarray | None = None
    adapt_iterations: int = 0
    init_jitter: float = 0.05
    threads: int = 1


@dataclass
class Chain:
    """One chain's draws plus acceptance bookkeeping."""

    samples: np.ndarray          # (n_iterations, dim)
    log_posterior: np.ndarray    # (n_iterations,)
    accept_counts: np.ndarray    # per block
    proposal_counts: np.ndarray  # per block
    seed: int
    chain_index: int
    blocks: tuple[tuple[int, ...], ...]
    proposal_scales: np.ndarray = field(default=None)

    @property
    def acceptance_rates(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.accept_counts / np.maximum(self.proposal_counts, 1)


def _chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, chain_index]))


def _initial_point(log_post, draw_initial, rng, jitter, scales):
    for _ in range(50):
        theta = np.asarray(draw_initial(rng), dtype=np.float64).copy()
        if jitter > 0:
            theta = theta + jitter * scales * rng.standard_normal(theta.shape)
        lp = float(log_post(theta))
        if math.isfinite(lp):
            return theta, lp
    raise ChainInitError(
        "cannot initialize chain: log-posterior not finite after 50 tries")


def _run_chain(log_post: LogDensity, draw_initial, config: RwmConfig,
               chain_index: int, dim: int,
               blocks: tuple[tuple[int, ...], ...],
               scales: np.ndarray) -> Chain:
    rng = _chain_rng(config.seed, chain_index)
    theta, lp = _initial_point(log_post, draw_initial, rng,
                               config.init_jitter, scales)

    block_scales = [scales[list(b)].copy() for b in blocks]

    if config.adapt_iterations > 0:
        theta, lp, block_scales = _adapt_scales(
            log_post, theta, lp, blocks, block_scales, rng,
            config.adapt_iterations)

    n_iter = config.n_iterations
    samples = np.empty((n_iter, dim))
    log_posts = np.empty(n_iter)
    accepts = np.zeros(len(blocks), dtype=np.int64)
    proposals = np.zeros(len(blocks), dtype=np.int64)

    for it in range(n_iter):
        for b_pos, block in enumerate(blocks):
            idx = list(block)
            step = block_scales[b_pos] * rng.standard_normal(len(idx))
            log_u = math.log(rng.random())
            proposal = theta.copy()
            proposal[idx] += step
            lp_new = float(log_post(proposal))
            proposals[b_pos] += 1
            if log_u < lp_new - lp:
                theta, lp = proposal, lp_new
                accepts[b_pos] += 1
        samples[it] = theta
        log_posts[it] = lp

    tuned = scales.copy()
    for b_pos, block in enumerate(blocks):
        tuned[list(block)] = block_scales[b_pos]
    return Chain(samples=samples, log_posterior=log_posts,
                 accept_counts=accepts, proposal_counts=proposals,
                 seed=config.seed, chain_index=chain_index, blocks=blocks,
                 proposal_scales=tuned)


def _adapt_scales(log_post, theta, lp, blocks, block_scales, rng,
                  n_adapt: int, target: float = 0.3):
    """Two-stage Robbins-Monro pre-phase, frozen afterwards.

    Stage one tunes a factor per parameter through single-component
    updates (fixes per-component scale disparities); stage two tunes
    one factor per block on top.  Both push the empirical acceptance
    toward ``target`` on a log scale with 1/sqrt(t) gains.
    """
    half = max(n_adapt // 2, 1)
    comp_factors = [np.ones(len(b)) for b in blocks]
    for it in range(half):
        gain = 1.0 / math.sqrt(it + 1.0)
        for b_pos, block in enumerate(blocks):
            for j_pos, j in enumerate(block):
                step = comp_factors[b_pos][j_pos] \
                    * block_scales[b_pos][j_pos] * rng.standard_normal()
                log_u = math.log(rng.random())
                proposal = theta.copy()
                proposal[j] += step
                lp_new = float(log_post(proposal))
                accepted = log_u < lp_new - lp
                if accepted:
                    theta, lp = proposal, lp_new
                move = gain * ((1.0 if accepted else 0.0) - target)
                comp_factors[b_pos][j_pos] = min(max(
                    comp_factors[b_pos][j_pos] * math.exp(move), 1e-6), 1e6)
    block_scales = [f * s for f, s in zip(comp_factors, block_scales)]

    factors = [1.0] * len(blocks)
    for it in range(n_adapt - half):
        gain = 1.0 / math.sqrt(it + 1.0)
        for b_pos, block in enumerate(blocks):
            idx = list(block)
            step = factors[b_pos] * block_scales[b_pos] \
                * rng.standard_normal(len(idx))
            log_u = math.log(rng.random())
            proposal = theta.copy()
            proposal[idx] += step
            lp_new = float(log_post(proposal))
            accepted = log_u < lp_new - lp
            if accepted:
                theta, lp = proposal, lp_new
            move = gain * ((1.0 if accepted else 0.0) - target)
            factors[b_pos] = min(max(factors[b_pos] * math.exp(move),
                                     1e-6), 1e6)
    block_scales = [f * s for f, s in zip(factors, block_scales)]
    return theta, lp, block_scales


def rwm_sample(log_post: LogDensity, draw_initial, dim: int,
               config: RwmConfig) -> list[Chain]:
    """Sample with blocked random-walk Metropolis.

    ``draw_initial(rng)`` produces a starting point (jittered per chain
    by ``init_jitter`` times the proposal scales); initialization
    retries until the log-density is finite (50 attempts).
    """
    if config.proposal_scales is None:
        raise ValidationError("proposal scales are required")
    scales = np.asarray(config.proposal_scales, dtype=np.float64)
    if scales.shape != (dim,) or np.any(scales <= 0):
        raise ValidationError("proposal scales must be positive, one per dim")
    blocks = (tuple(tuple(int(i) for i in b) for b in config.blocks)
              if config.blocks is not None else (tuple(range(dim)),))
    flat = [i for b in blocks for i in b]
    if sorted(flat) != list(range(dim)):
        raise ValidationError("blocks must partition the parameter positions")

    def run(ci):
        return _run_chain(log_post, draw_initial, config, ci, dim, blocks,
                          scales)

    if config.threads > 1 and config.n_chains > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            return list(pool.map(run, range(config.n_chains)))
    return [run(ci) for ci in range(config.n_chains)]


def _fold(value: float, lo: float, hi: float) -> float:
    # reflect into [lo, hi] (triangular fold); infinite bounds pass through
    if not (math.isfinite(lo) or math.isfinite(hi)):
        return value
    if not math.isfinite(hi):
        return lo + abs(value - lo)
    if not math.isfinite(lo):
        return hi - abs(hi - value)
    width = hi - lo
    z = math.fmod(value - lo, 2.0 * width)
    if z < 0.0:
        z += 2.0 * width
    return lo + (z if z <= width else 2.0 * width - z)


def fold_into_box(theta: np.ndarray, bounds) -> np.ndarray:
    """Reflect every coordinate into its (possibly half-open) box.

    ``None`` bounds mean unbounded on that side.
    """
    out = np.array(theta, dtype=np.float64, copy=True)
    for i, (lo, hi) in enumerate(bounds):
        lo = -math.inf if lo is None else lo
        hi = math.inf if hi is None else hi
        out[i] = _fold(out[i], lo, hi)
    return out


def map_estimate(log_post: LogDensity, draw_start, bounds,
                 n_starts: int = 4, seed: int = 0,
                 extra_starts: Sequence[np.ndarray] = (),
                 max_iterations: int | None = None):
    """Multi-start simplex maximization of an unnormalized log-density.

    Starts come from ``draw_start(rng)`` (plus any ``extra_starts``);
    the search point is reflected into the bounds box before each
    evaluation, so the returned point respects the bounds.  Returns
    (theta_map, log_posterior_at_map).
    """
    from scipy.optimize import minimize

    if n_starts < 1 and not extra_starts:
        raise ValidationError("need at least one start")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x4D41]))
    starts = [np.asarray(draw_start(rng), dtype=np.float64)
              for _ in range(n_starts)]
    starts += [np.asarray(s, dtype=np.float64) for s in extra_starts]

    def objective(theta):
        lp = log_post(fold_into_box(theta, bounds))
        return -lp if math.isfinite(lp) else 1e300

    best_theta, best_lp = None, -math.inf
    for start in starts:
        lp0 = float(log_post(fold_into_box(start, bounds)))
        if not math.isfinite(lp0):
            continue
        result = minimize(
            objective, start, method="Nelder-Mead",
            options={
                "xatol": 1e-9, "fatol": 1e-12,
                "maxiter": max_iterations or 400 * len(start),
                "maxfev": max_iterations or 400 * len(start),
            })
        candidate = fold_into_box(result.x, bounds)
        lp = float(log_post(candidate))
        if lp > best_lp:
            best_theta, best_lp = candidate, lp
    if best_theta is None:
        raise ChainInitError("cannot initialize chain: all starts infeasible")
    return best_theta, best_lp
