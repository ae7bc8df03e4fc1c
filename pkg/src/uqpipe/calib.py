"""Bayesian calibration of the surrogate against measured outflow.

Two error models: independent Gaussian noise with unknown level
(model 1), and exponentially correlated Gaussian noise plus an
explicit polynomial-in-time model-discrepancy term (model 2).  On the
uniform measurement grid the exponential kernel is a first-order
autoregressive covariance, so the model-2 likelihood evaluates in
O(T) through the innovations form; the dense Cholesky evaluation
remains as oracle and as fallback for non-uniform grids.

Discrepancy coefficients are kept in the data units (l/s) throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels, sampling
from .errors import (
    InsufficientSamplesError,
    ShapeError,
    ValidationError,
)
from .pce import MultiOutputSurrogate, predict_series
from .sampling import Chain, RwmConfig

SQRT_2PI = math.sqrt(2.0 * math.pi)


# ---------------------------------------------------------------------------
# priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedNormal:
    """Normal density restricted to [lo, hi], renormalized."""

    mu: float
    sigma: float
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValidationError("truncation bounds need lo < hi")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")

    def _z(self) -> float:
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        return 0.5 * (math.erf(b / math.sqrt(2)) - math.erf(a / math.sqrt(2)))

    def logpdf(self, x: float) -> float:
        if x < self.lo or x > self.hi:
            return -math.inf
        z = (x - self.mu) / self.sigma
        return -0.5 * z * z - math.log(self.sigma * SQRT_2PI) \
            - math.log(self._z())

    def sample(self, rng: np.random.Generator) -> float:
        from scipy.special import ndtr, ndtri

        a = ndtr((self.lo - self.mu) / self.sigma)
        b = ndtr((self.hi - self.mu) / self.sigma)
        u = a + (b - a) * rng.random()
        return self.mu + self.sigma * float(ndtri(u))

    @property
    def mean(self) -> float:
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        phi = lambda t: math.exp(-0.5 * t * t) / SQRT_2PI  # noqa: E731
        z = self._z()
        return self.mu + self.sigma * (phi(a) - phi(b)) / z

    @property
    def sd(self) -> float:
        a = (self.lo - self.mu) / self.sigma
        b = (self.hi - self.mu) / self.sigma
        phi = lambda t: math.exp(-0.5 * t * t) / SQRT_2PI  # noqa: E731
        z = self._z()
        d = (phi(a) - phi(b)) / z
        term = 1.0 + (a * phi(a) - b * phi(b)) / z - d * d
        return self.sigma * math.sqrt(max(term, 0.0))

    @property
    def mode(self) -> float:
        return min(max(self.mu, self.lo), self.hi)

    @property
    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValidationError("uniform bounds need lo < hi")

    def logpdf(self, x: float) -> float:
        if x < self.lo or x > self.hi:
            return -math.inf
        return -math.log(self.hi - self.lo)

    def sample(self, rng) -> float:
        return self.lo + (self.hi - self.lo) * rng.random()

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def sd(self) -> float:
        return (self.hi - self.lo) / math.sqrt(12.0)

    @property
    def mode(self) -> float:
        return self.mean

    @property
    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Laplace:
    mu: float
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValidationError("scale must be positive")

    def logpdf(self, x: float) -> float:
        return -math.log(2.0 * self.scale) - abs(x - self.mu) / self.scale

    def sample(self, rng) -> float:
        return float(rng.laplace(self.mu, self.scale))

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def sd(self) -> float:
        return self.scale * math.sqrt(2.0)

    @property
    def mode(self) -> float:
        return self.mu

    @property
    def support(self):
        return (None, None)


def default_parameter_prior(lo: float, hi: float) -> TruncatedNormal:
    """Truncated normal centered at the box midpoint, sd = range / 6."""
    return TruncatedNormal(mu=0.5 * (lo + hi), sigma=(hi - lo) / 6.0,
                           lo=lo, hi=hi)


# ---------------------------------------------------------------------------
# error models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IidError:
    """Model 1: independent Gaussian noise with unknown level."""

    sigma_prior: Uniform = field(default_factory=lambda: Uniform(0.0, 100.0))


@dataclass(frozen=True)
class DiscrepancyError:
    """Model 2: AR(1)-correlated noise plus polynomial time discrepancy."""

    sigma_prior: Uniform = field(default_factory=lambda: Uniform(0.0, 100.0))
    tau_prior: Uniform = field(default_factory=lambda: Uniform(0.0, 12000.0))
    discrepancy_degree: int = 5
    b_prior_scale: float = 10.0

    def b_priors(self) -> list[Laplace]:
        return [Laplace(0.0, self.b_prior_scale)
                for _ in range(self.discrepancy_degree + 1)]


# ---------------------------------------------------------------------------
# likelihood pieces
# ---------------------------------------------------------------------------

def log_likelihood_iid(y: np.ndarray, pred: np.ndarray, sigma: float) -> float:
    """Independent Gaussian log-likelihood."""
    if sigma <= 0:
        raise ValidationError("sigma must be positive")
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if y.shape != pred.shape:
        raise ShapeError("shape error: data/prediction lengths differ")
    resid = y - pred
    n = y.shape[0]
    return -0.5 * n * math.log(2.0 * math.pi * sigma * sigma) \
        - float(resid @ resid) / (2.0 * sigma * sigma)


def discrepancy_basis(times: np.ndarray, degree: int) -> np.ndarray:
    """Normalized Legendre values of the scaled time, (T+1, degree+1).

    Time is mapped affinely from [t_0, t_T] onto [-1, 1].
    """
    t = np.asarray(times, dtype=np.float64)
    if t.size == 0:
        raise ValidationError("empty time grid")
    if t.size == 1:
        s = np.zeros(1)
    else:
        s = (2.0 * t - t[0] - t[-1]) / (t[-1] - t[0])
    return kernels.legendre_table(np.ascontiguousarray(s), degree)


def discrepancy(b: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Polynomial-in-time discrepancy values delta(t)."""
    b = np.asarray(b, dtype=np.float64)
    basis = discrepancy_basis(times, b.shape[0] - 1)
    return basis @ b


def log_likelihood_corr(y: np.ndarray, mean: np.ndarray, sigma: float,
                        tau: float, times: np.ndarray) -> float:
    """Gaussian log-likelihood with covariance sigma^2 exp(-|dt|/tau).

    On a uniform grid the kernel is AR(1) with rho = exp(-dt/tau) and
    evaluates in O(T); otherwise a dense Cholesky evaluation runs with
    a warning.
    """
    if sigma <= 0 or tau <= 0:
        raise ValidationError("sigma and tau must be positive")
    y = np.asarray(y, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if y.shape != mean.shape or y.shape != t.shape:
        raise ShapeError("shape error: data/mean/time lengths differ")
    resid = np.ascontiguousarray(y - mean)
    diffs = np.diff(t)
    if diffs.size and np.any(np.abs(diffs - diffs[0]) > 1e-9 * abs(diffs[0])):
        warnings.warn("non-uniform grid: falling back to dense Cholesky")
        return dense_exp_loglik(resid, sigma, tau, t)
    dt = float(diffs[0]) if diffs.size else 0.0
    rho = math.exp(-dt / tau) if dt > 0 else 0.0
    return float(kernels.ar1_loglik(resid, sigma, rho))


def dense_exp_loglik(resid: np.ndarray, sigma: float, tau: float,
                     times: np.ndarray) -> float:
    """O(T^3) reference evaluation of the exponential-kernel likelihood."""
    from scipy.linalg import solve_triangular

    t = np.asarray(times, dtype=np.float64)
    cov = sigma**2 * np.exp(-np.abs(t[:, None] - t[None, :]) / tau)
    low = np.linalg.cholesky(cov)
    white = solve_triangular(low, resid, lower=True, check_finite=False)
    n = resid.shape[0]
    return -0.5 * (n * math.log(2.0 * math.pi)
                   + 2.0 * float(np.log(np.diag(low)).sum())
                   + float(white @ white))


# ---------------------------------------------------------------------------
# calibration problem
# ---------------------------------------------------------------------------

@dataclass
class CalibrationProblem:
    """Surrogate, data, priors and error model bundled for inference.

    Parameter vector layout: model 1 is (x_1..x_M, sigma); model 2 is
    (x_1..x_M, b_0..b_D, sigma, tau).
    """

    surrogate: MultiOutputSurrogate
    data: np.ndarray
    times: np.ndarray
    error_model: IidError | DiscrepancyError
    x_priors: list = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.times = np.asarray(self.times, dtype=np.float64)
        if self.data.shape != self.times.shape or self.data.ndim != 1:
            raise ShapeError("shape error: data/time grids differ")
        if self.data.shape[0] != self.surrogate.output_length:
            raise ShapeError("shape error: data does not match surrogate output")
        diffs = np.diff(self.times)
        if np.any(diffs <= 0):
            raise ValidationError("time grid must be strictly increasing")
        if np.any(np.abs(diffs - diffs[0]) > 1e-9 * abs(diffs[0])):
            raise ValidationError("time grid must be uniform")
        bounds = self.surrogate.spec.bounds
        if self.x_priors is None:
            self.x_priors = [default_parameter_prior(lo, hi)
                             for lo, hi in bounds]
        if len(self.x_priors) != len(bounds):
            raise ShapeError("shape error: one prior per model parameter")
        self._n_x = len(bounds)
        if isinstance(self.error_model, DiscrepancyError):
            self._disc_basis = discrepancy_basis(
                self.times, self.error_model.discrepancy_degree)
        else:
            self._disc_basis = None
        self._dt = float(diffs[0])
        # tiny cache: surrogate series for the current and proposed x
        self._cache: list[tuple[np.ndarray, np.ndarray]] = []
        self._build_prior_tables()

    def _build_prior_tables(self) -> None:
        # vectorized prior evaluation (hot path of the sampler)
        priors = self.priors()
        lo = np.full(len(priors), -np.inf)
        hi = np.full(len(priors), np.inf)
        constant = 0.0
        tn_idx, tn_mu, tn_sd = [], [], []
        lap_idx, lap_mu, lap_s = [], [], []
        for i, p in enumerate(priors):
            support = p.support
            if support[0] is not None:
                lo[i] = support[0]
            if support[1] is not None:
                hi[i] = support[1]
            if isinstance(p, TruncatedNormal):
                tn_idx.append(i)
                tn_mu.append(p.mu)
                tn_sd.append(p.sigma)
                constant += -math.log(p.sigma * SQRT_2PI) - math.log(p._z())
            elif isinstance(p, Uniform):
                constant += -math.log(p.hi - p.lo)
            elif isinstance(p, Laplace):
                lap_idx.append(i)
                lap_mu.append(p.mu)
                lap_s.append(p.scale)
                constant += -math.log(2.0 * p.scale)
            else:  # fall back to per-call evaluation
                self._prior_tables = None
                return
        self._prior_tables = (
            lo, hi, constant,
            np.array(tn_idx, dtype=np.intp), np.array(tn_mu), np.array(tn_sd),
            np.array(lap_idx, dtype=np.intp), np.array(lap_mu),
            np.array(lap_s),
        )

    # -- layout ------------------------------------------------------------

    @property
    def dim(self) -> int:
        if isinstance(self.error_model, IidError):
            return self._n_x + 1
        return self._n_x + self.error_model.discrepancy_degree + 1 + 2

    @property
    def parameter_names(self) -> list[str]:
        names = [f"x{i + 1}" for i in range(self._n_x)]
        if isinstance(self.error_model, DiscrepancyError):
            names += [f"b{j}" for j in
                      range(self.error_model.discrepancy_degree + 1)]
            names += ["sigma", "tau"]
        else:
            names += ["sigma"]
        return names

    def priors(self) -> list:
        priors = list(self.x_priors)
        if isinstance(self.error_model, DiscrepancyError):
            priors += self.error_model.b_priors()
            priors += [self.error_model.sigma_prior,
                       self.error_model.tau_prior]
        else:
            priors += [self.error_model.sigma_prior]
        return priors

    def default_blocks(self) -> tuple[tuple[int, ...], ...]:
        if isinstance(self.error_model, IidError):
            return (tuple(range(self.dim)),)
        x_block = tuple(range(self._n_x))
        rest = tuple(range(self._n_x, self.dim))
        return (x_block, rest)

    def prior_means(self) -> np.ndarray:
        return np.array([p.mean for p in self.priors()])

    def proposal_scales(self, fraction: float = 0.1) -> np.ndarray:
        return np.array([p.sd * fraction for p in self.priors()])

    def support_bounds(self) -> list[tuple]:
        return [p.support for p in self.priors()]

    # -- densities ----------------------------------------------------------

    def log_prior(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.dim,):
            raise ShapeError("shape error: parameter vector length")
        if self._prior_tables is not None:
            lo, hi, constant, tn_idx, tn_mu, tn_sd, \
                lap_idx, lap_mu, lap_s = self._prior_tables
            if np.any(theta < lo) or np.any(theta > hi):
                return -math.inf
            total = constant
            if tn_idx.size:
                z = (theta[tn_idx] - tn_mu) / tn_sd
                total += -0.5 * float(z @ z)
            if lap_idx.size:
                total += -float(np.sum(np.abs(theta[lap_idx] - lap_mu)
                                       / lap_s))
            return total
        total = 0.0
        for p, v in zip(self.priors(), theta):
            lp = p.logpdf(float(v))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def _series_for(self, x: np.ndarray) -> np.ndarray:
        for key, series in self._cache:
            if np.array_equal(key, x):
                return series
        series = predict_series(self.surrogate, x)
        self._cache.append((x.copy(), series))
        if len(self._cache) > 2:
            self._cache.pop(0)
        return series

    def log_likelihood(self, theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        x = theta[:self._n_x]
        pred = self._series_for(x)
        if isinstance(self.error_model, IidError):
            sigma = float(theta[self._n_x])
            if sigma <= 0:
                return -math.inf
            resid = np.ascontiguousarray(self.data - pred)
            return float(kernels.ar1_loglik(resid, sigma, 0.0))
        n_b = self.error_model.discrepancy_degree + 1
        b = theta[self._n_x:self._n_x + n_b]
        sigma = float(theta[self._n_x + n_b])
        tau = float(theta[self._n_x + n_b + 1])
        if sigma <= 0 or tau <= 0:
            return -math.inf
        rho = math.exp(-self._dt / tau)
        if rho >= 1.0 - 1e-15:
            return -math.inf
        mean = pred + self._disc_basis @ b
        resid = np.ascontiguousarray(self.data - mean)
        return float(kernels.ar1_loglik(resid, sigma, rho))

    def log_posterior(self, theta: np.ndarray) -> float:
        lp = self.log_prior(theta)
        if lp == -math.inf:
            return -math.inf
        return lp + self.log_likelihood(theta)

    def draw_initial(self, rng: np.random.Generator) -> np.ndarray:
        return self.prior_means()

    def draw_prior(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([p.sample(rng) for p in self.priors()])


# ---------------------------------------------------------------------------
# spec-level entry points
# ---------------------------------------------------------------------------

def rwm_sample(problem: CalibrationProblem, config: RwmConfig) -> list[Chain]:
    """Blocked random-walk Metropolis on the calibration posterior.

    Default blocks follow the error model (one joint block for model 1;
    x versus (b, sigma, tau) for model 2); default proposal scales are
    a tenth of each prior standard deviation.
    """
    if config.blocks is None:
        config.blocks = problem.default_blocks()
    if config.proposal_scales is None:
        config.proposal_scales = problem.proposal_scales()
    return sampling.rwm_sample(problem.log_posterior, problem.draw_initial,
                               problem.dim, config)


def map_estimate(problem: CalibrationProblem, n_starts: int = 4,
                 seed: int = 0, extra_starts=()):
    """Multi-start simplex MAP search; starts drawn from the prior."""
    return sampling.map_estimate(
        problem.log_posterior, problem.draw_prior, problem.support_bounds(),
        n_starts=n_starts, seed=seed, extra_starts=extra_starts)


# ---------------------------------------------------------------------------
# posterior summaries
# ---------------------------------------------------------------------------

QUANTILE_LEVELS = (0.025, 0.25, 0.5, 0.75, 0.975)
KDE_GRID_SIZE = 512


@dataclass
class PosteriorSummary:
    names: list[str]
    mean: np.ndarray
    sd: np.ndarray
    quantiles: np.ndarray         # (len(QUANTILE_LEVELS), dim)
    rhat: np.ndarray
    kde_grid: np.ndarray          # (dim, KDE_GRID_SIZE)
    kde_density: np.ndarray       # (dim, KDE_GRID_SIZE)
    n_pooled: int
    burn_in_fraction: float
    thin: int
    map_point: np.ndarray | None = None


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 min(sd, IQR/1.34) n^(-1/5), with a floor for degenerate data."""
    n = values.shape[0]
    sd = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        spread = max(abs(float(np.mean(values))), 1.0) * 1e-6
    return 0.9 * spread * n ** (-0.2)


def gaussian_kde_grid(values: np.ndarray, grid_size: int = KDE_GRID_SIZE):
    """(grid, density) of a Gaussian KDE with Silverman bandwidth.

    The grid spans the sample range padded by three bandwidths.
    """
    h = silverman_bandwidth(values)
    lo = float(values.min()) - 3.0 * h
    hi = float(values.max()) + 3.0 * h
    grid = np.linspace(lo, hi, grid_size)
    density = np.zeros(grid_size)
    chunk = 4096
    inv = 1.0 / (h * SQRT_2PI * values.shape[0])
    for start in range(0, values.shape[0], chunk):
        part = values[start:start + chunk]
        z = (grid[None, :] - part[:, None]) / h
        density += np.exp(-0.5 * z * z).sum(axis=0)
    return grid, density * inv


def split_rhat(per_chain: list[np.ndarray]) -> float:
    """Split-chain Gelman-Rubin statistic for one parameter."""
    halves = []
    for c in per_chain:
        half = c.shape[0] // 2
        if half < 2:
            return math.nan
        halves.append(c[:half])
        halves.append(c[half:2 * half])
    n = min(h.shape[0] for h in halves)
    arr = np.stack([h[:n] for h in halves])
    within = arr.var(axis=1, ddof=1).mean()
    between = n * arr.mean(axis=1).var(ddof=1)
    if within <= 0:
        return math.nan
    var_plus = (n - 1) / n * within + between / n
    return math.sqrt(var_plus / within)


def summarize(chains: list[Chain], burn_in_fraction: float = 0.2,
              thin: int | None = None,
              map_point: np.ndarray | None = None) -> PosteriorSummary:
    """Pool post-burn-in, thinned samples and summarize them.

    ``thin=None`` picks the smallest thinning that keeps the pooled
    sample at or below 1e5 points.
    """
    if not chains:
        raise ValidationError("need at least one chain")
    if not (0.0 <= burn_in_fraction < 1.0):
        raise ValidationError("burn-in fraction must be in [0, 1)")
    n_iter, dim = chains[0].samples.shape
    start = int(burn_in_fraction * n_iter)
    kept = n_iter - start
    if thin is None:
        thin = max(1, math.ceil(kept * len(chains) / 1e5))
    if thin < 1:
        raise ValidationError("thin must be >= 1")

    per_chain = [c.samples[start::thin] for c in chains]
    pooled = np.concatenate(per_chain, axis=0)
    if pooled.shape[0] < 100:
        raise InsufficientSamplesError(
            "insufficient samples: fewer than 100 pooled draws")

    mean = pooled.mean(axis=0)
    sd = pooled.std(axis=0, ddof=1)
    quantiles = np.quantile(pooled, QUANTILE_LEVELS, axis=0)
    rhat = np.array([split_rhat([pc[:, d] for pc in per_chain])
                     for d in range(dim)])
    grids = np.empty((dim, KDE_GRID_SIZE))
    dens = np.empty((dim, KDE_GRID_SIZE))
    for d in range(dim):
        grids[d], dens[d] = gaussian_kde_grid(pooled[:, d])
    names = [f"p{d}" for d in range(dim)]
    return PosteriorSummary(
        names=names, mean=mean, sd=sd, quantiles=quantiles, rhat=rhat,
        kde_grid=grids, kde_density=dens, n_pooled=pooled.shape[0],
        burn_in_fraction=burn_in_fraction, thin=thin, map_point=map_point)
