"""Least-angle regression path (lasso-modified) and hybrid model scoring.

The path solver works on internally centered, unit-norm regressor
columns and emits the sequence of visited active sets.  Coefficients
along the path are only used to detect sign-change drops; the final
model per active set is refit by ordinary least squares with the
constant regressor included, and scored by the analytic leave-one-out
error from the hat-matrix diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import IllConditionedModelError, LeverageSaturationError

# smallest acceptable Cholesky pivot on unit-norm columns
_PIVOT_TOL = 1e-7
# leverage saturation threshold: h >= 1 - this disqualifies a model
_LEVERAGE_TOL = 1e-12
# correlation level (relative to the initial one) at which the path stops
_LEVEL_TOL = 1e-12
_TINY = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class PathEvent:
    """One path step: a column entered or left the active set."""

    kind: str                   # "add" | "drop"
    index: int                  # column id
    active: tuple[int, ...]     # active set after the event, selection order


def lar_path_iter(x_cols: np.ndarray, y: np.ndarray,
                  max_active: int | None = None,
                  max_iter: int | None = None) -> Iterator[PathEvent]:
    """Run lasso-modified least-angle regression, yielding path events.

    ``x_cols`` is a (K, P) matrix of raw regressor columns (without a
    constant).  Columns that are constant, or that become numerically
    dependent on the active set (tiny Cholesky pivot), are excluded
    from candidacy; the path continues with the remaining columns.
    """
    x_cols = np.asarray(x_cols, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_samples, n_cols = x_cols.shape
    if n_samples != y.shape[0]:
        raise IllConditionedModelError("regressors and targets disagree in length")

    centered = x_cols - x_cols.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    eligible = norms > 1e-12 * max(norms.max(initial=0.0), _TINY)
    safe_norms = np.where(eligible, norms, 1.0)
    xs = centered / safe_norms
    yc = y - y.mean()

    cap = min(n_cols, max(n_samples - 2, 1))
    if max_active is not None:
        cap = min(cap, max_active)
    iter_cap = max_iter if max_iter is not None else 8 * cap + 16

    corr = xs.T @ yc
    corr[~eligible] = 0.0
    level0 = float(np.abs(corr).max(initial=0.0))
    if level0 <= 0.0:
        return

    active: list[int] = []
    signs: list[float] = []
    beta = np.zeros(0)
    chol = np.zeros((cap, cap))
    xa = np.empty((n_samples, cap))   # compacted active columns of xs
    in_active = np.zeros(n_cols, dtype=bool)
    resid = yc.copy()
    just_dropped = False

    for iteration in range(iter_cap):
        inactive = eligible & ~in_active
        if not inactive.any() and not active:
            break
        if inactive.any():
            j_star = int(np.argmax(np.where(inactive, np.abs(corr), -np.inf)))
            level = abs(corr[j_star])
        else:
            j_star = -1
            level = abs(corr[active[0]])
        if level <= _LEVEL_TOL * level0:
            break

        if not just_dropped:
            if j_star < 0 or len(active) >= cap:
                break
            # Cholesky update of the active Gram (unit-norm columns -> diag 1)
            m = len(active)
            col_new = xs[:, j_star]
            if m:
                cross = xa[:, :m].T @ col_new
                w = _solve_lower(chol[:m, :m], cross)
                pivot_sq = 1.0 - float(w @ w)
            else:
                w = np.zeros(0)
                pivot_sq = 1.0
            if pivot_sq < _PIVOT_TOL**2:
                # dependent on the active set: remove from candidacy
                eligible[j_star] = False
                corr[j_star] = 0.0
                continue
            chol[m, :m] = w
            chol[m, m] = np.sqrt(pivot_sq)
            xa[:, m] = col_new
            active.append(j_star)
            signs.append(1.0 if corr[j_star] >= 0 else -1.0)
            in_active[j_star] = True
            beta = np.append(beta, 0.0)
            yield PathEvent("add", j_star, tuple(active))

        m = len(active)
        s = np.array(signs)
        v = _solve_upper(chol[:m, :m].T, _solve_lower(chol[:m, :m], s))
        denom = float(s @ v)
        if denom <= 0.0 or not np.isfinite(denom):
            break
        a_norm = 1.0 / np.sqrt(denom)
        direction = a_norm * v
        u_vec = xa[:, :m] @ direction
        a_corr = xs.T @ u_vec
        a_corr[~eligible] = 0.0

        inactive = eligible & ~in_active
        gamma_full = level / a_norm
        gamma_hat = gamma_full
        if inactive.any():
            ci = corr[inactive]
            ai = a_corr[inactive]
            g1 = (level - ci) / (a_norm - ai + _TINY)
            g2 = (level + ci) / (a_norm + ai + _TINY)
            cands = np.concatenate([g1, g2])
            cands = cands[cands > 1e-14 * gamma_full]
            if cands.size:
                gamma_hat = min(gamma_hat, float(cands.min()))

        with np.errstate(divide="ignore", invalid="ignore"):
            crossing = np.where(np.abs(direction) > _TINY,
                                -beta / direction, np.inf)
        crossing[crossing <= 0.0] = np.inf
        drop_pos = int(np.argmin(crossing))
        gamma_drop = float(crossing[drop_pos])

        if gamma_drop < gamma_hat:
            gamma = gamma_drop
            will_drop = True
        else:
            gamma = gamma_hat
            will_drop = False

        beta += gamma * direction
        resid -= gamma * u_vec
        corr -= gamma * a_corr

        if will_drop:
            dropped = active.pop(drop_pos)
            signs.pop(drop_pos)
            beta = np.delete(beta, drop_pos)
            in_active[dropped] = False
            m = len(active)
            xa[:, drop_pos:m] = xa[:, drop_pos + 1:m + 1]
            if m:
                gram = xa[:, :m].T @ xa[:, :m]
                chol[:m, :m] = np.linalg.cholesky(gram)
            # refresh the dropped column's correlation against drift
            corr[dropped] = float(xs[:, dropped] @ resid)
            yield PathEvent("drop", dropped, tuple(active))
            just_dropped = True
        else:
            just_dropped = False
            if len(active) >= cap:
                break

        if iteration % 64 == 63:
            corr = xs.T @ resid
            corr[~eligible] = 0.0


def lar_path(x_cols, y, max_active=None, max_iter=None) -> list[PathEvent]:
    """Full materialized path; see :func:`lar_path_iter`."""
    return list(lar_path_iter(x_cols, y, max_active=max_active,
                              max_iter=max_iter))


def _solve_lower(lower, b):
    from scipy.linalg import solve_triangular

    if lower.shape[0] == 0:
        return np.zeros(0)
    return solve_triangular(lower, b, lower=True, check_finite=False)


def _solve_upper(upper, b):
    from scipy.linalg import solve_triangular

    if upper.shape[0] == 0:
        return np.zeros(0)
    return solve_triangular(upper, b, lower=False, check_finite=False)


class PathScorer:
    """Incremental LOO scoring of constant-plus-active OLS refits.

    Grows a thin orthonormal basis of [1, selected columns] one column
    at a time; a drop (or any non-prefix jump) triggers one refactorize
    through Gram + Cholesky.  ``score`` is the normalized analytic LOO
    of the current model, +inf when a leverage saturates or the model
    is rank deficient.
    """

    def __init__(self, columns: np.ndarray, y: np.ndarray, cap: int):
        self.columns = columns
        self.y = y
        n = y.shape[0]
        self.n = n
        self.var_y = float(np.var(y, ddof=1))
        self.q = np.empty((n, min(n, cap + 1)))
        self.q[:, 0] = 1.0 / np.sqrt(n)
        self.ncol = 1
        self.resid = y - self.q[:, 0] * float(self.q[:, 0] @ y)
        self.lever = np.full(n, 1.0 / n)
        self.alive = True
        self.current: tuple[int, ...] = ()

    def score(self) -> float:
        if not self.alive or np.any(self.lever >= 1.0 - _LEVERAGE_TOL):
            return np.inf
        scaled = self.resid / (1.0 - self.lever)
        return float(scaled @ scaled) / self.n / self.var_y

    def advance(self, snapshot: tuple[int, ...]) -> float:
        prev = self.current
        if (self.alive and len(snapshot) == len(prev) + 1
                and snapshot[:-1] == prev):
            self._add(snapshot[-1])
        else:
            self._rebuild(snapshot)
        self.current = snapshot
        return self.score()

    def _add(self, col_id: int) -> None:
        if self.ncol >= self.q.shape[1]:
            self.alive = False
            return
        col = self.columns[:, col_id]
        qm = self.q[:, :self.ncol]
        v = col - qm @ (qm.T @ col)
        v -= qm @ (qm.T @ v)
        nrm = np.linalg.norm(v)
        if nrm <= 1e-10 * max(np.linalg.norm(col), _TINY):
            self.alive = False
            return
        v /= nrm
        self.q[:, self.ncol] = v
        self.ncol += 1
        self.resid = self.resid - v * float(v @ self.resid)
        self.lever = self.lever + v * v

    def _rebuild(self, ids: tuple[int, ...]) -> None:
        if len(ids) + 1 > self.q.shape[1]:
            self.alive = False
            return
        design = np.empty((self.n, len(ids) + 1))
        design[:, 0] = 1.0
        design[:, 1:] = self.columns[:, list(ids)]
        gram = design.T @ design
        try:
            low = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError:
            self.alive = False
            return
        diag = np.diag(low)
        if diag.min() <= 1e-8 * max(diag.max(), _TINY):
            self.alive = False
            return
        q_new = _solve_lower(low, design.T).T    # orthonormal D L^{-T}
        self.ncol = q_new.shape[1]
        self.q[:, :self.ncol] = q_new
        self.resid = self.y - q_new @ (q_new.T @ self.y)
        self.lever = (q_new**2).sum(axis=1)
        self.alive = True


def select_path_model(columns: np.ndarray, y: np.ndarray,
                      events: Iterable[PathEvent],
                      patience: int | None = None):
    """Walk path events, LOO-scoring each model; return the best.

    The constant-only model always participates.  With ``patience`` the
    walk stops once that many consecutive events have not improved the
    best score (the LOO-versus-sparsity curve is settled by then);
    ``None`` scores the entire path.

    Returns (best_ids, best_loo).
    """
    cap = min(columns.shape[1], max(y.shape[0] - 2, 1))
    scorer = PathScorer(columns, y, cap)
    best_ids: tuple[int, ...] = ()
    best_loo = scorer.score()
    since_best = 0
    for event in events:
        loo = scorer.advance(event.active)
        if loo < best_loo:
            best_loo = loo
            best_ids = event.active
            since_best = 0
        else:
            since_best += 1
            if patience is not None and since_best >= patience:
                break
    if not np.isfinite(best_loo):
        raise IllConditionedModelError(
            "ill-conditioned model: no well-conditioned path model found")
    return best_ids, float(best_loo)


def evaluate_path_models(columns: np.ndarray, y: np.ndarray,
                         snapshots: list[tuple[int, ...]]):
    """LOO-score an explicit snapshot list; mostly a testing surface.

    Returns (best_ids, best_loo, scores) with scores aligned to
    [()] + snapshots.
    """
    cap = max((len(s) for s in snapshots), default=0)
    scorer = PathScorer(columns, y, cap)
    scores = [scorer.score()]
    evaluated: list[tuple[int, ...]] = [()]
    for snap in snapshots:
        scores.append(scorer.advance(snap))
        evaluated.append(snap)
    best_pos = int(np.argmin(scores))
    if not np.isfinite(scores[best_pos]):
        raise IllConditionedModelError(
            "ill-conditioned model: no well-conditioned path model found")
    return evaluated[best_pos], float(scores[best_pos]), scores


def loo_error(design_columns: np.ndarray, targets: np.ndarray,
              corrected: bool = False) -> float:
    """Analytic leave-one-out error of an OLS fit, normalized.

    ``design_columns`` is the full (K, m) model matrix (include the
    constant column if the model has one).  The error is
    mean(((y - yhat)/(1 - h))^2) divided by the unbiased sample
    variance of the targets.  With ``corrected`` the finite-sample
    factor (K/(K-m)) * (1 + tr[(D^T D)^(-1)]) is applied.
    """
    d_mat = np.asarray(design_columns, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if d_mat.ndim != 2 or d_mat.shape[0] != y.shape[0]:
        raise IllConditionedModelError("design/target shapes disagree")
    n_samples, n_terms = d_mat.shape
    q_mat, r_mat = np.linalg.qr(d_mat)
    diag = np.abs(np.diag(r_mat))
    if diag.min() <= 1e-12 * max(diag.max(), _TINY):
        raise IllConditionedModelError(
            "ill-conditioned model: design columns are rank deficient")
    h = (q_mat**2).sum(axis=1)
    if np.any(h >= 1.0 - _LEVERAGE_TOL):
        raise LeverageSaturationError(
            "leverage saturation: a hat-matrix diagonal reached one")
    resid = y - q_mat @ (q_mat.T @ y)
    scaled = resid / (1.0 - h)
    value = float(scaled @ scaled) / n_samples / float(np.var(y, ddof=1))
    if corrected:
        r_inv = np.linalg.inv(r_mat)
        trace = float((r_inv**2).sum())
        value *= n_samples / (n_samples - n_terms) * (1.0 + trace)
    return value
