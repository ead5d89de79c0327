"""
Linear Mixed Model Engine for LongiForest

Fits Laird-Ware linear mixed models y_i = X_i beta + Z_i b_i + e_i by
maximum likelihood with an EM algorithm, and predicts subject random
effects (BLUPs) used as split features.

Everything is computed from per-subject sufficient statistics
(X'X, Z'X, Z'Z, X'y, Z'y, y'y), so a node fit only indexes precomputed
arrays and bootstrap duplicates are handled by repeated rows.

The engine is designed to be:
- Pure: no shared mutable state, safe across concurrent trees
- Deterministic: fixed initialization, no randomness
- Robust: clamped variance components at small node sizes
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ..models.data import MarkerSpec
from ..models.forest import LmmFitRecord
from ..models.tables import MarkerObservations, PredictorData
from ..utils.errors import InsufficientData, SingularDesign

LOG_2PI = float(np.log(2.0 * np.pi))
SIGMA2_FLOOR = 1e-10
INIT_FLOOR = 1e-4
RIDGE = 1e-8
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class LmmDesign:
    """Polynomial time bases of the fixed and random effects"""
    fixed_degrees: Tuple[int, ...]
    random_degrees: Tuple[int, ...]

    @classmethod
    def from_spec(cls, spec: MarkerSpec) -> "LmmDesign":
        return cls(tuple(spec.fixed_degrees), tuple(spec.random_degrees))

    @property
    def p(self) -> int:
        return len(self.fixed_degrees)

    @property
    def q_r(self) -> int:
        return len(self.random_degrees)

    @property
    def random_positions(self) -> Tuple[int, ...]:
        return tuple(self.fixed_degrees.index(d) for d in self.random_degrees)

    def fixed_matrix(self, times: np.ndarray) -> np.ndarray:
        return np.power.outer(np.asarray(times, dtype=float), np.asarray(self.fixed_degrees, dtype=float))

    def random_matrix(self, times: np.ndarray) -> np.ndarray:
        return self.fixed_matrix(times)[:, list(self.random_positions)]


@dataclass(frozen=True)
class SubjectStats:
    """Stacked per-subject sufficient statistics"""
    n_obs: np.ndarray
    xtx: np.ndarray
    ztx: np.ndarray
    ztz: np.ndarray
    xty: np.ndarray
    zty: np.ndarray
    yty: np.ndarray

    def take(self, rows: np.ndarray) -> "SubjectStats":
        return SubjectStats(*(getattr(self, name)[rows] for name in self.__dataclass_fields__))


@dataclass(frozen=True)
class LmmFit:
    """Estimated parameters of a linear mixed model"""
    beta: np.ndarray
    b_cov: np.ndarray
    sigma2: float
    loglik: float
    converged: bool
    n_subjects: int
    n_obs: int
    n_iter: int = 0
    loglik_trace: Tuple[float, ...] = field(default=(), compare=False, repr=False)

    def to_record(self, marker: str) -> LmmFitRecord:
        return LmmFitRecord(
            marker=marker,
            beta=[float(v) for v in self.beta],
            b_cov=[[float(v) for v in row] for row in self.b_cov],
            sigma2=float(self.sigma2),
            loglik=float(self.loglik),
            converged=self.converged,
            n_subjects=self.n_subjects,
            n_obs=self.n_obs,
            n_iter=self.n_iter,
        )

    @classmethod
    def from_record(cls, record: LmmFitRecord) -> "LmmFit":
        return cls(
            beta=np.asarray(record.beta, dtype=float),
            b_cov=np.asarray(record.b_cov, dtype=float),
            sigma2=record.sigma2,
            loglik=record.loglik,
            converged=record.converged,
            n_subjects=record.n_subjects,
            n_obs=record.n_obs,
            n_iter=record.n_iter,
        )


def compute_subject_stats(design: LmmDesign, subject_index: np.ndarray, times: np.ndarray,
                          values: np.ndarray, n_subjects: int) -> SubjectStats:
    """Accumulate sufficient statistics for each of n_subjects rows"""
    p, q = design.p, design.q_r
    X = design.fixed_matrix(times)
    Z = X[:, list(design.random_positions)]
    y = np.asarray(values, dtype=float)
    index = np.asarray(subject_index, dtype=int)

    n_obs = np.bincount(index, minlength=n_subjects).astype(int)
    xtx = np.zeros((n_subjects, p, p))
    ztx = np.zeros((n_subjects, q, p))
    ztz = np.zeros((n_subjects, q, q))
    xty = np.zeros((n_subjects, p))
    zty = np.zeros((n_subjects, q))
    yty = np.zeros(n_subjects)
    np.add.at(xtx, index, X[:, :, None] * X[:, None, :])
    np.add.at(ztx, index, Z[:, :, None] * X[:, None, :])
    np.add.at(ztz, index, Z[:, :, None] * Z[:, None, :])
    np.add.at(xty, index, X * y[:, None])
    np.add.at(zty, index, Z * y[:, None])
    np.add.at(yty, index, y * y)
    return SubjectStats(n_obs, xtx, ztx, ztz, xty, zty, yty)


def series_stats(design: LmmDesign, series: Sequence[Tuple[np.ndarray, np.ndarray]]) -> SubjectStats:
    """Sufficient statistics of a list of per-subject (time, value) series"""
    index, times, values = [], [], []
    for i, (t, y) in enumerate(series):
        t = np.asarray(t, dtype=float)
        index.append(np.full(len(t), i, dtype=int))
        times.append(t)
        values.append(np.asarray(y, dtype=float))
    if not series:
        return compute_subject_stats(design, np.zeros(0, int), np.zeros(0), np.zeros(0), 0)
    return compute_subject_stats(design, np.concatenate(index), np.concatenate(times),
                                 np.concatenate(values), len(series))


def marker_stats(data: PredictorData, spec: MarkerSpec) -> SubjectStats:
    """Cached sufficient statistics of one marker for every subject row"""
    cached = data.stats_cache.get(spec.name)
    if cached is None:
        obs: MarkerObservations = data.observations[spec.name]
        cached = compute_subject_stats(LmmDesign.from_spec(spec), obs.subject_index, obs.time,
                                       obs.value, data.n_subjects)
        data.stats_cache[spec.name] = cached
    return cached


def _clamp_cov(B: np.ndarray) -> np.ndarray:
    B = 0.5 * (B + B.T)
    w, v = np.linalg.eigh(B)
    w = np.where(w < 0.0, 0.0, w)
    return (v * w) @ v.T


def _residual_ss(s: SubjectStats, beta: np.ndarray) -> np.ndarray:
    return s.yty - 2.0 * s.xty @ beta + np.einsum('ijk,j,k->i', s.xtx, beta, beta)


def _e_step(s: SubjectStats, beta: np.ndarray, B: np.ndarray, sigma2: float):
    """Posterior means/covariances of the random effects and the marginal loglik"""
    q = B.shape[0]
    eye = np.eye(q)
    ztr = s.zty - s.ztx @ beta
    M = sigma2 * eye + np.einsum('ab,ibc->iac', B, s.ztz)
    b_hat = np.linalg.solve(M, (ztr @ B.T)[..., None])[..., 0]
    BZtZB = np.einsum('ab,ibc,cd->iad', B, s.ztz, B)
    C = B[None, :, :] - np.linalg.solve(M, BZtZB)
    C = 0.5 * (C + np.transpose(C, (0, 2, 1)))

    _, logdet_m = np.linalg.slogdet(M)
    logdet_v = (s.n_obs - q) * np.log(sigma2) + logdet_m
    quad = (_residual_ss(s, beta) - np.sum(ztr * b_hat, axis=1)) / sigma2
    loglik = -0.5 * float(np.sum(s.n_obs * LOG_2PI + logdet_v + quad))
    return b_hat, C, loglik


def marginal_loglik(s: SubjectStats, beta: np.ndarray, B: np.ndarray, sigma2: float) -> float:
    """Marginal Gaussian log-likelihood from sufficient statistics"""
    return _e_step(s, np.asarray(beta, float), np.asarray(B, float), float(sigma2))[2]


def _gls_beta(s: SubjectStats, B: np.ndarray, sigma2: float, xtx_ridge: np.ndarray) -> np.ndarray:
    """Generalized least squares fixed effects for given variance components"""
    q = B.shape[0]
    M = sigma2 * np.eye(q) + np.einsum('ab,ibc->iac', B, s.ztz)
    # V^-1 = (I - Z M^-1 B Z') / sigma2
    MinvB = np.linalg.solve(M, np.broadcast_to(B, M.shape))
    xtvx = xtx_ridge - np.einsum('iqp,iqr,irk->pk', s.ztx, MinvB, s.ztx)
    xtvy = s.xty.sum(axis=0) - np.einsum('iqp,iqr,ir->p', s.ztx, MinvB, s.zty)
    return np.linalg.solve(xtvx, xtvy)


def fit_lmm_stats(design: LmmDesign, stats: SubjectStats, max_iter: int = 500,
                  tol: float = 1e-6) -> LmmFit:
    """Maximum likelihood fit by EM on stacked sufficient statistics"""
    active = np.flatnonzero(stats.n_obs > 0)
    s = stats.take(active)
    m = len(active)
    n_total = int(s.n_obs.sum())
    p, q = design.p, design.q_r
    if m < 2 or n_total < p + q * (q + 1) // 2 + 1:
        raise InsufficientData(f"{m} subjects with data and {n_total} observations")

    XtX = s.xtx.sum(axis=0) + RIDGE * np.eye(p)
    cond = np.linalg.cond(XtX)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise SingularDesign(f"fixed-effect design condition number {cond:.3g}")

    # Initialization from pooled least squares
    beta = np.linalg.solve(XtX, s.xty.sum(axis=0))
    rss = _residual_ss(s, beta)
    sigma2 = max(float(rss.sum()) / max(n_total - p, 1), INIT_FLOOR)
    mean_resid = (s.xty[:, 0] - s.xtx[:, 0, :] @ beta) / s.n_obs
    B = np.eye(q) * max(float(np.var(mean_resid, ddof=1)), INIT_FLOOR)

    b_hat, C, loglik = _e_step(s, beta, B, sigma2)
    trace = [loglik]
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        beta = np.linalg.solve(XtX, s.xty.sum(axis=0) - np.einsum('iqp,iq->p', s.ztx, b_hat))
        ztr = s.zty - s.ztx @ beta
        sse = (_residual_ss(s, beta) - 2.0 * np.sum(b_hat * ztr, axis=1)
               + np.einsum('ia,iab,ib->i', b_hat, s.ztz, b_hat)
               + np.einsum('iab,iba->i', s.ztz, C))
        sigma2 = max(float(sse.sum()) / n_total, SIGMA2_FLOOR)
        B = _clamp_cov((np.einsum('ia,ib->ab', b_hat, b_hat) + C.sum(axis=0)) / m)

        b_hat, C, new_loglik = _e_step(s, beta, B, sigma2)
        trace.append(new_loglik)
        if not np.isfinite(new_loglik):
            loglik = new_loglik
            break
        change = abs(new_loglik - loglik) / max(abs(loglik), 1e-12)
        loglik = new_loglik
        if change < tol:
            break

    if np.isfinite(loglik):
        try:
            beta = _gls_beta(s, B, sigma2, XtX)
        except np.linalg.LinAlgError as exc:
            raise SingularDesign(str(exc)) from exc
        loglik = _e_step(s, beta, B, sigma2)[2]
        trace.append(loglik)

    return LmmFit(
        beta=beta,
        b_cov=B,
        sigma2=sigma2,
        loglik=loglik,
        converged=bool(np.isfinite(loglik)),
        n_subjects=m,
        n_obs=n_total,
        n_iter=n_iter,
        loglik_trace=tuple(trace),
    )


def fit_lmm(design: LmmDesign, series: Sequence[Tuple[np.ndarray, np.ndarray]],
            max_iter: int = 500, tol: float = 1e-6) -> LmmFit:
    """Fit a linear mixed model to per-subject (time, value) series"""
    return fit_lmm_stats(design, series_stats(design, series), max_iter=max_iter, tol=tol)


def random_effects_from_stats(fit: LmmFit, stats: SubjectStats) -> np.ndarray:
    """BLUPs for every row of stacked statistics; empty rows give zeros"""
    q = fit.b_cov.shape[0]
    if len(stats.n_obs) == 0:
        return np.zeros((0, q))
    ztr = stats.zty - stats.ztx @ fit.beta
    M = fit.sigma2 * np.eye(q) + np.einsum('ab,ibc->iac', fit.b_cov, stats.ztz)
    return np.linalg.solve(M, (ztr @ fit.b_cov.T)[..., None])[..., 0]


def predict_random_effects(fit: LmmFit, design: LmmDesign, times: np.ndarray,
                           values: np.ndarray) -> np.ndarray:
    """BLUP B Z'V^-1 (y - X beta) of one subject"""
    times = np.asarray(times, dtype=float)
    if len(times) == 0:
        return np.zeros(design.q_r)
    X = design.fixed_matrix(times)
    Z = X[:, list(design.random_positions)]
    V = Z @ fit.b_cov @ Z.T + fit.sigma2 * np.eye(len(times))
    resid = np.asarray(values, dtype=float) - X @ fit.beta
    return fit.b_cov @ Z.T @ np.linalg.solve(V, resid)


def extract_features(fit: LmmFit, design: LmmDesign,
                     series: Sequence[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Random-effect feature matrix, one row per subject"""
    if not series:
        return np.zeros((0, design.q_r))
    return random_effects_from_stats(fit, series_stats(design, series))


def feature_name(marker: str, feature_index: int) -> str:
    """Display name of a random-effect feature, e.g. marker1.bi0"""
    return f"{marker}.bi{feature_index}"


def try_fit(design: LmmDesign, stats: SubjectStats) -> Tuple[Optional[LmmFit], Optional[str]]:
    """Fit, returning (None, reason) instead of raising for unusable nodes"""
    try:
        fit = fit_lmm_stats(design, stats)
    except (InsufficientData, SingularDesign) as exc:
        return None, type(exc).__name__
    except np.linalg.LinAlgError:
        return None, "SingularDesign"
    if not fit.converged:
        return None, "NonConvergence"
    return fit, None
