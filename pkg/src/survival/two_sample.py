"""
Two-sample tests used as survival splitting rules.

Both statistics are chi-square distributed with one degree of freedom under
the null hypothesis; larger values mean better separated groups. Degenerate
variances give a statistic of 0.
"""

import numpy as np
from scipy.stats import chi2

from .estimators import SurvSample

VARIANCE_EPS = 1e-12


def _pooled_counts(left: SurvSample, right: SurvSample, cause=None):
    """Per-group numbers at risk and event counts over pooled event times"""
    time = np.concatenate([left.time, right.time])
    event = np.concatenate([left.event, right.event])
    group = np.concatenate([np.zeros(len(left), int), np.ones(len(right), int)])
    event_times = np.unique(time[event > 0])

    at_risk = np.zeros((2, len(event_times)))
    d_main = np.zeros((2, len(event_times)))
    d_other = np.zeros((2, len(event_times)))
    for g in (0, 1):
        t_g, e_g = time[group == g], event[group == g]
        sorted_t = np.sort(t_g)
        at_risk[g] = len(t_g) - np.searchsorted(sorted_t, event_times, side="left")
        pos = np.searchsorted(event_times, t_g)
        hit = (pos < len(event_times)) & (e_g > 0)
        main = hit & ((e_g == cause) if cause is not None else True)
        other = hit & ~main
        np.add.at(d_main[g], pos[main], 1.0)
        np.add.at(d_other[g], pos[other], 1.0)
    return at_risk, d_main, d_other


def logrank_stat(left: SurvSample, right: SurvSample) -> float:
    """Log-rank statistic (O - E)^2 / V with the hypergeometric variance"""
    at_risk, deaths, _ = _pooled_counts(left, right)
    n = at_risk.sum(axis=0)
    d = deaths.sum(axis=0)
    if d.sum() == 0:
        return 0.0
    n1 = at_risk[0]
    observed_minus_expected = float(np.sum(deaths[0] - d * n1 / n))
    tie = np.where(n > 1, (n - d) / np.maximum(n - 1, 1), 0.0)
    variance = float(np.sum(d * (n1 / n) * (1.0 - n1 / n) * tie))
    if variance <= VARIANCE_EPS:
        return 0.0
    return observed_minus_expected ** 2 / variance


def gray_stat(left: SurvSample, right: SurvSample, cause: int) -> float:
    """Gray's two-sample statistic (rho = 0) for the subdistribution hazard of a cause.

    The score compares observed cause events of the left group with their
    expectation under a pooled subdistribution hazard, the risk set of each
    group being weighted by (1 - F(t-)) / S(t-). The variance is the
    martingale variance of the score with hazards estimated under the null.
    """
    at_risk, d_main, d_other = _pooled_counts(left, right, cause)
    if d_main.sum() == 0:
        return 0.0
    n_times = at_risk.shape[1]

    # Group-wise left limits of the all-cause KM and of the cause incidence
    surv_before = np.ones((2, n_times))
    cif_before = np.zeros((2, n_times))
    for g in (0, 1):
        safe = np.maximum(at_risk[g], 1.0)
        hazard_all = np.where(at_risk[g] > 0, (d_main[g] + d_other[g]) / safe, 0.0)
        surv = np.cumprod(1.0 - hazard_all)
        surv_before[g, 1:] = surv[:-1]
        increments = surv_before[g] * np.where(at_risk[g] > 0, d_main[g] / safe, 0.0)
        cif_before[g, 1:] = np.cumsum(increments)[:-1]

    complement = 1.0 - cif_before
    usable = (at_risk > 0) & (surv_before > 0) & (complement > 0)
    weighted_risk = np.where(usable, at_risk * complement / np.where(usable, surv_before, 1.0), 0.0)
    total_risk = weighted_risk.sum(axis=0)
    d_total = d_main.sum(axis=0)
    d_gamma = np.where(total_risk > 0, d_total / np.where(total_risk > 0, total_risk, 1.0), 0.0)

    score = float(np.sum(d_main[0] - weighted_risk[0] * d_gamma))

    share = np.where(total_risk > 0, weighted_risk[0] * weighted_risk[1] / np.where(total_risk > 0, total_risk, 1.0), 0.0)
    variance = 0.0
    for g, sign in ((0, 1.0), (1, -1.0)):
        a = sign * share
        ratio = np.where(usable[g], d_gamma / np.where(usable[g], complement[g], 1.0), 0.0)
        tail = np.concatenate((np.cumsum((a * ratio)[::-1])[::-1][1:], [0.0]))
        c = np.where(usable[g],
                     a * surv_before[g] / np.where(usable[g], complement[g], 1.0)
                     + (surv_before[g] - complement[g]) * tail, 0.0)
        safe = np.where(usable[g], at_risk[g], 1.0)
        main_hazard = np.where(usable[g], complement[g] / np.where(usable[g], surv_before[g], 1.0) * d_gamma, 0.0)
        variance += float(np.sum(np.where(usable[g], c ** 2 * main_hazard / safe, 0.0)))
        variance += float(np.sum(np.where(usable[g], (complement[g] * tail) ** 2 * d_other[g] / safe ** 2, 0.0)))

    if variance <= VARIANCE_EPS:
        return 0.0
    return score ** 2 / variance


def statistic_pvalue(statistic: float) -> float:
    """Upper tail probability of a one degree of freedom chi-square statistic"""
    return float(chi2.sf(statistic, df=1))
