"""
Brier score and integrated Brier score with inverse probability of
censoring weights for competing risks predictions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .estimators import StepFunction, SurvSample, censoring_km
from ..utils.errors import EmptyGrid


@dataclass(frozen=True)
class IpcwWeights:
    """Per-subject weights at one time and the count of zeroed weights"""
    weights: np.ndarray
    n_degenerate: int


def ipcw_weights(sample: SurvSample, t: float, G: StepFunction) -> IpcwWeights:
    """Weights 1/G(T-) for observed events up to t and 1/G(t) for subjects still at risk"""
    event_before = (sample.time <= t) & (sample.event > 0)
    still_at_risk = sample.time > t
    g_event = G.left_limit(sample.time)
    g_t = float(G(t))

    weights = np.zeros(len(sample))
    ok_event = event_before & (g_event > 0)
    weights[ok_event] = 1.0 / g_event[ok_event]
    if g_t > 0:
        weights[still_at_risk] = 1.0 / g_t
    n_degenerate = int(np.sum(event_before & (g_event <= 0)))
    if g_t <= 0:
        n_degenerate += int(np.sum(still_at_risk))
    return IpcwWeights(weights, n_degenerate)


def brier_components(predictions: np.ndarray, sample: SurvSample, t: float, cause: int,
                     G: StepFunction) -> IpcwWeights:
    """Per-subject weighted squared residuals at time t"""
    ipcw = ipcw_weights(sample, t, G)
    indicator = ((sample.time <= t) & (sample.event == cause)).astype(float)
    residual = indicator - np.asarray(predictions, dtype=float)
    return IpcwWeights(ipcw.weights * residual ** 2, ipcw.n_degenerate)


def brier_score(predictions: np.ndarray, sample: SurvSample, t: float, cause: int,
                G: Optional[StepFunction] = None) -> float:
    """IPCW Brier score of cause-specific incidence predictions at time t"""
    G = G if G is not None else censoring_km(sample)
    return float(np.mean(brier_components(predictions, sample, t, cause, G).weights))


def integration_grid(event_times: np.ndarray, cause: int, tau1: Optional[float] = None,
                     tau2: Optional[float] = None) -> np.ndarray:
    """Event times of the cause within [tau1, tau2] with both endpoints added"""
    event_times = np.unique(np.asarray(event_times, dtype=float))
    if len(event_times) == 0:
        raise EmptyGrid(f"no events of cause {cause}")
    tau1 = 0.0 if tau1 is None else float(tau1)
    tau2 = float(event_times.max()) if tau2 is None else float(tau2)
    if not tau1 < tau2:
        raise EmptyGrid(f"empty integration range [{tau1}, {tau2}]")
    inside = event_times[(event_times >= tau1) & (event_times <= tau2)]
    if len(inside) == 0:
        raise EmptyGrid(f"no events of cause {cause} in [{tau1}, {tau2}]")
    return np.unique(np.concatenate(([tau1], inside, [tau2])))


def evaluate_on_grid(times: np.ndarray, predictions: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Step-interpolate per-subject predictions given on `times` at grid points"""
    predictions = np.atleast_2d(np.asarray(predictions, dtype=float))
    pos = np.searchsorted(np.asarray(times, dtype=float), grid, side="right") - 1
    padded = np.concatenate((np.zeros((predictions.shape[0], 1)), predictions), axis=1)
    return padded[:, pos + 1]


@dataclass(frozen=True)
class IntegratedBrier:
    """Per-subject integrals, their mean and the degenerate weight count"""
    contributions: np.ndarray
    value: float
    n_degenerate: int
    grid: np.ndarray


def integrated_brier_components(times: np.ndarray, predictions: np.ndarray, sample: SurvSample,
                                cause: int, tau1: Optional[float] = None,
                                tau2: Optional[float] = None,
                                G: Optional[StepFunction] = None,
                                event_times: Optional[np.ndarray] = None) -> IntegratedBrier:
    """Trapezoidal integral of the Brier residuals, per subject and averaged.

    The grid is built from `event_times` when given (e.g. the training event
    times of a forest), otherwise from the cause events of `sample`.
    """
    G = G if G is not None else censoring_km(sample)
    if event_times is None:
        event_times = sample.time[sample.event == cause]
    grid = integration_grid(event_times, cause, tau1, tau2)
    on_grid = evaluate_on_grid(times, predictions, grid)

    per_time = np.zeros((len(sample), len(grid)))
    n_degenerate = 0
    for j, t in enumerate(grid):
        part = brier_components(on_grid[:, j], sample, float(t), cause, G)
        per_time[:, j] = part.weights
        n_degenerate += part.n_degenerate

    widths = np.diff(grid)
    contributions = np.sum(0.5 * (per_time[:, 1:] + per_time[:, :-1]) * widths, axis=1)
    return IntegratedBrier(contributions, float(np.mean(contributions)), n_degenerate, grid)


def integrated_brier(times: np.ndarray, predictions: np.ndarray, sample: SurvSample, cause: int,
                     tau1: Optional[float] = None, tau2: Optional[float] = None,
                     G: Optional[StepFunction] = None) -> float:
    """Integrated Brier score over [tau1, tau2], not normalized by its length"""
    return integrated_brier_components(times, predictions, sample, cause, tau1, tau2, G).value
