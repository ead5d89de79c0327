"""
Simulation Engine for LongiForest

Generates a synthetic dataset with longitudinal markers following linear
mixed trajectories and a numeric outcome driven by the random intercept of
marker1 and the random slope of marker2.

The engine is designed to be:
- Deterministic: one seeded generator, draws taken in a fixed order
- Self-checking: latent random effects are returned alongside the data
- Pipeline-ready: tables have the layout the ingestion readers expect
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ..models.simulation import SimConfig
from ..utils.audit import AuditLogger

ID_COLUMN = "id"
TIME_COLUMN = "time"
OUTCOME_COLUMN = "y"


@dataclass(frozen=True)
class SimulatedData:
    """Generated tables and latent truths"""
    longitudinal: pd.DataFrame
    fixed: pd.DataFrame
    outcome: pd.DataFrame
    truths: pd.DataFrame


class SimulationEngine:
    """Engine for generating synthetic datasets"""

    def __init__(self, audit_logger: Optional[AuditLogger] = None):
        """Initialize simulation engine"""
        self.audit_logger = audit_logger or AuditLogger()

    def visit_times(self, config: SimConfig, rng: np.random.Generator) -> np.ndarray:
        """Baseline at 0, later visits jittered around whole years"""
        n, v = config.n_subjects, config.n_visits
        times = np.tile(np.arange(v, dtype=float), (n, 1))
        if config.jitter_sd > 0 and v > 1:
            bound = 3.0 * config.jitter_sd
            jitter = np.clip(rng.normal(0.0, config.jitter_sd, size=(n, v - 1)), -bound, bound)
            times[:, 1:] += jitter
        return np.maximum(times, 0.0)

    def generate(self, config: SimConfig) -> SimulatedData:
        """Draw one dataset from the configured design"""
        rng = np.random.default_rng(config.seed)
        n, v = config.n_subjects, config.n_visits
        ids = [str(i + 1) for i in range(n)]

        random_effects = []
        for params in config.markers:
            cov = np.array([[params.intercept_var, params.intercept_slope_cov],
                            [params.intercept_slope_cov, params.slope_var]])
            random_effects.append(rng.multivariate_normal(np.zeros(2), cov, size=n))

        times = self.visit_times(config, rng)
        long_table = pd.DataFrame({
            ID_COLUMN: np.repeat(ids, v),
            TIME_COLUMN: times.ravel(),
        })
        for name, params, b in zip(config.marker_names, config.markers, random_effects):
            trajectory = (params.intercept + b[:, [0]]) + (params.slope + b[:, [1]]) * times
            noise = rng.normal(0.0, params.residual_sd, size=(n, v)) if params.residual_sd > 0 else 0.0
            long_table[name] = (trajectory + noise).ravel()

        fixed = pd.DataFrame({ID_COLUMN: ids})
        for name in config.continuous_names:
            fixed[name] = rng.normal(0.0, 1.0, size=n)
        for name in config.binary_names:
            fixed[name] = rng.binomial(1, config.binary_prob, size=n).astype(str)

        y = (config.gamma0 + config.gamma1 * random_effects[0][:, 0]
             + config.gamma2 * random_effects[1][:, 1]
             + rng.normal(0.0, config.outcome_sd, size=n))
        outcome = pd.DataFrame({ID_COLUMN: ids, OUTCOME_COLUMN: y})

        truths = pd.DataFrame({ID_COLUMN: ids})
        for name, b in zip(config.marker_names, random_effects):
            truths[f"{name}.bi0"] = b[:, 0]
            truths[f"{name}.bi1"] = b[:, 1]

        self.audit_logger.log_simulation(n, config.n_markers, config.seed)
        return SimulatedData(long_table, fixed, outcome, truths)


def generate(config: SimConfig) -> SimulatedData:
    """Generate a dataset without keeping an audit trail"""
    return SimulationEngine().generate(config)
