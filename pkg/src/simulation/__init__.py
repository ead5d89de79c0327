"""
LongiForest Simulation

Synthetic longitudinal datasets with known informative random effects.
"""

from .generator import SimulationEngine, SimulatedData, generate

__all__ = ["SimulationEngine", "SimulatedData", "generate"]
