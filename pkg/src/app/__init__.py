"""
LongiForest Application Layer

Command-line interface, run configuration, model archive persistence and
report writers.
"""

from .config import RunConfig, DataSource, OutputSpec
from .archive import save_archive, load_archive, check_training_data

__all__ = ["RunConfig", "DataSource", "OutputSpec", "save_archive", "load_archive", "check_training_data"]
