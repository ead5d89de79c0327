"""
LongiForest Ingestion Layer

Delimited-text readers and writers for the longitudinal, fixed and outcome
tables.
"""

from .processors import TableProcessor, read_table, parse_reals, format_real

__all__ = ["TableProcessor", "read_table", "parse_reals", "format_real"]
