"""
Tests for LongiForest models.
"""
