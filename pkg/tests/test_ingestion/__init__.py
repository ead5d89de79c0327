"""
Tests for the ingestion layer.
"""
