"""Tests for the importance package."""
