"""Tests for the lmm package."""
