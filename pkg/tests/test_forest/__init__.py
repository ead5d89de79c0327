"""Tests for the forest package."""
