"""Tests for the survival package."""
