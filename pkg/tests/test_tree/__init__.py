"""Tests for the tree package."""
