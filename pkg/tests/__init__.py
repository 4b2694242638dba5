"""Tests for graph-kalman."""
