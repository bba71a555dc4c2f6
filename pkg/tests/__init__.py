"""Tests for the popcorn_dimension package."""
