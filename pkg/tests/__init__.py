"""Tests for BasketLab."""
