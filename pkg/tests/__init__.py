"""Tests for the crowdnav Python package."""
