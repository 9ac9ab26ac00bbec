"""Command-line interface for the crowdnav application."""

from .commands import main

__all__ = ['main']
