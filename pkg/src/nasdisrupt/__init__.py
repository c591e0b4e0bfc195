"""Disruption typologies for a national air-traffic system from flight records."""

__version__ = "0.1.0"
