"""Citywalk: natural-language urban itinerary planning over a user-owned POI database."""

__version__ = "0.1.0"
