"""Seeded synthetic road-scene dataset generator: context-aware object placement on procedural roads."""

__version__ = "0.1.0"
