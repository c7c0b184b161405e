"""Core app package."""
