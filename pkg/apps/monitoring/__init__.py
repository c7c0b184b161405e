"""Monitoring app package."""
