"""Logging and error utilities for the hitting-time toolkit."""
