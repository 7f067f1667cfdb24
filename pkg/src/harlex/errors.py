"""Shared exception types for the harlex package."""

from __future__ import annotations


class HarlexError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(HarlexError):
    """A configuration value or combination of values is invalid."""


class DataError(HarlexError):
    """Input data violates a structural requirement."""


class NumericError(HarlexError):
    """A computation cannot produce a well-defined numeric result."""
