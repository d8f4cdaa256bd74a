"""Shared exception base for the toolkit.

Every operational error raised by this package derives from
:class:`ExtremControlError`, so callers (and the CLI) can catch one type.
Precondition violations that indicate caller bugs raise ``ValueError``.
"""

from __future__ import annotations


class ExtremControlError(Exception):
    """Base class for operational errors raised by extremctl."""
