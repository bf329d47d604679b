"""Exact genus-zero wall-crossing computations for toric GIT targets."""

from __future__ import annotations

__version__ = "0.1.0"
