"""Client-side library: all sharing and encryption happens here, locally."""

from .api import VaultClient, resolve_threshold

__all__ = ["VaultClient", "resolve_threshold"]
