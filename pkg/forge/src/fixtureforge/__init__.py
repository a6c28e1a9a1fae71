"""Deterministic generator for the pickle fixture corpus."""

from .dumpmirror import mirror_dump
from .forge import forge_all
from .recorder import recording_load

__all__ = ["forge_all", "mirror_dump", "recording_load"]
