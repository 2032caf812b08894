"""Upgradeable proxy contract detection from call traces and decompiled code."""

from .core import Address, Selector, StorageSlot, parse_address, selector_of
from .datastore import Datastore
from .pipeline import analyze
from .upgradeability import DetectorConfig

__all__ = ["Address", "Datastore", "DetectorConfig", "Selector", "StorageSlot", "analyze",
           "parse_address", "selector_of"]
