"""Excited-state preparation circuits, estimators and error mitigation."""
__version__ = "0.1.0"
