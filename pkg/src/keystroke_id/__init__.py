"""Keystroke-dynamics user identification toolkit.

Pipeline: raw key-event logs (or a seeded synthetic corpus) -> paired
keystrokes -> fixed-length subsequences -> 5x42x42 KDI tensors ->
flattened feature vectors -> from-scratch decision tree / random forest
classifiers -> accuracy reports with per-user difficulty partitioning.
"""

__version__ = "0.1.0"
