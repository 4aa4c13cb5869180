"""Revocation-tree backends.

``LinkedTree`` is the compiled build when the extension is importable and the
pure-Python build otherwise; set ``CAPSTONE_PURE=1`` to force the latter.
"""

import os

from .base import (NULL, ROOT, RLIN, RNON, STAT_COLUMNS, RefcountError,
                   RevTreeStats, TreeCapacityError, stats_row)
from .cache import NodeCache
from .naive import NaiveTree
from ._linked_py import LinkedTree as PyLinkedTree

CompiledLinkedTree = None
if not os.environ.get("CAPSTONE_PURE"):
    try:
        from ._linked import LinkedTree as CompiledLinkedTree
    except ImportError:  # extension not built
        CompiledLinkedTree = None

LinkedTree = CompiledLinkedTree or PyLinkedTree
COMPILED = CompiledLinkedTree is not None

BACKENDS = ("naive", "optimized")


def make_tree(backend: str = "optimized", cache=None, capacity=None):
    if backend == "naive":
        return NaiveTree(cache=cache)
    if backend == "optimized":
        if capacity is None:
            return LinkedTree(cache=cache)
        return LinkedTree(cache=cache, capacity=capacity)
    raise ValueError(f"unknown backend {backend!r}")


__all__ = ["NULL", "ROOT", "RLIN", "RNON", "STAT_COLUMNS", "RefcountError",
           "RevTreeStats", "TreeCapacityError", "stats_row", "NodeCache",
           "NaiveTree", "PyLinkedTree", "CompiledLinkedTree", "LinkedTree",
           "COMPILED", "BACKENDS", "make_tree"]
