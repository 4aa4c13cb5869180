"""Shared pieces of the revocation-tree backends: constants, counters, errors."""

from __future__ import annotations

from dataclasses import dataclass

ROOT = -1
NULL = -2
RLIN = 0
RNON = 1

NTYPE_NAMES = {RLIN: "RLIN", RNON: "RNON"}

DEFAULT_CAPACITY = 1 << 20


class TreeCapacityError(Exception):
    """The node store has no free node left."""


class RefcountError(Exception):
    """A reference count went negative: the emulator lost track of a word."""


@dataclass
class RevTreeStats:
    allocations: int = 0
    queries: int = 0
    rc_updates: int = 0
    revocations: int = 0

    def copy(self) -> RevTreeStats:
        return RevTreeStats(self.allocations, self.queries, self.rc_updates, self.revocations)


STAT_COLUMNS = ("Accesses", "Misses", "Hits", "Miss rate (%)",
                "#Allocation", "#Query", "#RC-update", "#Revocation")


def stats_row(stats: RevTreeStats, cache) -> dict:
    hits = cache.hits if cache is not None else 0
    misses = cache.misses if cache is not None else 0
    acc = hits + misses
    rate = round(100.0 * misses / acc, 3) if acc else 0.0
    return {
        "Accesses": acc,
        "Misses": misses,
        "Hits": hits,
        "Miss rate (%)": rate,
        "#Allocation": stats.allocations,
        "#Query": stats.queries,
        "#RC-update": stats.rc_updates,
        "#Revocation": stats.revocations,
    }
