"""Set-associative LRU model of the revocation-node cache.

Statistics only: lookups never change machine behaviour.
"""

from __future__ import annotations


class NodeCache:
    __slots__ = ("size", "ways", "record", "nsets", "sets", "hits", "misses")

    def __init__(self, size: int = 8192, ways: int = 2, record: int = 32):
        if size % (ways * record):
            raise ValueError("cache size must be a multiple of ways * record size")
        self.size = size
        self.ways = ways
        self.record = record
        self.nsets = size // (ways * record)
        self.sets = [[] for _ in range(self.nsets)]
        self.hits = 0
        self.misses = 0

    def access(self, node: int) -> bool:
        """Look up the record of ``node``; returns True on a hit."""
        line = node  # record address is node * record, one record per line
        s = self.sets[line % self.nsets]
        tag = line // self.nsets
        if tag in s:
            s.remove(tag)
            s.append(tag)
            self.hits += 1
            return True
        if len(s) >= self.ways:
            del s[0]
        s.append(tag)
        self.misses += 1
        return False

    def copy(self) -> NodeCache:
        c = NodeCache.__new__(NodeCache)
        c.size, c.ways, c.record, c.nsets = self.size, self.ways, self.record, self.nsets
        c.sets = [list(s) for s in self.sets]
        c.hits, c.misses = self.hits, self.misses
        return c
