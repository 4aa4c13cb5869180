"""Depth-first linked-list revocation tree (pure Python build).

Live nodes sit in one doubly-linked list in depth-first order, each tagged
with its depth.  The subtree of a node is the run of nodes right after it
whose depth is greater than its own, so revoking a subtree unlinks a
contiguous run and costs time proportional to the nodes it invalidates.
Slot 0 is the list sentinel and stands for ROOT (depth 0).

Invalid nodes whose reference count is zero go back on a free list and may be
handed out again by later allocations.  Structural calls (alloc_*, revoke,
remove) expect a valid node; the machine checks validity before issuing them.
"""

from __future__ import annotations

from .base import (DEFAULT_CAPACITY, NTYPE_NAMES, RLIN, ROOT, RefcountError,
                   RevTreeStats, TreeCapacityError)


class LinkedTree:
    name = "optimized"
    compiled = False

    def __init__(self, cache=None, capacity: int = DEFAULT_CAPACITY):
        self.capacity = capacity
        self.prev = [0]
        self.next = [0]
        self.depth = [0]
        self.rc = [0]
        self.valid = [True]
        self.ntype = [RLIN]
        self.free = []
        self.stats = RevTreeStats()
        self.cache = cache
        self.unlinked = 0

    # -- helpers -----------------------------------------------------------
    def _touch(self, n):
        if self.cache is not None:
            self.cache.access(n)

    def _grab(self) -> int:
        if self.free:
            n = self.free.pop()
        else:
            n = len(self.prev)
            if n > self.capacity:
                raise TreeCapacityError("revocation node store exhausted")
            self.prev.append(0)
            self.next.append(0)
            self.depth.append(0)
            self.rc.append(0)
            self.valid.append(False)
            self.ntype.append(RLIN)
        self.rc[n] = 0
        self.valid[n] = True
        return n

    def _insert_before(self, n, at):
        p = self.prev[at]
        self.prev[n] = p
        self.next[n] = at
        self.next[p] = n
        self.prev[at] = n

    def _unlink(self, n):
        p, q = self.prev[n], self.next[n]
        self.next[p] = q
        self.prev[q] = p
        self.prev[n] = self.next[n] = -1

    def _invalidate(self, n):
        self.valid[n] = False
        self._unlink(n)
        self.unlinked += 1
        if self.rc[n] == 0:
            self.free.append(n)

    # -- construction ------------------------------------------------------
    def new_root_child(self, ntype=RLIN) -> int:
        n = self._grab()
        self.depth[n] = 1
        self.ntype[n] = ntype
        self._insert_before(n, 0)
        return n

    def alloc_split(self, n: int) -> int:
        m = self._grab()
        self.depth[m] = self.depth[n]
        self.ntype[m] = self.ntype[n]
        self._insert_before(m, n)
        self.stats.allocations += 1
        self._touch(n)
        self._touch(m)
        return m

    def alloc_mrev(self, n: int) -> int:
        m = self._grab()
        d = self.depth[n]
        self.depth[m] = d
        self.ntype[m] = self.ntype[n]
        self.ntype[n] = RLIN
        self._insert_before(m, n)
        depth = self.depth
        cur = n
        while True:
            depth[cur] += 1
            cur = self.next[cur]
            if cur == 0 or depth[cur] <= d:
                break
        self.stats.allocations += 1
        self._touch(n)
        self._touch(m)
        return m

    # -- queries -----------------------------------------------------------
    def is_valid(self, n: int) -> bool:
        self.stats.queries += 1
        self._touch(n)
        return self.valid[n]

    def peek_valid(self, n: int) -> bool:
        return 0 < n < len(self.valid) and self.valid[n]

    def is_revoked(self, n: int) -> bool:
        return not self.is_valid(n)

    def parent(self, n: int):
        """Parent derived from list order; ROOT for depth-1 nodes, None if invalid."""
        if not self.peek_valid(n):
            return None
        d = self.depth[n]
        if d == 1:
            return ROOT
        cur = self.prev[n]
        while self.depth[cur] >= d:
            cur = self.prev[cur]
        return cur

    def entry(self, n: int):
        p = self.parent(n)
        return None if p is None else (p, self.ntype[n])

    def has_rlin_child(self, n: int) -> bool:
        """Uncounted: does ``n`` have a direct child of type RLIN?"""
        d = self.depth[n]
        depth, nxt = self.depth, self.next
        cur = nxt[n]
        while cur != 0 and depth[cur] > d:
            if depth[cur] == d + 1 and self.ntype[cur] == RLIN:
                return True
            cur = nxt[cur]
        return False

    # -- mutation ----------------------------------------------------------
    def revoke_subtree(self, n: int) -> bool:
        d = self.depth[n]
        depth, nxt, ntype = self.depth, self.next, self.ntype
        had = False
        self._touch(n)
        cur = nxt[n]
        while cur != 0 and depth[cur] > d:
            following = nxt[cur]
            if depth[cur] == d + 1 and ntype[cur] == RLIN:
                had = True
            self._touch(cur)
            self._invalidate(cur)
            cur = following
        self.stats.revocations += 1
        return had

    def remove_node(self, n: int) -> None:
        d = self.depth[n]
        depth = self.depth
        self._touch(n)
        cur = self.next[n]
        while cur != 0 and depth[cur] > d:
            depth[cur] -= 1
            cur = self.next[cur]
        self._invalidate(n)

    def set_node_type(self, n: int, t: int) -> None:
        self._touch(n)
        self.ntype[n] = t

    def rc_adjust(self, n: int, delta: int, count: bool = True) -> None:
        v = self.rc[n] + delta
        if v < 0:
            raise RefcountError(f"refcount of node {n} below zero")
        self.rc[n] = v
        if count:
            self.stats.rc_updates += 1
            self._touch(n)
        if v == 0 and not self.valid[n]:
            self.free.append(n)

    def refcount(self, n: int) -> int:
        return self.rc[n]

    def refcounts(self) -> dict:
        """Nonzero reference counts by node."""
        return {n: v for n, v in enumerate(self.rc) if n and v}

    # -- introspection -----------------------------------------------------
    def order(self) -> list:
        out = []
        cur = self.next[0]
        while cur != 0:
            out.append(cur)
            cur = self.next[cur]
        return out

    def check(self) -> None:
        """Raise AssertionError if the list structure is inconsistent."""
        prev_depth = 0
        seen = set()
        cur = self.next[0]
        last = 0
        while cur != 0:
            assert cur not in seen, "cycle in node list"
            seen.add(cur)
            assert self.prev[cur] == last, "broken back link"
            assert self.valid[cur], "invalid node still linked"
            assert 1 <= self.depth[cur] <= prev_depth + 1, "depth jump"
            prev_depth = self.depth[cur]
            last, cur = cur, self.next[cur]
        assert self.prev[0] == last
        free = set(self.free)
        assert len(free) == len(self.free), "node freed twice"
        for n in free:
            assert not self.valid[n] and self.rc[n] == 0, "premature reuse"

    def copy(self) -> LinkedTree:
        t = LinkedTree.__new__(LinkedTree)
        t.capacity = self.capacity
        t.prev, t.next, t.depth = list(self.prev), list(self.next), list(self.depth)
        t.rc, t.valid, t.ntype = list(self.rc), list(self.valid), list(self.ntype)
        t.free = list(self.free)
        t.stats = self.stats.copy()
        t.cache = self.cache.copy() if self.cache is not None else None
        t.unlinked = self.unlinked
        return t

    def dump(self) -> dict:
        nodes = [{"id": n, "depth": self.depth[n], "type": NTYPE_NAMES[self.ntype[n]],
                  "refcount": self.rc[n]} for n in self.order()]
        held = [{"id": n, "refcount": self.rc[n]} for n in range(1, len(self.valid))
                if not self.valid[n] and self.rc[n] > 0]
        return {"backend": self.name, "order": nodes, "invalid_held": held,
                "free": sorted(self.free), "slots": len(self.valid) - 1}
