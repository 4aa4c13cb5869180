# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled build of the depth-first linked-list revocation tree.

Same interface and behaviour as ``_linked_py.LinkedTree``; node records live
in flat C arrays that grow on demand.
"""

from libc.stdlib cimport malloc, realloc, free as cfree
from libc.string cimport memcpy

from .base import (DEFAULT_CAPACITY, NTYPE_NAMES, RLIN, ROOT, RefcountError,
                   RevTreeStats, TreeCapacityError)


cdef struct Rec:
    int prev
    int next
    int depth
    long rc
    char valid
    char ntype


cdef class LinkedTree:
    cdef Rec* recs
    cdef int n_slots      # slots in use, including the sentinel
    cdef int cap_alloc    # slots allocated
    cdef int* freelist
    cdef int n_free
    cdef int free_alloc
    cdef public long capacity
    cdef public long unlinked
    cdef public object cache
    cdef long c_alloc, c_query, c_rc, c_revoke

    name = "optimized"
    compiled = True

    def __cinit__(self, cache=None, capacity=DEFAULT_CAPACITY):
        self.cap_alloc = 64
        self.recs = <Rec*> malloc(self.cap_alloc * sizeof(Rec))
        self.free_alloc = 64
        self.freelist = <int*> malloc(self.free_alloc * sizeof(int))
        if self.recs == NULL or self.freelist == NULL:
            raise MemoryError()
        self.n_slots = 1
        self.recs[0].prev = 0
        self.recs[0].next = 0
        self.recs[0].depth = 0
        self.recs[0].rc = 0
        self.recs[0].valid = 1
        self.recs[0].ntype = RLIN
        self.n_free = 0
        self.capacity = capacity
        self.cache = cache
        self.unlinked = 0

    def __dealloc__(self):
        cfree(self.recs)
        cfree(self.freelist)

    property stats:
        def __get__(self):
            return RevTreeStats(self.c_alloc, self.c_query, self.c_rc, self.c_revoke)
        def __set__(self, s):
            self.c_alloc = s.allocations
            self.c_query = s.queries
            self.c_rc = s.rc_updates
            self.c_revoke = s.revocations

    # -- helpers -----------------------------------------------------------
    cdef inline void _touch(self, int n):
        if self.cache is not None:
            self.cache.access(n)

    cdef void _push_free(self, int n):
        if self.n_free == self.free_alloc:
            self.free_alloc *= 2
            self.freelist = <int*> realloc(self.freelist, self.free_alloc * sizeof(int))
        self.freelist[self.n_free] = n
        self.n_free += 1

    cdef int _grab(self) except -1:
        cdef int n
        if self.n_free:
            self.n_free -= 1
            n = self.freelist[self.n_free]
        else:
            n = self.n_slots
            if n > self.capacity:
                raise TreeCapacityError("revocation node store exhausted")
            if n == self.cap_alloc:
                self.cap_alloc *= 2
                self.recs = <Rec*> realloc(self.recs, self.cap_alloc * sizeof(Rec))
                if self.recs == NULL:
                    raise MemoryError()
            self.n_slots += 1
        self.recs[n].rc = 0
        self.recs[n].valid = 1
        self.recs[n].ntype = RLIN
        self.recs[n].depth = 0
        return n

    cdef inline void _insert_before(self, int n, int at):
        cdef int p = self.recs[at].prev
        self.recs[n].prev = p
        self.recs[n].next = at
        self.recs[p].next = n
        self.recs[at].prev = n

    cdef inline void _invalidate(self, int n):
        cdef int p = self.recs[n].prev
        cdef int q = self.recs[n].next
        self.recs[p].next = q
        self.recs[q].prev = p
        self.recs[n].prev = -1
        self.recs[n].next = -1
        self.recs[n].valid = 0
        self.unlinked += 1
        if self.recs[n].rc == 0:
            self._push_free(n)

    # -- construction ------------------------------------------------------
    def new_root_child(self, int ntype=RLIN):
        cdef int n = self._grab()
        self.recs[n].depth = 1
        self.recs[n].ntype = ntype
        self._insert_before(n, 0)
        return n

    def alloc_split(self, int n):
        cdef int m = self._grab()
        self.recs[m].depth = self.recs[n].depth
        self.recs[m].ntype = self.recs[n].ntype
        self._insert_before(m, n)
        self.c_alloc += 1
        self._touch(n)
        self._touch(m)
        return m

    def alloc_mrev(self, int n):
        cdef int m = self._grab()
        cdef int d = self.recs[n].depth
        cdef int cur = n
        self.recs[m].depth = d
        self.recs[m].ntype = self.recs[n].ntype
        self.recs[n].ntype = RLIN
        self._insert_before(m, n)
        while True:
            self.recs[cur].depth += 1
            cur = self.recs[cur].next
            if cur == 0 or self.recs[cur].depth <= d:
                break
        self.c_alloc += 1
        self._touch(n)
        self._touch(m)
        return m

    # -- queries -----------------------------------------------------------
    cpdef bint is_valid(self, int n):
        self.c_query += 1
        if self.cache is not None:
            self.cache.access(n)
        return self.recs[n].valid

    cpdef bint peek_valid(self, int n):
        return 0 < n < self.n_slots and self.recs[n].valid

    def is_revoked(self, int n):
        return not self.is_valid(n)

    def parent(self, int n):
        cdef int d, cur
        if not self.peek_valid(n):
            return None
        d = self.recs[n].depth
        if d == 1:
            return ROOT
        cur = self.recs[n].prev
        while self.recs[cur].depth >= d:
            cur = self.recs[cur].prev
        return cur

    def entry(self, int n):
        p = self.parent(n)
        return None if p is None else (p, self.recs[n].ntype)

    def has_rlin_child(self, int n):
        cdef int d = self.recs[n].depth
        cdef int cur = self.recs[n].next
        while cur != 0 and self.recs[cur].depth > d:
            if self.recs[cur].depth == d + 1 and self.recs[cur].ntype == RLIN:
                return True
            cur = self.recs[cur].next
        return False

    # -- mutation ----------------------------------------------------------
    def revoke_subtree(self, int n):
        cdef int d = self.recs[n].depth
        cdef int cur = self.recs[n].next
        cdef int following
        cdef bint had = False
        self._touch(n)
        while cur != 0 and self.recs[cur].depth > d:
            following = self.recs[cur].next
            if self.recs[cur].depth == d + 1 and self.recs[cur].ntype == RLIN:
                had = True
            self._touch(cur)
            self._invalidate(cur)
            cur = following
        self.c_revoke += 1
        return had

    def remove_node(self, int n):
        cdef int d = self.recs[n].depth
        cdef int cur = self.recs[n].next
        self._touch(n)
        while cur != 0 and self.recs[cur].depth > d:
            self.recs[cur].depth -= 1
            cur = self.recs[cur].next
        self._invalidate(n)

    def set_node_type(self, int n, int t):
        self._touch(n)
        self.recs[n].ntype = t

    cpdef rc_adjust(self, int n, int delta, bint count=True):
        cdef long v = self.recs[n].rc + delta
        if v < 0:
            raise RefcountError(f"refcount of node {n} below zero")
        self.recs[n].rc = v
        if count:
            self.c_rc += 1
            if self.cache is not None:
                self.cache.access(n)
        if v == 0 and not self.recs[n].valid:
            self._push_free(n)

    def refcount(self, int n):
        return self.recs[n].rc

    def refcounts(self):
        """Nonzero reference counts by node."""
        cdef int n
        return {n: self.recs[n].rc for n in range(1, self.n_slots) if self.recs[n].rc}

    # -- introspection -----------------------------------------------------
    def order(self):
        out = []
        cdef int cur = self.recs[0].next
        while cur != 0:
            out.append(cur)
            cur = self.recs[cur].next
        return out

    @property
    def free(self):
        return [self.freelist[i] for i in range(self.n_free)]

    @property
    def depth(self):
        return [self.recs[i].depth for i in range(self.n_slots)]

    def check(self):
        cdef int prev_depth = 0, cur = self.recs[0].next, last = 0
        seen = set()
        while cur != 0:
            assert cur not in seen, "cycle in node list"
            seen.add(cur)
            assert self.recs[cur].prev == last, "broken back link"
            assert self.recs[cur].valid, "invalid node still linked"
            assert 1 <= self.recs[cur].depth <= prev_depth + 1, "depth jump"
            prev_depth = self.recs[cur].depth
            last = cur
            cur = self.recs[cur].next
        assert self.recs[0].prev == last
        fl = self.free
        assert len(set(fl)) == len(fl), "node freed twice"
        for n in fl:
            assert not self.recs[n].valid and self.recs[n].rc == 0, "premature reuse"

    def copy(self):
        cdef LinkedTree t = LinkedTree.__new__(LinkedTree, None, self.capacity)
        if t.cap_alloc < self.cap_alloc:
            t.recs = <Rec*> realloc(t.recs, self.cap_alloc * sizeof(Rec))
            t.cap_alloc = self.cap_alloc
        memcpy(t.recs, self.recs, self.n_slots * sizeof(Rec))
        t.n_slots = self.n_slots
        if t.free_alloc < self.free_alloc:
            t.freelist = <int*> realloc(t.freelist, self.free_alloc * sizeof(int))
            t.free_alloc = self.free_alloc
        memcpy(t.freelist, self.freelist, self.n_free * sizeof(int))
        t.n_free = self.n_free
        t.c_alloc, t.c_query, t.c_rc, t.c_revoke = self.c_alloc, self.c_query, self.c_rc, self.c_revoke
        t.cache = self.cache.copy() if self.cache is not None else None
        t.unlinked = self.unlinked
        return t

    def dump(self):
        nodes = [{"id": n, "depth": self.recs[n].depth, "type": NTYPE_NAMES[self.recs[n].ntype],
                  "refcount": self.recs[n].rc} for n in self.order()]
        held = [{"id": n, "refcount": self.recs[n].rc} for n in range(1, self.n_slots)
                if not self.recs[n].valid and self.recs[n].rc > 0]
        return {"backend": self.name, "order": nodes, "invalid_held": held,
                "free": sorted(self.free), "slots": self.n_slots - 1}
