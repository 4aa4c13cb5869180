"""Parent-map revocation tree.

Each node maps to ``(parent, ntype)`` where parent is another node, ROOT or
NULL.  Validity is decided by walking parents: reaching ROOT means valid,
reaching NULL (or a node that no longer exists) means revoked.  Node ids are
never reused.
"""

from __future__ import annotations

from .base import NULL, ROOT, RLIN, NTYPE_NAMES, RefcountError, RevTreeStats


class NaiveTree:
    name = "naive"

    def __init__(self, cache=None):
        self.rt: dict[int, list] = {}
        self.children: dict[int, set] = {ROOT: set(), NULL: set()}
        self.rc: dict[int, int] = {}
        self.next_id = 0
        self.stats = RevTreeStats()
        self.cache = cache

    # -- helpers -----------------------------------------------------------
    def _touch(self, n):
        if self.cache is not None:
            self.cache.access(n)

    def _set_parent(self, n, parent):
        old = self.rt[n][0]
        self.children[old].discard(n)
        self.rt[n][0] = parent
        self.children.setdefault(parent, set()).add(n)

    def _new(self, parent, ntype) -> int:
        n = self.next_id
        self.next_id += 1
        self.rt[n] = [parent, ntype]
        self.children.setdefault(parent, set()).add(n)
        self.children[n] = set()
        self.rc[n] = 0
        return n

    # -- construction ------------------------------------------------------
    def new_root_child(self, ntype=RLIN) -> int:
        return self._new(ROOT, ntype)

    def alloc_split(self, n: int) -> int:
        """Fresh sibling of ``n`` with a copy of its entry."""
        parent, ntype = self.rt[n]
        m = self._new(parent, ntype)
        self.stats.allocations += 1
        self._touch(n)
        self._touch(m)
        return m

    def alloc_mrev(self, n: int) -> int:
        """Fresh node taking over ``n``'s entry; ``n`` moves under it as RLIN."""
        parent, ntype = self.rt[n]
        m = self._new(parent, ntype)
        self._set_parent(n, m)
        self.rt[n][1] = RLIN
        self.stats.allocations += 1
        self._touch(n)
        self._touch(m)
        return m

    # -- queries -----------------------------------------------------------
    def _revoked(self, n) -> bool:
        while True:
            e = self.rt.get(n)
            if e is None:
                return True
            p = e[0]
            if p == ROOT:
                return False
            if p == NULL:
                return True
            n = p

    def is_valid(self, n: int) -> bool:
        self.stats.queries += 1
        self._touch(n)
        return not self._revoked(n)

    def peek_valid(self, n: int) -> bool:
        """Validity without touching counters (used by checkers and dumps)."""
        return not self._revoked(n)

    def is_revoked(self, n: int) -> bool:
        return not self.is_valid(n)

    def has_rlin_child(self, n: int) -> bool:
        """Uncounted: does ``n`` have a direct child of type RLIN?"""
        return any(self.rt[k][1] == RLIN for k in self.children.get(n, ()))

    def entry(self, n: int):
        e = self.rt.get(n)
        return None if e is None else (e[0], e[1])

    # -- mutation ----------------------------------------------------------
    def revoke_subtree(self, n: int, spare_one: bool = False) -> bool:
        kids = sorted(self.children.get(n, ()))
        had = any(self.rt[k][1] == RLIN for k in kids)
        self._touch(n)
        if spare_one and kids:
            kids = kids[:-1]   # fault injection: one child escapes the cut
        for k in kids:
            self._set_parent(k, NULL)
            self._touch(k)
        self.stats.revocations += 1
        return had

    def remove_node(self, n: int) -> None:
        parent = self.rt[n][0]
        self._touch(n)
        for k in sorted(self.children.get(n, ())):
            self._set_parent(k, parent)
        self.children[parent].discard(n)
        del self.rt[n]
        self.children.pop(n, None)

    def set_node_type(self, n: int, t: int) -> None:
        self._touch(n)
        self.rt[n][1] = t

    def rc_adjust(self, n: int, delta: int, count: bool = True) -> None:
        v = self.rc.get(n, 0) + delta
        if v < 0:
            raise RefcountError(f"refcount of node {n} below zero")
        self.rc[n] = v
        if count:
            self.stats.rc_updates += 1
            self._touch(n)

    def refcount(self, n: int) -> int:
        return self.rc.get(n, 0)

    def refcounts(self) -> dict:
        """Nonzero reference counts by node."""
        return {n: v for n, v in self.rc.items() if v}

    # -- snapshots ---------------------------------------------------------
    def copy(self) -> NaiveTree:
        t = NaiveTree.__new__(NaiveTree)
        t.rt = {k: list(v) for k, v in self.rt.items()}
        t.children = {k: set(v) for k, v in self.children.items()}
        t.rc = dict(self.rc)
        t.next_id = self.next_id
        t.stats = self.stats.copy()
        t.cache = self.cache.copy() if self.cache is not None else None
        return t

    def dump(self) -> dict:
        def pname(p):
            return "ROOT" if p == ROOT else "NULL" if p == NULL else p
        nodes = []
        for n in sorted(self.rt):
            p, t = self.rt[n]
            nodes.append({"id": n, "parent": pname(p), "type": NTYPE_NAMES[t],
                          "valid": self.peek_valid(n), "refcount": self.rc.get(n, 0)})
        return {"backend": self.name, "next_id": self.next_id, "nodes": nodes}
