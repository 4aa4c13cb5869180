"""Lock-step differential driver for the revocation-tree backends.

A sequence is a random series of tree operations issued the way the machine
issues them: structural operations only on valid nodes, reference counts
never below zero, and a node handle is forgotten once it is invalid and
unreferenced (the linked backend may recycle it).  Backends allocate node
ids differently, so every node is tracked through a logical handle.
"""

import random

from capstone_emu.revtree import (NULL, ROOT, RLIN, RNON, CompiledLinkedTree, NaiveTree,
                                  NodeCache, PyLinkedTree)


def backends():
    out = {"naive": NaiveTree, "linked-py": PyLinkedTree}
    if CompiledLinkedTree is not None:
        out["linked-c"] = CompiledLinkedTree
    return out


class Mismatch(AssertionError):
    pass


class Lockstep:
    def __init__(self, classes, cache=False):
        self.names = list(classes)
        self.trees = [cls(cache=NodeCache(1024, 2, 32) if cache else None)
                      for cls in classes.values()]
        self.ids = []       # handle -> per-backend node id
        self.rc = []        # handle -> logical reference count
        self.log = []

    def _all(self, what, fn):
        out = [fn(t, i) for i, t in enumerate(self.trees)]
        if any(o != out[0] for o in out[1:]):
            raise Mismatch(f"{what}: " + ", ".join(f"{n}={o!r}" for n, o in zip(self.names, out))
                           + f"\nafter {self.log}")
        return out[0]

    def _add(self, ids):
        self.ids.append(ids)
        self.rc.append(0)
        h = len(self.ids) - 1
        for t, n in zip(self.trees, ids):
            t.rc_adjust(n, 1)
        self.rc[h] = 1
        return h

    def _handle_of(self, i, node):
        if node in (ROOT, NULL):
            return node
        for h, ids in enumerate(self.ids):
            if ids is not None and ids[i] == node:
                return h
        return ("unknown", node)

    def valid(self, h):
        return self._all(f"is_valid({h})", lambda t, i: t.is_valid(self.ids[h][i]))

    def live(self):
        return [h for h, ids in enumerate(self.ids) if ids is not None]

    # -- operations --------------------------------------------------------
    def op(self, rng):
        live = self.live()
        choice = rng.random()
        if not live or choice < 0.08:
            ntype = RLIN if rng.random() < 0.8 else RNON
            self.log.append(("root", ntype))
            return self._add([t.new_root_child(ntype) for t in self.trees])
        h = rng.choice(live)
        ids = self.ids[h]
        ok = self.valid(h)
        kind = rng.choice(("split", "mrev", "revoke", "remove", "type", "inc", "dec", "dec"))
        self.log.append((kind, h))
        if kind == "inc":
            for t, n in zip(self.trees, ids):
                t.rc_adjust(n, 1)
            self.rc[h] += 1
        elif kind == "dec" and self.rc[h] > 0:
            for t, n in zip(self.trees, ids):
                t.rc_adjust(n, -1)
            self.rc[h] -= 1
        elif not ok or kind == "dec":
            pass
        elif kind == "split":
            self._add([t.alloc_split(n) for t, n in zip(self.trees, ids)])
        elif kind == "mrev":
            self._add([t.alloc_mrev(n) for t, n in zip(self.trees, ids)])
        elif kind == "revoke":
            self._all("revoke_subtree", lambda t, i: t.revoke_subtree(ids[i]))
        elif kind == "remove":
            for t, n in zip(self.trees, ids):
                t.remove_node(n)
        elif kind == "type":
            ty = rng.choice((RLIN, RNON))
            for t, n in zip(self.trees, ids):
                t.set_node_type(n, ty)
        self._forget()
        return h

    def _forget(self):
        for h in self.live():
            if self.rc[h] == 0 and not self._all("peek_valid", lambda t, i: t.peek_valid(self.ids[h][i])):
                self.ids[h] = None

    # -- observation -------------------------------------------------------
    def compare(self):
        for h in self.live():
            ok = self._all(f"peek_valid({h})", lambda t, i: t.peek_valid(self.ids[h][i]))
            if ok:
                self._all(f"entry({h})", lambda t, i: self._entry(t, i, h))
                self._all(f"has_rlin_child({h})", lambda t, i: t.has_rlin_child(self.ids[h][i]))
            self._all(f"refcount({h})", lambda t, i: t.refcount(self.ids[h][i]))
        self._all("stats", lambda t, i: t.stats)
        # every nonzero count belongs to a tracked handle, and only those
        self._all("refcounts", lambda t, i: sorted(
            (self._handle_of(i, n), v) for n, v in t.refcounts().items()))
        for t in self.trees:
            if hasattr(t, "check"):
                t.check()

    def _entry(self, t, i, h):
        p, ty = t.entry(self.ids[h][i])
        return self._handle_of(i, p), ty


def run_sequence(seed, length=None, classes=None, cache=False):
    rng = random.Random(seed)
    ls = Lockstep(classes or backends(), cache)
    for _ in range(length if length is not None else rng.randint(1, 24)):
        ls.op(rng)
        ls.compare()
    return ls


def differential(n, seed0=0, classes=None):
    """Run ``n`` sequences; returns the number of operations issued."""
    ops = 0
    for s in range(seed0, seed0 + n):
        ops += len(run_sequence(s, classes=classes).log)
    return ops
