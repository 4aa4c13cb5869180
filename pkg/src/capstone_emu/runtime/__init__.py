"""Guest runtime: assembly sources under ``asm/``, host-side views of the
runtime structures they build, and the scenario harness."""

from __future__ import annotations

from dataclasses import dataclass

from ..words import Cap, Kind

SLOTS = ("malloc", "free", "thread_start", "thread_create", "join_all",
         "enclave_create", "enclave_enter", "enclave_destroy")


@dataclass(frozen=True)
class RuntimeLayout:
    """Table of sealed entry points at ``base`` (one word per slot, in SLOTS order)."""
    base: int

    def addr(self, slot: str) -> int:
        return self.base + SLOTS.index(slot)

    def read(self, state) -> dict:
        return {s: state.mem[self.addr(s)] for s in SLOTS}

    def violations(self, state) -> list:
        """Slots holding something other than a SEALED capability or Nat(0)."""
        bad = []
        for s, w in self.read(state).items():
            if w.__class__ is Cap and w.kind == Kind.SEALED:
                continue
            if w == 0 and w.__class__ is int:
                continue
            bad.append(s)
        return bad


# allocator region records (alloc.inc)
REC_WORDS = 8
ST_NAMES = {0: "unused", 1: "free", 2: "allocated", 3: "split"}


@dataclass
class Region:
    addr: int
    state: str
    size: int
    base: int
    mem: object
    parent: int
    buddy: int
    left: int
    right: int

    @property
    def leaf(self) -> bool:
        return self.state in ("free", "allocated")


@dataclass
class AllocatorState:
    regions: list
    alloc_n: int
    heap: tuple

    @classmethod
    def read(cls, state, symbols) -> AllocatorState:
        t0, t1 = symbols["alloc_table"], symbols["alloc_table_end"]
        regs = []
        for a in range(t0, t1, REC_WORDS):
            w = state.mem[a:a + REC_WORDS]
            regs.append(Region(a, ST_NAMES.get(w[0], "?"), *w[1:]))
        return cls(regs, state.mem[symbols["alloc_n"]], (symbols["heap"], symbols["alloc_ctx"]))

    def violations(self) -> list:
        """Broken invariants: leaves must tile the heap, free leaves hold their
        LIN capability, allocated leaves the allocator's REV, and alloc_n must
        count the allocated leaves."""
        out = []
        leaves = sorted((r.base, r.base + r.size, r) for r in self.regions if r.leaf)
        pos = self.heap[0]
        for b, e, _ in leaves:
            if b != pos:
                out.append(f"leaves do not tile the heap at {pos}")
                break
            pos = e
        else:
            if pos != self.heap[1]:
                out.append("leaves stop short of the heap end")
        for _, _, r in leaves:
            want = Kind.LIN if r.state == "free" else Kind.REV
            c = r.mem
            if not (c.__class__ is Cap and c.kind == want and (c.base, c.end) == (r.base, r.base + r.size)):
                out.append(f"{r.state} region at {r.base} does not hold a {want.name} capability")
        n = sum(r.state == "allocated" for r in self.regions)
        if n != self.alloc_n:
            out.append(f"alloc_n = {self.alloc_n} but {n} regions are allocated")
        return out


__all__ = ["SLOTS", "RuntimeLayout", "Region", "AllocatorState"]
