"""The machine: state, boot, and the single-step transition function.

``MachineState.step`` executes one instruction (or one injected exception) on
one thread in place; :func:`step` is the pure wrapper that copies first.

Every instruction is executed in two phases: all side conditions are checked
and the register/memory writes are staged, then the staged writes are
committed in one go.  A failed condition raises :class:`Fault` before anything
is committed, the thread is marked ERROR and the rest of the state is left as
it was.  Committing also emits the reference-count events of the revocation
tree: a location whose node reference changes gets +1 on the new node and -1
on the old one.
"""

from __future__ import annotations

import json
from typing import NamedTuple

from .image import Image, ImageError
from .isa import DEFAULT_M, EPC, GPR0, PC, RET, insn_text, reg_name
from .revtree import RLIN, RNON, NodeCache, RevTreeStats, TreeCapacityError, make_tree
from .words import (INVALID, LINEAR_KINDS, NAT_MASK, Cap, Insn, Kind, Perms, cap_text,
                    decode_perm, moved, tighten_perm)

NORMAL = 0
EXCEPT = 1

MUTATIONS = frozenset({
    "revoke_skip_descendant",   # revoke leaves one child of the node valid
    "skip_moved",               # mov/ld/sd copy linear words instead of moving them
    "ld_skip_writable",         # ld of a linear word through a read-only capability
    "skip_clear_sealed",        # return leaves the context region intact
    "revoke_wrong_type",        # revoke swaps the LIN and UNINIT outcomes
})


class Decision(NamedTuple):
    s: int
    k: int

    def text(self) -> str:
        return f"except {self.k}" if self.s == EXCEPT else str(self.k)


class Fault(Exception):
    """A side condition of the executing instruction does not hold."""


class Thread:
    __slots__ = ("regs", "dom", "error", "fault")

    def __init__(self, regs, dom):
        self.regs = regs
        self.dom = dom
        self.error = False
        self.fault = None

    def copy(self) -> Thread:
        t = Thread(list(self.regs), self.dom)
        t.error = self.error
        t.fault = self.fault
        return t


# ---------------------------------------------------------------------------
# Word encoding for dumps
# ---------------------------------------------------------------------------

def word_json(w):
    if w.__class__ is int:
        return {"nat": w}
    if w.__class__ is Insn:
        return {"insn": insn_text(w)}
    d = {"cap": w.kind.name, "base": w.base, "end": w.end, "cursor": w.cursor,
         "perms": w.perms.name, "node": w.node}
    if w.kind in (Kind.SEALED, Kind.SEALEDRET):
        d["dom"] = w.dom
    if w.kind == Kind.SEALEDRET:
        d["reg"] = reg_name(w.reg)
    return d


def word_text(w) -> str:
    if w.__class__ is int:
        return str(w)
    if w.__class__ is Insn:
        return insn_text(w)
    return cap_text(w)


# ---------------------------------------------------------------------------
# Machine state
# ---------------------------------------------------------------------------

class MachineState:
    def __init__(self, mem_size: int, M: int = DEFAULT_M, backend: str = "optimized",
                 cache=None, strict_epc: bool = False, mutations=(), capacity=None,
                 exit_cell: int | None = None):
        bad = set(mutations) - MUTATIONS
        if bad:
            raise ValueError(f"unknown mutations {sorted(bad)}")
        if "revoke_skip_descendant" in mutations:
            backend = "naive"
        self.M = M
        self.nregs = M + 3
        self.mem = [0] * mem_size
        self.threads: list[Thread] = []
        self.tree = make_tree(backend, cache=cache, capacity=capacity)
        self.backend = backend
        self.N = 0
        self.strict_epc = strict_epc
        self.mutations = frozenset(mutations)
        self.halted = False
        self.exit_code = None
        self.steps = 0
        if exit_cell is not None and not 0 <= exit_cell < mem_size:
            raise ValueError(f"exit cell {exit_cell} outside memory")
        self._exit = mem_size - 1 if exit_cell is None else exit_cell

    # -- construction ------------------------------------------------------
    @classmethod
    def boot(cls, image: Image, mem_size: int | None = None, **kw) -> MachineState:
        """Initial state for ``image``.

        Thread 0 receives a single LIN RWX capability in pc covering all of
        memory (or, when the image declares extra threads or a shared region,
        everything below the lowest of those regions).  Each extra thread gets
        the same kind of capability over its own region.  A shared region is
        handed to every thread as a NON RWX capability in the last register.
        """
        if mem_size is None:
            mem_size = image.word_count
        if mem_size < image.word_count:
            raise ImageError(f"memory of {mem_size} words cannot hold a {image.word_count}-word image")
        st = cls(mem_size, image.M, **kw)
        for addr, w in image.cells:
            st.mem[addr] = w
        regions = [(t.base, t.end) for t in image.threads]
        if image.shared is not None:
            regions.append(tuple(image.shared))
        top = min((b for b, _ in regions), default=mem_size)
        spans = sorted(regions + [(0, top)])
        for (b0, e0), (b1, e1) in zip(spans, spans[1:]):
            if e0 > b1:
                raise ImageError("thread/shared regions overlap")
        for b, e in spans:
            if not 0 <= b < e <= mem_size:
                raise ImageError(f"region [{b},{e}) outside memory")
        layout = [(image.entry, 0, top)] + [(t.entry, t.base, t.end) for t in image.threads]
        shared_cap = None
        if image.shared is not None:
            sb, se = image.shared
            shared_cap = Cap(Kind.NON, sb, se, sb, Perms.RWX, st.tree.new_root_child(RNON))
        for k, (entry, b, e) in enumerate(layout):
            regs = [0] * st.nregs
            regs[PC] = Cap(Kind.LIN, b, e, entry, Perms.RWX, st.tree.new_root_child(RLIN))
            if shared_cap is not None:
                regs[st.nregs - 1] = shared_cap
            st.threads.append(Thread(regs, k))
        st.N = len(layout)
        for th in st.threads:
            for w in th.regs:
                if w.__class__ is Cap:
                    st.tree.rc_adjust(w.node, 1, count=False)
        st.tree.stats = RevTreeStats()
        if st.tree.cache is not None:
            st.tree.cache = NodeCache(st.tree.cache.size, st.tree.cache.ways, st.tree.cache.record)
        return st

    def copy(self) -> MachineState:
        s = MachineState.__new__(MachineState)
        s.M, s.nregs = self.M, self.nregs
        s.mem = list(self.mem)
        s.threads = [t.copy() for t in self.threads]
        s.tree = self.tree.copy()
        s.backend = self.backend
        s.N = self.N
        s.strict_epc = self.strict_epc
        s.mutations = self.mutations
        s.halted, s.exit_code, s.steps = self.halted, self.exit_code, self.steps
        s._exit = self._exit
        return s

    @property
    def exit_cell(self) -> int:
        return self._exit

    def live_threads(self) -> list:
        return [k for k, t in enumerate(self.threads) if not t.error]

    # -- fetch ---------------------------------------------------------------
    def fetch_insn(self, k: int) -> Insn:
        th = self.threads[k]
        if th.error:
            return INVALID
        pc = th.regs[PC]
        if (pc.__class__ is not Cap or not pc.executable() or not pc.in_bound()
                or not pc.accessible() or not self.tree.peek_valid(pc.node)):
            return INVALID
        w = self.mem[pc.cursor]
        return w if w.__class__ is Insn else INVALID

    # -- stepping ------------------------------------------------------------
    def step(self, decision: Decision) -> dict:
        """Execute one scheduling decision in place; returns a trace record."""
        s, k = decision
        if not 0 <= k < len(self.threads):
            raise IndexError(f"no thread {k}")
        th = self.threads[k]
        rec = {"thread": k, "domain": th.dom}
        if self.halted or th.error:
            rec["insn"] = "except" if s == EXCEPT else None
            rec["skipped"] = True
            return rec
        self.steps += 1
        if s == EXCEPT:
            insn = None
            rec["insn"] = "except (injected)"
        else:
            insn = self.fetch_insn(k)
            rec["insn"] = insn_text(insn)
        try:
            if insn is None:
                self._x_except(th, 0, injected=True)
            else:
                getattr(self, "_x_" + insn.op)(th, *insn.args)
        except Fault as f:
            th.error = True
            th.fault = str(f)
            rec["fault"] = str(f)
        except TreeCapacityError as f:
            th.error = True
            th.fault = str(f)
            rec["fault"] = str(f)
        return rec

    # -- staging helpers -------------------------------------------------------
    def _valid(self, c) -> bool:
        return self.tree.is_valid(c.node)

    def _cap(self, w, what="operand") -> Cap:
        if w.__class__ is not Cap:
            raise Fault(f"{what} is not a capability")
        return w

    def _valid_cap(self, w, what="operand") -> Cap:
        c = self._cap(w, what)
        if not self.tree.is_valid(c.node):
            raise Fault(f"{what} capability is revoked")
        return c

    @staticmethod
    def _nat(w, what="operand") -> int:
        if w.__class__ is not int:
            raise Fault(f"{what} is not a scalar")
        return w

    def _advance(self, th, rw) -> None:
        pc = rw.get(PC, th.regs[PC])
        if pc.__class__ is not Cap:
            raise Fault("pc is not a capability")
        rw[PC] = pc.replace(cursor=pc.cursor + 1)

    def _check_epc(self, th, rw) -> None:
        if self.strict_epc and EPC in rw:
            cur = th.regs[EPC]
            if cur != 0 and rw[EPC] is not cur and rw[EPC] != cur:
                raise Fault("epc is pinned")

    def _commit(self, th, rw, mw=None) -> None:
        tree = self.tree
        dec = []
        regs = th.regs
        for i, w in rw.items():
            o = regs[i]
            if o is not w:
                no = o.node if o.__class__ is Cap else None
                nw = w.node if w.__class__ is Cap else None
                if no != nw:
                    if nw is not None:
                        tree.rc_adjust(nw, 1)
                    if no is not None:
                        dec.append(no)
                regs[i] = w
        if mw:
            mem = self.mem
            for a, w in mw.items():
                o = mem[a]
                if o is not w:
                    no = o.node if o.__class__ is Cap else None
                    nw = w.node if w.__class__ is Cap else None
                    if no != nw:
                        if nw is not None:
                            tree.rc_adjust(nw, 1)
                        if no is not None:
                            dec.append(no)
                    mem[a] = w
                if a == self._exit and w.__class__ is int:
                    self.halted = True
                    self.exit_code = w
        for n in dec:
            tree.rc_adjust(n, -1)

    def _finish(self, th, rw, mw=None, advance=True) -> None:
        if advance:
            self._advance(th, rw)
        self._check_epc(th, rw)
        self._commit(th, rw, mw)

    # -- data movement ---------------------------------------------------------
    def _x_mov(self, th, rd, rs):
        w = th.regs[rs]
        rw = {rd: w}
        if "skip_moved" not in self.mutations:
            rw[rs] = moved(w)
        self._finish(th, rw)

    def _x_ld(self, th, rd, rs):
        c = self._valid_cap(th.regs[rs], "ld source")
        if not (c.in_bound() and c.accessible() and c.readable()):
            raise Fault("ld through an unusable capability")
        a = c.cursor
        w = self.mem[a]
        if (w.__class__ is Cap and w.kind in LINEAR_KINDS and not c.writable()
                and "ld_skip_writable" not in self.mutations):
            raise Fault("ld of a linear word needs a writable capability")
        rw = {rd: w}
        mw = {a: w if "skip_moved" in self.mutations else moved(w)}
        self._finish(th, rw, mw)

    def _x_sd(self, th, rd, rs):
        c = self._valid_cap(th.regs[rd], "sd target")
        if not (c.in_bound() and c.accessible() and c.writable()):
            raise Fault("sd through an unusable capability")
        w = th.regs[rs]
        if rd == rs and w.__class__ is Cap and w.kind in LINEAR_KINDS:
            raise Fault("sd of a linear capability through itself")
        mw = {c.cursor: w}
        rw = {}
        if "skip_moved" not in self.mutations:
            rw[rs] = moved(w)
        rw[rd] = c.replace(cursor=c.cursor + 1) if c.kind == Kind.UNINIT else c
        self._finish(th, rw, mw)

    # -- capability manipulation -----------------------------------------------
    def _x_tighten(self, th, rd, rs):
        c = self._valid_cap(th.regs[rd])
        n = self._nat(th.regs[rs])
        self._finish(th, {rd: c.replace(perms=tighten_perm(c.perms, decode_perm(n)))})

    def _x_shrink(self, th, rd, rb, re_):
        b2 = self._nat(th.regs[rb])
        e2 = self._nat(th.regs[re_])
        c = self._valid_cap(th.regs[rd])
        if c.kind not in (Kind.LIN, Kind.NON):
            raise Fault("shrink needs a LIN or NON capability")
        if not (c.base <= b2 < e2 <= c.end):
            raise Fault("shrink bounds outside the capability")
        self._finish(th, {rd: c.replace(base=b2, end=e2)})

    def _x_split(self, th, rd, rs, rp):
        c = self._valid_cap(th.regs[rd])
        if c.kind != Kind.LIN:
            raise Fault("split needs a LIN capability")
        pv = self._nat(th.regs[rp])
        if not c.base < pv < c.end:
            raise Fault("split point outside the capability")
        rw = {rd: c.replace(end=pv)}
        self._advance(th, rw)          # pc checks happen before the tree changes
        self._check_epc(th, rw)
        n2 = self.tree.alloc_split(c.node)
        rw[rs] = Cap(Kind.LIN, pv, c.end, c.cursor, c.perms, n2)
        if rs == PC:
            rw[PC] = rw[PC].replace(cursor=rw[PC].cursor + 1)
        self._commit(th, rw)

    def _x_delin(self, th, r):
        c = self._valid_cap(th.regs[r])
        if c.kind != Kind.LIN:
            raise Fault("delin needs a LIN capability")
        rw = {r: c.replace(kind=Kind.NON)}
        self._advance(th, rw)
        self._check_epc(th, rw)
        self.tree.set_node_type(c.node, RNON)
        self._commit(th, rw)

    def _x_scc(self, th, rd, rs):
        n = self._nat(th.regs[rs])
        c = self._cap(th.regs[rd])
        if c.kind in (Kind.SEALED, Kind.SEALEDRET, Kind.UNINIT):
            raise Fault("scc cannot move the cursor of this capability type")
        self._finish(th, {rd: c.replace(cursor=n)})

    def _x_lcc(self, th, rd, rs):
        c = self._cap(th.regs[rs])
        self._finish(th, {rd: c.cursor})

    # -- revocation ------------------------------------------------------------
    def _x_mrev(self, th, rd, rs):
        c = self._valid_cap(th.regs[rs])
        if c.kind != Kind.LIN:
            raise Fault("mrev needs a LIN capability")
        probe = {rd: c}
        self._advance(th, probe)
        self._check_epc(th, probe)
        n2 = self.tree.alloc_mrev(c.node)
        rw = {rd: Cap(Kind.REV, c.base, c.end, c.cursor, c.perms, n2)}
        self._advance(th, rw)
        self._commit(th, rw)

    def _x_revoke(self, th, r):
        c = self._valid_cap(th.regs[r])
        if c.kind != Kind.REV:
            raise Fault("revoke needs a REV capability")
        probe = {r: c}
        self._advance(th, probe)
        self._check_epc(th, probe)
        if "revoke_skip_descendant" in self.mutations:
            had = self.tree.revoke_subtree(c.node, spare_one=True)
        else:
            had = self.tree.revoke_subtree(c.node)
        lin = (not had) or c.perms in (Perms.NA, Perms.R, Perms.RX)
        if "revoke_wrong_type" in self.mutations:
            lin = not lin
        if lin:
            nc = c.replace(kind=Kind.LIN)
        else:
            nc = c.replace(kind=Kind.UNINIT, cursor=c.base)
        rw = {r: nc}
        self._advance(th, rw)
        self._commit(th, rw)

    def _x_drop(self, th, r):
        c = self._valid_cap(th.regs[r])
        if c.kind not in LINEAR_KINDS:
            raise Fault("drop needs a linear capability")
        rw = {r: 0}
        self._advance(th, rw)
        self._check_epc(th, rw)
        self.tree.remove_node(c.node)
        self._commit(th, rw)

    def _x_init(self, th, r):
        c = self._valid_cap(th.regs[r])
        if c.kind != Kind.UNINIT:
            raise Fault("init needs an UNINIT capability")
        if c.cursor != c.end:
            raise Fault("init before the region is fully written")
        self._finish(th, {r: c.replace(kind=Kind.LIN)})

    # -- domain switching --------------------------------------------------------
    def _x_seal(self, th, r):
        c = self._valid_cap(th.regs[r])
        if c.kind != Kind.LIN or not (c.readable() and c.writable()):
            raise Fault("seal needs a readable and writable LIN capability")
        rw = {r: c.replace(kind=Kind.SEALED, dom=self.N)}
        self._finish(th, rw)
        self.N += 1

    def _region(self, c: Cap) -> int:
        if c.base + self.M + 4 > c.end:
            raise Fault("sealed region too small for a context")
        return c.base

    def _load_context(self, b) -> list:
        mem = self.mem
        return [mem[b], mem[b + 2], mem[b + 3]] + mem[b + 4:b + self.M + 4]

    def _save_context(self, b, regs, keep_epc=False) -> dict:
        mw = {b: regs[PC], b + 1: 0, b + 2: 0 if keep_epc else regs[EPC], b + 3: regs[RET]}
        for i in range(self.M):
            mw[b + 4 + i] = regs[GPR0 + i]
        return mw

    def _switch(self, th, new_regs, mw, dom):
        rw = {i: w for i, w in enumerate(new_regs)}
        self._commit(th, rw, mw)
        th.dom = dom

    def _do_call(self, th, rd, w, rs, bump_pc, keep_epc):
        c = self._valid_cap(th.regs[rd], "call target")
        if c.kind != Kind.SEALED:
            raise Fault("call needs a SEALED capability")
        b = self._region(c)
        saved = list(th.regs)
        if rs is not None:
            saved[rs] = moved(w)
        saved[rd] = 0
        if bump_pc:
            pc = saved[PC]
            if pc.__class__ is Cap:
                saved[PC] = pc.replace(cursor=pc.cursor + 1)
        new = self._load_context(b)
        if keep_epc:
            new[EPC] = th.regs[EPC]
        new[RET] = c.replace(kind=Kind.SEALEDRET, dom=th.dom, reg=rd)
        new[GPR0] = w
        mw = self._save_context(b, saved, keep_epc)
        self._switch(th, new, mw, c.dom)

    def _x_call(self, th, rd, rs):
        if rd == rs:
            self._valid_cap(th.regs[rd], "call target")
            raise Fault("call cannot pass its own sealed capability as the argument")
        self._do_call(th, rd, th.regs[rs], rs, bump_pc=True, keep_epc=self.strict_epc)

    def _x_except(self, th, n, injected=False):
        self._do_call(th, EPC, n & NAT_MASK, None, bump_pc=False, keep_epc=False)

    def _x_return(self, th, rd, rs):
        c = self._valid_cap(th.regs[rd], "return target")
        if c.kind != Kind.SEALEDRET:
            raise Fault("return needs a SEALEDRET capability")
        b = self._region(c)
        w = th.regs[rs]
        new = self._load_context(b)
        if self.strict_epc:
            new[EPC] = th.regs[EPC]
        new[c.reg] = w
        if "skip_clear_sealed" in self.mutations:
            mw = {}
        else:
            mw = {a: 0 for a in range(b, b + self.M + 4)}
        self._switch(th, new, mw, c.dom)

    def _x_retseal(self, th, rd, rs):
        c = self._valid_cap(th.regs[rd], "retseal target")
        if c.kind != Kind.SEALEDRET:
            raise Fault("retseal needs a SEALEDRET capability")
        b = self._region(c)
        w = self._nat(th.regs[rs], "retseal resume address")
        pc = th.regs[PC]
        if pc.__class__ is not Cap:
            raise Fault("pc is not a capability")
        saved = list(th.regs)
        saved[PC] = pc.replace(cursor=w)
        saved[rd] = 0
        new = self._load_context(b)
        if self.strict_epc:
            new[EPC] = th.regs[EPC]
        new[c.reg] = c.replace(kind=Kind.SEALED, dom=th.dom, reg=-1)
        mw = self._save_context(b, saved, keep_epc=self.strict_epc)
        self._switch(th, new, mw, c.dom)

    # -- control flow and arithmetic ---------------------------------------------
    def _x_jmp(self, th, r):
        n = self._nat(th.regs[r])
        pc = self._cap(th.regs[PC], "pc")
        self._commit(th, {PC: pc.replace(cursor=n)})

    def _x_jnz(self, th, rd, rs):
        ns = self._nat(th.regs[rs])
        nd = self._nat(th.regs[rd])
        pc = self._cap(th.regs[PC], "pc")
        self._commit(th, {PC: pc.replace(cursor=pc.cursor + 1 if ns == 0 else nd)})

    def _x_li(self, th, r, n):
        self._finish(th, {r: n & NAT_MASK})

    def _x_add(self, th, rd, rs):
        nd = self._nat(th.regs[rd])
        ns = self._nat(th.regs[rs])
        self._finish(th, {rd: (nd + ns) & NAT_MASK})

    def _x_lt(self, th, rd, ra, rb):
        na = self._nat(th.regs[ra])
        nb = self._nat(th.regs[rb])
        self._finish(th, {rd: 1 if na < nb else 0})

    def _x_invalid(self, th):
        raise Fault("invalid instruction")

    # -- inspection ---------------------------------------------------------------
    def locations(self):
        """Yield (location, word) for every register and memory cell holding a capability.

        Register locations are ("reg", thread, index); memory locations are ("mem", addr).
        """
        for k, th in enumerate(self.threads):
            for i, w in enumerate(th.regs):
                if w.__class__ is Cap:
                    yield ("reg", k, i), w
        for a, w in enumerate(self.mem):
            if w.__class__ is Cap:
                yield ("mem", a), w

    def recount(self) -> dict:
        """Capability words per node, counted from scratch."""
        counts: dict = {}
        for _, c in self.locations():
            counts[c.node] = counts.get(c.node, 0) + 1
        return counts

    def refcount_errors(self) -> list:
        """Nodes whose stored reference count differs from a full recount."""
        want = self.recount()
        have = self.tree.refcounts()
        return sorted((n, have.get(n, 0), want.get(n, 0))
                      for n in set(want) | set(have) if have.get(n, 0) != want.get(n, 0))

    def dump(self) -> dict:
        threads = []
        for k, th in enumerate(self.threads):
            threads.append({
                "id": k, "domain": th.dom, "state": "ERROR" if th.error else "RUNNING",
                "fault": th.fault,
                "regs": {reg_name(i): word_json(w) for i, w in enumerate(th.regs)},
            })
        mem = {str(a): word_json(w) for a, w in enumerate(self.mem) if w != 0 or w.__class__ is not int}
        return {"M": self.M, "N": self.N, "mem_size": len(self.mem), "steps": self.steps,
                "halted": self.halted, "exit_code": self.exit_code,
                "threads": threads, "mem": mem, "tree": self.tree.dump()}

    def dump_json(self) -> str:
        return json.dumps(self.dump(), sort_keys=True, indent=1)


def step(state: MachineState, decision: Decision) -> MachineState:
    """Pure single step: returns a new state, ``state`` is left untouched."""
    s = state.copy()
    s.step(decision)
    return s


def fetch_insn(state: MachineState, k: int) -> Insn:
    return state.fetch_insn(k)
