"""Abstract ownership model and the refinement checker.

The abstract state tracks three ownership classes (``user``, ``sup``, ``sub``)
as sets of address ranges plus a copy of memory in which every word that is
reachable only as unwritten space of an UNINIT capability reads as ``UNINIT``.
Ranges are half-open ``(base, end)`` tuples; empty ranges are never recorded.

:func:`refines` maps a concrete :class:`~capstone_emu.machine.MachineState`
onto that abstraction, :func:`step_actions` names the abstract actions one
concrete step performs, and :func:`check_trace` runs a program and checks at
every step that applying those actions to the abstract state lands exactly on
the abstraction of the new concrete state.
"""

from __future__ import annotations

from bisect import bisect_left
from typing import NamedTuple

from .isa import EPC, GPR0, PC, RET, insn_text
from .machine import EXCEPT, NORMAL, Decision, MachineState
from .words import Cap, Insn, Kind

USER, SUP, SUB = "user", "sup", "sub"
CLASSES = (USER, SUP, SUB)

_LIN_NON = frozenset({Kind.LIN, Kind.NON})
_LIN_ONLY = frozenset({Kind.LIN})
_SEALED_KINDS = (Kind.SEALED, Kind.SEALEDRET)
_TREE_OPS = frozenset({"split", "mrev", "revoke", "drop", "delin"})


class _Uninit:
    __slots__ = ()

    def __repr__(self):
        return "UNINIT"

    def __reduce__(self):
        return (_uninit, ())


def _uninit():
    return UNINIT


UNINIT = _Uninit()


# ---------------------------------------------------------------------------
# Abstract state and actions
# ---------------------------------------------------------------------------

class PState:
    """Abstract memory plus the three ownership sets."""

    __slots__ = ("mem", "user", "sup", "sub")

    def __init__(self, mem, user=(), sup=(), sub=()):
        self.mem = list(mem)
        self.user = set(user)
        self.sup = set(sup)
        self.sub = set(sub)

    def tstate(self, dom: str) -> set:
        return getattr(self, dom)

    def copy(self) -> PState:
        return PState(self.mem, self.user, self.sup, self.sub)

    def __eq__(self, other):
        return (other.__class__ is PState and self.user == other.user
                and self.sup == other.sup and self.sub == other.sub and self.mem == other.mem)

    def diff(self, other: PState) -> dict:
        """Human-oriented description of where two states differ."""
        out = {}
        for dom in CLASSES:
            a, b = self.tstate(dom), other.tstate(dom)
            if a != b:
                out[dom] = {"only_here": sorted(a - b), "only_there": sorted(b - a)}
        cells = [a for a in range(min(len(self.mem), len(other.mem))) if self.mem[a] != other.mem[a]]
        if cells:
            out["mem"] = [{"addr": a, "here": repr(self.mem[a]), "there": repr(other.mem[a])}
                          for a in cells[:8]]
            out["mem_cells"] = len(cells)
        return out

    def to_json(self) -> dict:
        return {dom: [list(r) for r in sorted(self.tstate(dom))] for dom in CLASSES} | {
            "uninit": [a for a, w in enumerate(self.mem) if w is UNINIT]}


class Action(NamedTuple):
    op: str          # load_linear store_linear load store split shrink send discard claim revoke
    addr: int = -1
    payload: object = None
    cap: tuple = None
    arg: object = None   # split point, shrink target, or destination class

    def text(self) -> str:
        if self.cap is None:
            return f"{self.op} {self.addr} {_payload_text(self.payload)}"
        b, e = self.cap
        s = f"{self.op} [{b},{e})"
        if self.op == "shrink":
            s += " -> [%d,%d)" % self.arg
        elif self.arg is not None:
            s += f" {self.arg}"
        return s

    def to_json(self) -> dict:
        d = {"op": self.op}
        if self.cap is None:
            d["addr"] = self.addr
            d["payload"] = _payload_text(self.payload)
        else:
            d["cap"] = list(self.cap)
            if self.arg is not None:
                d["arg"] = list(self.arg) if isinstance(self.arg, tuple) else self.arg
        return d


def _payload_text(w) -> str:
    from .machine import word_text
    return "uninit" if w is UNINIT else word_text(w)


def load_linear(addr, payload): return Action("load_linear", addr, payload)
def store_linear(addr, payload): return Action("store_linear", addr, payload)
def load(addr, payload): return Action("load", addr, payload)
def store(addr, payload): return Action("store", addr, payload)
def split(cap, n): return Action("split", cap=cap, arg=n)
def shrink(cap, target): return Action("shrink", cap=cap, arg=target)
def send(cap, dom): return Action("send", cap=cap, arg=dom)
def discard(cap): return Action("discard", cap=cap)
def claim(cap): return Action("claim", cap=cap)
def revoke(cap): return Action("revoke", cap=cap)


class Rejected(Exception):
    """An abstract action whose precondition does not hold."""


def owns(tstate, addr: int) -> bool:
    return any(b <= addr < e for b, e in tstate)


def _owner(p: PState, addr: int):
    for dom in CLASSES:
        if owns(p.tstate(dom), addr):
            return dom
    return None


def _apply(p: PState, dom: str, a: Action, check: bool = True) -> None:
    """Apply ``a`` performed by ``dom`` to ``p`` in place."""
    op = a.op
    mine = p.tstate(dom)
    if op in ("load_linear", "store_linear", "load", "store"):
        if check:
            if op.endswith("linear"):
                if not owns(mine, a.addr):
                    raise Rejected(f"{dom} does not own address {a.addr}")
            elif _owner(p, a.addr) is not None:
                raise Rejected(f"address {a.addr} is owned by {_owner(p, a.addr)}")
            if op.startswith("load") and p.mem[a.addr] != a.payload:
                raise Rejected(f"load of {a.addr} expects {p.mem[a.addr]!r}")
        if op.startswith("store"):
            p.mem[a.addr] = a.payload
        return
    cap = a.cap
    if op == "revoke":
        if check and dom == SUB and cap in p.user:
            raise Rejected("sub may not revoke a range owned by user")
        for other in CLASSES:
            if other != dom:
                p.tstate(other).discard(cap)
        mine.add(cap)
        for i in range(cap[0], cap[1]):
            p.mem[i] = UNINIT
        return
    if op == "claim":
        if check and any(cap in p.tstate(o) for o in CLASSES):
            raise Rejected(f"claim of owned range {cap}")
        mine.add(cap)
        return
    if check and cap not in mine:
        raise Rejected(f"{dom} does not hold range {cap}")
    b, e = cap
    if op == "split":
        n = a.arg
        if check and not b <= n < e:
            raise Rejected(f"split point {n} outside {cap}")
        mine.discard(cap)
        mine.update(r for r in ((b, n), (n, e)) if r[0] < r[1])
    elif op == "shrink":
        t = a.arg if isinstance(a.arg, tuple) else (b, b + a.arg)
        if check and not (b <= t[0] < t[1] <= e):
            raise Rejected(f"shrink target {t} outside {cap}")
        mine.discard(cap)
        mine.add(t)
    elif op == "send":
        mine.discard(cap)
        p.tstate(a.arg).add(cap)
    elif op == "discard":
        mine.discard(cap)
    else:
        raise ValueError(f"unknown action {op}")


def apply_abstract(p: PState, dom: str, a: Action) -> PState:
    """Pure application of one action; raises :class:`Rejected` on a failed guard."""
    q = p.copy()
    _apply(q, dom, a)
    return q


# ---------------------------------------------------------------------------
# Concrete side: contexts, closures, realms
# ---------------------------------------------------------------------------

def _slots(M: int):
    """Offsets of the saved registers inside a context region, by register index."""
    return [(PC, 0), (EPC, 2), (RET, 3)] + [(GPR0 + i, 4 + i) for i in range(M)]


class Analysis:
    """Everything the abstraction needs from one concrete state, computed once."""

    def __init__(self, state: MachineState, d: int = 0, D_sub=()):
        self.state = state
        self.d = d
        self.D_sub = frozenset(D_sub)
        tree = state.tree
        valid = tree.peek_valid
        mem = state.mem
        self.memcaps = [(a, w) for a, w in enumerate(mem) if w.__class__ is Cap and valid(w.node)]
        self.mem_addrs = [a for a, _ in self.memcaps]
        self.running = {}
        for k, th in enumerate(state.threads):
            self.running.setdefault(th.dom, k)
        self.sealed = {}
        for k, th in enumerate(state.threads):
            for w in th.regs:
                if w.__class__ is Cap and w.kind in _SEALED_KINDS and valid(w.node):
                    self.sealed.setdefault(w.dom, w)
        for _, w in self.memcaps:
            if w.kind in _SEALED_KINDS:
                self.sealed.setdefault(w.dom, w)
        self.domains = sorted(set(self.running) | set(self.sealed))
        self._ctx = {}
        self._x = {}
        self._r = {}
        self._pstate = None
        self._wf = None

    # -- per-domain sets -----------------------------------------------------
    def ctx(self, d: int) -> list:
        got = self._ctx.get(d)
        if got is None:
            st = self.state
            if d in self.running:
                k = self.running[d]
                got = [(("reg", k, i), w) for i, w in enumerate(st.threads[k].regs)]
            elif d in self.sealed:
                c = self.sealed[d]
                got = []
                for _, off in _slots(st.M):
                    a = c.base + off
                    if a < c.end and a < len(st.mem):
                        got.append((("mem", a), st.mem[a]))
            else:
                got = []
            self._ctx[d] = got
        return got

    def closure(self, seed, types) -> list:
        """Least fixed point of ``seed`` under 'stored inside the range of a member'."""
        valid = self.state.tree.peek_valid
        out = []
        seen = set()
        work = []
        for loc, w in seed:
            if w.__class__ is Cap and w.kind in types and valid(w.node) and loc not in seen:
                seen.add(loc)
                out.append((loc, w))
                work.append(w)
        addrs, caps = self.mem_addrs, self.memcaps
        while work:
            c = work.pop()
            i = bisect_left(addrs, c.base)
            while i < len(addrs) and addrs[i] < c.end:
                a, w = caps[i]
                if w.kind in types and ("mem", a) not in seen:
                    seen.add(("mem", a))
                    out.append((("mem", a), w))
                    work.append(w)
                i += 1
        return out

    def realm(self, d: int) -> list:
        got = self._r.get(d)
        if got is None:
            got = self._r[d] = self.closure(self.ctx(d), _LIN_NON)
        return got

    def xrealm(self, d: int) -> list:
        got = self._x.get(d)
        if got is None:
            got = self._x[d] = self.closure(self.ctx(d), _LIN_ONLY)
        return got

    def _wo(self, located, d) -> list:
        valid = self.state.tree.peek_valid
        out = [(loc, w) for loc, w in self.ctx(d)
               if w.__class__ is Cap and w.kind == Kind.UNINIT and valid(w.node)]
        seen = {loc for loc, _ in out}
        addrs, caps = self.mem_addrs, self.memcaps
        for _, c in located:
            i = bisect_left(addrs, c.base)
            while i < len(addrs) and addrs[i] < c.end:
                a, w = caps[i]
                if w.kind == Kind.UNINIT and ("mem", a) not in seen:
                    seen.add(("mem", a))
                    out.append((("mem", a), w))
                i += 1
        return out

    def realm_w(self, d: int) -> list:
        return self._wo(self.realm(d), d)

    def xrealm_w(self, d: int) -> list:
        return self._wo(self.xrealm(d), d)

    def dom_class(self, d: int) -> str:
        if d == self.d:
            return USER
        return SUB if d in self.D_sub else SUP

    # -- the mapping ---------------------------------------------------------
    def pstate(self) -> PState:
        if self._pstate is None:
            mem = list(self.state.mem)
            t = {USER: set(), SUP: set(), SUB: set()}
            for d in self.domains:
                for a in woranges(self.realm_w(d)):
                    for i in range(a[0], a[1]):
                        mem[i] = UNINIT
                t[self.dom_class(d)].update(ranges(self.xrealm(d)))
            self._pstate = PState(mem, t[USER], t[SUP], t[SUB])
        return self._pstate

    def owner_domain(self) -> dict:
        """range -> domain id for every exclusively owned range."""
        out = {}
        for d in self.domains:
            for r in ranges(self.xrealm(d)):
                out.setdefault(r, d)
        return out

    # -- invariants ------------------------------------------------------------
    def wf_violation(self):
        """None if well formed, else a short description of the first violation."""
        if self._wf is None:
            self._wf = _wf_check(self.state)
        return self._wf or None

    def sub_violation(self):
        if not self.D_sub:
            return None
        user = ranges(self.xrealm(self.d))
        for k in sorted(self.D_sub):
            for loc, w in self.ctx(k):
                if w.__class__ is Cap and w.kind == Kind.REV and w.base < w.end:
                    for b, e in user:
                        if w.base < e and b < w.end:
                            return f"sub domain {k} holds REV [{w.base},{w.end}) over user range [{b},{e})"
        return None


def ranges(located) -> set:
    return {(w.base, w.end) for _, w in located if w.base < w.end}


def woranges(located) -> set:
    return {(w.cursor, w.end) for _, w in located if w.cursor < w.end}


def _wf_check(state: MachineState) -> str:
    """Empty string if well formed.

    Checked over every valid capability in the machine: a linear capability
    other than REV may overlap no other valid capability except REV ones, and
    a REV capability overlapping a LIN, SEALED, SEALEDRET or UNINIT capability
    must have a direct RLIN child in the revocation tree.
    """
    tree = state.tree
    valid = tree.peek_valid
    caps = sorted(((w.base, w.end, loc, w) for loc, w in state.locations()
                   if w.base < w.end and valid(w.node)), key=lambda t: (t[0], t[1]))
    n = len(caps)
    rev_ok = {}
    for i in range(n):
        b, e, loc, c = caps[i]
        j = i + 1
        while j < n and caps[j][0] < e:
            _, _, loc2, c2 = caps[j]
            j += 1
            k1, k2 = c.kind, c2.kind
            if k1 == Kind.REV or k2 == Kind.REV:
                if k1 == Kind.REV and k2 == Kind.REV:
                    continue
                rev, other = (c, c2) if k1 == Kind.REV else (c2, c)
                if other.kind == Kind.NON:
                    continue
                ok = rev_ok.get(rev.node)
                if ok is None:
                    ok = rev_ok[rev.node] = tree.has_rlin_child(rev.node)
                if not ok:
                    return (f"REV at {_loc_text(loc if rev is c else loc2)} overlaps "
                            f"{other.kind.name} at {_loc_text(loc2 if rev is c else loc)} "
                            f"without an RLIN child")
                continue
            if k1 == Kind.NON and k2 == Kind.NON:
                continue
            return (f"{k1.name} [{c.base},{c.end}) at {_loc_text(loc)} overlaps "
                    f"{k2.name} [{c2.base},{c2.end}) at {_loc_text(loc2)}")
    return ""


def _loc_text(loc) -> str:
    from .isa import reg_name
    if loc[0] == "reg":
        return f"thread {loc[1]} {reg_name(loc[2])}"
    return f"mem[{loc[1]}]"


# ---------------------------------------------------------------------------
# Public functional surface
# ---------------------------------------------------------------------------

def ctx(state, d):
    return Analysis(state).ctx(d)


def cap_closure(state, seed, types):
    return Analysis(state).closure(seed, frozenset(types))


def realm(state, d):
    return Analysis(state).realm(d)


def xrealm(state, d):
    return Analysis(state).xrealm(d)


def realm_w(state, d):
    return Analysis(state).realm_w(d)


def xrealm_w(state, d):
    return Analysis(state).xrealm_w(d)


def refines(state, d: int = 0, D_sub=()) -> PState:
    return Analysis(state, d, D_sub).pstate()


def wf(state) -> bool:
    return not _wf_check(state)


def sub_ok(state, D_sub, d: int = 0) -> bool:
    return Analysis(state, d, D_sub).sub_violation() is None


# ---------------------------------------------------------------------------
# Concrete step -> abstract actions
# ---------------------------------------------------------------------------

def _reg_sig(w):
    if w.__class__ is not Cap:
        return None
    return (w.kind, w.base, w.end, w.node, w.dom, w.reg,
            w.cursor if w.kind == Kind.UNINIT else 0)


def _abstractly_same(pre: MachineState, post: MachineState, k: int, op) -> bool:
    """True when the step cannot have changed anything the abstraction sees."""
    if op in _TREE_OPS or pre.N != post.N:
        return False
    t0, t1 = pre.threads[k], post.threads[k]
    if t0.dom != t1.dom:
        return False
    if t0.regs != t1.regs and list(map(_reg_sig, t0.regs)) != list(map(_reg_sig, t1.regs)):
        return False
    return pre.mem == post.mem


def _same_state(a: MachineState, b: MachineState, op) -> bool:
    if a.mem != b.mem or a.N != b.N or a.halted != b.halted:
        return False
    for t0, t1 in zip(a.threads, b.threads):
        if t0.regs != t1.regs or t0.dom != t1.dom or t0.error != t1.error:
            return False
    if op in _TREE_OPS:
        return a.tree.dump() == b.tree.dump()
    return True


def _reference(state: MachineState) -> MachineState:
    ref = state.copy()
    ref.mutations = frozenset()
    return ref


def _derive(pre: MachineState, pre_an: Analysis, decision: Decision):
    """Actions of one step, plus the unmutated successor state and its analysis."""
    s, k = decision
    th = pre.threads[k]
    if pre.halted or th.error:
        return [], pre, pre_an, None
    insn = None if s == EXCEPT else pre.fetch_insn(k)
    op = "except" if insn is None else insn.op
    ref = _reference(pre)
    rec = ref.step(decision)
    if "fault" in rec:
        return [], ref, pre_an, op
    if _abstractly_same(pre, ref, k, op):
        return [], ref, pre_an, op
    post_an = Analysis(ref, pre_an.d, pre_an.D_sub)
    return _actions(pre, pre_an, ref, post_an, k, insn), ref, post_an, op


def _actions(pre, A: Analysis, post, B: Analysis, k: int, insn) -> list:
    X = A.dom_class(pre.threads[k].dom)
    P = A.pstate()
    T = B.pstate()
    W = P.copy()
    acts = []

    def emit(a, dom=X):
        acts.append((a, dom))
        _apply(W, dom, a, check=False)

    regs = pre.threads[k].regs
    op = "except" if insn is None else insn.op
    if op == "ld":
        c = regs[insn.args[1]]
        a = c.cursor
        emit((load_linear if owns(W.tstate(X), a) else load)(a, W.mem[a]))
    elif op in ("call", "except", "return", "retseal"):
        c = regs[EPC if op == "except" else insn.args[0]]
        for _, off in _slots(pre.M):
            a = c.base + off
            emit((load_linear if owns(W.tstate(X), a) else load)(a, W.mem[a]))
    elif op == "split":
        c = regs[insn.args[0]]
        emit(split((c.base, c.end), post.threads[k].regs[insn.args[0]].end))
    elif op == "shrink":
        c = regs[insn.args[0]]
        if c.kind == Kind.LIN:
            n = post.threads[k].regs[insn.args[0]]
            emit(shrink((c.base, c.end), (n.base, n.end)))
    elif op == "revoke":
        c = regs[insn.args[0]]
        R = (c.base, c.end)
        if post.threads[k].regs[insn.args[0]].kind == Kind.UNINIT:
            for Y in CLASSES:
                for r in sorted(W.tstate(Y)):
                    if R[0] <= r[0] and r[1] <= R[1] and r not in T.tstate(Y):
                        emit(discard(r) if Y == X else revoke(r), Y if Y == X else X)
            if R[0] < R[1]:
                emit(revoke(R))

    # ownership reconciliation
    mine = W.tstate(X)
    for r in sorted(mine - T.tstate(X)):
        for Y in CLASSES:
            if Y != X and r in T.tstate(Y) and r not in W.tstate(Y):
                emit(send(r, Y))
                break
    for r in sorted(mine - T.tstate(X)):
        emit(discard(r))
    for Y in (X,) + tuple(c for c in CLASSES if c != X):
        for r in sorted(T.tstate(Y) - W.tstate(Y)):
            emit(claim(r), Y)
    for Y in CLASSES:
        if Y != X:
            for r in sorted(W.tstate(Y) - T.tstate(Y)):
                emit(discard(r), Y)
    # memory
    wm, tm = W.mem, T.mem
    for a in range(len(tm)):
        if wm[a] is not tm[a] and wm[a] != tm[a]:
            if owns(W.tstate(X), a):
                emit(store_linear(a, tm[a]))
            else:
                emit(store(a, tm[a]))
    return acts


def step_actions(state: MachineState, k: int, insn=None, d: int = 0, D_sub=()) -> list:
    """Abstract actions, as ``(Action, class)`` pairs, of thread ``k`` executing.

    ``insn`` is the instruction fetched by thread ``k`` (checked against the
    state) or ``None`` for an injected exception.  Steps that fault, or that
    leave everything the abstraction observes untouched, perform no actions.
    """
    if insn is None:
        decision = Decision(EXCEPT, k)
    else:
        decision = Decision(NORMAL, k)
        got = state.fetch_insn(k)
        if got != insn:
            raise ValueError(f"thread {k} would execute {insn_text(got)}, not {insn_text(insn)}")
    acts, _, _, _ = _derive(state, Analysis(state, d, D_sub), decision)
    return acts


def action_json(a: Action, dom: str) -> dict:
    return a.to_json() | {"dom": dom}


# ---------------------------------------------------------------------------
# Trace checker
# ---------------------------------------------------------------------------

class Checker:
    """Incremental refinement checker driven one scheduling decision at a time."""

    def __init__(self, state: MachineState, d: int | None = None, D_sub=()):
        self.state = state
        self.d = state.threads[0].dom if d is None else d
        self.D_sub = frozenset(D_sub)
        self.an = Analysis(state, self.d, self.D_sub)
        self.abs = self.an.pstate().copy()
        self.steps = 0
        self.divergence = None
        self.assumption = None
        w = self.an.wf_violation()
        if w:
            self.divergence = {"step": 0, "kind": "wf", "detail": w}
        sv = self.an.sub_violation()
        if sv and not self.divergence:
            self.assumption = {"step": 0, "kind": "sub", "detail": sv}

    @property
    def ok(self) -> bool:
        return self.divergence is None and self.assumption is None

    def step(self, decision: Decision) -> tuple:
        """Execute ``decision`` on the state; returns (trace record, actions)."""
        st = self.state
        acts, ref, ref_an, op = _derive(st, self.an, decision)
        rec = st.step(decision)
        if rec.get("skipped"):
            return rec, []
        self.steps += 1
        if ref is st or _same_state(st, ref, op):
            post_an = ref_an
        else:
            post_an = Analysis(st, self.d, self.D_sub)
        where = {"step": self.steps, "thread": decision.k, "insn": rec.get("insn")}
        w = post_an.wf_violation()
        if w:
            self.divergence = where | {"kind": "wf", "detail": w}
            return rec, acts
        for a, dom in acts:
            try:
                _apply(self.abs, dom, a)
            except Rejected as e:
                self.divergence = where | {"kind": "rejected", "action": action_json(a, dom),
                                           "detail": str(e)}
                return rec, acts
        target = post_an.pstate()
        if self.abs != target:
            self.divergence = where | {"kind": "mismatch", "detail": self.abs.diff(target)}
            return rec, acts
        sv = post_an.sub_violation()
        if sv:
            self.assumption = where | {"kind": "sub", "detail": sv}
        self.an = post_an
        return rec, acts

    def report(self) -> dict:
        out = {"steps": self.steps}
        if self.divergence is not None:
            out["result"] = "divergence"
            out["first_divergence"] = self.divergence
        elif self.assumption is not None:
            out["result"] = "assumption_violated"
            out["first_divergence"] = self.assumption
        else:
            out["result"] = "success"
        return out


def check_trace(image, d: int | None = None, D_sub=(), schedule=None, max_steps: int = 10000,
                state: MachineState | None = None, **machine_kw) -> dict:
    """Run ``image`` under ``schedule`` and check refinement at every step.

    ``schedule`` is a scheduler from :mod:`capstone_emu.sched` (round-robin
    when omitted).  Returns ``{"steps", "result", "first_divergence"?}`` with
    ``result`` one of ``success``, ``divergence`` or ``assumption_violated``
    (the subordinate-domain assumption stopped holding).
    """
    from .sched import RoundRobin
    st = state if state is not None else MachineState.boot(image, **machine_kw)
    sched = schedule if schedule is not None else RoundRobin()
    chk = Checker(st, d, D_sub)
    while chk.ok and chk.steps < max_steps and not st.halted:
        dec = sched(st)
        if dec is None:
            break
        chk.step(dec)
    return chk.report()
