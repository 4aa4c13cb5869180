"""The seven end-to-end scenarios.

Each scenario function takes a schedule family (``round-robin``,
``scripted`` or ``random``) and a seed, runs its guest program under the
refinement checker and returns a report ``{scenario, schedule, steps,
assertions, check}``.
"""

from __future__ import annotations

import argparse
import random

from ..isa import EPC
from ..machine import EXCEPT, NORMAL, Decision
from ..sched import RoundRobin, SeededRandom
from ..words import Kind, Perms
from . import AllocatorState, RuntimeLayout
from .harness import (ASM_DIR, Harness, any_overlap, holders, is_cap, overlaps,
                      passed, realm_spans, reg, schedule_for, span)

# Allocator record layout (see alloc.inc)
ST_FREE = 1


# ---------------------------------------------------------------------------
# helpers shared by the probes
# ---------------------------------------------------------------------------

def _sym_span(h, lo, hi):
    return (h.sym[lo], h.sym[hi])


def _has_value(state, lo, hi, value) -> bool:
    return any(state.mem[a] == value for a in range(lo, hi))


def _ld_faults(h, k, r):
    return h.faults(k, f"ld r29, {r}")


def _valid(h, c) -> bool:
    return is_cap(c) and h.state.tree.peek_valid(c.node)


def _runtime_invariants(h, k):
    """Between requests the runtime table and the region tree are consistent."""
    h.check("runtime table slots hold SEALED capabilities or Nat(0)",
            not RuntimeLayout(h.sym["rt_table"]).violations(h.state))
    h.check("allocator region tree invariants hold between requests",
            not AllocatorState.read(h.state, h.sym).violations())


# ---------------------------------------------------------------------------
# malloc / free
# ---------------------------------------------------------------------------

def malloc_free(family="round-robin", seed=0, **kw):
    h = Harness("malloc_free", family, seed, d=0, **kw)
    heap = _sym_span(h, "heap", "alloc_ctx")
    table = h.sym["alloc_table"]

    def got_a(h, k):
        a = reg(h.state, k, "r2")
        ok = is_cap(a, Kind.LIN) and a.end - a.base >= 16
        h.check("malloc(16) returns a LIN capability of at least 16 words", ok)
        if not ok:
            return
        h.facts["A"] = span(a)
        h.check("allocation lies inside the heap", heap[0] <= a.base and a.end <= heap[1])
        app_x = realm_spans(h.state, 0, exclusive=True)
        alloc_x = realm_spans(h.state, 1, exclusive=True)
        h.check("application and allocator exclusive realms are disjoint",
                not any_overlap(app_x, alloc_x))
        h.check("allocator realm excludes the granted block",
                not any_overlap(realm_spans(h.state, 1), [span(a)]))

    def got_c(h, k):
        c = reg(h.state, k, "r2")
        ok = is_cap(c, Kind.LIN) and c.end - c.base >= 32
        h.check("malloc(32) returns a LIN capability of at least 32 words", ok)
        h.check("live-allocation count tracks grants", h.state.mem[h.sym["alloc_n"]] == 2)
        if ok and "A" in h.facts:
            h.check("live allocations do not overlap", not overlaps(span(c), h.facts["A"]))

    def freed_a(h, k):
        h.check("free consumes the caller's capability", reg(h.state, k, "r4") == 0)
        h.check("freed block leaves the application realm",
                "A" in h.facts and not any_overlap(realm_spans(h.state, 0), [h.facts["A"]]))

    def got_b(h, k):
        b = reg(h.state, k, "r2")
        h.check("a freed block is handed out again",
                is_cap(b, Kind.LIN) and span(b) == h.facts.get("A"))

    def freed_all(h, k):
        h.check("freeing everything merges the heap back into one free block",
                h.state.mem[table] == ST_FREE)
        h.check("live-allocation count returns to zero", h.state.mem[h.sym["alloc_n"]] == 0)

    def failed(h, k):
        h.check("an oversized request fails with a null capability and status 0",
                reg(h.state, k, "r2") == 0 and reg(h.state, k, "r3") == 0)

    for label in ("app_got_a", "app_got_c", "app_freed_a", "app_got_b", "app_freed_all",
                  "app_failed"):
        h.at(label, _runtime_invariants, required=False)
    h.at("app_got_a", got_a)
    h.at("app_got_c", got_c)
    h.at("app_freed_a", freed_a)
    h.at("app_got_b", got_b)
    h.at("app_freed_all", freed_all)
    h.at("app_failed", failed)
    return h.run()


# ---------------------------------------------------------------------------
# allocator reclaims a block with revoke, scrubbing an UNINIT result
# ---------------------------------------------------------------------------

def alloc_revoke_uninit(family="round-robin", seed=0, **kw):
    h = Harness("revoke_uninit", family, seed, d=0, **kw)
    secret = 777

    def written(h, k):
        a = reg(h.state, k, "r4")
        h.facts["A"] = a
        h.check("the application filled its block with the secret",
                is_cap(a) and all(h.state.mem[x] == secret for x in range(a.base, a.end)))

    def revoked(h, k):
        a = h.facts.get("A")
        r = reg(h.state, k, "r15")
        h.check("revoking a block with live holders yields UNINIT",
                is_cap(r, Kind.UNINIT) and a is not None and span(r) == span(a))
        h.check("the UNINIT capability starts with its cursor at the base",
                is_cap(r) and r.cursor == r.base)
        h.check("reading through the UNINIT capability faults", _ld_faults(h, k, "r15"))
        h.check("the application's capability is invalid after revocation",
                a is not None and not h.state.tree.peek_valid(a.node))

    def scrub(h, k):
        h.check("reading through the UNINIT capability faults while scrubbing",
                _ld_faults(h, k, "r15"))

    def clean(h, k):
        r = reg(h.state, k, "r15")
        a = h.facts.get("A")
        h.check("init after a full scrub yields a LIN capability", is_cap(r, Kind.LIN))
        h.check("no trace of the secret remains in the block",
                a is not None and not _has_value(h.state, a.base, a.end, secret))

    def reclaimed(h, k):
        h.check("the stale application capability can no longer read",
                _ld_faults(h, k, "r4"))

    h.at("app_secret_written", _runtime_invariants, required=False)
    h.at("app_reclaimed", _runtime_invariants, required=False)
    h.at("app_secret_written", written)
    h.at("alloc_revoked", revoked)
    h.at("alloc_scrub", scrub)
    h.at("alloc_clean", clean)
    h.at("app_reclaimed", reclaimed)
    return h.run()


# ---------------------------------------------------------------------------
# move, immutable borrow, mutable borrow
# ---------------------------------------------------------------------------

def rust_borrows(family="round-robin", seed=0, **kw):
    h = Harness("rust_borrows", family, seed, d=0, **kw)
    data = _sym_span(h, "data", "exit_cell")

    def moved(h, k):
        r4 = reg(h.state, k, "r4")
        h.check("a move leaves the source register empty", reg(h.state, k, "r2") == 0)
        h.check("the destination owns the region", is_cap(r4, Kind.LIN) and span(r4) == data)

    def imm(h, k):
        caps = [reg(h.state, k, r) for r in ("r4", "r7", "r8")]
        h.check("immutable borrows are read-only NON copies",
                all(is_cap(c, Kind.NON) and c.perms == Perms.R and span(c) == data for c in caps))
        h.check("the owner keeps a REV capability", is_cap(reg(h.state, k, "r5"), Kind.REV))
        h.check("writing through an immutable borrow faults", h.faults(k, "sd r7, r3"))

    def imm_back(h, k):
        h.check("revoke returns exclusive ownership", is_cap(reg(h.state, k, "r4"), Kind.LIN))
        h.check("immutable borrows die on revoke",
                not any(_valid(h, reg(h.state, k, r)) for r in ("r7", "r8")))
        h.check("reading through a dead borrow faults", _ld_faults(h, k, "r7"))

    def mut(h, k):
        live = holders(h.state, lambda w: w.kind != Kind.REV and overlaps(span(w), data))
        h.check("a mutable borrow is the only usable capability to the region",
                len(live) == 1 and live[0][1].kind == Kind.LIN)

    def mut_rev(h, k):
        r4 = reg(h.state, k, "r4")
        h.check("revoking a live mutable borrow yields UNINIT",
                is_cap(r4, Kind.UNINIT) and r4.cursor == r4.base and span(r4) == data)
        h.check("the revoked mutable borrow can no longer read", _ld_faults(h, k, "r7"))

    def mut2(h, k):
        r4 = reg(h.state, k, "r4")
        h.check("a borrow dropped before revoke returns a LIN capability with its writes",
                is_cap(r4, Kind.LIN) and h.state.mem[data[0]] == 44)

    h.at("moved", moved)
    h.at("imm_borrowed", imm)
    h.at("imm_returned", imm_back)
    h.at("mut_borrowed", mut)
    h.at("mut_revoked", mut_rev)
    h.at("mut2_returned", mut2)
    return h.run()


# ---------------------------------------------------------------------------
# preemptive scheduling by an untrusted scheduler
# ---------------------------------------------------------------------------

APP_DOMAINS = (4, 5)
SCHED_DOMAINS = (2, 3)
PREEMPT_PERIOD = 12
PREEMPT_PROB = 0.1


class Preempt:
    """Wraps a scheduler and turns some thread-0 steps inside an application
    domain into injected exceptions.  Remembers the registers at each
    injection so resumption can be compared against them."""

    def __init__(self, inner, period=None, prob=None, seed=0):
        self.inner = inner
        self.period = period
        self.prob = prob
        self.rng = random.Random(seed ^ 0x5EED)
        self.count = 0
        self.pending: dict = {}

    def __call__(self, state):
        dec = self.inner(state)
        if dec is None or dec.k != 0:
            return dec
        th = state.threads[0]
        if th.dom not in APP_DOMAINS:
            return dec
        if dec.s == NORMAL:
            self.count += 1
            fire = (self.period and self.count % self.period == 0) or \
                   (self.prob and self.rng.random() < self.prob)
            if not fire:
                return dec
            dec = Decision(EXCEPT, 0)
        self.pending[th.dom] = list(th.regs)
        return dec


def _sched_schedule(family, seed):
    if family == "round-robin":
        return Preempt(RoundRobin(), period=PREEMPT_PERIOD)
    if family == "random":
        return Preempt(SeededRandom(seed), prob=PREEMPT_PROB, seed=seed)
    return Preempt(schedule_for("sched_preempt", family, seed))


def _sched_done(h) -> bool:
    st, s = h.state, h.sym
    pc1 = st.threads[1].regs[0]
    return (st.mem[s["a1_data"] + 1] == 1 and st.mem[s["a2_data"] + 1] == 1
            and is_cap(pc1) and pc1.cursor == s["t1_done"])


def scheduler_preempt(family="round-robin", seed=0, **kw):
    sch = _sched_schedule(family, seed)
    h = Harness("sched_preempt", family, seed, d=APP_DOMAINS[0], schedule=sch, **kw)
    s = h.sym
    crit = (s["crit"], s["a1_data"])
    app_data = [(s["a1_data"], s["a2_data"]), (s["a2_data"], s["rs1"])]
    h.facts["resumed"] = 0
    h.facts["crit_ok"] = True

    def every(h, dec, rec):
        st = h.state
        owners = [loc for loc, w in st.locations()
                  if w.kind == Kind.LIN and span(w) == crit and st.tree.peek_valid(w.node)]
        if len(owners) == 1:
            h.facts["crit_published"] = True
        elif h.facts.get("crit_published"):
            h.facts["crit_ok"] = False
        pend = getattr(sch, "pending", None)
        th = st.threads[0]
        if pend and th.dom in pend and dec.s == NORMAL:
            # just switched back into a preempted app
            before = pend.pop(th.dom)
            h.facts["resumed"] += 1
            h.check("register context survives preemption bit-for-bit (epc excluded)",
                    all(i == EPC or before[i] == w for i, w in enumerate(th.regs)))

    h.every_step.append(every)

    def owned(h, k):
        d = h.state.threads[k].dom
        h.check("scheduler runs in its own domain", d in SCHED_DOMAINS)
        h.check("scheduler realm never reaches application data",
                not any_overlap(realm_spans(h.state, d), app_data))

    def resume(h, k):
        h.check("the scheduler cannot read a parked application's context",
                _ld_faults(h, k, "r5"))

    def take(h, k):
        sh = s["sh_crit"]
        st, fault = h.attempt(k, [f"li r29, {sh}", "scc r31, r29", "ld r4, r31", "ld r5, r31"])
        h.check("the critical-state capability can be loaded only once",
                fault is None and is_cap(reg(st, k, "r4"), Kind.LIN) and reg(st, k, "r5") == 0)

    h.at("sched_owned", owned)
    h.at("sched_resume", resume)
    h.at("t1_take", take)
    h.stop = _sched_done
    rep = h.run()
    st = h.state
    h.check("critical-state capability has exactly one holder after every step",
            h.facts["crit_ok"] and h.facts.get("crit_published", False))
    h.check("both applications finished their loops",
            st.mem[s["a1_data"]] == 6 and st.mem[s["a2_data"]] == 6)
    h.check("the second thread finished its critical-state updates", st.mem[s["crit_work"]] == 6)
    h.check("the scheduler switched between applications",
            st.mem[s["crit_switches"]] >= 2 and h.facts["resumed"] >= 1)
    return h.report()


# ---------------------------------------------------------------------------
# enclaves
# ---------------------------------------------------------------------------

def _host_cannot_read(h, k, r):
    st, fault = h.attempt(k, f"ld r29, {r}")
    return fault is not None and st.threads[k].error


def enclave_spatial(family="round-robin", seed=0, **kw):
    h = Harness("enclave_spatial", family, seed, d=0, **kw)
    s = h.sym
    ep = (s["encl"], s["encl_end"])
    private = (s["encl_data"], s["encl_end"])
    shared = (s["shared"], s["exit_cell"])
    secret = 4242

    def created(h, k):
        r7, r8 = reg(h.state, k, "r7"), reg(h.state, k, "r8")
        h.check("the host keeps a REV over the enclave region", is_cap(r7, Kind.REV) and span(r7) == ep)
        h.check("the host holds the enclave only as a sealed capability",
                is_cap(r8, Kind.SEALED) and r8.dom == 1)
        h.check("host exclusive realm excludes the enclave",
                not any_overlap(realm_spans(h.state, 0, exclusive=True), [ep]))
        h.check("host read through the sealed handle faults the thread", _host_cannot_read(h, k, "r8"))
        h.check("host read through its REV faults the thread", _host_cannot_read(h, k, "r7"))

    def running(h, k):
        st = h.state
        h.check("enclave runs in its own domain", st.threads[k].dom == 1)
        h.check("enclave private data holds the secret", st.mem[private[0]] == secret)
        h.check("host realm excludes enclave memory", not any_overlap(realm_spans(st, 0), [ep]))
        h.check("enclave exclusive realm covers its private data",
                any(a <= private[0] and private[1] <= b for a, b in realm_spans(st, 1, True)))
        h.check("shared region is in both realms",
                any_overlap(realm_spans(st, 0), [shared]) and any_overlap(realm_spans(st, 1), [shared]))

    def entered(h, k):
        st = h.state
        h.check("host regains control with the sealed handle restored",
                is_cap(reg(st, k, "r8"), Kind.SEALED))
        h.check("enclave output arrives through the shared region", st.mem[shared[0]] == 5)

    def again(h, k):
        h.check("the enclave resumes where it left off", h.state.mem[shared[0] + 1] == 6)
        h.check("host still reads the enclave output", reg(h.state, k, "r9") == 5)

    def destroyed(h, k):
        r7 = reg(h.state, k, "r7")
        h.check("destroying an enclave yields UNINIT over its region",
                is_cap(r7, Kind.UNINIT) and span(r7) == ep and r7.cursor == r7.base)
        h.check("the sealed handle dies with the enclave", not _valid(h, reg(h.state, k, "r8")))
        h.check("entering a destroyed enclave faults", h.faults(k, "call r8, r1"))
        h.check("the host cannot read the old enclave memory before scrubbing",
                _ld_faults(h, k, "r7"))

    def reclaimed(h, k):
        r7 = reg(h.state, k, "r7")
        h.check("the host reclaims the region as LIN", is_cap(r7, Kind.LIN) and span(r7) == ep)
        h.check("no enclave secret survives reclamation",
                not _has_value(h.state, ep[0], ep[1], secret))

    h.at("created", created)
    h.at("encl_running", running)
    h.at("entered", entered)
    h.at("entered_again", again)
    h.at("destroyed", destroyed)
    h.at("reclaimed", reclaimed)
    return h.run()


def enclave_nested(family="round-robin", seed=0, **kw):
    h = Harness("enclave_nested", family, seed, d=0, **kw)
    s = h.sym
    ep1 = (s["e1"], s["e1_end"])
    ep2 = (s["e2"], s["e12_shared"])
    e12 = (s["e12_shared"], s["e1_end"])
    s1, s2 = 1111, 2222

    def host_created(h, k):
        r8 = reg(h.state, k, "r8")
        h.check("host holds the outer enclave sealed", is_cap(r8, Kind.SEALED) and r8.dom == 1)
        h.check("host exclusive realm excludes the outer enclave",
                not any_overlap(realm_spans(h.state, 0, True), [ep1]))

    def e1_created(h, k):
        st = h.state
        r8, r9 = reg(st, k, "r8"), reg(st, k, "r9")
        h.check("outer enclave creates its child with the same construction",
                is_cap(r8, Kind.REV) and span(r8) == ep2 and is_cap(r9, Kind.SEALED) and r9.dom == 2)
        h.check("outer enclave exclusive realm excludes the child",
                not any_overlap(realm_spans(st, 1, True), [ep2]))

    def e2_running(h, k):
        st = h.state
        h.check("child enclave runs in its own domain", st.threads[k].dom == 2)
        h.check("host realm excludes both enclaves", not any_overlap(realm_spans(st, 0), [ep1]))
        h.check("outer enclave realm excludes the child's private memory",
                not any_overlap(realm_spans(st, 1), [ep2]))
        h.check("child shared region is visible to parent and child only",
                any_overlap(realm_spans(st, 1), [e12]) and any_overlap(realm_spans(st, 2), [e12]))

    def e1_destroyed(h, k):
        st = h.state
        r8 = reg(st, k, "r8")
        h.check("outer enclave destroys its child into UNINIT",
                is_cap(r8, Kind.UNINIT) and span(r8) == ep2)
        h.check("child output was received through the nested shared region",
                reg(st, k, "r10") == 2)
        h.check("old child memory cannot be read before scrubbing", _ld_faults(h, k, "r8"))

    def e1_reclaimed(h, k):
        r8 = reg(h.state, k, "r8")
        h.check("outer enclave reclaims the child region",
                is_cap(r8, Kind.LIN) and not _has_value(h.state, ep2[0], ep2[1], s2))

    def host_destroyed(h, k):
        r7 = reg(h.state, k, "r7")
        h.check("host receives the nested result", reg(h.state, k, "r9") == 2)
        h.check("host destroys the outer enclave into UNINIT",
                is_cap(r7, Kind.UNINIT) and span(r7) == ep1)

    def host_reclaimed(h, k):
        r7 = reg(h.state, k, "r7")
        h.check("host reclaims everything with no secrets left",
                is_cap(r7, Kind.LIN) and not _has_value(h.state, ep1[0], ep1[1], s1)
                and not _has_value(h.state, ep1[0], ep1[1], s2))

    h.at("host_created", host_created)
    h.at("e1_created", e1_created)
    h.at("e2_running", e2_running)
    h.at("e1_destroyed", e1_destroyed)
    h.at("e1_reclaimed", e1_reclaimed)
    h.at("host_destroyed", host_destroyed)
    h.at("host_reclaimed", host_reclaimed)
    return h.run()


def enclave_temporal(family="round-robin", seed=0, **kw):
    h = Harness("enclave_temporal", family, seed, d=0, **kw)
    s = h.sym
    shm = (s["d_shm"], s["d_shm_end"])
    D, E, C = 1, 2, 3

    def prepared(h, k):
        st = h.state
        r9 = reg(st, k, "r9")
        meta = st.mem[s["c_ctx"] + 5]
        em = st.mem[s["shared_d"]]
        h.check("D keeps the senior REV over the shared region", is_cap(r9, Kind.REV) and span(r9) == shm)
        h.check("the emissary carries the junior REV as its metaparameter",
                is_cap(meta, Kind.REV) and span(meta) == shm)
        h.check("the emissary is published as a sealed capability", is_cap(em, Kind.SEALED) and em.dom == C)
        h.check("nobody holds a usable capability to the shared region yet",
                not holders(st, lambda w: w.kind != Kind.REV and overlaps(span(w), shm)))

    def emissary(h, k):
        st = h.state
        ret = reg(st, k, "ret")
        h.check("the emissary runs in its own domain", st.threads[k].dom == C)
        h.check("the emissary is entered by E", is_cap(ret, Kind.SEALEDRET) and ret.dom == E)

    def exclusive(h, k):
        st = h.state
        r1 = reg(st, k, "r1")
        h.check("E obtains exclusive LIN access by revoking the junior REV",
                is_cap(r1, Kind.LIN) and span(r1) == shm)
        h.check("D's realm excludes the shared region while E holds it",
                not any_overlap(realm_spans(st, D), [shm]))
        h.check("host realm excludes the shared region", not any_overlap(realm_spans(st, 0), [shm]))
        h.check("E sees D's data", st.mem[shm[0]] == 42)

    def after_e(h, k):
        h.check("E's write landed in the shared region", h.state.mem[shm[0]] == 99)

    def d_revoked(h, k):
        st = h.state
        r9 = reg(st, k, "r9")
        e_cap = st.mem[s["encl_e"] + 4]
        h.check("D's senior revoke returns the region to D",
                is_cap(r9) and r9.kind in (Kind.LIN, Kind.UNINIT) and span(r9) == shm
                and st.tree.peek_valid(r9.node))
        h.check("E loses access after D's revoke", is_cap(e_cap) and not _valid(h, e_cap))
        h.check("no other domain can use the shared region",
                all(loc == ("reg", k, reg_slot(st, "r9"))
                    for loc, _ in holders(st, lambda w: w.kind != Kind.REV
                                          and overlaps(span(w), shm))))

    h.at("d_prepared", prepared)
    h.at("c_entry", emissary)
    h.at("e_exclusive", exclusive)
    h.at("host_after_e", after_e)
    h.at("d_revoked", d_revoked)
    return h.run()


def reg_slot(state, name):
    from ..isa import reg_index
    return reg_index(name, state.M)


SCENARIOS = {
    "malloc_free": malloc_free,
    "alloc_revoke_uninit": alloc_revoke_uninit,
    "scheduler_preempt": scheduler_preempt,
    "enclave_spatial": enclave_spatial,
    "enclave_nested": enclave_nested,
    "enclave_temporal": enclave_temporal,
    "rust_borrows": rust_borrows,
}

PROGRAM = {
    "malloc_free": "malloc_free",
    "alloc_revoke_uninit": "revoke_uninit",
    "scheduler_preempt": "sched_preempt",
    "enclave_spatial": "enclave_spatial",
    "enclave_nested": "enclave_nested",
    "enclave_temporal": "enclave_temporal",
    "rust_borrows": "rust_borrows",
}


def run_scenario(name: str, family="round-robin", seed=0, **kw) -> dict:
    """Run one scenario; ``digest=True`` adds a hash of the trace and final dump."""
    return SCENARIOS[name](family, seed, **kw)


# ---------------------------------------------------------------------------
# scripted schedules
# ---------------------------------------------------------------------------

class _Bursts:
    """Runs each live thread for a burst of steps, growing burst lengths."""

    def __init__(self, sizes=(5, 9, 3, 14)):
        self.sizes = sizes
        self.i = 0
        self.left = 0
        self.k = -1

    def __call__(self, state):
        live = state.live_threads()
        if not live or state.halted:
            return None
        if self.left <= 0 or self.k not in live:
            self.k = next((t for t in live if t > self.k), live[0])
            self.left = self.sizes[self.i % len(self.sizes)]
            self.i += 1
        self.left -= 1
        return Decision(NORMAL, self.k)


class _Recorder:
    def __init__(self, inner):
        self.inner = inner
        self.lines: list = []
        self.pending = getattr(inner, "pending", None)

    def __call__(self, state):
        dec = self.inner(state)
        if dec is not None:
            self.lines.append(f"except {dec.k}" if dec.s == EXCEPT else str(dec.k))
        return dec


def write_scripts() -> list:
    """Regenerate every shipped ``.sched`` file from a bursty schedule."""
    import capstone_emu.runtime.harness as hm
    written = []
    for name, prog in PROGRAM.items():
        inner = _Bursts()
        if name == "scheduler_preempt":
            inner = Preempt(inner, period=9)
        rec = _Recorder(inner)
        orig = hm.schedule_for
        hm.schedule_for = lambda *_a, **_k: rec
        try:
            if name == "scheduler_preempt":
                _patched = globals()["_sched_schedule"]
                globals()["_sched_schedule"] = lambda f, s: rec
                try:
                    rep = SCENARIOS[name]("round-robin", 0)
                finally:
                    globals()["_sched_schedule"] = _patched
            else:
                rep = SCENARIOS[name]("round-robin", 0)
        finally:
            hm.schedule_for = orig
        if not passed(rep):
            raise RuntimeError(f"{name}: bursty schedule does not pass")
        path = ASM_DIR / f"{prog}.sched"
        path.write_text("# generated: bursts of 5, 9, 3, 14 steps per thread\n"
                        + "\n".join(rec.lines) + "\n")
        written.append(path)
    return written


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="run the end-to-end scenarios")
    ap.add_argument("--write-scripts", action="store_true")
    args = ap.parse_args(argv)
    if args.write_scripts:
        for p in write_scripts():
            print(p)
        return 0
    bad = 0
    for name in SCENARIOS:
        rep = run_scenario(name)
        ok = passed(rep)
        bad += not ok
        print(f"{'PASS' if ok else 'FAIL'} {name} ({rep['steps']} steps)")
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
