"""Hand-derived conformance cases, one table row per case.

Every expected value below was worked out on paper from the instruction
rules; none is produced by running the emulator.  Shared setup: M = 4,
thread 0 in domain 0, pc = LIN RWX [0,16) at cursor 0 (node "pc"), the
instruction under test at address 0.  Unless a case says otherwise, a
successful step leaves pc at cursor 1 and a fault leaves every register
and memory word untouched.
"""

from machinekit import Setup, cap

FAULT = "fault"
U64 = (1 << 64) - 1


class Case:
    def __init__(self, op, name, setup, expect, insn=None, except_=False):
        self.op, self.name, self.setup, self.expect = op, name, setup, expect
        self.insn = insn
        self.except_ = except_
        if insn is not None:
            setup.code = [insn] + setup.code


CASES = []


def case(op, name, insn, expect, except_=False, **setup):
    CASES.append(Case(op, name, Setup(**setup), expect, insn, except_))


def LIN(b, e, a=None, perms="RWX", n="a", **kw):
    return cap("LIN", b, e, a, perms, n, **kw)


def NON(b, e, a=None, perms="RWX", n="a", **kw):
    return cap("NON", b, e, a, perms, n, **kw)


def REV(b, e, a=None, perms="RWX", n="r", **kw):
    return cap("REV", b, e, a, perms, n, **kw)


def UNI(b, e, a=None, perms="RWX", n="a", **kw):
    return cap("UNINIT", b, e, a, perms, n, **kw)


def SEALED(b, e, dom, n="s", **kw):
    return cap("SEALED", b, e, None, "RWX", n, dom=dom, **kw)


def SRET(b, e, dom, reg, n="s", **kw):
    return cap("SEALEDRET", b, e, None, "RWX", n, dom=dom, reg=reg, **kw)


def PC(a, b=0, e=16, n="pc", perms="RWX"):
    return cap("LIN", b, e, a, perms, n)


A = LIN(16, 24)
B = LIN(32, 40, n="b")

# ---------------------------------------------------------------- mov
case("mov", "scalar is copied", "mov r2 r1", {"regs": {"r1": 7, "r2": 7}}, regs={"r1": 7})
case("mov", "LIN moves and zeroes the source", "mov r2 r1",
     {"regs": {"r1": 0, "r2": A}}, regs={"r1": A})
case("mov", "NON is copied", "mov r2 r1",
     {"regs": {"r1": NON(16, 24), "r2": NON(16, 24)}}, regs={"r1": NON(16, 24)})
case("mov", "SEALED moves", "mov r3 r1",
     {"regs": {"r1": 0, "r3": SEALED(32, 40, 3)}}, regs={"r1": SEALED(32, 40, 3)})
case("mov", "REV moves", "mov r4 r2",
     {"regs": {"r2": 0, "r4": REV(16, 24, via=("mrev", "a"))}},
     regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))})
case("mov", "self-move of a linear word ends with the zeroed source", "mov r1 r1",
     {"regs": {"r1": 0}}, regs={"r1": A})

# ---------------------------------------------------------------- ld
case("ld", "scalar through LIN RWX", "ld r2 r1",
     {"regs": {"r2": 5}, "mem": {16: 5}}, regs={"r1": A}, mem={16: 5})
case("ld", "LIN word through writable cap moves out of memory", "ld r2 r1",
     {"regs": {"r2": B}, "mem": {16: 0}}, regs={"r1": A}, mem={16: B})
case("ld", "NON word through read-only NON is copied", "ld r2 r1",
     {"regs": {"r2": NON(32, 40, n="b")}, "mem": {16: NON(32, 40, n="b")}},
     regs={"r1": NON(16, 24, perms="R")}, mem={16: NON(32, 40, n="b")})
case("ld", "scalar through RX", "ld r2 r1", {"regs": {"r2": 9}},
     regs={"r1": LIN(16, 24, 17, "RX")}, mem={17: 9})
case("ld", "linear word through read-only cap faults", "ld r2 r1", FAULT,
     regs={"r1": NON(16, 24, perms="R")}, mem={16: B})
case("ld", "RW is not readable", "ld r2 r1", FAULT, regs={"r1": LIN(16, 24, perms="RW")}, mem={16: 1})
case("ld", "UNINIT is not readable", "ld r2 r1", FAULT, regs={"r1": UNI(16, 24)})
case("ld", "cursor at end is out of bounds", "ld r2 r1", FAULT, regs={"r1": LIN(16, 24, 24)})
case("ld", "cursor below base is out of bounds", "ld r2 r1", FAULT, regs={"r1": LIN(16, 24, 15)})
case("ld", "SEALED is not accessible", "ld r2 r1", FAULT, regs={"r1": SEALED(16, 24, 2)})
case("ld", "REV is not accessible", "ld r2 r3", FAULT,
     regs={"r1": A, "r3": REV(16, 24, via=("mrev", "a"))})
case("ld", "revoked capability", "ld r2 r1", FAULT, regs={"r1": A}, revoked=["a"])
case("ld", "scalar source operand", "ld r2 r1", FAULT, regs={"r1": 16})

# ---------------------------------------------------------------- sd
case("sd", "scalar through LIN RW keeps the cursor", "sd r1 r2",
     {"regs": {"r1": LIN(16, 24, 17, "RW"), "r2": 9}, "mem": {17: 9}},
     regs={"r1": LIN(16, 24, 17, "RW"), "r2": 9})
case("sd", "UNINIT advances its cursor", "sd r1 r2",
     {"regs": {"r1": UNI(16, 24, 17)}, "mem": {16: 9}}, regs={"r1": UNI(16, 24), "r2": 9})
case("sd", "LIN word moves into memory", "sd r1 r2",
     {"regs": {"r2": 0, "r1": A}, "mem": {16: B}}, regs={"r1": A, "r2": B})
case("sd", "scalar through NON RWX", "sd r1 r2", {"mem": {20: 3}},
     regs={"r1": NON(16, 24, 20), "r2": 3})
case("sd", "read-only cap faults", "sd r1 r2", FAULT, regs={"r1": NON(16, 24, perms="R"), "r2": 1})
case("sd", "RX cap faults", "sd r1 r2", FAULT, regs={"r1": LIN(16, 24, perms="RX"), "r2": 1})
case("sd", "REV is not accessible", "sd r3 r2", FAULT,
     regs={"r1": A, "r2": 1, "r3": REV(16, 24, via=("mrev", "a"))})
case("sd", "cursor out of bounds", "sd r1 r2", FAULT, regs={"r1": LIN(16, 24, 30), "r2": 1})
case("sd", "revoked capability", "sd r1 r2", FAULT, regs={"r1": A, "r2": 1}, revoked=["a"])
case("sd", "scalar target operand", "sd r1 r2", FAULT, regs={"r1": 16, "r2": 1})
case("sd", "storing a linear capability through itself faults", "sd r1 r1", FAULT, regs={"r1": A})

# ---------------------------------------------------------------- tighten
case("tighten", "RWX with code 0 gives R", "tighten r1 r2",
     {"regs": {"r1": LIN(16, 24, perms="R")}}, regs={"r1": A, "r2": 0})
case("tighten", "R with code 1 (RW) gives NA", "tighten r1 r2",
     {"regs": {"r1": LIN(16, 24, perms="NA")}}, regs={"r1": LIN(16, 24, perms="R"), "r2": 1})
case("tighten", "unknown code gives NA", "tighten r1 r2",
     {"regs": {"r1": LIN(16, 24, perms="NA")}}, regs={"r1": A, "r2": 7})
case("tighten", "RX with code 2 keeps RX", "tighten r1 r2",
     {"regs": {"r1": NON(16, 24, perms="RX")}}, regs={"r1": NON(16, 24, perms="RX"), "r2": 2})
case("tighten", "applies to sealed capabilities too", "tighten r1 r2",
     {"regs": {"r1": cap("SEALED", 32, 40, None, "R", "s", dom=2)}},
     regs={"r1": SEALED(32, 40, 2), "r2": 0})
case("tighten", "scalar target", "tighten r1 r2", FAULT, regs={"r1": 4, "r2": 0})
case("tighten", "capability as code", "tighten r1 r2", FAULT, regs={"r1": A, "r2": B})
case("tighten", "revoked capability", "tighten r1 r2", FAULT, regs={"r1": A, "r2": 0}, revoked=["a"])

# ---------------------------------------------------------------- shrink
case("shrink", "LIN bounds narrow, cursor kept", "shrink r1 r2 r3",
     {"regs": {"r1": LIN(20, 24, 16)}}, regs={"r1": LIN(16, 32), "r2": 20, "r3": 24})
case("shrink", "NON bounds narrow", "shrink r1 r2 r3",
     {"regs": {"r1": NON(16, 20)}}, regs={"r1": NON(16, 24), "r2": 16, "r3": 20})
case("shrink", "same bounds are allowed", "shrink r1 r2 r3",
     {"regs": {"r1": A}}, regs={"r1": A, "r2": 16, "r3": 24})
case("shrink", "empty range faults", "shrink r1 r2 r3", FAULT, regs={"r1": A, "r2": 20, "r3": 20})
case("shrink", "end beyond the original faults", "shrink r1 r2 r3", FAULT,
     regs={"r1": A, "r2": 16, "r3": 25})
case("shrink", "base below the original faults", "shrink r1 r2 r3", FAULT,
     regs={"r1": A, "r2": 15, "r3": 20})
case("shrink", "REV cannot shrink", "shrink r4 r2 r3", FAULT,
     regs={"r1": A, "r2": 16, "r3": 20, "r4": REV(16, 24, via=("mrev", "a"))})
case("shrink", "UNINIT cannot shrink", "shrink r1 r2 r3", FAULT,
     regs={"r1": UNI(16, 24), "r2": 16, "r3": 20})
case("shrink", "capability bound operand", "shrink r1 r2 r3", FAULT, regs={"r1": A, "r2": B, "r3": 20})
case("shrink", "revoked capability", "shrink r1 r2 r3", FAULT,
     regs={"r1": A, "r2": 16, "r3": 20}, revoked=["a"])

# ---------------------------------------------------------------- split
case("split", "LIN splits at the pivot with a fresh sibling node", "split r1 r2 r3",
     {"regs": {"r1": LIN(16, 24, 18), "r2": LIN(24, 32, 18, n="new")},
      "entry": {"new": ("ROOT", "RLIN")}},
     regs={"r1": LIN(16, 32, 18), "r3": 24})
case("split", "sibling inherits a REV parent", "split r1 r2 r3",
     {"regs": {"r1": LIN(16, 20), "r2": LIN(20, 24, 16, n="new")}, "entry": {"new": ("r", "RLIN")}},
     regs={"r1": A, "r3": 20, "r4": REV(16, 24, via=("mrev", "a"))})
case("split", "pivot at base faults", "split r1 r2 r3", FAULT, regs={"r1": A, "r3": 16})
case("split", "pivot at end faults", "split r1 r2 r3", FAULT, regs={"r1": A, "r3": 24})
case("split", "NON cannot split", "split r1 r2 r3", FAULT, regs={"r1": NON(16, 24), "r3": 20})
case("split", "revoked capability", "split r1 r2 r3", FAULT, regs={"r1": A, "r3": 20}, revoked=["a"])
case("split", "capability pivot operand", "split r1 r2 r3", FAULT, regs={"r1": A, "r3": B})

# ---------------------------------------------------------------- delin
case("delin", "LIN becomes NON and its node RNON", "delin r1",
     {"regs": {"r1": NON(16, 24)}, "entry": {"a": ("ROOT", "RNON")}}, regs={"r1": A})
case("delin", "child of a REV keeps its parent", "delin r1",
     {"regs": {"r1": NON(16, 24)}, "entry": {"a": ("r", "RNON")}},
     regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))})
case("delin", "NON faults", "delin r1", FAULT, regs={"r1": NON(16, 24)})
case("delin", "REV faults", "delin r2", FAULT, regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))})
case("delin", "UNINIT faults", "delin r1", FAULT, regs={"r1": UNI(16, 24)})
case("delin", "scalar faults", "delin r1", FAULT, regs={"r1": 3})
case("delin", "revoked capability", "delin r1", FAULT, regs={"r1": A}, revoked=["a"])

# ---------------------------------------------------------------- scc
case("scc", "LIN cursor set", "scc r1 r2", {"regs": {"r1": LIN(16, 24, 20)}}, regs={"r1": A, "r2": 20})
case("scc", "NON cursor may leave the bounds", "scc r1 r2",
     {"regs": {"r1": NON(16, 24, 99)}}, regs={"r1": NON(16, 24), "r2": 99})
case("scc", "REV cursor set", "scc r2 r3", {"regs": {"r2": REV(16, 24, 21, via=("mrev", "a"))}},
     regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a")), "r3": 21})
case("scc", "revoked capability still takes a cursor", "scc r1 r2",
     {"regs": {"r1": LIN(16, 24, 19)}}, regs={"r1": A, "r2": 19}, revoked=["a"])
case("scc", "SEALED faults", "scc r1 r2", FAULT, regs={"r1": SEALED(32, 40, 2), "r2": 33})
case("scc", "SEALEDRET faults", "scc r1 r2", FAULT, regs={"r1": SRET(32, 40, 0, "r1"), "r2": 33})
case("scc", "UNINIT faults", "scc r1 r2", FAULT, regs={"r1": UNI(16, 24), "r2": 20})
case("scc", "capability cursor operand", "scc r1 r2", FAULT, regs={"r1": A, "r2": B})
case("scc", "scalar target", "scc r1 r2", FAULT, regs={"r1": 1, "r2": 2})

# ---------------------------------------------------------------- lcc
case("lcc", "cursor of a LIN", "lcc r2 r1", {"regs": {"r2": 18, "r1": LIN(16, 24, 18)}},
     regs={"r1": LIN(16, 24, 18)})
case("lcc", "cursor of a SEALED", "lcc r2 r1", {"regs": {"r2": 32}}, regs={"r1": SEALED(32, 40, 2)})
case("lcc", "cursor of a revoked capability", "lcc r2 r1", {"regs": {"r2": 16}},
     regs={"r1": A}, revoked=["a"])
case("lcc", "overwriting the source register", "lcc r1 r1", {"regs": {"r1": 21}},
     regs={"r1": LIN(16, 24, 21)})
case("lcc", "scalar source faults", "lcc r2 r1", FAULT, regs={"r1": 16})

# ---------------------------------------------------------------- mrev
case("mrev", "REV over the same range on a fresh node; LIN moves under it", "mrev r2 r1",
     {"regs": {"r1": LIN(16, 24, 18), "r2": REV(16, 24, 18, n="new")},
      "entry": {"new": ("ROOT", "RLIN"), "a": ("new", "RLIN")}},
     regs={"r1": LIN(16, 24, 18)})
case("mrev", "second mrev nests under the first", "mrev r3 r1",
     {"regs": {"r3": REV(16, 24, n="new")}, "entry": {"new": ("r", "RLIN"), "a": ("new", "RLIN")}},
     regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))})
case("mrev", "NON faults", "mrev r2 r1", FAULT, regs={"r1": NON(16, 24)})
case("mrev", "REV faults", "mrev r3 r2", FAULT, regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))})
case("mrev", "UNINIT faults", "mrev r2 r1", FAULT, regs={"r1": UNI(16, 24)})
case("mrev", "scalar faults", "mrev r2 r1", FAULT, regs={"r1": 0})
case("mrev", "revoked capability", "mrev r2 r1", FAULT, regs={"r1": A}, revoked=["a"])

# ---------------------------------------------------------------- revoke
case("revoke", "no children gives LIN", "revoke r1", {"regs": {"r1": LIN(16, 24, 20, n="r")}},
     regs={"r1": REV(16, 24, 20)})
case("revoke", "live RLIN child gives UNINIT at base", "revoke r2",
     {"regs": {"r2": UNI(16, 24, 16, n="r")}, "valid": {"a": False, "r": True}},
     regs={"r1": LIN(16, 24, 20), "r2": REV(16, 24, 20, via=("mrev", "a"))})
case("revoke", "read-only REV with RLIN child gives LIN", "revoke r2",
     {"regs": {"r2": LIN(16, 24, perms="R", n="r")}, "valid": {"a": False}},
     regs={"r1": LIN(16, 24, perms="R"), "r2": REV(16, 24, perms="R", via=("mrev", "a"))})
case("revoke", "RX REV with RLIN child gives LIN", "revoke r2",
     {"regs": {"r2": LIN(16, 24, perms="RX", n="r")}},
     regs={"r1": LIN(16, 24, perms="RX"), "r2": REV(16, 24, perms="RX", via=("mrev", "a"))})
case("revoke", "only non-linear children gives LIN", "revoke r2",
     {"regs": {"r2": LIN(16, 24, n="r")}, "valid": {"a": False}},
     regs={"r1": NON(16, 24), "r3": NON(16, 24), "r2": REV(16, 24, via=("mrev", "a"))})
case("revoke", "LIN faults", "revoke r1", FAULT, regs={"r1": A})
case("revoke", "revoked REV faults", "revoke r2", FAULT,
     regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))}, revoked=["r"])
case("revoke", "scalar faults", "revoke r1", FAULT, regs={"r1": 5})

# ---------------------------------------------------------------- drop
case("drop", "LIN is dropped", "drop r1", {"regs": {"r1": 0}}, regs={"r1": A})
case("drop", "REV drop hands its children to its parent", "drop r2",
     {"regs": {"r2": 0}, "valid": {"a": True}, "entry": {"a": ("ROOT", "RLIN")}},
     regs={"r1": A, "r2": REV(16, 24, via=("mrev", "a"))})
case("drop", "SEALED is dropped", "drop r1", {"regs": {"r1": 0}}, regs={"r1": SEALED(32, 40, 2)})
case("drop", "UNINIT is dropped", "drop r1", {"regs": {"r1": 0}}, regs={"r1": UNI(16, 24)})
case("drop", "NON faults", "drop r1", FAULT, regs={"r1": NON(16, 24)})
case("drop", "scalar faults", "drop r1", FAULT, regs={"r1": 0})
case("drop", "revoked capability", "drop r1", FAULT, regs={"r1": A}, revoked=["a"])

# ---------------------------------------------------------------- init
case("init", "UNINIT at its end becomes LIN", "init r1", {"regs": {"r1": LIN(16, 24, 24)}},
     regs={"r1": UNI(16, 24, 24)})
case("init", "cursor short of the end faults", "init r1", FAULT, regs={"r1": UNI(16, 24, 23)})
case("init", "LIN faults", "init r1", FAULT, regs={"r1": LIN(16, 24, 24)})
case("init", "scalar faults", "init r1", FAULT, regs={"r1": 24})
case("init", "revoked capability", "init r1", FAULT, regs={"r1": UNI(16, 24, 24)}, revoked=["a"])

# ---------------------------------------------------------------- seal
case("seal", "LIN RWX becomes SEALED(N) and N grows", "seal r1",
     {"regs": {"r1": SEALED(32, 40, 5, n="b")}, "N": 6}, regs={"r1": B}, N=5)
case("seal", "RW is not readable", "seal r1", FAULT, regs={"r1": LIN(32, 40, perms="RW", n="b")})
case("seal", "R is not writable", "seal r1", FAULT, regs={"r1": LIN(32, 40, perms="R", n="b")})
case("seal", "NON faults", "seal r1", FAULT, regs={"r1": NON(32, 40, n="b")})
case("seal", "UNINIT faults", "seal r1", FAULT, regs={"r1": UNI(32, 40, n="b")})
case("seal", "revoked capability", "seal r1", FAULT, regs={"r1": B}, revoked=["b"])
case("seal", "scalar faults", "seal r1", FAULT, regs={"r1": 32})

# ---------------------------------------------------------------- call
# Callee context region [32, 40): 32 pc, 33 reserved, 34 epc, 35 ret, 36..39 r1..r4
CALLEE_PC = cap("LIN", 40, 48, 41, "RWX", "cp")
CTX = {32: CALLEE_PC, 34: 0, 35: 0, 36: 11, 37: 12, 38: 13, 39: 14}
case("call", "enters the callee and saves the caller", "call r1 r2",
     {"regs": {"pc": CALLEE_PC, "epc": 0, "ret": SRET(32, 40, 0, "r1"), "r1": 77, "r2": 12,
               "r3": 13, "r4": 14},
      "mem": {32: PC(1), 33: 0, 34: 0, 35: 0, 36: 0, 37: 77, 38: A, 39: 0},
      "dom": 5},
     regs={"r1": SEALED(32, 40, 5), "r2": 77, "r3": A}, mem=dict(CTX))
case("call", "linear argument moves", "call r1 r2",
     {"regs": {"r1": A}, "mem": {37: 0}, "dom": 5},
     regs={"r1": SEALED(32, 40, 5), "r2": A}, mem=dict(CTX))
case("call", "NON target faults", "call r1 r2", FAULT, regs={"r1": NON(32, 40, n="s"), "r2": 0}, mem=dict(CTX))
case("call", "SEALEDRET target faults", "call r1 r2", FAULT,
     regs={"r1": SRET(32, 40, 0, "r1"), "r2": 0}, mem=dict(CTX))
case("call", "region smaller than a context faults", "call r1 r2", FAULT,
     regs={"r1": SEALED(32, 39, 5), "r2": 0}, mem=dict(CTX))
case("call", "revoked target faults", "call r1 r2", FAULT,
     regs={"r1": SEALED(32, 40, 5), "r2": 0}, mem=dict(CTX), revoked=["s"])
case("call", "scalar target faults", "call r1 r2", FAULT, regs={"r1": 32, "r2": 0})
case("call", "passing the target as its own argument faults", "call r1 r1", FAULT,
     regs={"r1": SEALED(32, 40, 5)}, mem=dict(CTX))

# ---------------------------------------------------------------- return
CALLER_PC = cap("LIN", 48, 56, 50, "RWX", "cp")
RCTX = {32: CALLER_PC, 34: 0, 35: 0, 36: 21, 37: 22, 38: 23, 39: 24}
case("return", "restores the caller and delivers the payload", "return r1 r2",
     {"regs": {"pc": CALLER_PC, "epc": 0, "ret": 0, "r1": 21, "r2": 22, "r3": 55, "r4": 24},
      "mem": {a: 0 for a in range(32, 40)}, "dom": 0},
     regs={"r1": SRET(32, 40, 0, "r3"), "r2": 55}, mem=dict(RCTX))
case("return", "linear payload lands in the named register", "return r1 r2",
     {"regs": {"ret": A, "r2": 22}, "dom": 0},
     regs={"r1": SRET(32, 40, 0, "ret"), "r2": A}, mem=dict(RCTX))
case("return", "SEALED target faults", "return r1 r2", FAULT,
     regs={"r1": SEALED(32, 40, 0), "r2": 0}, mem=dict(RCTX))
case("return", "region smaller than a context faults", "return r1 r2", FAULT,
     regs={"r1": SRET(32, 39, 0, "r3"), "r2": 0}, mem=dict(RCTX))
case("return", "revoked target faults", "return r1 r2", FAULT,
     regs={"r1": SRET(32, 40, 0, "r3"), "r2": 0}, mem=dict(RCTX), revoked=["s"])
case("return", "scalar target faults", "return r1 r2", FAULT, regs={"r1": 0, "r2": 0})

# ---------------------------------------------------------------- retseal
case("retseal", "restores the caller, hands back SEALED, saves the callee", "retseal r1 r2",
     {"regs": {"pc": CALLER_PC, "r1": 21, "r2": 22, "r3": SEALED(32, 40, 0), "r4": 24},
      "mem": {32: PC(9), 33: 0, 34: 0, 35: 0, 36: 0, 37: 9, 38: 0, 39: 0}, "dom": 0},
     regs={"r1": SRET(32, 40, 0, "r3"), "r2": 9}, mem=dict(RCTX))
case("retseal", "capability resume address faults", "retseal r1 r2", FAULT,
     regs={"r1": SRET(32, 40, 0, "r3"), "r2": A}, mem=dict(RCTX))
case("retseal", "SEALED target faults", "retseal r1 r2", FAULT,
     regs={"r1": SEALED(32, 40, 0), "r2": 0}, mem=dict(RCTX))
case("retseal", "region smaller than a context faults", "retseal r1 r2", FAULT,
     regs={"r1": SRET(32, 39, 0, "r3"), "r2": 0}, mem=dict(RCTX))
case("retseal", "revoked target faults", "retseal r1 r2", FAULT,
     regs={"r1": SRET(32, 40, 0, "r3"), "r2": 0}, mem=dict(RCTX), revoked=["s"])
case("retseal", "scalar target faults", "retseal r1 r2", FAULT, regs={"r1": 0, "r2": 0})

# ---------------------------------------------------------------- except
case("except", "enters the handler in epc without advancing pc", None,
     {"regs": {"pc": CALLEE_PC, "ret": SRET(32, 40, 0, "epc"), "r1": 0, "r2": 12, "epc": 0},
      "mem": {32: PC(0), 34: 0, 36: 7, 37: A}, "dom": 5},
     except_=True, epc=SEALED(32, 40, 5), regs={"r1": 7, "r2": A}, mem=dict(CTX))
case("except", "unset epc faults", None, FAULT, except_=True, regs={"r1": 7})
case("except", "NON epc faults", None, FAULT, except_=True, epc=NON(32, 40, n="s"), mem=dict(CTX))
case("except", "SEALEDRET epc faults", None, FAULT, except_=True, epc=SRET(32, 40, 0, "r1"),
     mem=dict(CTX))
case("except", "undersized handler region faults", None, FAULT, except_=True,
     epc=SEALED(32, 39, 5), mem=dict(CTX))
case("except", "revoked handler faults", None, FAULT, except_=True, epc=SEALED(32, 40, 5),
     mem=dict(CTX), revoked=["s"])

case("except", "instruction form passes its immediate and saves pc unadvanced", "except 9",
     {"regs": {"pc": CALLEE_PC, "ret": SRET(32, 40, 0, "epc"), "r1": 9},
      "mem": {32: PC(0), 36: 7}, "dom": 5},
     epc=SEALED(32, 40, 5), regs={"r1": 7}, mem=dict(CTX))
case("except", "instruction form with unset epc faults", "except 9", FAULT, regs={"r1": 7})

# ---------------------------------------------------------------- jmp
case("jmp", "jumps to the scalar", "jmp r1", {"regs": {"pc": PC(9)}}, regs={"r1": 9})
case("jmp", "jump to self", "jmp r1", {"regs": {"pc": PC(0)}}, regs={"r1": 0})
case("jmp", "target outside the bounds is taken", "jmp r1", {"regs": {"pc": PC(1000)}},
     regs={"r1": 1000})
case("jmp", "NON pc keeps its type", "jmp r1", {"regs": {"pc": cap("NON", 0, 16, 5, "RX", "pc")}},
     regs={"r1": 5}, pc=cap("NON", 0, 16, 0, "RX", "pc"))
case("jmp", "capability target faults", "jmp r1", FAULT, regs={"r1": A})

# ---------------------------------------------------------------- jnz
case("jnz", "nonzero condition jumps", "jnz r1 r2", {"regs": {"pc": PC(9)}}, regs={"r1": 9, "r2": 1})
case("jnz", "zero condition falls through", "jnz r1 r2", {"regs": {"pc": PC(1)}},
     regs={"r1": 9, "r2": 0})
case("jnz", "large condition jumps to zero", "jnz r1 r2", {"regs": {"pc": PC(0)}},
     regs={"r1": 0, "r2": U64})
case("jnz", "capability condition faults", "jnz r1 r2", FAULT, regs={"r1": 9, "r2": A})
case("jnz", "capability target faults even when not taken", "jnz r1 r2", FAULT,
     regs={"r1": A, "r2": 0})

# ---------------------------------------------------------------- li
case("li", "loads a small immediate", "li r1 5", {"regs": {"r1": 5}})
case("li", "loads the largest immediate", f"li r2 {U64}", {"regs": {"r2": U64}})
case("li", "overwrites a capability", "li r1 0", {"regs": {"r1": 0}}, regs={"r1": A})
case("li", "into epc", "li epc 3", {"regs": {"epc": 3}})
case("li", "into pc leaves no pc to advance", "li pc 4", FAULT)

# ---------------------------------------------------------------- add
case("add", "adds scalars", "add r1 r2", {"regs": {"r1": 5, "r2": 3}}, regs={"r1": 2, "r2": 3})
case("add", "wraps at 64 bits", "add r1 r2", {"regs": {"r1": 1}}, regs={"r1": U64, "r2": 2})
case("add", "doubles in place", "add r1 r1", {"regs": {"r1": 14}}, regs={"r1": 7})
case("add", "capability destination faults", "add r1 r2", FAULT, regs={"r1": A, "r2": 1})
case("add", "capability source faults", "add r1 r2", FAULT, regs={"r1": 1, "r2": A})

# ---------------------------------------------------------------- lt
case("lt", "less gives 1", "lt r3 r1 r2", {"regs": {"r3": 1}}, regs={"r1": 3, "r2": 4})
case("lt", "equal gives 0", "lt r3 r1 r2", {"regs": {"r3": 0}}, regs={"r1": 3, "r2": 3})
case("lt", "greater gives 0", "lt r3 r1 r2", {"regs": {"r3": 0}}, regs={"r1": 4, "r2": 3, "r3": 9})
case("lt", "result overwrites a capability", "lt r3 r1 r2", {"regs": {"r3": 1}},
     regs={"r1": 0, "r2": U64, "r3": A})
case("lt", "capability first operand faults", "lt r3 r1 r2", FAULT, regs={"r1": A, "r2": 3})
case("lt", "capability second operand faults", "lt r3 r1 r2", FAULT, regs={"r1": 3, "r2": A})

# ---------------------------------------------------------------- invalid (fetch failures)
case("invalid", "explicit invalid instruction", "invalid", FAULT)
case("invalid", "scalar word at pc", None, FAULT, mem={0: 42})
case("invalid", "UNINIT pc cannot execute", "li r1 1", FAULT, pc=cap("UNINIT", 0, 16, 0, "RWX", "pc"))
case("invalid", "RW pc cannot execute", "li r1 1", FAULT, pc=cap("LIN", 0, 16, 0, "RW", "pc"))
case("invalid", "pc cursor out of bounds", None, FAULT, pc=cap("LIN", 0, 16, 16, "RWX", "pc"),
     mem={16: 0})
case("invalid", "revoked pc", "li r1 1", FAULT, revoked=["pc"])
case("invalid", "scalar pc", None, FAULT, pc=None, regs={"pc": 0})
