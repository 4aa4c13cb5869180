"""Machine words: permissions, capability types, capabilities and instructions.

A word is one of three things:

* a plain ``int`` (natural-number scalar, the zero word is ``0``),
* a :class:`Cap` (capability),
* an :class:`Insn` (instruction).

Capabilities and instructions are immutable, so words can be shared freely
between register files, memory snapshots and dumps.
"""

from __future__ import annotations

from enum import IntEnum

NAT_MASK = (1 << 64) - 1


# ---------------------------------------------------------------------------
# Permissions
# ---------------------------------------------------------------------------

class Perms(IntEnum):
    NA = 0
    R = 1
    RW = 2
    RX = 3
    RWX = 4


_PERM_ABOVE = {
    Perms.NA: frozenset(Perms),
    Perms.R: frozenset({Perms.R, Perms.RW, Perms.RX, Perms.RWX}),
    Perms.RW: frozenset({Perms.RW, Perms.RWX}),
    Perms.RX: frozenset({Perms.RX, Perms.RWX}),
    Perms.RWX: frozenset({Perms.RWX}),
}


def perm_leq(p1: Perms, p2: Perms) -> bool:
    """True iff p1 grants no more than p2."""
    return p2 in _PERM_ABOVE[p1]


def decode_perm(n: int) -> Perms:
    return {0: Perms.R, 1: Perms.RW, 2: Perms.RX, 3: Perms.RWX}.get(n, Perms.NA)


def encode_perm(p: Perms) -> int:
    return {Perms.R: 0, Perms.RW: 1, Perms.RX: 2, Perms.RWX: 3}.get(p, 4)


def tighten_perm(p: Perms, q: Perms) -> Perms:
    return q if perm_leq(q, p) else Perms.NA


# ---------------------------------------------------------------------------
# Capability types
# ---------------------------------------------------------------------------

class Kind(IntEnum):
    LIN = 0
    NON = 1
    REV = 2
    UNINIT = 3
    SEALED = 4
    SEALEDRET = 5


LINEAR_KINDS = frozenset({Kind.LIN, Kind.REV, Kind.UNINIT, Kind.SEALED, Kind.SEALEDRET})


class Cap:
    """An unpacked capability (type, base, end, cursor, perms, node).

    Sealed types carry the owning domain in ``dom``; sealed-return types also
    carry the register to receive the return payload in ``reg`` (a register
    index, see :mod:`capstone_emu.isa`).
    """

    __slots__ = ("kind", "base", "end", "cursor", "perms", "node", "dom", "reg", "_h")

    def __init__(self, kind, base, end, cursor, perms, node, dom=-1, reg=-1):
        self.kind = kind
        self.base = base
        self.end = end
        self.cursor = cursor
        self.perms = perms
        self.node = node
        self.dom = dom
        self.reg = reg
        self._h = None

    def key(self):
        return (self.kind, self.base, self.end, self.cursor, self.perms,
                self.node, self.dom, self.reg)

    def __eq__(self, other):
        if other.__class__ is not Cap:
            return False
        return self is other or self.key() == other.key()

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        h = self._h
        if h is None:
            h = self._h = hash(self.key())
        return h

    def __repr__(self):
        return f"Cap({cap_text(self)})"

    def replace(self, **kw) -> Cap:
        c = Cap(self.kind, self.base, self.end, self.cursor, self.perms,
                self.node, self.dom, self.reg)
        for k, v in kw.items():
            setattr(c, k, v)
        return c

    # -- Table-style predicates ------------------------------------------
    @property
    def linear(self) -> bool:
        return self.kind in LINEAR_KINDS

    def in_bound(self) -> bool:
        return self.base <= self.cursor < self.end

    def readable(self) -> bool:
        return self.perms in (Perms.R, Perms.RX, Perms.RWX) and self.kind != Kind.UNINIT

    def writable(self) -> bool:
        return self.perms in (Perms.RW, Perms.RWX)

    def executable(self) -> bool:
        return self.perms in (Perms.RX, Perms.RWX) and self.kind != Kind.UNINIT

    def accessible(self) -> bool:
        return self.kind in (Kind.LIN, Kind.NON, Kind.UNINIT)

    def overlaps(self, other: Cap) -> bool:
        return self.base < other.end and other.base < self.end


def is_cap(w) -> bool:
    return w.__class__ is Cap


def is_nat(w) -> bool:
    return w.__class__ is int


def is_linear(w) -> bool:
    return w.__class__ is Cap and w.kind in LINEAR_KINDS


def moved(w):
    """The word left behind when ``w`` is moved out of a location."""
    if w.__class__ is Cap and w.kind in LINEAR_KINDS:
        return 0
    return w


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------

class Insn:
    """An instruction word: mnemonic plus operands.

    Register operands are register indices (ints); immediates for ``li`` and
    ``except`` are plain ints as well, the mnemonic decides which is which.
    """

    __slots__ = ("op", "args")

    def __init__(self, op: str, args=()):
        self.op = op
        self.args = tuple(args)

    def __eq__(self, other):
        return other.__class__ is Insn and self.op == other.op and self.args == other.args

    def __ne__(self, other):
        return not self.__eq__(other)

    def __hash__(self):
        return hash((self.op, self.args))

    def __repr__(self):
        from .isa import insn_text
        return f"Insn({insn_text(self)})"


INVALID = Insn("invalid")


# ---------------------------------------------------------------------------
# Text forms (used by dumps and the disassembler)
# ---------------------------------------------------------------------------

def kind_text(c: Cap) -> str:
    from .isa import reg_name
    if c.kind == Kind.SEALED:
        return f"SEALED({c.dom})"
    if c.kind == Kind.SEALEDRET:
        return f"SEALEDRET({c.dom},{reg_name(c.reg)})"
    return c.kind.name


def cap_text(c: Cap) -> str:
    return (f"{kind_text(c)} [{c.base},{c.end}) a={c.cursor} "
            f"{c.perms.name} n={c.node}")
