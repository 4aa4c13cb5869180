"""Register names and the instruction table."""

from __future__ import annotations

from .words import Insn

PC, EPC, RET = 0, 1, 2
GPR0 = 3  # index of r1
DEFAULT_M = 31


def reg_index(name: str, M: int = DEFAULT_M) -> int:
    if name == "pc":
        return PC
    if name == "epc":
        return EPC
    if name == "ret":
        return RET
    if name.startswith("r") and name[1:].isdigit():
        i = int(name[1:])
        if 1 <= i <= M and str(i) == name[1:]:
            return GPR0 + i - 1
    raise ValueError(f"unknown register {name!r}")


def reg_name(i: int) -> str:
    if i == PC:
        return "pc"
    if i == EPC:
        return "epc"
    if i == RET:
        return "ret"
    return f"r{i - GPR0 + 1}"


def gpr(i: int) -> int:
    """Register index of r<i>."""
    return GPR0 + i - 1


# operand signature: R = register, N = immediate natural number
SIGNATURES = {
    "mov": "RR", "ld": "RR", "sd": "RR",
    "tighten": "RR", "shrink": "RRR", "split": "RRR", "delin": "R",
    "scc": "RR", "lcc": "RR",
    "mrev": "RR", "revoke": "R", "drop": "R", "init": "R",
    "seal": "R", "call": "RR", "return": "RR", "retseal": "RR", "except": "N",
    "jmp": "R", "jnz": "RR", "li": "RN", "add": "RR", "lt": "RRR",
    "invalid": "",
}

MNEMONICS = tuple(SIGNATURES)


def make(op: str, *args) -> Insn:
    sig = SIGNATURES[op]
    if len(sig) != len(args):
        raise ValueError(f"{op} takes {len(sig)} operands")
    return Insn(op, args)


def insn_text(i: Insn) -> str:
    sig = SIGNATURES.get(i.op, "")
    parts = [i.op]
    for kind, a in zip(sig, i.args):
        parts.append(reg_name(a) if kind == "R" else str(a))
    return " ".join(parts)


def parse_insn(text: str, M: int = DEFAULT_M) -> Insn:
    """Parse the canonical text form produced by :func:`insn_text`."""
    toks = text.replace(",", " ").split()
    if not toks or toks[0] not in SIGNATURES:
        raise ValueError(f"bad instruction {text!r}")
    op = toks[0]
    sig = SIGNATURES[op]
    if len(toks) - 1 != len(sig):
        raise ValueError(f"{op} takes {len(sig)} operands: {text!r}")
    args = []
    for kind, t in zip(sig, toks[1:]):
        if kind == "R":
            args.append(reg_index(t, M))
        else:
            args.append(int(t, 0))
    return Insn(op, args)
