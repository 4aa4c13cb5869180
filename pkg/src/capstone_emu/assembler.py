"""Two-pass macro assembler and disassembler for the machine's assembly language.

Syntax, one statement per line (``;`` or ``#`` start a comment)::

    label:                      define a label at the current address
    li r1, 5                    instruction (operands separated by commas or blanks)
    .word expr[, expr ...]      scalar data
    .zero n                     n zero words
    .org expr                   move the location counter
    .equ NAME, expr             named constant
    .entry expr                 entry address of thread 0 (default: label ``start`` or 0)
    .thread entry, base, end    add a thread running from ``entry`` over [base, end)
    .shared base, end           NON region handed to every thread
    .macro name a, b ... .endm  textual macro; ``\\a`` substitutes an argument,
                                ``%x`` is a label local to each expansion
    .include "file"             (file-based assembly only)

Expressions combine integers, labels and constants with ``+ - * // ( )``.
"""

from __future__ import annotations

import ast
import os
import re

from .image import Image, ThreadSpec
from .isa import DEFAULT_M, SIGNATURES, insn_text, reg_index
from .words import NAT_MASK, Insn


class AsmError(Exception):
    def __init__(self, msg, line=None, col=None, src="<asm>"):
        self.msg, self.line, self.col, self.src = msg, line, col, src
        where = f"{src}:{line}:{col}: " if line is not None else ""
        super().__init__(where + msg)


_LABEL_RE = re.compile(r"^\s*([A-Za-z_.%][\w.%]*)\s*:")
_NAME_RE = re.compile(r"[A-Za-z_.%][\w.%]*")


class _Line:
    __slots__ = ("text", "line", "src", "col")

    def __init__(self, text, line, src, col=1):
        self.text, self.line, self.src, self.col = text, line, src, col

    def err(self, msg):
        return AsmError(msg, self.line, self.col, self.src)


def _strip_comment(s: str) -> str:
    out = []
    in_str = False
    for ch in s:
        if ch == '"':
            in_str = not in_str
        if not in_str and ch in ";#":
            break
        out.append(ch)
    return "".join(out)


def _split_operands(s: str) -> list:
    s = s.strip()
    if not s:
        return []
    if "," in s:
        return [p.strip() for p in s.split(",")]
    return s.split()


# ---------------------------------------------------------------------------
# Expression evaluation
# ---------------------------------------------------------------------------

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Load,
            ast.Add, ast.Sub, ast.Mult, ast.FloorDiv, ast.USub, ast.UAdd, ast.Mod)


def _eval(expr: str, env: dict, where: _Line) -> int:
    src = expr.strip()
    # labels may contain '.' and '%'; map them onto identifiers
    names = {}

    def repl(m):
        tok = m.group(0)
        if tok[0].isdigit():
            return tok
        key = f"_n{len(names)}"
        names[key] = tok
        return key

    py = re.sub(r"0[xX][0-9a-fA-F]+|\d+|[A-Za-z_.%][\w.%]*", repl, src)
    try:
        tree = ast.parse(py, mode="eval")
    except SyntaxError:
        raise where.err(f"bad expression {src!r}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise where.err(f"unsupported expression {src!r}")

    def ev(n):
        if isinstance(n, ast.Expression):
            return ev(n.body)
        if isinstance(n, ast.Constant):
            if not isinstance(n.value, int):
                raise where.err(f"bad constant in {src!r}")
            return n.value
        if isinstance(n, ast.Name):
            name = names[n.id]
            if name not in env:
                raise where.err(f"undefined symbol {name!r}")
            v = env[name]
            return v(where) if callable(v) else v
        if isinstance(n, ast.UnaryOp):
            v = ev(n.operand)
            return -v if isinstance(n.op, ast.USub) else v
        a, b = ev(n.left), ev(n.right)
        if isinstance(n.op, ast.Add):
            return a + b
        if isinstance(n.op, ast.Sub):
            return a - b
        if isinstance(n.op, ast.Mult):
            return a * b
        if isinstance(n.op, ast.Mod):
            return a % b
        if b == 0:
            raise where.err("division by zero")
        return a // b

    return ev(tree)


# ---------------------------------------------------------------------------
# Macro expansion
# ---------------------------------------------------------------------------

class _Macro:
    def __init__(self, name, params, body, where):
        self.name, self.params, self.body, self.where = name, params, body, where


def _read_lines(text, src, base_dir, depth=0):
    if depth > 16:
        raise AsmError("include nesting too deep", src=src)
    out = []
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.rstrip()
        m = re.match(r'^\s*\.include\s+"([^"]+)"\s*$', _strip_comment(s))
        if m:
            if base_dir is None:
                raise AsmError(".include needs a file-based source", i, 1, src)
            path = os.path.join(base_dir, m.group(1))
            try:
                with open(path) as f:
                    sub = f.read()
            except OSError as e:
                raise AsmError(f"cannot include {m.group(1)!r}: {e.strerror}", i, 1, src) from None
            out.extend(_read_lines(sub, path, os.path.dirname(path), depth + 1))
            continue
        out.append(_Line(s, i, src))
    return out


def _collect_macros(lines):
    macros = {}
    body_lines = []
    i = 0
    while i < len(lines):
        ln = lines[i]
        s = _strip_comment(ln.text).strip()
        if s.startswith(".macro"):
            parts = s[len(".macro"):].strip()
            if not parts:
                raise ln.err(".macro needs a name")
            name, _, rest = parts.partition(" ")
            params = [p for p in _split_operands(rest)] if rest.strip() else []
            body = []
            i += 1
            while i < len(lines) and _strip_comment(lines[i].text).strip() != ".endm":
                if _strip_comment(lines[i].text).strip().startswith(".macro"):
                    raise lines[i].err("nested macro definition")
                body.append(lines[i])
                i += 1
            if i == len(lines):
                raise ln.err(f"macro {name!r} lacks .endm")
            if name in macros:
                raise ln.err(f"macro {name!r} defined twice")
            macros[name] = _Macro(name, params, body, ln)
        else:
            body_lines.append(ln)
        i += 1
    return macros, body_lines


def _expand(lines, macros, stack=(), counter=None):
    if counter is None:
        counter = [0]
    out = []
    for ln in lines:
        s = _strip_comment(ln.text).strip()
        m = _LABEL_RE.match(s)
        label_part = ""
        rest = s
        if m:
            label_part = m.group(0)
            rest = s[m.end():].strip()
        word = rest.split(None, 1)[0] if rest else ""
        if word in macros:
            mac = macros[word]
            if word in stack:
                raise ln.err(f"recursive macro {word!r}")
            args = _split_operands(rest[len(word):])
            if len(args) != len(mac.params):
                raise ln.err(f"macro {word!r} takes {len(mac.params)} arguments, got {len(args)}")
            counter[0] += 1
            tag = f"__{word}{counter[0]}_"
            if label_part:
                out.append(_Line(label_part, ln.line, ln.src))
            body = []
            for b in mac.body:
                t = _strip_comment(b.text)
                for p, a in sorted(zip(mac.params, args), key=lambda x: -len(x[0])):
                    t = t.replace("\\" + p, a)
                t = re.sub(r"%(\w+)", lambda mm: tag + mm.group(1), t)
                body.append(_Line(t, ln.line, ln.src))
            out.extend(_expand(body, macros, stack + (word,), counter))
        else:
            out.append(ln)
    return out


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------

def assemble(text: str, M: int = DEFAULT_M, src: str = "<asm>", base_dir=None) -> Image:
    lines = _read_lines(text, src, base_dir)
    macros, lines = _collect_macros(lines)
    lines = _expand(lines, macros)

    labels: dict = {}
    consts: dict = {}
    items = []            # (addr, kind, payload, line)
    directives = []       # (name, args, line) resolved in pass 2
    loc = 0

    resolving = set()

    def _full_env():
        e = {}
        for k, v in consts.items():
            e[k] = _guard(k, v)
        e.update(labels)
        return e

    def _guard(name, fn):
        def g(where):
            if name in resolving:
                raise where.err(f"circular constant {name!r}")
            resolving.add(name)
            try:
                return fn(where)
            finally:
                resolving.discard(name)
        return g

    def env_pass1():
        return _full_env()

    # pass 1: layout
    for ln in lines:
        s = _strip_comment(ln.text).strip()
        while True:
            m = _LABEL_RE.match(s)
            if not m:
                break
            name = m.group(1)
            if name in labels or name in consts:
                raise ln.err(f"duplicate label {name!r}")
            labels[name] = loc
            s = s[m.end():].strip()
        if not s:
            continue
        word, _, rest = s.partition(" ")
        rest = rest.strip()
        if word == ".equ":
            ops = _split_operands(rest)
            if len(ops) != 2:
                raise ln.err(".equ NAME, value")
            name = ops[0]
            if name in labels or name in consts:
                raise ln.err(f"duplicate symbol {name!r}")
            expr = ops[1]
            consts[name] = (lambda expr=expr, ln=ln: lambda where: _eval(expr, _full_env(), ln))()
        elif word == ".org":
            loc = _eval(rest, env_pass1(), ln)
            if loc < 0:
                raise ln.err("negative .org")
        elif word == ".zero":
            n = _eval(rest, env_pass1(), ln)
            for _ in range(n):
                items.append((loc, "word", "0", ln))
                loc += 1
        elif word == ".word":
            for e in _split_operands(rest):
                items.append((loc, "word", e, ln))
                loc += 1
        elif word in (".entry", ".thread", ".shared"):
            directives.append((word, _split_operands(rest), ln))
        elif word.startswith("."):
            raise ln.err(f"unknown directive {word!r}")
        elif word in SIGNATURES:
            items.append((loc, "insn", (word, _split_operands(rest)), ln))
            loc += 1
        else:
            raise ln.err(f"unknown mnemonic {word!r}")

    env = _full_env()

    # pass 2: encode
    cells = {}
    for addr, kind, payload, ln in items:
        if addr in cells:
            raise ln.err(f"address {addr} assembled twice")
        if kind == "word":
            v = _eval(payload, env, ln)
            if not 0 <= v <= NAT_MASK:
                raise ln.err(f"value {v} outside the scalar range")
            cells[addr] = v
        else:
            op, ops = payload
            sig = SIGNATURES[op]
            if len(ops) != len(sig):
                raise ln.err(f"{op} takes {len(sig)} operands, got {len(ops)}")
            args = []
            for k_, t in zip(sig, ops):
                if k_ == "R":
                    try:
                        args.append(reg_index(t, M))
                    except ValueError:
                        raise ln.err(f"bad register {t!r}") from None
                else:
                    v = _eval(t, env, ln)
                    if not 0 <= v <= NAT_MASK:
                        raise ln.err(f"immediate {v} outside the scalar range")
                    args.append(v)
            cells[addr] = Insn(op, args)

    entry = labels.get("start", 0)
    threads = []
    shared = None
    for word, ops, ln in directives:
        vals = [_eval(o, env, ln) for o in ops]
        if word == ".entry":
            if len(vals) != 1:
                raise ln.err(".entry takes one address")
            entry = vals[0]
        elif word == ".thread":
            if len(vals) != 3:
                raise ln.err(".thread entry, base, end")
            threads.append(ThreadSpec(*vals))
        else:
            if len(vals) != 2:
                raise ln.err(".shared base, end")
            shared = (vals[0], vals[1])

    ordered = sorted(cells.items())
    extent = ordered[-1][0] + 1 if ordered else 0
    for t in threads:
        extent = max(extent, t.end)
    if shared:
        extent = max(extent, shared[1])
    symbols = {k: v for k, v in labels.items() if "__" not in k}
    img = Image(word_count=max(extent, 1), M=M, entry=entry, cells=ordered,
                threads=threads, shared=shared, symbols=symbols)
    img.validate()
    return img


def assemble_file(path: str, M: int = DEFAULT_M) -> Image:
    with open(path) as f:
        text = f.read()
    return assemble(text, M=M, src=path, base_dir=os.path.dirname(os.path.abspath(path)))


# ---------------------------------------------------------------------------
# Disassembly
# ---------------------------------------------------------------------------

def disassemble(img) -> str:
    """Text that re-assembles to a cell-identical image.

    Accepts an :class:`Image` or a state dump (``MachineState.dump()``); in a
    dump, capability words come out as comments that the assembler rejects if
    uncommented.
    """
    if isinstance(img, dict):
        return _disassemble_dump(img)
    out = [f"; word_count {img.word_count}, M {img.M}", f".entry {img.entry}"]
    for t in img.threads:
        out.append(f".thread {t.entry}, {t.base}, {t.end}")
    if img.shared is not None:
        out.append(f".shared {img.shared[0]}, {img.shared[1]}")
    loc = None
    for addr, w in img.cells:
        if addr != loc:
            out.append(f".org {addr}")
        out.append(f"    .word {w}" if w.__class__ is int else f"    {insn_text(w)}")
        loc = addr + 1
    return "\n".join(out) + "\n"


def _disassemble_dump(d: dict) -> str:
    out = [f"; state dump: {d['mem_size']} words, M {d['M']}"]
    loc = None
    for a in sorted(d["mem"], key=int):
        w = d["mem"][a]
        addr = int(a)
        if addr != loc:
            out.append(f".org {addr}")
        if "nat" in w:
            out.append(f"    .word {w['nat']}")
        elif "insn" in w:
            out.append(f"    {w['insn']}")
        else:
            extra = f" dom={w['dom']}" if "dom" in w else ""
            extra += f" reg={w['reg']}" if "reg" in w else ""
            out.append(f"    !cap {w['cap']} [{w['base']},{w['end']}) a={w['cursor']} "
                       f"{w['perms']} n={w['node']}{extra}")
        loc = addr + 1
    return "\n".join(out) + "\n"
