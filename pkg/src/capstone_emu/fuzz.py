"""Random structured programs and the refinement fuzzing campaign.

Programs are built from short snippets that each do something meaningful with
capabilities (carve a region, borrow through mrev/revoke, rebuild an UNINIT
region, create and enter a sealed domain, install an exception handler, pass
a capability through shared memory), with a sprinkling of fully random
instructions so that side-condition failures get exercised too.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .abstract import Checker
from .image import Image, ThreadSpec
from .isa import EPC, GPR0, MNEMONICS, PC, RET, SIGNATURES, gpr
from .machine import MachineState
from .sched import SeededRandom
from .words import Insn

FUZZ_M = 6
CTX = FUZZ_M + 4


def I(op, *args):
    return Insn(op, args)


class _Gen:
    """Snippet emitter for one thread's region.

    Register roles: ``heap`` holds the not yet carved data region, ``code``
    the code capability that callee blocks are cut from, ``shared`` (multi
    thread images only) the NON capability to the shared region; the other
    registers are scratch.
    """

    def __init__(self, rng, base, end, shared_reg=None, clean=False):
        self.rng = rng
        self.clean = clean
        self.base, self.end = base, end
        span = end - base
        self.code_end = base + max(24, span * 2 // 5)
        self.blocks = []          # callee entry points, highest first
        self.heap = gpr(4)
        self.code = gpr(5)
        self.shared = shared_reg
        self.scratch = [gpr(1), gpr(2), gpr(3)] + ([gpr(6)] if shared_reg is None else [])
        self.hi = end             # top of the not yet carved heap
        self.lo = self.code_end
        self.shared_range = None

    def pick(self, n=1, avoid=()):
        pool = [x for x in self.scratch if x not in avoid]
        got = self.rng.sample(pool, n)
        return got[0] if n == 1 else got

    def reg(self):
        r = self.rng.random()
        if self.clean:
            return self.pick()
        if r < 0.08:
            return self.rng.choice((PC, EPC, RET))
        if r < 0.15:
            return gpr(self.rng.randint(1, FUZZ_M))
        return self.pick()

    def addr(self):
        r = self.rng.random()
        if r < 0.7:
            return self.rng.randrange(self.lo, self.end)
        if r < 0.9:
            return self.rng.randrange(self.base, self.end)
        return self.rng.randrange(0, 300)

    def random_insn(self):
        r = self.rng
        op = r.choice(MNEMONICS)
        args = []
        for kind in SIGNATURES[op]:
            args.append(self.reg() if kind == "R" else r.choice((0, 1, 2, 3, 4, self.addr())))
        return Insn(op, args)

    # -- snippets ------------------------------------------------------------
    def carve(self, size=None, avoid=()):
        """Split [a, hi) off the heap into a scratch register with its cursor at a."""
        r = self.rng
        if self.hi - self.lo < 3:
            return [], None
        if size is None:
            size = r.randint(1, max(1, min(24, (self.hi - self.lo) // 2)))
        a = max(self.lo + 1, self.hi - size)
        self.hi = a
        dst, t = self.pick(2, avoid)
        return [I("li", t, a), I("split", self.heap, dst, t), I("scc", dst, t)], dst

    def s_fill(self):
        code, c = self.carve()
        if c is None:
            return []
        r = self.rng
        v, one = self.pick(2, (c,))
        for _ in range(r.randint(0, 3)):
            code += [I("li", v, r.randrange(100)), I("sd", c, v)]
            if r.random() < 0.5:
                code += [I("lcc", v, c), I("li", one, 1), I("add", v, one), I("scc", c, v)]
        return code

    def s_borrow(self):
        """mrev / use / revoke, the mutable and immutable borrow shapes."""
        code, c = self.carve()
        if c is None:
            return []
        r = self.rng
        rv, t = self.pick(2, (c,))
        code.append(I("mrev", rv, c))
        if r.random() < 0.5:
            other = self.pick(avoid=(rv,))
            code.append(I("mov", other, c))
            c = other
        if r.random() < 0.4:
            t = self.pick(avoid=(rv, c))
            code += [I("li", t, r.randrange(4) if not self.clean else 3), I("tighten", c, t)]
        if r.random() < 0.3:
            code.append(I("delin", c))
            if r.random() < 0.5:
                code.append(I("mov", self.pick(avoid=(rv, c)), c))
        if r.random() < 0.5:
            code.append(I("sd", c, self.reg()))
        code.append(I("revoke", rv))
        if r.random() < 0.5:
            code.append(I("mov", c, rv))
        return code

    def s_uninit(self):
        """Recover a region as UNINIT, rewrite it fully and init it."""
        n = self.rng.randint(1, 4)
        code, c = self.carve(n)
        if c is None:
            return []
        rv, v = self.pick(2, (c,))
        code.append(I("mrev", rv, c))
        if self.rng.random() < 0.5:
            code.append(I("sd", c, c if self.rng.random() < 0.05 else v))
        code.append(I("revoke", rv))
        for _ in range(n + (0 if self.clean else self.rng.choice((0, 0, 0, 0, -1, 1)))):
            w = self.reg()
            code.append(I("sd", rv, w if w != rv else v))
        code.append(I("init", rv))
        if self.rng.random() < 0.5:
            t = self.pick(avoid=(rv,))
            code += [I("li", t, self.hi), I("scc", rv, t), I("ld", self.pick(), rv)]
        return code

    def s_nest(self):
        """Store one carved capability inside another and load it back."""
        c1, a = self.carve()
        if a is None:
            return c1
        holder = self.pick(avoid=(a,))
        c1.append(I("mov", holder, a))
        c2, b = self.carve(avoid=(holder,))
        if b is None:
            return c1
        r = self.rng
        code = c1 + c2 + [I("sd", b, holder)]
        if r.random() < 0.3 and not self.clean:
            t = self.pick(avoid=(b,))
            code += [I("li", t, r.choice((0, 2))), I("tighten", b, t)]
        if r.random() < 0.3:
            code.append(I("delin", b))
        code.append(I("ld", self.pick(avoid=(b,)), b))
        if r.random() < 0.3:
            code.append(I("drop", b))
        return code

    def s_shrink(self):
        code, c = self.carve()
        if c is None:
            return []
        r = self.rng
        lo = self.hi
        b = r.randrange(lo, lo + 6)
        e = b + r.randint(0, 6)
        if self.clean:
            b, e = lo, lo + 1
        rb, re_ = self.pick(2, (c,))
        return code + [I("li", rb, b), I("li", re_, e), I("shrink", c, rb, re_)]

    def s_domain(self, handler=False):
        """Carve a context region, plant a code capability, seal; returns (code, sealed reg)."""
        if not self.blocks:
            return [], None
        code, c = self.carve(CTX + self.rng.choice((0, 0, 0, 0, 0, 2, -1)))
        if c is None:
            return [], None
        entry = self.blocks.pop(0)
        piece, t = self.pick(2, (c,))
        if entry == self.code_base:
            code += [I("li", t, entry), I("mov", piece, self.code), I("scc", piece, t)]
        else:
            code += [I("li", t, entry), I("split", self.code, piece, t), I("scc", piece, t)]
        code += [I("sd", c, piece), I("seal", c)]
        if handler:
            code.append(I("mov", EPC, c))
        return code, c

    def s_call(self):
        code, c = self.s_domain()
        if c is not None and self.rng.random() < 0.9:
            code.append(I("call", c, self.rng.choice(self.scratch + [self.heap])))
        return code

    def s_shared(self):
        if self.shared is None:
            return []
        r = self.rng
        t = self.pick()
        code = [I("li", t, r.randrange(*self.shared_range)), I("scc", self.shared, t)]
        if r.random() < 0.5:
            code.append(I("sd", self.shared, self.pick()))
        else:
            code.append(I("ld", self.pick(), self.shared))
        return code

    def loop(self, at):
        """A loop body that can run indefinitely, closed by a jump back to ``at``."""
        r = self.rng
        body = []
        kinds = r.sample(["borrow", "call", "shared", "noise"], r.randint(1, 3))
        if "borrow" in kinds:
            code, c = self.carve()
            if c is not None:
                rv, b = self.pick(2, (c,))
                body_pre = code
                body += [I("mrev", rv, c), I("delin", c), I("mov", b, c), I("ld", b, b),
                         I("revoke", rv), I("mov", c, rv)]
                return self._close(at, body_pre, body, kinds)
        return self._close(at, [], body, kinds)

    def _close(self, at, pre, body, kinds):
        r = self.rng
        setup = list(pre)
        if "call" in kinds and self.blocks:
            code, c = self.s_domain()
            if c is not None:
                setup += code
                body.append(I("call", c, self.pick(avoid=(c,))))
        if "shared" in kinds:
            body += self.s_shared()
        if "noise" in kinds:
            t = self.pick()
            body += [I("li", t, r.randrange(9)), I("add", t, t), I("lt", t, t, t)]
        j = self.pick()
        head = at + len(setup)
        return setup + body + [I("li", j, head), I("jmp", j)]

    def callee_block(self, entry, handler):
        r = self.rng
        body = []
        if not handler:
            for _ in range(r.randint(0, 2)):
                if r.random() < 0.1 and not self.clean:
                    body.append(self.random_insn())
                else:
                    body.append(r.choice([I("mov", gpr(2), gpr(1)), I("li", gpr(3), r.randrange(9)),
                                          I("add", gpr(3), gpr(3))]))
        choice = r.random()
        if handler or choice < (0.8 if self.clean else 0.45):
            body += [I("li", gpr(6), entry), I("retseal", RET, gpr(6))]
        elif choice < 0.95:
            body.append(I("return", RET, r.choice((gpr(1), gpr(2), gpr(3)))))
        return body

    def program(self, n_snippets, blocks):
        """Code words for the region: main body first, callee blocks at the top of code."""
        r = self.rng
        block_code = []
        top = self.code_end
        for i in range(blocks):
            handler = i == 0 and r.random() < 0.95
            top -= 8
            self.blocks.append(top)
            block_code.append((top, self.callee_block(top, handler)[:8], handler))
        main_end = self.code_base = top
        body = []
        if block_code and block_code[0][2]:
            # handler first: region at the top of memory, code cut straight from pc
            h = self.end - CTX
            entry = self.blocks.pop(0)
            body += [I("li", gpr(1), h), I("split", PC, gpr(2), gpr(1)), I("scc", gpr(2), gpr(1)),
                     I("li", gpr(1), self.code_end), I("split", PC, self.heap, gpr(1)),
                     I("li", gpr(1), entry), I("split", PC, gpr(3), gpr(1)), I("scc", gpr(3), gpr(1)),
                     I("sd", gpr(2), gpr(3)), I("seal", gpr(2)), I("mov", EPC, gpr(2))]
            self.hi = h
            if self.blocks:
                body += [I("li", gpr(1), main_end), I("split", PC, self.code, gpr(1))]
        else:
            body += [I("li", gpr(1), self.code_end), I("split", PC, self.heap, gpr(1))]
            if blocks:
                body += [I("li", gpr(1), main_end), I("split", PC, self.code, gpr(1))]
        makers = [self.s_fill, self.s_borrow, self.s_uninit, self.s_nest, self.s_shrink,
                  self.s_call, self.s_shared]
        weights = [2, 4, 3, 3, 1, 3, 3 if self.shared else 0]
        if self.clean:
            makers[3] = makers[0]      # nesting loads may hit read-only words
            n_snippets = min(n_snippets, 3)
        for _ in range(n_snippets):
            if r.random() < 0.05 and not self.clean:
                body.append(self.random_insn())
                continue
            body += r.choices(makers, weights)[0]()
        if not self.clean:
            body = [self.random_insn() if r.random() < 0.015 else w for w in body]
        if self.clean or r.random() < 0.7:
            body += self.loop(self.base + len(body))
        body = body[:main_end - self.base]
        cells = list(zip(range(self.base, self.base + len(body)), body))
        for at, code, _ in block_code:
            cells += list(zip(range(at, at + len(code)), code))
        return cells


def gen_image(rng: random.Random, mem_size: int = 256, threads: int | None = None) -> Image:
    if threads is None:
        threads = 1 if rng.random() < 0.7 else 2
    if threads == 1:
        g = _Gen(rng, 0, mem_size - 1, clean=rng.random() < 0.5)
        cells = g.program(rng.randint(2, 9), rng.randint(1, 3))
        img = Image(word_count=mem_size, M=FUZZ_M, entry=0, cells=sorted(cells))
        img.validate()
        return img
    half = (mem_size - 32) // 2
    shared = (2 * half, mem_size - 1)
    cells = []
    specs = []
    for k in range(2):
        g = _Gen(rng, k * half, (k + 1) * half, shared_reg=GPR0 + FUZZ_M - 1,
                 clean=rng.random() < 0.5)
        g.shared_range = shared
        cells += g.program(rng.randint(2, 7), rng.randint(1, 2))
        if k:
            specs.append(ThreadSpec(k * half, k * half, (k + 1) * half))
    img = Image(word_count=mem_size, M=FUZZ_M, entry=0, cells=sorted(cells), threads=specs,
                shared=shared)
    img.validate()
    return img


@dataclass
class TraceResult:
    seed: int
    steps: int
    result: str
    first_divergence: dict | None = None
    ops: set = field(default_factory=set)


def run_trace(seed: int, mutations=(), max_steps: int = 200, except_prob: float = 0.05,
              mem_size: int = 256, backend: str = "optimized") -> TraceResult:
    rng = random.Random(seed)
    img = gen_image(rng, mem_size)
    st = MachineState.boot(img, backend=backend, mutations=mutations)
    d = 0
    D_sub = ()
    if rng.random() < 0.2:
        D_sub = (rng.randint(1, 3),)
    chk = Checker(st, d, D_sub)
    sched = SeededRandom(seed, except_prob)
    ops = set()
    while chk.ok and chk.steps < max_steps and not st.halted:
        dec = sched(st)
        if dec is None:
            break
        rec, _ = chk.step(dec)
        if "fault" not in rec and not rec.get("skipped"):
            ops.add((rec["insn"] or "").split(" ")[0])
    rep = chk.report()
    return TraceResult(seed, rep["steps"], rep["result"], rep.get("first_divergence"), ops)


def campaign(n: int, seed0: int = 0, mutations=(), max_steps: int = 200, except_prob: float = 0.05,
             stop_on_divergence: bool = False) -> dict:
    t0 = time.perf_counter()
    results = {"success": 0, "divergence": 0, "assumption_violated": 0}
    first = None
    steps = 0
    ops = {}
    for i in range(n):
        tr = run_trace(seed0 + i, mutations, max_steps, except_prob)
        results[tr.result] += 1
        steps += tr.steps
        for o in tr.ops:
            ops[o] = ops.get(o, 0) + 1
        if tr.result == "divergence" and first is None:
            first = {"seed": tr.seed} | tr.first_divergence
            if stop_on_divergence:
                break
    return {"traces": sum(results.values()), "steps": steps, **results,
            "first_divergence": first, "ops": dict(sorted(ops.items())),
            "seconds": round(time.perf_counter() - t0, 2)}
