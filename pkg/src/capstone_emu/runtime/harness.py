"""Scenario driver: runs a guest image under a schedule with the refinement
checker attached, fires host-side probes when a thread reaches a labelled
instruction, and collects named assertions."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from ..abstract import Analysis, Checker
from ..assembler import assemble_file
from ..isa import GPR0, parse_insn, reg_index
from ..machine import NORMAL, MachineState
from ..sched import RoundRobin, Script, SeededRandom
from ..words import Cap, Kind

ASM_DIR = Path(__file__).parent / "asm"

_images: dict = {}


def program_path(name: str) -> Path:
    return ASM_DIR / f"{name}.s"


def load_image(name: str):
    img = _images.get(name)
    if img is None:
        img = _images[name] = assemble_file(str(program_path(name)))
    return img


def boot(img, **kw) -> MachineState:
    return MachineState.boot(img, mem_size=img.word_count,
                             exit_cell=img.symbols.get("exit_cell"), **kw)


def schedule_for(name: str, family, seed: int = 0):
    """``round-robin``, ``scripted`` (the program's shipped script) or ``random``."""
    if family == "round-robin":
        return RoundRobin()
    if family == "scripted":
        return Script.from_file(ASM_DIR / f"{name}.sched")
    if family == "random":
        return SeededRandom(seed)
    raise ValueError(f"unknown schedule family {family!r}")


def reg(state, k, name):
    return state.threads[k].regs[reg_index(name, state.M)]


def is_cap(w, kind=None) -> bool:
    return w.__class__ is Cap and (kind is None or w.kind == kind)


def span(c):
    return (c.base, c.end)


def overlaps(a, b) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def any_overlap(xs, ys) -> bool:
    return any(overlaps(x, y) for x in xs for y in ys)


def realm_spans(state, d, exclusive=False):
    an = Analysis(state)
    located = an.xrealm(d) if exclusive else an.realm(d)
    return sorted({span(w) for _, w in located if w.base < w.end})


def holders(state, pred):
    """Locations of valid capabilities satisfying ``pred``."""
    valid = state.tree.peek_valid
    return [(loc, w) for loc, w in state.locations() if valid(w.node) and pred(w)]


class Harness:
    def __init__(self, scenario: str, family="round-robin", seed: int = 0, d: int = 0,
                 max_steps: int = 20000, schedule=None, digest: bool = False, **machine_kw):
        self.scenario = scenario
        self.want_digest = digest
        self.image = load_image(scenario)
        self.sym = self.image.symbols
        self.state = boot(self.image, **machine_kw)
        self.checker = Checker(self.state, d)
        self.schedule = schedule if schedule is not None else schedule_for(scenario, family, seed)
        self.label = family if family != "random" else f"random:{seed}"
        self.max_steps = max_steps
        self.probes: dict = {}
        self.expected: list = []
        self.every_step: list = []
        self.stop = None
        self.results: dict = {}
        self.trace: list = []
        self.steps = 0
        self.facts: dict = {}
        self.refcount_ok = True

    # -- declaring ---------------------------------------------------------
    def at(self, label: str, fn, required: bool = True):
        addr = self.sym[label]
        self.probes.setdefault(addr, []).append((label, fn))
        if required:
            self.expected.append(label)

    def check(self, name: str, cond) -> bool:
        ok = bool(cond)
        self.results[name] = self.results.get(name, True) and ok
        return ok

    # -- forked experiments ------------------------------------------------
    def attempt(self, k: int, insns):
        """Run ``insns`` on thread ``k`` of a throwaway copy, starting at its pc.

        Returns the copy and the fault text of the first failing instruction
        (None when all succeed).
        """
        st = self.state.copy()
        pc = st.threads[k].regs[0]
        if isinstance(insns, str):
            insns = [insns]
        for off, text in enumerate(insns):
            st.mem[pc.cursor + off] = parse_insn(text, st.M)
        fault = None
        for _ in insns:
            rec = st.step((NORMAL, k))
            if "fault" in rec:
                fault = rec["fault"]
                break
        return st, fault

    def faults(self, k: int, insns) -> bool:
        return self.attempt(k, insns)[1] is not None

    # -- running -----------------------------------------------------------
    def _fire(self, k: int) -> None:
        th = self.state.threads[k]
        pc = th.regs[0]
        if th.error or pc.__class__ is not Cap:
            return
        for label, fn in self.probes.get(pc.cursor, ()):
            self.facts.setdefault("reached", set()).add(label)
            fn(self, k)

    def run(self) -> dict:
        st = self.state
        chk = self.checker
        while chk.ok and self.steps < self.max_steps and not st.halted:
            if self.stop is not None and self.stop(self):
                break
            dec = self.schedule(st)
            if dec is None:
                break
            if dec[0] == NORMAL:
                self._fire(dec[1])
            rec, _ = chk.step(dec)
            if rec.get("skipped"):
                continue
            self.steps += 1
            self.trace.append(json.dumps(rec, sort_keys=True))
            if self.refcount_ok and st.refcount_errors():
                self.refcount_ok = False
            for fn in self.every_step:
                fn(self, dec, rec)
        return self.report()

    def report(self) -> dict:
        reached = self.facts.get("reached", set())
        for label in self.expected:
            self.check(f"reached {label}", label in reached)
        rep = self.checker.report()
        self.check("refinement check succeeds with the application as user domain",
                   rep["result"] == "success")
        self.check("reference counts match a full recount after every step", self.refcount_ok)
        faulted = [k for k, th in enumerate(self.state.threads) if th.error]
        self.check("no thread faulted", not faulted)
        out = {
            "scenario": self.scenario,
            "schedule": self.label,
            "steps": self.steps,
            "assertions": [{"name": n, "pass": v} for n, v in self.results.items()],
            "check": rep,
        }
        if self.want_digest:
            out["digest"] = hashlib.sha256(self.digest().encode()).hexdigest()
        return out

    def digest(self) -> str:
        """Trace plus final dump, for byte-level comparison of two runs."""
        return "\n".join(self.trace) + "\n" + self.state.dump_json()


def passed(report: dict) -> bool:
    return all(a["pass"] for a in report["assertions"])
