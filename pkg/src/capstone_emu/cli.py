"""Command-line front end: ``capstone {asm,run,trace,check,stats,scenario}``.

Programs may be given as assembly sources (``.s``) or assembled images.
All JSON output uses sorted keys, so identical inputs give identical bytes.
Usage errors exit with status 2; a guest fault exits with status 1 and names
the faulting step on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .abstract import Checker, action_json
from .assembler import AsmError, assemble_file
from .image import Image, ImageError, read_image, write_image
from .isa import DEFAULT_M
from .machine import NORMAL, MachineState
from .revtree import STAT_COLUMNS, NodeCache, RevTreeStats, stats_row
from .sched import make_scheduler

DEFAULT_MEM = 65536
DEFAULT_MAX_STEPS = 100_000


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, cache_default: str = "off") -> None:
    p.add_argument("program", help="assembly source (.s) or image file")
    p.add_argument("--mem-size", type=int, default=DEFAULT_MEM, help="memory size in words")
    p.add_argument("--M", type=int, default=DEFAULT_M, dest="M", help="general-purpose registers")
    p.add_argument("--scheduler", default="round-robin",
                   help="round-robin | script:<path> | random:<seed>[:<except-prob>]")
    p.add_argument("--max-steps", type=int, default=DEFAULT_MAX_STEPS)
    p.add_argument("--backend", choices=("naive", "optimized"), default="optimized")
    p.add_argument("--cache", choices=("on", "off"), default=cache_default,
                   help="node-cache model used for statistics")
    p.add_argument("--cache-size", type=int, default=8192, help="cache size in bytes")
    p.add_argument("--cache-ways", type=int, default=2)
    p.add_argument("--cache-record", type=int, default=32, help="node record size in bytes")
    p.add_argument("--strict-epc", action="store_true",
                   help="keep epc across domain switches instead of swapping it")
    p.add_argument("--exit-cell", default=None,
                   help="address or label of the exit cell (default: label exit_cell, "
                        "else the last memory word)")


def load_program(path: str, M: int) -> Image:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{path}: no such file")
    if p.suffix in (".s", ".asm"):
        return assemble_file(str(p), M=M)
    img = read_image(p)
    if img.M != M:
        raise UsageError(f"image was built for M={img.M}, not M={M}")
    return img


def _address(img: Image, text: str, what: str) -> int:
    if text in img.symbols:
        return img.symbols[text]
    try:
        return int(text, 0)
    except ValueError:
        raise UsageError(f"{what}: unknown label {text!r}") from None


def build_machine(args, img: Image) -> MachineState:
    if args.mem_size < img.word_count:
        raise UsageError(f"--mem-size {args.mem_size} is smaller than the "
                         f"{img.word_count}-word image")
    if args.exit_cell is not None:
        exit_cell = _address(img, args.exit_cell, "--exit-cell")
    else:
        exit_cell = img.symbols.get("exit_cell")
    cache = None
    if args.cache == "on":
        try:
            cache = NodeCache(args.cache_size, args.cache_ways, args.cache_record)
        except ValueError as e:
            raise UsageError(str(e)) from None
    try:
        return MachineState.boot(img, mem_size=args.mem_size, backend=args.backend,
                                 cache=cache, strict_epc=args.strict_epc, exit_cell=exit_cell)
    except ValueError as e:
        raise UsageError(str(e)) from None


def build_scheduler(args):
    try:
        return make_scheduler(args.scheduler)
    except (ValueError, OSError) as e:
        raise UsageError(str(e)) from None


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True)


# ---------------------------------------------------------------------------
# driving
# ---------------------------------------------------------------------------

class Run:
    """One machine driven by one scheduler, optionally through the checker."""

    def __init__(self, args, img, checked=False, domain=0, sub=()):
        self.img = img
        self.state = build_machine(args, img)
        self.sched = build_scheduler(args)
        self.max_steps = args.max_steps
        self.checker = Checker(self.state, domain, sub) if checked else None
        self.first_fault = None
        self.n = 0

    def steps(self):
        """Yield (step number, decision, record, actions) until the run ends."""
        st = self.state
        while self.n < self.max_steps and not st.halted:
            if self.checker is not None and not self.checker.ok:
                break
            dec = self.sched(st)
            if dec is None:
                break
            if not 0 <= dec.k < len(st.threads):
                raise UsageError(f"schedule names thread {dec.k}, machine has {len(st.threads)}")
            self.before(dec, st.threads[dec.k].regs[0])
            if self.checker is not None:
                rec, acts = self.checker.step(dec)
            else:
                rec, acts = st.step(dec), None
            if rec.get("skipped"):
                continue
            self.n += 1
            if "fault" in rec and self.first_fault is None:
                self.first_fault = {"step": self.n} | rec
            yield self.n, dec, rec, acts

    def before(self, dec, pc) -> None:
        pass

    def finish(self) -> None:
        for _ in self.steps():
            pass


def _report_fault(run: Run) -> int:
    f = run.first_fault
    if f is None:
        return 0
    print(f"guest fault at step {f['step']}: thread {f['thread']} in domain {f['domain']} "
          f"executing {f['insn']}: {f['fault']}", file=sys.stderr)
    return 1


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_asm(args) -> int:
    img = assemble_file(args.source, M=args.M)
    out = args.output or str(Path(args.source).with_suffix(".json" if args.json else ".img"))
    write_image(img, out, as_json=args.json)
    print(_dumps({"image": out, "word_count": img.word_count, "entry": img.entry}))
    return 0


def cmd_run(args) -> int:
    img = load_program(args.program, args.M)
    run = Run(args, img)
    run.finish()
    text = run.state.dump_json()
    if args.dump:
        Path(args.dump).write_text(text + "\n")
    else:
        print(text)
    return _report_fault(run)


def cmd_trace(args) -> int:
    img = load_program(args.program, args.M)
    run = Run(args, img, checked=True, domain=args.domain)
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        for n, dec, rec, acts in run.steps():
            line = {"step": n, "thread": rec["thread"], "domain": rec["domain"],
                    "insn": rec["insn"],
                    "actions": [action_json(a, d) for a, d in (acts or [])]}
            if "fault" in rec:
                line["fault"] = rec["fault"]
            out.write(_dumps(line) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return _report_fault(run)


def cmd_check(args) -> int:
    img = load_program(args.program, args.M)
    sub = [int(x) for x in args.sub.split(",")] if args.sub else ()
    run = Run(args, img, checked=True, domain=args.domain, sub=sub)
    run.finish()
    rep = run.checker.report()
    print(_dumps(rep))
    if run.first_fault is not None:
        return _report_fault(run)
    return 0 if rep["result"] == "success" else 1


class _StatsRun(Run):
    """Counts tree operations from the instruction stream alongside the
    emulator's own counters, both reset at the warm-up label."""

    def __init__(self, args, img):
        super().__init__(args, img)
        self.warm = None if args.warmup_label is None else _address(img, args.warmup_label,
                                                                   "--warmup-label")
        self.measuring = self.warm is None
        self.recount = {"#Allocation": 0, "#Revocation": 0}

    def before(self, dec, pc) -> None:
        if self.measuring or dec.s != NORMAL:
            return
        if getattr(pc, "cursor", None) == self.warm:
            self.measuring = True
            tree = self.state.tree
            tree.stats = RevTreeStats()
            if tree.cache is not None:
                tree.cache.hits = tree.cache.misses = 0

    def steps(self):
        for item in super().steps():
            rec = item[2]
            if self.measuring and "fault" not in rec and rec["insn"]:
                op = rec["insn"].split()[0]
                if op in ("mrev", "split"):
                    self.recount["#Allocation"] += 1
                elif op == "revoke":
                    self.recount["#Revocation"] += 1
            yield item


def format_table(row: dict) -> str:
    cols = list(STAT_COLUMNS)
    cells = [f"{row[c]:.3f}" if isinstance(row[c], float) else str(row[c]) for c in cols]
    widths = [max(len(c), len(v)) for c, v in zip(cols, cells)]
    head = "  ".join(c.rjust(w) for c, w in zip(cols, widths))
    body = "  ".join(v.rjust(w) for v, w in zip(cells, widths))
    return head + "\n" + body


def cmd_stats(args) -> int:
    img = load_program(args.program, args.M)
    run = _StatsRun(args, img)
    run.finish()
    tree = run.state.tree
    row = stats_row(tree.stats, tree.cache)
    out = {"program": Path(args.program).name, "steps": run.n, "halted": run.state.halted,
           "measured": run.measuring, "columns": list(STAT_COLUMNS), "row": row,
           "recount": run.recount}
    if args.format in ("json", "both"):
        print(_dumps(out))
    if args.format in ("table", "both"):
        print(format_table(row))
    return _report_fault(run)


def cmd_scenario(args) -> int:
    from .runtime.harness import passed
    from .runtime.scenarios import SCENARIOS, run_scenario
    names = list(SCENARIOS) if args.name == "all" else [args.name]
    if any(n not in SCENARIOS for n in names):
        raise UsageError(f"unknown scenario {args.name!r}; choose from {', '.join(SCENARIOS)} or all")
    ok = True
    for name in names:
        rep = run_scenario(name, args.family, args.seed)
        ok &= passed(rep)
        print(_dumps(rep))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="capstone", description="linear-capability machine tools")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("asm", help="assemble a source file into an image")
    p.add_argument("source")
    p.add_argument("-o", "--output")
    p.add_argument("--json", action="store_true", help="write the JSON image format")
    p.add_argument("--M", type=int, default=DEFAULT_M, dest="M")
    p.set_defaults(fn=cmd_asm)

    p = sub.add_parser("run", help="run a program and print the final state")
    _common(p)
    p.add_argument("--dump", help="write the final state here instead of stdout")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("trace", help="print one JSON line per step with its abstract actions")
    _common(p)
    p.add_argument("--domain", type=int, default=0, help="user domain for the abstraction")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("check", help="check refinement against the abstract model")
    _common(p)
    p.add_argument("--domain", type=int, default=0, help="user domain")
    p.add_argument("--sub", default="", help="comma-separated subordinate domains")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("stats", help="revocation-tree operation and cache statistics")
    _common(p, cache_default="on")
    p.add_argument("--warmup-label", help="reset counters when a thread first reaches this label")
    p.add_argument("--format", choices=("json", "table", "both"), default="both")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("scenario", help="run an end-to-end scenario and print its report")
    p.add_argument("name", help="scenario name or 'all'")
    p.add_argument("--family", choices=("round-robin", "scripted", "random"), default="round-robin")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_scenario)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (UsageError, AsmError, ImageError) as e:
        print(f"capstone {args.verb}: {e}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    sys.exit(main())
