"""Compare the compiled and pure-Python linked revocation trees (and the naive tree).

    python3 benchmarks/bench_revtree.py [--ops N] [--repeat R] [--seed S]

Workloads are generated up front so that only tree calls are timed:

* borrow: long-lived roots that are borrowed with mrev, queried and revoked;
* deep:   hundreds of stacked mrev borrows of one node, revoked from the oldest;
* mixed:  random split/mrev/revoke/remove/type/query traffic on live nodes.

An end-to-end row runs the stress guest through the command line with and
without CAPSTONE_PURE=1.
"""

import argparse
import os
import random
import subprocess
import sys
import time
from pathlib import Path

from capstone_emu.revtree import (COMPILED, RLIN, RNON, CompiledLinkedTree, NaiveTree,
                                  PyLinkedTree)


def borrow(tree, rng, n):
    # the owner keeps the revoker node after each revoke, as the machine does
    owners = [tree.new_root_child() for _ in range(64)]
    for r in owners:
        tree.rc_adjust(r, 1)
    for _ in range(n // 4):
        i = rng.randrange(len(owners))
        r = owners[i]
        m = tree.alloc_mrev(r)
        tree.rc_adjust(m, 1)
        tree.is_valid(r)
        tree.revoke_subtree(m)
        tree.rc_adjust(r, -1)
        owners[i] = m


def deep(tree, rng, n):
    leaf = tree.new_root_child()
    tree.rc_adjust(leaf, 1)
    held = []
    while n > 0:
        top = tree.alloc_mrev(leaf)
        tree.rc_adjust(top, 1)
        for _ in range(min(300, n)):
            m = tree.alloc_mrev(leaf)
            tree.rc_adjust(m, 1)
            held.append(m)
            tree.is_valid(leaf)
        n -= 300
        tree.revoke_subtree(top)
        for h in held + [leaf]:
            tree.rc_adjust(h, -1)
        held.clear()
        leaf = top


def mixed(tree, rng, n):
    live = []
    for _ in range(n):
        x = rng.random()
        if x < 0.1 or not live:
            v = tree.new_root_child(RLIN)
            tree.rc_adjust(v, 1)
            live.append(v)
            continue
        v = rng.choice(live)
        if not tree.peek_valid(v):
            tree.rc_adjust(v, -1)
            live.remove(v)
            continue
        if x < 0.3:
            c = tree.alloc_split(v) if rng.random() < 0.5 else tree.alloc_mrev(v)
            tree.rc_adjust(c, 1)
            live.append(c)
        elif x < 0.4:
            tree.revoke_subtree(v)
        elif x < 0.45:
            tree.set_node_type(v, RNON if rng.random() < 0.5 else RLIN)
        elif x < 0.5 and len(live) > 1:
            tree.rc_adjust(v, -1)
            live.remove(v)
        else:
            tree.is_valid(v)
            tree.has_rlin_child(v)


WORKLOADS = {"borrow": borrow, "deep": deep, "mixed": mixed}


def time_one(cls, work, n, seed, repeat):
    best = float("inf")
    for _ in range(repeat):
        tree = cls()
        rng = random.Random(seed)
        t0 = time.perf_counter()
        work(tree, rng, n)
        best = min(best, time.perf_counter() - t0)
    return best


def end_to_end(pure):
    prog = Path(__file__).resolve().parents[1] / "src/capstone_emu/runtime/asm/stats_stress.s"
    env = dict(os.environ)
    if pure:
        env["CAPSTONE_PURE"] = "1"
    else:
        env.pop("CAPSTONE_PURE", None)
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "capstone_emu.cli", "stats", str(prog), "--format", "json"],
                   env=env, check=True, capture_output=True)
    return time.perf_counter() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ops", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--no-e2e", action="store_true", help="skip the end-to-end row")
    args = ap.parse_args(argv)

    classes = {"naive": NaiveTree, "linked-py": PyLinkedTree}
    if COMPILED:
        classes["linked-c"] = CompiledLinkedTree
    else:
        print("compiled extension not available; showing pure builds only")
    print(f"{'workload':<10}" + "".join(f"{n:>12}" for n in classes) + f"{'py/c':>8}")
    for name, work in WORKLOADS.items():
        t = {n: time_one(cls, work, args.ops, args.seed, args.repeat) for n, cls in classes.items()}
        ratio = f"{t['linked-py'] / t['linked-c']:8.1f}" if COMPILED else ""
        print(f"{name:<10}" + "".join(f"{v * 1e3:10.1f}ms" for v in t.values()) + ratio)
    if not args.no_e2e:
        pure, comp = end_to_end(True), end_to_end(False)
        print(f"stress guest end to end: pure {pure:.2f}s, default {comp:.2f}s")


if __name__ == "__main__":
    main()
