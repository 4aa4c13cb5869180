"""Schedulers: each is a callable ``state -> Decision | None``.

``None`` means the schedule is exhausted.  Schedulers only pick threads that
are still running, except :class:`Script`, which replays its lines verbatim.
"""

from __future__ import annotations

import random

from .machine import EXCEPT, NORMAL, Decision


class RoundRobin:
    def __init__(self):
        self.last = -1

    def __call__(self, state):
        live = state.live_threads()
        if not live or state.halted:
            return None
        nxt = next((k for k in live if k > self.last), live[0])
        self.last = nxt
        return Decision(NORMAL, nxt)


class Script:
    """Replays lines of the form ``k`` or ``except k``."""

    def __init__(self, lines):
        self.items = []
        for n, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if len(parts) == 1:
                    self.items.append(Decision(NORMAL, int(parts[0])))
                elif len(parts) == 2 and parts[0] == "except":
                    self.items.append(Decision(EXCEPT, int(parts[1])))
                else:
                    raise ValueError
            except ValueError:
                raise ValueError(f"schedule line {n}: expected 'k' or 'except k', got {line!r}") from None
        self.pos = 0

    @classmethod
    def from_file(cls, path) -> Script:
        with open(path) as f:
            return cls(f.read().splitlines())

    def __call__(self, state):
        if self.pos >= len(self.items) or state.halted:
            return None
        d = self.items[self.pos]
        self.pos += 1
        return d


class SeededRandom:
    """Uniform choice among running threads; injects an exception with ``except_prob``."""

    def __init__(self, seed: int, except_prob: float = 0.0):
        self.rng = random.Random(seed)
        self.except_prob = except_prob

    def __call__(self, state):
        live = state.live_threads()
        if not live or state.halted:
            return None
        k = self.rng.choice(live)
        if self.except_prob and self.rng.random() < self.except_prob:
            return Decision(EXCEPT, k)
        return Decision(NORMAL, k)


def make_scheduler(spec: str):
    """``round-robin``, ``script:<path>`` or ``random:<seed>[:<except_prob>]``."""
    if spec in ("round-robin", "rr"):
        return RoundRobin()
    kind, _, rest = spec.partition(":")
    if kind == "script" and rest:
        return Script.from_file(rest)
    if kind == "random" and rest:
        seed, _, prob = rest.partition(":")
        return SeededRandom(int(seed), float(prob) if prob else 0.0)
    raise ValueError(f"unknown scheduler {spec!r}")


def run(state, scheduler, max_steps: int, on_step=None) -> int:
    """Drive ``state`` until the schedule ends, the machine halts or ``max_steps``."""
    n = 0
    while n < max_steps and not state.halted:
        dec = scheduler(state)
        if dec is None:
            break
        rec = state.step(dec)
        if rec.get("skipped"):
            continue
        n += 1
        if on_step is not None:
            on_step(n, dec, rec)
    return n
