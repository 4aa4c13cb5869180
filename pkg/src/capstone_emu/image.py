"""Loadable machine images.

An image holds a header (word count, register count M, entry address and an
optional multi-thread layout) plus a sparse list of (address, word) cells.
Cells hold scalars or instructions only; capabilities cannot be written into
an image.

Two on-disk encodings are supported and :func:`read_image` accepts either:

* binary: magic, a length-prefixed JSON header, then one record per cell
  (u64 address, u8 tag, payload);
* JSON: ``{"header": {...}, "cells": [[addr, {"nat": n} | {"insn": text}], ...]}``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

from .isa import DEFAULT_M, insn_text, parse_insn
from .words import NAT_MASK, Insn

MAGIC = b"CAPSTONE-IMG\x00\x01"


class ImageError(ValueError):
    pass


@dataclass
class ThreadSpec:
    entry: int
    base: int
    end: int


@dataclass
class Image:
    word_count: int
    M: int = DEFAULT_M
    entry: int = 0
    cells: list = field(default_factory=list)       # [(addr, int | Insn)] sorted
    threads: list = field(default_factory=list)     # extra threads 1.. as ThreadSpec
    shared: tuple | None = None                     # (base, end) of a NON region
    symbols: dict = field(default_factory=dict)     # label -> address (informational)

    def validate(self) -> None:
        last = -1
        for addr, w in self.cells:
            if addr <= last:
                raise ImageError("cell addresses must be strictly increasing")
            if not 0 <= addr < self.word_count:
                raise ImageError(f"cell address {addr} outside image")
            if w.__class__ is int:
                if not 0 <= w <= NAT_MASK:
                    raise ImageError(f"scalar out of range at {addr}")
            elif w.__class__ is not Insn:
                raise ImageError(f"cell {addr} is neither a scalar nor an instruction")
            last = addr

    def header(self) -> dict:
        h = {"word_count": self.word_count, "M": self.M, "entry": self.entry}
        if self.threads:
            h["threads"] = [{"entry": t.entry, "base": t.base, "end": t.end} for t in self.threads]
        if self.shared is not None:
            h["shared"] = {"base": self.shared[0], "end": self.shared[1]}
        if self.symbols:
            h["symbols"] = dict(sorted(self.symbols.items()))
        return h

    # -- JSON --------------------------------------------------------------
    def to_json(self) -> dict:
        cells = []
        for addr, w in self.cells:
            cells.append([addr, {"nat": w} if w.__class__ is int else {"insn": insn_text(w)}])
        return {"header": self.header(), "cells": cells}

    @classmethod
    def from_json(cls, obj: dict) -> Image:
        h = obj["header"]
        M = h.get("M", DEFAULT_M)
        cells = []
        for addr, w in obj["cells"]:
            if "nat" in w:
                cells.append((addr, int(w["nat"])))
            elif "insn" in w:
                cells.append((addr, parse_insn(w["insn"], M)))
            else:
                raise ImageError(f"cell {addr}: capabilities are not loadable")
        return cls._from_header(h, cells)

    @classmethod
    def _from_header(cls, h, cells) -> Image:
        img = cls(word_count=h["word_count"], M=h.get("M", DEFAULT_M), entry=h.get("entry", 0),
                  cells=cells,
                  threads=[ThreadSpec(t["entry"], t["base"], t["end"]) for t in h.get("threads", [])],
                  shared=(h["shared"]["base"], h["shared"]["end"]) if "shared" in h else None,
                  symbols=dict(h.get("symbols", {})))
        img.validate()
        return img

    # -- binary ------------------------------------------------------------
    def to_bytes(self) -> bytes:
        head = json.dumps(self.header(), sort_keys=True, separators=(",", ":")).encode()
        out = [MAGIC, struct.pack("<I", len(head)), head, struct.pack("<Q", len(self.cells))]
        for addr, w in self.cells:
            if w.__class__ is int:
                out.append(struct.pack("<QBQ", addr, 0, w))
            else:
                t = insn_text(w).encode()
                out.append(struct.pack("<QBH", addr, 1, len(t)) + t)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> Image:
        if not data.startswith(MAGIC):
            raise ImageError("not a binary image")
        pos = len(MAGIC)
        (hlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        h = json.loads(data[pos:pos + hlen])
        pos += hlen
        (count,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        M = h.get("M", DEFAULT_M)
        cells = []
        for _ in range(count):
            addr, tag = struct.unpack_from("<QB", data, pos)
            pos += 9
            if tag == 0:
                (v,) = struct.unpack_from("<Q", data, pos)
                pos += 8
                cells.append((addr, v))
            elif tag == 1:
                (n,) = struct.unpack_from("<H", data, pos)
                pos += 2
                cells.append((addr, parse_insn(data[pos:pos + n].decode(), M)))
                pos += n
            else:
                raise ImageError(f"bad cell tag {tag}")
        return cls._from_header(h, cells)


def read_image(path) -> Image:
    with open(path, "rb") as f:
        data = f.read()
    if data.startswith(MAGIC):
        return Image.from_bytes(data)
    try:
        return Image.from_json(json.loads(data))
    except (ValueError, KeyError) as e:
        raise ImageError(f"{path}: unreadable image ({e})") from None


def write_image(img: Image, path, as_json: bool = False) -> None:
    if as_json:
        with open(path, "w") as f:
            json.dump(img.to_json(), f, indent=1, sort_keys=True)
            f.write("\n")
    else:
        with open(path, "wb") as f:
            f.write(img.to_bytes())
