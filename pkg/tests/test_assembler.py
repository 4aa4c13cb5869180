import pytest

from capstone_emu.assembler import AsmError, assemble, assemble_file, disassemble
from capstone_emu.image import Image, ImageError, ThreadSpec, read_image, write_image
from capstone_emu.isa import MNEMONICS, insn_text, parse_insn, reg_index
from capstone_emu.machine import MachineState
from capstone_emu.runtime.harness import ASM_DIR
from capstone_emu.words import Insn


def cells(img):
    return {a: (insn_text(w) if isinstance(w, Insn) else w) for a, w in img.cells}


def test_labels_constants_and_expressions():
    img = assemble("""
        .equ SIZE, 4 * 2
    start:
        li r1, SIZE + 1
        jmp r1           ; comment
    data: .word data, SIZE // 3, 0xffffffffffffffff
        .zero 2
    after:
    """, M=4)
    assert cells(img) == {0: "li r1 9", 1: "jmp r1", 2: 2, 3: 2, 4: (1 << 64) - 1, 5: 0, 6: 0}
    assert img.symbols["after"] == 7 and img.entry == 0


def test_org_entry_thread_shared():
    img = assemble("""
        .entry main
        .org 10
    main: li r1 1
        .thread 40, 32, 48
        .shared 48, 64
    """, M=4)
    assert img.entry == 10 and cells(img) == {10: "li r1 1"}
    assert img.threads == [ThreadSpec(40, 32, 48)] and img.shared == (48, 64)


def test_macros_with_local_labels():
    img = assemble("""
    .macro spin reg
    %top: li r4, %top
        jnz r4, \\reg
    .endm
        spin r1
        spin r2
    """, M=4)
    assert cells(img) == {0: "li r4 0", 1: "jnz r4 r1", 2: "li r4 2", 3: "jnz r4 r2"}


def test_register_names():
    assert reg_index("pc") == 0 and reg_index("epc") == 1 and reg_index("ret") == 2
    assert reg_index("r1") == 3 and reg_index("r31") == 33
    with pytest.raises(ValueError):
        reg_index("r32")
    with pytest.raises(ValueError):
        reg_index("r5", M=4)


def test_every_mnemonic_round_trips():
    samples = {"mov": "mov r1 r2", "ld": "ld r1 r2", "sd": "sd r1 r2", "tighten": "tighten r1 r2",
               "shrink": "shrink r1 r2 r3", "split": "split r1 r2 r3", "delin": "delin r1",
               "scc": "scc r1 r2", "lcc": "lcc r1 r2", "mrev": "mrev r1 r2", "revoke": "revoke r1",
               "drop": "drop r1", "init": "init r1", "seal": "seal r1", "call": "call r1 r2",
               "return": "return r1 r2", "retseal": "retseal r1 r2", "except": "except 9",
               "jmp": "jmp r1", "jnz": "jnz r1 r2", "li": "li r1 7", "add": "add r1 r2",
               "lt": "lt r1 r2 r3", "invalid": "invalid"}
    assert set(samples) >= set(MNEMONICS)
    for op in MNEMONICS:
        assert insn_text(parse_insn(samples[op])) == samples[op]


@pytest.mark.parametrize("src,msg", [
    ("li r1", "operand"),
    ("frob r1", "frob"),
    ("x: li r1 1\nx: li r1 2", "duplicate"),
    ("li r1 nowhere", "nowhere"),
    ("li r99 1", "r99"),
    (".equ A, B\n.equ B, A\nli r1 A", "circular"),
    (".include \"x.inc\"", "include"),
])
def test_errors_name_the_line(src, msg):
    with pytest.raises(AsmError) as e:
        assemble(src, M=31)
    assert msg in str(e.value)


def test_eval_rejects_arbitrary_python():
    with pytest.raises(AsmError):
        assemble("li r1 __import__('os')")


def test_disassembly_reassembles(tmp_path):
    for path in sorted(ASM_DIR.glob("*.s")):
        img = assemble_file(str(path))
        again = assemble(disassemble(img), M=img.M)
        assert again.cells == img.cells, path.name
        assert (again.entry, again.threads, again.shared) == (img.entry, img.threads, img.shared)


@pytest.mark.parametrize("as_json", [False, True])
def test_image_files_round_trip(tmp_path, as_json):
    img = assemble_file(str(ASM_DIR / "malloc_free.s"))
    p = tmp_path / "img"
    write_image(img, p, as_json=as_json)
    back = read_image(p)
    assert back.cells == img.cells and back.header() == img.header()


def test_image_validation():
    with pytest.raises(ImageError):
        Image(4, cells=[(4, 1)]).validate()
    with pytest.raises(AsmError):
        assemble(".word -1")
    with pytest.raises(ImageError):
        Image(4, cells=[(1, 1), (1, 2)]).validate()
    with pytest.raises(ImageError):
        Image.from_json({"header": {"word_count": 4}, "cells": [[0, {"cap": "LIN"}]]})


def test_unreadable_image(tmp_path):
    p = tmp_path / "junk"
    p.write_bytes(b"nonsense")
    with pytest.raises(ImageError):
        read_image(p)


def test_boot_layout():
    img = assemble(".thread 40, 32, 48\n.shared 48, 64\nli r1 1", M=4)
    st = MachineState.boot(img, mem_size=64)
    t0, t1 = st.threads
    assert (t0.regs[0].base, t0.regs[0].end, t1.regs[0].base, t1.regs[0].end) == (0, 32, 32, 48)
    assert t1.regs[0].cursor == 40 and t1.dom == 1 and st.N == 2
    assert t0.regs[-1] == t1.regs[-1] and t0.regs[-1].kind.name == "NON"
    with pytest.raises(ImageError):
        MachineState.boot(img, mem_size=16)
