import struct
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vvt.elf import (EM_RISCV, SHF_ALLOC, SHF_EXECINSTR, SHF_WRITE, build_elf64, code_bytes,
                     parse_elf, read_elf)
from vvt.errors import BadMagic, InputError, MachineMismatch, Truncated, Unsupported

DATA = Path(__file__).parent / "data"
EXEC = SHF_ALLOC | SHF_EXECINSTR


def test_bad_magic():
    with pytest.raises(BadMagic):
        parse_elf(bytes(4))


def test_linked_fixture_has_one_exec_section():
    # nop.elf was linked by ld.lld from a single `addi x0, x0, 0`
    image = read_elf(DATA / "nop.elf")
    assert image.machine == EM_RISCV and image.machine_ok
    chunks = code_bytes(image)
    assert len(chunks) == 1
    addr, data = chunks[0]
    assert data == bytes([0x13, 0, 0, 0])
    assert image.entry == addr
    assert [s.size for s in image.sections if s.is_exec] == [4]


def test_machine_mismatch_strict_and_lenient():
    blob = build_elf64([(".text", 0x1000, EXEC, b"\x90" * 4)], machine=62)
    with pytest.raises(MachineMismatch):
        parse_elf(blob)
    image = parse_elf(blob, strict=False)
    assert image.machine == 62 and not image.machine_ok


def test_unsupported_class_and_endianness():
    blob = bytearray(build_elf64([(".text", 0, EXEC, b"\x13\0\0\0")]))
    blob[4] = 1
    with pytest.raises(Unsupported):
        parse_elf(bytes(blob))
    blob[4], blob[5] = 2, 2
    with pytest.raises(Unsupported):
        parse_elf(bytes(blob))


def test_truncated_section_table():
    blob = build_elf64([(".text", 0, EXEC, b"\x13\0\0\0")])
    with pytest.raises(Truncated):
        parse_elf(blob[:-10])


def test_section_data_past_end():
    blob = bytearray(build_elf64([(".text", 0, EXEC, b"\x13\0\0\0")]))
    shoff = struct.unpack_from("<Q", blob, 0x28)[0]
    # first real header (index 1): sh_size lives at byte 32 of the entry
    struct.pack_into("<Q", blob, shoff + 64 + 32, 1 << 20)
    with pytest.raises(Truncated):
        parse_elf(bytes(blob))


def test_no_exec_sections():
    blob = build_elf64([(".data", 0x3000, SHF_ALLOC | SHF_WRITE, b"abcd")])
    assert code_bytes(parse_elf(blob)) == []


def test_out_of_order_sections_sorted():
    blob = build_elf64([(".text2", 0x2000, EXEC, b"\x01\x00"),
                        (".text1", 0x1000, EXEC, b"\x13\0\0\0")])
    image = parse_elf(blob)
    assert [a for a, _ in code_bytes(image)] == [0x1000, 0x2000]
    addrs = [s.addr for s in image.sections]
    assert addrs == sorted(addrs)


def test_exec_without_alloc_is_not_code():
    blob = build_elf64([(".weird", 0x1000, SHF_EXECINSTR, b"\x13\0\0\0")])
    assert code_bytes(parse_elf(blob)) == []


@given(st.lists(st.tuples(st.integers(0, 2**20), st.binary(max_size=64)), max_size=6))
def test_exec_byte_total_matches_headers(specs):
    sections = [(f".t{i}", addr, EXEC, data) for i, (addr, data) in enumerate(specs)]
    image = parse_elf(build_elf64(sections))
    chunks = code_bytes(image)
    assert sum(len(b) for _, b in chunks) == sum(len(d) for *_, d in sections)
    assert [a for a, _ in chunks] == sorted(a for a, _ in chunks)


@settings(max_examples=300)
@given(st.binary(max_size=512))
def test_random_buffers_only_raise_input_errors(buf):
    try:
        parse_elf(buf)
    except InputError:
        pass


@settings(max_examples=300)
@given(st.integers(0, 400), st.integers(0, 255))
def test_corrupted_valid_image_only_raises_input_errors(pos, value):
    blob = bytearray(build_elf64([(".text", 0x1000, EXEC, b"\x13\0\0\0" * 8)]))
    blob[pos % len(blob)] = value
    try:
        parse_elf(bytes(blob))
    except InputError:
        pass
