"""ELF64 little-endian section-table reader (RISC-V focus).

Only the section header table is consulted; program headers, symbols and
relocations are ignored. Every read is bounds-checked against the buffer, so
arbitrary bytes either parse or raise an ``InputError`` subclass.
"""

import struct
from dataclasses import dataclass, field

from .errors import BadMagic, MachineMismatch, Truncated, Unsupported

EM_RISCV = 243
EM_X86_64 = 62

SHT_NULL = 0
SHT_PROGBITS = 1
SHT_NOBITS = 8

SHF_WRITE = 0x1
SHF_ALLOC = 0x2
SHF_EXECINSTR = 0x4

_EHDR = struct.Struct("<16sHHIQQQIHHHHHH")
_SHDR = struct.Struct("<IIQQQQIIQQ")


@dataclass(frozen=True)
class Section:
    name: str
    addr: int
    size: int
    flags: int
    bytes: bytes = b""
    type: int = SHT_PROGBITS

    @property
    def is_exec(self):
        return bool(self.flags & SHF_EXECINSTR) and bool(self.flags & SHF_ALLOC)


@dataclass(frozen=True)
class ElfImage:
    elf_class: int
    endianness: str
    machine: int
    entry: int
    sections: tuple = field(default_factory=tuple)
    machine_ok: bool = True


def _cstring(table, offset):
    if offset >= len(table):
        raise Truncated(f"section name offset {offset} outside string table")
    end = table.find(b"\0", offset)
    if end < 0:
        raise Truncated("unterminated section name")
    return table[offset:end].decode("latin-1")


def parse_elf(data, strict=True):
    """Parse an ELF64 LE image from ``data``.

    With ``strict=False`` a non-RISC-V machine id is accepted and recorded as
    ``machine_ok=False`` instead of raising ``MachineMismatch``.
    """
    buf = bytes(data)
    if len(buf) < 4 or buf[:4] != b"\x7fELF":
        raise BadMagic("not an ELF file")
    if len(buf) < 6:
        raise Truncated("ELF identification truncated")
    if buf[4] != 2:
        raise Unsupported(f"ELF class {buf[4]} (only ELF64 is supported)")
    if buf[5] != 1:
        raise Unsupported(f"data encoding {buf[5]} (only little-endian is supported)")
    if len(buf) < _EHDR.size:
        raise Truncated("ELF header truncated")
    (_, _type, machine, _version, entry, _phoff, shoff, _flags, _ehsize,
     _phentsize, _phnum, shentsize, shnum, shstrndx) = _EHDR.unpack_from(buf, 0)
    machine_ok = machine == EM_RISCV
    if strict and not machine_ok:
        raise MachineMismatch(f"machine {machine} is not RISC-V ({EM_RISCV})")
    if shoff == 0 or shnum == 0:
        raise Truncated("no section header table")
    if shentsize < _SHDR.size:
        raise Truncated(f"section header entry size {shentsize} too small")
    if shoff + shnum * shentsize > len(buf):
        raise Truncated("section header table exceeds file")
    headers = [_SHDR.unpack_from(buf, shoff + i * shentsize) for i in range(shnum)]

    def body(hdr):
        sh_type, offset, size = hdr[1], hdr[4], hdr[5]
        if sh_type in (SHT_NULL, SHT_NOBITS):
            return b""
        if offset + size > len(buf):
            raise Truncated(f"section data [{offset}, {offset + size}) exceeds file")
        return buf[offset:offset + size]

    if shstrndx >= shnum:
        raise Truncated(f"string table index {shstrndx} out of range")
    strtab = body(headers[shstrndx])
    sections = []
    for hdr in headers:
        name_off, sh_type, flags, addr, _off, size = hdr[:6]
        if sh_type == SHT_NULL:
            continue
        sections.append(Section(_cstring(strtab, name_off), addr, size, flags, body(hdr), sh_type))
    sections.sort(key=lambda s: s.addr)
    return ElfImage(2, "little", machine, entry, tuple(sections), machine_ok)


def code_bytes(image):
    """``(addr, bytes)`` for every allocated executable section, by address."""
    return [(s.addr, s.bytes) for s in image.sections
            if s.is_exec and s.type == SHT_PROGBITS]


def read_elf(path, strict=True):
    with open(path, "rb") as fh:
        return parse_elf(fh.read(), strict=strict)


def build_elf64(sections, machine=EM_RISCV, entry=None):
    """Serialize a minimal relocatable-free ELF64 image.

    ``sections`` is a sequence of ``(name, addr, flags, data)``; they are written
    in the given order, so callers can produce out-of-order section tables.
    """
    names = b"\0"
    name_offsets = []
    for name, *_ in list(sections) + [(".shstrtab",)]:
        name_offsets.append(len(names))
        names += name.encode() + b"\0"
    blobs = [bytes(s[3]) for s in sections] + [names]
    offset = _EHDR.size
    placed = []
    for blob in blobs:
        placed.append(offset)
        offset += len(blob)
    shoff = (offset + 7) & ~7
    shnum = len(blobs) + 1
    if entry is None:
        entry = next((s[1] for s in sections if s[2] & SHF_EXECINSTR), 0)
    ident = b"\x7fELF" + bytes([2, 1, 1]) + bytes(9)
    out = bytearray(_EHDR.pack(ident, 2, machine, 1, entry, 0, shoff, 0, _EHDR.size,
                               0, 0, _SHDR.size, shnum, shnum - 1))
    for blob in blobs:
        out += blob
    out += bytes(shoff - len(out))
    out += bytes(_SHDR.size)
    for (name, addr, flags, data), name_off, off in zip(sections, name_offsets, placed):
        out += _SHDR.pack(name_off, SHT_PROGBITS, flags, addr, off, len(data), 0, 0, 2, 0)
    out += _SHDR.pack(name_offsets[-1], 3, 0, 0, placed[-1], len(names), 0, 0, 1, 0)
    return bytes(out)
