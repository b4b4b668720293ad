"""Linear-sweep RISC-V decoder producing opcode mnemonics.

Covers RV64 I, M, A, F, D, C, Zicsr and the fence instructions at mnemonic
granularity; operands are discarded. Every encoding maps to exactly one token:

* ``0x0001`` is ``c.nop`` and ``0x00000013`` is ``addi`` (no ``nop`` alias).
* HINT encodings with a nonzero destination keep the mnemonic they reuse
  (``c.addi a0, 0`` is ``c.addi``, ``c.srli a0, 0`` is ``c.srli``); HINTs that
  write ``zero`` (``c.li zero, 1``, ``c.mv zero, a0``) decode as ``unk16``,
  as LLVM-based disassemblers do. ``c.addi`` with ``rd = zero`` is always
  ``c.nop``, whatever its immediate.
* AMO ordering bits (``aq``/``rl``) are ignored, so ``amoadd.w.aqrl`` is
  ``amoadd.w``.
* Fields reserved as zero must be zero: ``fence`` needs ``rd = rs1 = fm = 0``
  (``fence.tso`` is its one fm=8 encoding), ``fence.i`` must be exactly
  ``0x0000100f`` and the exact conversions ``fcvt.d.w``, ``fcvt.d.wu`` and
  ``fcvt.d.s`` need ``rm = 0``.
* Reserved or unsupported encodings become ``unk32`` / ``unk16``; a 32-bit
  parcel cut off by the end of a chunk becomes ``unk16`` and a trailing odd
  byte becomes ``pad8``.
"""

import functools
from dataclasses import dataclass

from .errors import WidthMismatch

_LOADS = {0: "lb", 1: "lh", 2: "lw", 3: "ld", 4: "lbu", 5: "lhu", 6: "lwu"}
_STORES = {0: "sb", 1: "sh", 2: "sw", 3: "sd"}
_BRANCHES = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}
_OP_IMM = {0: "addi", 2: "slti", 3: "sltiu", 4: "xori", 6: "ori", 7: "andi"}
_OP = {
    0x00: {0: "add", 1: "sll", 2: "slt", 3: "sltu", 4: "xor", 5: "srl", 6: "or", 7: "and"},
    0x20: {0: "sub", 5: "sra"},
    0x01: {0: "mul", 1: "mulh", 2: "mulhsu", 3: "mulhu", 4: "div", 5: "divu", 6: "rem", 7: "remu"},
}
_OP_32 = {
    0x00: {0: "addw", 1: "sllw", 5: "srlw"},
    0x20: {0: "subw", 5: "sraw"},
    0x01: {0: "mulw", 4: "divw", 5: "divuw", 6: "remw", 7: "remuw"},
}
_CSR = {1: "csrrw", 2: "csrrs", 3: "csrrc", 5: "csrrwi", 6: "csrrsi", 7: "csrrci"}
_AMO = {
    0x00: "amoadd", 0x01: "amoswap", 0x02: "lr", 0x03: "sc", 0x04: "amoxor",
    0x08: "amoor", 0x0C: "amoand", 0x10: "amomin", 0x14: "amomax",
    0x18: "amominu", 0x1C: "amomaxu",
}
_FMA = {0x43: "fmadd", 0x47: "fmsub", 0x4B: "fnmsub", 0x4F: "fnmadd"}
_FP_ARITH = {0x00: "fadd", 0x04: "fsub", 0x08: "fmul", 0x0C: "fdiv"}
_FMT = {0: "s", 1: "d"}
_INT_FMT = {0: "w", 1: "wu", 2: "l", 3: "lu"}
_VALID_RM = frozenset({0, 1, 2, 3, 4, 7})


def _fp_mnemonic(w):
    f7 = w >> 25
    f3 = (w >> 12) & 7
    rs2 = (w >> 20) & 31
    fmt = f7 & 3
    if fmt not in _FMT:
        return None
    sfx = _FMT[fmt]
    top = f7 & ~3
    rm_ok = f3 in _VALID_RM
    if top in _FP_ARITH:
        return f"{_FP_ARITH[top]}.{sfx}" if rm_ok else None
    if top == 0x2C:
        return f"fsqrt.{sfx}" if rs2 == 0 and rm_ok else None
    if top == 0x10:
        name = {0: "fsgnj", 1: "fsgnjn", 2: "fsgnjx"}.get(f3)
        return f"{name}.{sfx}" if name else None
    if top == 0x14:
        name = {0: "fmin", 1: "fmax"}.get(f3)
        return f"{name}.{sfx}" if name else None
    if top == 0x20:
        # fcvt.s.d / fcvt.d.s: source format in rs2
        if rs2 in _FMT and rs2 != fmt and (f3 == 0 if fmt == 1 else rm_ok):
            return f"fcvt.{sfx}.{_FMT[rs2]}"
        return None
    if top == 0x50:
        name = {0: "fle", 1: "flt", 2: "feq"}.get(f3)
        return f"{name}.{sfx}" if name else None
    if top == 0x60:
        return f"fcvt.{_INT_FMT[rs2]}.{sfx}" if rs2 in _INT_FMT and rm_ok else None
    if top == 0x68:
        if rs2 not in _INT_FMT:
            return None
        exact = fmt == 1 and rs2 < 2
        return f"fcvt.{sfx}.{_INT_FMT[rs2]}" if (f3 == 0 if exact else rm_ok) else None
    if top == 0x70 and rs2 == 0:
        if f3 == 0:
            return "fmv.x.w" if fmt == 0 else "fmv.x.d"
        if f3 == 1:
            return f"fclass.{sfx}"
        return None
    if top == 0x78 and rs2 == 0 and f3 == 0:
        return "fmv.w.x" if fmt == 0 else "fmv.d.x"
    return None


def _decode32(w):
    op = w & 0x7F
    f3 = (w >> 12) & 7
    rs2 = (w >> 20) & 31
    f7 = w >> 25
    if op == 0x37:
        return "lui"
    if op == 0x17:
        return "auipc"
    if op == 0x6F:
        return "jal"
    if op == 0x67:
        return "jalr" if f3 == 0 else None
    if op == 0x63:
        return _BRANCHES.get(f3)
    if op == 0x03:
        return _LOADS.get(f3)
    if op == 0x23:
        return _STORES.get(f3)
    if op == 0x13:
        if f3 == 1:
            return "slli" if w >> 26 == 0 else None
        if f3 == 5:
            return {0x00: "srli", 0x10: "srai"}.get(w >> 26)
        return _OP_IMM[f3]
    if op == 0x1B:
        if f3 == 0:
            return "addiw"
        if f3 == 1:
            return "slliw" if f7 == 0 else None
        if f3 == 5:
            return {0x00: "srliw", 0x20: "sraiw"}.get(f7)
        return None
    if op == 0x33:
        return _OP.get(f7, {}).get(f3)
    if op == 0x3B:
        return _OP_32.get(f7, {}).get(f3)
    if op == 0x0F:
        if w == 0x8330000F:
            return "fence.tso"
        if f3 == 0 and w & 0xF00F8F80 == 0:
            return "fence"
        return "fence.i" if w == 0x0000100F else None
    if op == 0x73:
        if f3 == 0:
            return {0x00000073: "ecall", 0x00100073: "ebreak"}.get(w)
        return _CSR.get(f3)
    if op == 0x2F:
        width = {2: "w", 3: "d"}.get(f3)
        base = _AMO.get(w >> 27)
        if width is None or base is None or (base == "lr" and rs2 != 0):
            return None
        return f"{base}.{width}"
    if op == 0x07:
        return {2: "flw", 3: "fld"}.get(f3)
    if op == 0x27:
        return {2: "fsw", 3: "fsd"}.get(f3)
    if op in _FMA:
        fmt = (w >> 25) & 3
        if fmt in _FMT and f3 in _VALID_RM:
            return f"{_FMA[op]}.{_FMT[fmt]}"
        return None
    if op == 0x53:
        return _fp_mnemonic(w)
    return None


def _decode16(h):
    quadrant = h & 3
    f3 = h >> 13
    bit12 = (h >> 12) & 1
    rd = (h >> 7) & 31
    rs2 = (h >> 2) & 31
    if quadrant == 0:
        if f3 == 0:
            return "c.addi4spn" if (h >> 5) & 0xFF else None
        return {1: "c.fld", 2: "c.lw", 3: "c.ld", 5: "c.fsd", 6: "c.sw", 7: "c.sd"}.get(f3)
    if quadrant == 1:
        imm6 = (bit12 << 5) | rs2
        if f3 == 0:
            return "c.nop" if rd == 0 else "c.addi"
        if f3 in (1, 2):
            return ("c.addiw", "c.li")[f3 - 1] if rd != 0 else None
        if f3 == 3:
            if imm6 == 0 or rd == 0:
                return None
            return "c.addi16sp" if rd == 2 else "c.lui"
        if f3 == 4:
            funct2 = (h >> 10) & 3
            if funct2 == 0:
                return "c.srli"
            if funct2 == 1:
                return "c.srai"
            if funct2 == 2:
                return "c.andi"
            sub = (h >> 5) & 3
            if bit12 == 0:
                return ("c.sub", "c.xor", "c.or", "c.and")[sub]
            return {0: "c.subw", 1: "c.addw"}.get(sub)
        return {5: "c.j", 6: "c.beqz", 7: "c.bnez"}[f3]
    # quadrant 2
    if f3 == 0:
        return "c.slli" if rd != 0 else None
    if f3 == 1:
        return "c.fldsp"
    if f3 == 2:
        return "c.lwsp" if rd != 0 else None
    if f3 == 3:
        return "c.ldsp" if rd != 0 else None
    if f3 == 4:
        if bit12 == 0:
            if rs2 == 0:
                return "c.jr" if rd != 0 else None
            return "c.mv" if rd != 0 else None
        if rs2 == 0:
            return "c.ebreak" if rd == 0 else "c.jalr"
        return "c.add" if rd != 0 else None
    return {5: "c.fsdsp", 6: "c.swsp", 7: "c.sdsp"}[f3]


BASE_MNEMONICS = (
    "lui auipc jal jalr beq bne blt bge bltu bgeu lb lh lw ld lbu lhu lwu sb sh sw sd "
    "addi slti sltiu xori ori andi slli srli srai add sub sll slt sltu xor srl sra or and "
    "addiw slliw srliw sraiw addw subw sllw srlw sraw fence fence.tso fence.i ecall ebreak"
).split()
CSR_MNEMONICS = tuple(_CSR.values())
M_MNEMONICS = tuple(_OP[0x01].values()) + tuple(_OP_32[0x01].values())
A_MNEMONICS = tuple(f"{base}.{w}" for w in ("w", "d") for base in _AMO.values())


def _fp_names(sfx):
    other = "d" if sfx == "s" else "s"
    names = ["flw", "fsw"] if sfx == "s" else ["fld", "fsd"]
    names += [f"{n}.{sfx}" for n in _FMA.values()]
    names += [f"{n}.{sfx}" for n in _FP_ARITH.values()]
    names += [f"fsqrt.{sfx}", f"fsgnj.{sfx}", f"fsgnjn.{sfx}", f"fsgnjx.{sfx}",
              f"fmin.{sfx}", f"fmax.{sfx}", f"fcvt.{sfx}.{other}",
              f"feq.{sfx}", f"flt.{sfx}", f"fle.{sfx}", f"fclass.{sfx}"]
    names += [f"fcvt.{i}.{sfx}" for i in _INT_FMT.values()]
    names += [f"fcvt.{sfx}.{i}" for i in _INT_FMT.values()]
    names += ["fmv.x.w", "fmv.w.x"] if sfx == "s" else ["fmv.x.d", "fmv.d.x"]
    return names


F_MNEMONICS = tuple(_fp_names("s"))
D_MNEMONICS = tuple(_fp_names("d"))
C_MNEMONICS = (
    "c.addi4spn c.fld c.lw c.ld c.fsd c.sw c.sd "
    "c.nop c.addi c.addiw c.li c.addi16sp c.lui c.srli c.srai c.andi "
    "c.sub c.xor c.or c.and c.subw c.addw c.j c.beqz c.bnez "
    "c.slli c.fldsp c.lwsp c.ldsp c.jr c.mv c.ebreak c.jalr c.add c.fsdsp c.swsp c.sdsp"
).split()
SPECIAL_TOKENS = ("unk32", "unk16", "pad8")

MNEMONICS = tuple(BASE_MNEMONICS) + CSR_MNEMONICS + M_MNEMONICS + A_MNEMONICS \
    + F_MNEMONICS + D_MNEMONICS + tuple(C_MNEMONICS)
VOCABULARY = MNEMONICS + SPECIAL_TOKENS
_VOCAB_SET = frozenset(VOCABULARY)

TOKEN_WIDTH = {"unk32": 4, "unk16": 2, "pad8": 1}
TOKEN_WIDTH.update({m: 2 if m.startswith("c.") else 4 for m in MNEMONICS})


@dataclass(frozen=True)
class Instruction:
    mnemonic: str
    width: int
    raw: int


@dataclass(frozen=True)
class OpcodeSequence:
    tokens: tuple
    source_id: str = ""

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)


def in_vocabulary(token):
    return token in _VOCAB_SET


def decode_one(raw, width=None):
    """Decode a single 16- or 32-bit parcel.

    ``width`` defaults to whatever the low two bits imply; passing a width
    that contradicts them raises ``WidthMismatch``.
    """
    natural = 4 if raw & 3 == 3 else 2
    if width is None:
        width = natural
    if width not in (2, 4):
        raise WidthMismatch(f"width must be 2 or 4, got {width}")
    if width != natural or raw >> (8 * width):
        raise WidthMismatch(f"raw {raw:#x} is not a {width}-byte parcel")
    if width == 4:
        return Instruction(_decode32(raw) or "unk32", 4, raw)
    return Instruction(_decode16(raw) or "unk16", 2, raw)


def iter_decode(data):
    """Yield ``(offset, Instruction)`` pairs for one contiguous byte chunk."""
    data = bytes(data)
    n = len(data)
    pos = 0
    while pos < n:
        if n - pos == 1:
            yield pos, Instruction("pad8", 1, data[pos])
            return
        half = data[pos] | (data[pos + 1] << 8)
        if half & 3 == 3:
            if n - pos < 4:
                yield pos, Instruction("unk16", 2, half)
                pos += 2
                continue
            word = int.from_bytes(data[pos:pos + 4], "little")
            yield pos, Instruction(_decode32(word) or "unk32", 4, word)
            pos += 4
        else:
            yield pos, Instruction(_decode16(half) or "unk16", 2, half)
            pos += 2


def decode_stream(chunks, source_id=""):
    """Sweep each ``(addr, bytes)`` chunk independently and concatenate tokens.

    A bare bytes object is accepted as a single chunk.
    """
    if isinstance(chunks, (bytes, bytearray, memoryview)):
        chunks = [(0, chunks)]
    tokens = []
    for _, data in chunks:
        tokens.extend(ins.mnemonic for _, ins in iter_decode(data))
    return OpcodeSequence(tuple(tokens), source_id)


def dump_tokens(seq):
    """One token per line, newline-terminated (empty string for no tokens)."""
    return "".join(f"{t}\n" for t in seq)


def load_tokens(text, source_id=""):
    return OpcodeSequence(tuple(line.strip() for line in text.splitlines() if line.strip()),
                          source_id)


@functools.cache
def canonical_encodings():
    """Smallest raw encoding decoding to each mnemonic (plus the special tokens).

    Used to materialize synthetic token streams as real code bytes.
    """
    table = {}
    for h in range(1 << 16):
        if h & 3 != 3:
            name = _decode16(h)
            if name and name not in table:
                table[name] = h
    for f7 in range(128):
        for rs2 in range(4):
            for f3 in range(8):
                for op in range(3, 128, 4):
                    w = op | (f3 << 12) | (rs2 << 20) | (f7 << 25)
                    name = _decode32(w)
                    if name and name not in table:
                        table[name] = w
    table["fence.tso"] = 0x8330000F
    table["unk32"] = 0xFFFFFFFF
    table["unk16"] = 0x0000
    return table


def encode_tokens(tokens):
    """Bytes whose linear sweep reproduces ``tokens`` (``pad8`` only last)."""
    table = canonical_encodings()
    out = bytearray()
    for i, tok in enumerate(tokens):
        if tok == "pad8":
            if i != len(tokens) - 1:
                raise ValueError("pad8 can only end a stream")
            out.append(0)
            continue
        out += table[tok].to_bytes(TOKEN_WIDTH[tok], "little")
    return bytes(out)
