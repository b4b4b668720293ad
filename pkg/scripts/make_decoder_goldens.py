"""Regenerate tests/data/decoder_goldens.json and tests/data/nop.elf.

Goldens come from two tools that share no code with ``vvt``:

1. clang's RISC-V assembler turns a generated source file into bytes. The
   mnemonic written in the source is the expected token for those bytes.
2. capstone disassembles the same bytes; its canonical instruction name must
   agree with the source mnemonic (after stripping AMO ``.aq``/``.rl``).

Needs ``clang`` with the riscv64 target, ``ld.lld`` and ``pip install capstone``.
"""

import json
import random
import re
import subprocess
import sys
import tempfile
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"
MARCH = "rv64imafdc"

X = [f"x{i}" for i in range(32)]
XNZ = X[1:]
XNZ2 = [r for r in XNZ if r != "x2"]
XC = [f"x{i}" for i in range(8, 16)]
F = [f"f{i}" for i in range(32)]
FC = [f"f{i}" for i in range(8, 16)]
RM = ["rne", "rtz", "rdn", "rup", "rmm", "dyn"]
CSRS = ["0x001", "0x002", "0x003", "0x300", "0x305", "0xc00", "0xc01", "0xc02", "0x340"]
INT_R = set(
    "add sub sll slt sltu xor srl sra or and addw subw sllw srlw sraw "
    "mul mulh mulhsu mulhu div divu rem remu mulw divw divuw remw remuw".split()
)
FENCE_SETS = ["iorw", "rw", "r", "w", "io", "ir", "ow"]


def gen(rng, mnemonic):
    r = rng.choice
    i12 = lambda: rng.randint(-2048, 2047)
    m = mnemonic
    if m in ("lui", "auipc"):
        return f"{m} {r(X)}, {rng.randint(0, 0xFFFFF)}"
    if m == "jal":
        return f"jal {r(X)}, {rng.randrange(-(1 << 20), 1 << 20, 2)}"
    if m == "jalr":
        return f"jalr {r(X)}, {i12()}({r(X)})"
    if m in ("beq", "bne", "blt", "bge", "bltu", "bgeu"):
        return f"{m} {r(X)}, {r(X)}, {rng.randrange(-4096, 4096, 2)}"
    if m in ("lb", "lh", "lw", "ld", "lbu", "lhu", "lwu"):
        return f"{m} {r(X)}, {i12()}({r(X)})"
    if m in ("sb", "sh", "sw", "sd"):
        return f"{m} {r(X)}, {i12()}({r(X)})"
    if m in ("addi", "slti", "sltiu", "xori", "ori", "andi", "addiw"):
        return f"{m} {r(X)}, {r(X)}, {i12()}"
    if m in ("slli", "srli", "srai"):
        return f"{m} {r(X)}, {r(X)}, {rng.randint(0, 63)}"
    if m in ("slliw", "srliw", "sraiw"):
        return f"{m} {r(X)}, {r(X)}, {rng.randint(0, 31)}"
    if m in ("fence",):
        return f"fence {r(FENCE_SETS)}, {r(FENCE_SETS)}"
    if m in ("fence.tso", "fence.i", "ecall", "ebreak", "c.nop", "c.ebreak"):
        return m
    if m in ("csrrw", "csrrs", "csrrc"):
        return f"{m} {r(X)}, {r(CSRS)}, {r(X)}"
    if m in ("csrrwi", "csrrsi", "csrrci"):
        return f"{m} {r(X)}, {r(CSRS)}, {rng.randint(0, 31)}"
    if m.startswith("lr."):
        return f"{m}{r(['', '.aq', '.rl', '.aqrl'])} {r(X)}, ({r(X)})"
    if m.startswith(("sc.", "amo")):
        return f"{m}{r(['', '.aq', '.rl', '.aqrl'])} {r(X)}, {r(X)}, ({r(X)})"
    if m in ("flw", "fld", "fsw", "fsd"):
        return f"{m} {r(F)}, {i12()}({r(X)})"
    if re.fullmatch(r"fn?m(add|sub)\.[sd]", m):
        return f"{m} {r(F)}, {r(F)}, {r(F)}, {r(F)}, {r(RM)}"
    if re.fullmatch(r"f(add|sub|mul|div)\.[sd]", m):
        return f"{m} {r(F)}, {r(F)}, {r(F)}, {r(RM)}"
    if re.fullmatch(r"fsqrt\.[sd]", m):
        return f"{m} {r(F)}, {r(F)}, {r(RM)}"
    if re.fullmatch(r"f(sgnj|sgnjn|sgnjx|min|max)\.[sd]", m):
        return f"{m} {r(F)}, {r(F)}, {r(F)}"
    if re.fullmatch(r"f(eq|lt|le)\.[sd]", m):
        return f"{m} {r(X)}, {r(F)}, {r(F)}"
    if re.fullmatch(r"fclass\.[sd]|fmv\.x\.[wd]", m):
        return f"{m} {r(X)}, {r(F)}"
    if re.fullmatch(r"fmv\.[wd]\.x", m):
        return f"{m} {r(F)}, {r(X)}"
    if m in ("fcvt.d.s", "fcvt.d.w", "fcvt.d.wu"):
        # exact conversions: the assembler encodes rm=0
        src = F if m == "fcvt.d.s" else X
        return f"{m} {r(F)}, {r(src)}"
    if m == "fcvt.s.d":
        return f"{m} {r(F)}, {r(F)}, {r(RM)}"
    if re.fullmatch(r"fcvt\.(w|wu|l|lu)\.[sd]", m):
        return f"{m} {r(X)}, {r(F)}, {r(RM)}"
    if re.fullmatch(r"fcvt\.[sd]\.(w|wu|l|lu)", m):
        return f"{m} {r(F)}, {r(X)}, {r(RM)}"
    # compressed
    if m == "c.addi4spn":
        return f"{m} {r(XC)}, x2, {rng.randrange(4, 1024, 4)}"
    if m in ("c.lw", "c.sw"):
        return f"{m} {r(XC)}, {rng.randrange(0, 128, 4)}({r(XC)})"
    if m in ("c.ld", "c.sd"):
        return f"{m} {r(XC)}, {rng.randrange(0, 256, 8)}({r(XC)})"
    if m in ("c.fld", "c.fsd"):
        return f"{m} {r(FC)}, {rng.randrange(0, 256, 8)}({r(XC)})"
    if m == "c.addi":
        return f"{m} {r(XNZ)}, {r([v for v in range(-32, 32) if v])}"
    if m in ("c.addiw", "c.li"):
        return f"{m} {r(XNZ)}, {rng.randint(-32, 31)}"
    if m == "c.addi16sp":
        return f"{m} x2, {r([v for v in range(-512, 512, 16) if v])}"
    if m == "c.lui":
        return f"{m} {r(XNZ2)}, {r(list(range(1, 32)) + list(range(0xFFFE0, 0x100000)))}"
    if m in ("c.srli", "c.srai"):
        return f"{m} {r(XC)}, {rng.randint(1, 63)}"
    if m == "c.andi":
        return f"{m} {r(XC)}, {rng.randint(-32, 31)}"
    if m in ("c.sub", "c.xor", "c.or", "c.and", "c.subw", "c.addw"):
        return f"{m} {r(XC)}, {r(XC)}"
    if m == "c.j":
        return f"{m} {rng.randrange(-2048, 2048, 2)}"
    if m in ("c.beqz", "c.bnez"):
        return f"{m} {r(XC)}, {rng.randrange(-256, 256, 2)}"
    if m == "c.slli":
        return f"{m} {r(XNZ)}, {rng.randint(1, 63)}"
    if m == "c.fldsp":
        return f"{m} {r(F)}, {rng.randrange(0, 512, 8)}(x2)"
    if m == "c.lwsp":
        return f"{m} {r(XNZ)}, {rng.randrange(0, 256, 4)}(x2)"
    if m == "c.ldsp":
        return f"{m} {r(XNZ)}, {rng.randrange(0, 512, 8)}(x2)"
    if m in ("c.jr", "c.jalr"):
        return f"{m} {r(XNZ)}"
    if m in ("c.mv", "c.add"):
        return f"{m} {r(XNZ)}, {r(XNZ)}"
    if m == "c.fsdsp":
        return f"{m} {r(F)}, {rng.randrange(0, 512, 8)}(x2)"
    if m == "c.swsp":
        return f"{m} {r(X)}, {rng.randrange(0, 256, 4)}(x2)"
    if m == "c.sdsp":
        return f"{m} {r(X)}, {rng.randrange(0, 512, 8)}(x2)"
    if m in INT_R:
        return f"{m} {r(X)}, {r(X)}, {r(X)}"
    raise KeyError(m)


def assemble(lines, workdir):
    src = Path(workdir) / "g.s"
    obj = Path(workdir) / "g.o"
    binf = Path(workdir) / "g.bin"
    src.write_text("\n".join(lines) + "\n")
    subprocess.run(["clang", "--target=riscv64", f"-march={MARCH}", "-mno-relax",
                    "-c", str(src), "-o", str(obj)], check=True)
    subprocess.run(["ld.lld", "--oformat=binary", "-Ttext=0", str(obj), "-o", str(binf)],
                   check=True)
    return binf.read_bytes()


def capstone_name(md, raw, width):
    insns = list(md.disasm(raw.to_bytes(width, "little"), 0))
    if not insns or insns[0].size != width:
        return None
    return re.sub(r"\.(aqrl|aq|rl)$", "", md.insn_name(insns[0].id))


def build_goldens(per_mnemonic=3, seed=2023):
    import capstone

    sys.path.insert(0, str(DATA.parent.parent / "src"))
    from vvt.rvdecode import MNEMONICS

    rng = random.Random(seed)
    records = []
    lines = [".text"]
    for m in MNEMONICS:
        for _ in range(per_mnemonic):
            lines.append(".option rvc" if m.startswith("c.") else ".option norvc")
            text = gen(rng, m)
            lines.append(text)
            records.append({"asm": text, "mnemonic": m, "width": 2 if m.startswith("c.") else 4})
    with tempfile.TemporaryDirectory() as tmp:
        blob = assemble(lines, tmp)
    assert len(blob) == sum(r["width"] for r in records), "assembler emitted unexpected sizes"
    md = capstone.Cs(capstone.CS_ARCH_RISCV, capstone.CS_MODE_RISCV64 | capstone.CS_MODE_RISCVC)
    pos = 0
    for rec in records:
        raw = int.from_bytes(blob[pos:pos + rec["width"]], "little")
        pos += rec["width"]
        rec["raw"] = f"{raw:0{2 * rec['width']}x}"
        cs = capstone_name(md, raw, rec["width"])
        if cs != rec["mnemonic"]:
            raise SystemExit(f"capstone disagrees on {rec['asm']!r}: {cs}")
    return records


def build_nop_elf():
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "nop.s"
        src.write_text(".option norvc\n.text\n.globl _start\n_start:\naddi x0, x0, 0\n")
        obj = Path(tmp) / "nop.o"
        out = Path(tmp) / "nop.elf"
        subprocess.run(["clang", "--target=riscv64", f"-march={MARCH}", "-mno-relax", "-c",
                        str(src), "-o", str(obj)], check=True)
        subprocess.run(["ld.lld", "-static", "-s", "--no-rosegment", str(obj), "-o", str(out)],
                       check=True)
        return out.read_bytes()


def main():
    records = build_goldens()
    DATA.mkdir(parents=True, exist_ok=True)
    payload = {"march": MARCH, "count": len(records), "records": records}
    (DATA / "decoder_goldens.json").write_text(json.dumps(payload, indent=1) + "\n")
    (DATA / "nop.elf").write_bytes(build_nop_elf())
    print(f"wrote {len(records)} golden instructions")


if __name__ == "__main__":
    main()
