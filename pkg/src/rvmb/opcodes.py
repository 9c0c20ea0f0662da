"""RV64IMFD instruction table.

One table drives everything: the decoder, the assembler's encoder, the
classifier and the execution engine's dispatch ids.  Formats follow the base
ISA encoding families:

    R    funct7 | rs2 | rs1 | f3 | rd | opcode
    I    imm12 | rs1 | f3 | rd | opcode          (loads use rd, imm(rs1))
    IS   funct6 | shamt6 | rs1 | f3 | rd         (64-bit shifts)
    ISW  funct7 | shamt5 | rs1 | f3 | rd         (32-bit shifts)
    S    imm[11:5] | rs2 | rs1 | f3 | imm[4:0]
    B    branch immediate scatter
    U    imm20 | rd
    J    jump immediate scatter
    R4   rs3 | fmt2 | rs2 | rs1 | rm | rd        (fused multiply-add group)
    FR   funct7 | rs2 | rs1 | rm | rd            (rounding-mode field dynamic)
    FR3  funct7 | rs2 | rs1 | f3 | rd            (fixed funct3: sgnj/min/cmp)
    FU   funct7 | fixed-rs2 | rs1 | rm | rd      (sqrt, conversions)
    FU3  funct7 | fixed-rs2 | rs1 | f3 | rd      (moves, classify)
    SYS  fixed word (fence/ecall/ebreak)

The A, C and V extensions are deliberately absent: anything outside IMFD
decodes to IllegalInstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


class InstrClass(IntEnum):
    """Operation classes used for instruction-mix accounting and timing."""

    IntAlu = 0
    IntMult = 1
    IntDiv = 2
    MemRead = 3
    MemWrite = 4
    FloatAdd = 5
    FloatMult = 6
    FloatMultAcc = 7
    FloatDiv = 8
    FloatMisc = 9
    Branch = 10
    Jump = 11
    Other = 12


N_CLASSES = len(InstrClass)


@dataclass(frozen=True)
class OpSpec:
    mnemonic: str
    opid: int
    fmt: str
    opcode: int
    f3: int | None = None      # funct3; None means the field is a rounding mode
    f7: int | None = None      # funct7 / funct6 / fmt2 depending on fmt
    rs2v: int | None = None    # fixed rs2 field for FU/FU3 encodings
    dst: str | None = None     # 'x' or 'f'
    srcs: tuple = ()           # register file of rs1, rs2, rs3 in order
    klass: InstrClass = InstrClass.IntAlu
    width: str = "D"           # W/D for integer ops, S/D for float ops
    size: int = 0              # memory access size in bytes (loads/stores)
    store: bool = False


_TABLE: list[OpSpec] = []


def _op(mnemonic, fmt, opcode, f3=None, f7=None, rs2v=None, dst=None,
        srcs=(), klass=InstrClass.IntAlu, width="D", size=0, store=False):
    spec = OpSpec(mnemonic, len(_TABLE), fmt, opcode, f3, f7, rs2v, dst,
                  tuple(srcs), klass, width, size, store)
    _TABLE.append(spec)
    return spec


IC = InstrClass

# ---------------------------------------------------------------- RV64I base
_op("lui",   "U", 0x37, dst="x")
_op("auipc", "U", 0x17, dst="x")
_op("jal",   "J", 0x6F, dst="x", klass=IC.Jump)
_op("jalr",  "I", 0x67, f3=0, dst="x", srcs=("x",), klass=IC.Jump)

_op("beq",  "B", 0x63, f3=0, srcs=("x", "x"), klass=IC.Branch)
_op("bne",  "B", 0x63, f3=1, srcs=("x", "x"), klass=IC.Branch)
_op("blt",  "B", 0x63, f3=4, srcs=("x", "x"), klass=IC.Branch)
_op("bge",  "B", 0x63, f3=5, srcs=("x", "x"), klass=IC.Branch)
_op("bltu", "B", 0x63, f3=6, srcs=("x", "x"), klass=IC.Branch)
_op("bgeu", "B", 0x63, f3=7, srcs=("x", "x"), klass=IC.Branch)

_op("lb",  "I", 0x03, f3=0, dst="x", srcs=("x",), klass=IC.MemRead, size=1)
_op("lh",  "I", 0x03, f3=1, dst="x", srcs=("x",), klass=IC.MemRead, size=2)
_op("lw",  "I", 0x03, f3=2, dst="x", srcs=("x",), klass=IC.MemRead, size=4, width="W")
_op("ld",  "I", 0x03, f3=3, dst="x", srcs=("x",), klass=IC.MemRead, size=8)
_op("lbu", "I", 0x03, f3=4, dst="x", srcs=("x",), klass=IC.MemRead, size=1)
_op("lhu", "I", 0x03, f3=5, dst="x", srcs=("x",), klass=IC.MemRead, size=2)
_op("lwu", "I", 0x03, f3=6, dst="x", srcs=("x",), klass=IC.MemRead, size=4, width="W")

_op("sb", "S", 0x23, f3=0, srcs=("x", "x"), klass=IC.MemWrite, size=1, store=True)
_op("sh", "S", 0x23, f3=1, srcs=("x", "x"), klass=IC.MemWrite, size=2, store=True)
_op("sw", "S", 0x23, f3=2, srcs=("x", "x"), klass=IC.MemWrite, size=4, store=True, width="W")
_op("sd", "S", 0x23, f3=3, srcs=("x", "x"), klass=IC.MemWrite, size=8, store=True)

_op("addi",  "I", 0x13, f3=0, dst="x", srcs=("x",))
_op("slti",  "I", 0x13, f3=2, dst="x", srcs=("x",))
_op("sltiu", "I", 0x13, f3=3, dst="x", srcs=("x",))
_op("xori",  "I", 0x13, f3=4, dst="x", srcs=("x",))
_op("ori",   "I", 0x13, f3=6, dst="x", srcs=("x",))
_op("andi",  "I", 0x13, f3=7, dst="x", srcs=("x",))
_op("slli",  "IS", 0x13, f3=1, f7=0x00, dst="x", srcs=("x",))
_op("srli",  "IS", 0x13, f3=5, f7=0x00, dst="x", srcs=("x",))
_op("srai",  "IS", 0x13, f3=5, f7=0x10, dst="x", srcs=("x",))

_op("add",  "R", 0x33, f3=0, f7=0x00, dst="x", srcs=("x", "x"))
_op("sub",  "R", 0x33, f3=0, f7=0x20, dst="x", srcs=("x", "x"))
_op("sll",  "R", 0x33, f3=1, f7=0x00, dst="x", srcs=("x", "x"))
_op("slt",  "R", 0x33, f3=2, f7=0x00, dst="x", srcs=("x", "x"))
_op("sltu", "R", 0x33, f3=3, f7=0x00, dst="x", srcs=("x", "x"))
_op("xor",  "R", 0x33, f3=4, f7=0x00, dst="x", srcs=("x", "x"))
_op("srl",  "R", 0x33, f3=5, f7=0x00, dst="x", srcs=("x", "x"))
_op("sra",  "R", 0x33, f3=5, f7=0x20, dst="x", srcs=("x", "x"))
_op("or",   "R", 0x33, f3=6, f7=0x00, dst="x", srcs=("x", "x"))
_op("and",  "R", 0x33, f3=7, f7=0x00, dst="x", srcs=("x", "x"))

_op("addiw", "I", 0x1B, f3=0, dst="x", srcs=("x",), width="W")
_op("slliw", "ISW", 0x1B, f3=1, f7=0x00, dst="x", srcs=("x",), width="W")
_op("srliw", "ISW", 0x1B, f3=5, f7=0x00, dst="x", srcs=("x",), width="W")
_op("sraiw", "ISW", 0x1B, f3=5, f7=0x20, dst="x", srcs=("x",), width="W")

_op("addw", "R", 0x3B, f3=0, f7=0x00, dst="x", srcs=("x", "x"), width="W")
_op("subw", "R", 0x3B, f3=0, f7=0x20, dst="x", srcs=("x", "x"), width="W")
_op("sllw", "R", 0x3B, f3=1, f7=0x00, dst="x", srcs=("x", "x"), width="W")
_op("srlw", "R", 0x3B, f3=5, f7=0x00, dst="x", srcs=("x", "x"), width="W")
_op("sraw", "R", 0x3B, f3=5, f7=0x20, dst="x", srcs=("x", "x"), width="W")

_op("fence",  "SYS", 0x0F, f3=0)                     # pred/succ bits ignored
_op("ecall",  "SYS", 0x73, f3=0, rs2v=0, klass=IC.Other)
_op("ebreak", "SYS", 0x73, f3=0, rs2v=1, klass=IC.Other)

# ------------------------------------------------------------------- RV64M
_op("mul",    "R", 0x33, f3=0, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntMult)
_op("mulh",   "R", 0x33, f3=1, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntMult)
_op("mulhsu", "R", 0x33, f3=2, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntMult)
_op("mulhu",  "R", 0x33, f3=3, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntMult)
_op("div",    "R", 0x33, f3=4, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv)
_op("divu",   "R", 0x33, f3=5, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv)
_op("rem",    "R", 0x33, f3=6, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv)
_op("remu",   "R", 0x33, f3=7, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv)
_op("mulw",   "R", 0x3B, f3=0, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntMult, width="W")
_op("divw",   "R", 0x3B, f3=4, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv, width="W")
_op("divuw",  "R", 0x3B, f3=5, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv, width="W")
_op("remw",   "R", 0x3B, f3=6, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv, width="W")
_op("remuw",  "R", 0x3B, f3=7, f7=0x01, dst="x", srcs=("x", "x"), klass=IC.IntDiv, width="W")

# ------------------------------------------------------------------- RV64F
_op("flw", "I", 0x07, f3=2, dst="f", srcs=("x",), klass=IC.MemRead, size=4, width="S")
_op("fsw", "S", 0x27, f3=2, srcs=("x", "f"), klass=IC.MemWrite, size=4, store=True, width="S")

_op("fmadd.s",  "R4", 0x43, f7=0, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc, width="S")
_op("fmsub.s",  "R4", 0x47, f7=0, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc, width="S")
_op("fnmsub.s", "R4", 0x4B, f7=0, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc, width="S")
_op("fnmadd.s", "R4", 0x4F, f7=0, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc, width="S")

_op("fadd.s",  "FR", 0x53, f7=0x00, dst="f", srcs=("f", "f"), klass=IC.FloatAdd, width="S")
_op("fsub.s",  "FR", 0x53, f7=0x04, dst="f", srcs=("f", "f"), klass=IC.FloatAdd, width="S")
_op("fmul.s",  "FR", 0x53, f7=0x08, dst="f", srcs=("f", "f"), klass=IC.FloatMult, width="S")
_op("fdiv.s",  "FR", 0x53, f7=0x0C, dst="f", srcs=("f", "f"), klass=IC.FloatDiv, width="S")
_op("fsqrt.s", "FU", 0x53, f7=0x2C, rs2v=0, dst="f", srcs=("f",), klass=IC.FloatDiv, width="S")

_op("fsgnj.s",  "FR3", 0x53, f3=0, f7=0x10, dst="f", srcs=("f", "f"), klass=IC.FloatMisc, width="S")
_op("fsgnjn.s", "FR3", 0x53, f3=1, f7=0x10, dst="f", srcs=("f", "f"), klass=IC.FloatMisc, width="S")
_op("fsgnjx.s", "FR3", 0x53, f3=2, f7=0x10, dst="f", srcs=("f", "f"), klass=IC.FloatMisc, width="S")
_op("fmin.s",   "FR3", 0x53, f3=0, f7=0x14, dst="f", srcs=("f", "f"), klass=IC.FloatMisc, width="S")
_op("fmax.s",   "FR3", 0x53, f3=1, f7=0x14, dst="f", srcs=("f", "f"), klass=IC.FloatMisc, width="S")

_op("fcvt.w.s",  "FU", 0x53, f7=0x60, rs2v=0, dst="x", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fcvt.wu.s", "FU", 0x53, f7=0x60, rs2v=1, dst="x", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fcvt.l.s",  "FU", 0x53, f7=0x60, rs2v=2, dst="x", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fcvt.lu.s", "FU", 0x53, f7=0x60, rs2v=3, dst="x", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fcvt.s.w",  "FU", 0x53, f7=0x68, rs2v=0, dst="f", srcs=("x",), klass=IC.FloatMisc, width="S")
_op("fcvt.s.wu", "FU", 0x53, f7=0x68, rs2v=1, dst="f", srcs=("x",), klass=IC.FloatMisc, width="S")
_op("fcvt.s.l",  "FU", 0x53, f7=0x68, rs2v=2, dst="f", srcs=("x",), klass=IC.FloatMisc, width="S")
_op("fcvt.s.lu", "FU", 0x53, f7=0x68, rs2v=3, dst="f", srcs=("x",), klass=IC.FloatMisc, width="S")

_op("fmv.x.w",  "FU3", 0x53, f3=0, f7=0x70, rs2v=0, dst="x", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fclass.s", "FU3", 0x53, f3=1, f7=0x70, rs2v=0, dst="x", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fmv.w.x",  "FU3", 0x53, f3=0, f7=0x78, rs2v=0, dst="f", srcs=("x",), klass=IC.FloatMisc, width="S")

_op("feq.s", "FR3", 0x53, f3=2, f7=0x50, dst="x", srcs=("f", "f"), klass=IC.FloatMisc, width="S")
_op("flt.s", "FR3", 0x53, f3=1, f7=0x50, dst="x", srcs=("f", "f"), klass=IC.FloatMisc, width="S")
_op("fle.s", "FR3", 0x53, f3=0, f7=0x50, dst="x", srcs=("f", "f"), klass=IC.FloatMisc, width="S")

# ------------------------------------------------------------------- RV64D
_op("fld", "I", 0x07, f3=3, dst="f", srcs=("x",), klass=IC.MemRead, size=8, width="D")
_op("fsd", "S", 0x27, f3=3, srcs=("x", "f"), klass=IC.MemWrite, size=8, store=True, width="D")

_op("fmadd.d",  "R4", 0x43, f7=1, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc)
_op("fmsub.d",  "R4", 0x47, f7=1, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc)
_op("fnmsub.d", "R4", 0x4B, f7=1, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc)
_op("fnmadd.d", "R4", 0x4F, f7=1, dst="f", srcs=("f", "f", "f"), klass=IC.FloatMultAcc)

_op("fadd.d",  "FR", 0x53, f7=0x01, dst="f", srcs=("f", "f"), klass=IC.FloatAdd)
_op("fsub.d",  "FR", 0x53, f7=0x05, dst="f", srcs=("f", "f"), klass=IC.FloatAdd)
_op("fmul.d",  "FR", 0x53, f7=0x09, dst="f", srcs=("f", "f"), klass=IC.FloatMult)
_op("fdiv.d",  "FR", 0x53, f7=0x0D, dst="f", srcs=("f", "f"), klass=IC.FloatDiv)
_op("fsqrt.d", "FU", 0x53, f7=0x2D, rs2v=0, dst="f", srcs=("f",), klass=IC.FloatDiv)

_op("fsgnj.d",  "FR3", 0x53, f3=0, f7=0x11, dst="f", srcs=("f", "f"), klass=IC.FloatMisc)
_op("fsgnjn.d", "FR3", 0x53, f3=1, f7=0x11, dst="f", srcs=("f", "f"), klass=IC.FloatMisc)
_op("fsgnjx.d", "FR3", 0x53, f3=2, f7=0x11, dst="f", srcs=("f", "f"), klass=IC.FloatMisc)
_op("fmin.d",   "FR3", 0x53, f3=0, f7=0x15, dst="f", srcs=("f", "f"), klass=IC.FloatMisc)
_op("fmax.d",   "FR3", 0x53, f3=1, f7=0x15, dst="f", srcs=("f", "f"), klass=IC.FloatMisc)

_op("fcvt.s.d", "FU", 0x53, f7=0x20, rs2v=1, dst="f", srcs=("f",), klass=IC.FloatMisc, width="S")
_op("fcvt.d.s", "FU", 0x53, f7=0x21, rs2v=0, dst="f", srcs=("f",), klass=IC.FloatMisc)

_op("feq.d", "FR3", 0x53, f3=2, f7=0x51, dst="x", srcs=("f", "f"), klass=IC.FloatMisc)
_op("flt.d", "FR3", 0x53, f3=1, f7=0x51, dst="x", srcs=("f", "f"), klass=IC.FloatMisc)
_op("fle.d", "FR3", 0x53, f3=0, f7=0x51, dst="x", srcs=("f", "f"), klass=IC.FloatMisc)

_op("fcvt.w.d",  "FU", 0x53, f7=0x61, rs2v=0, dst="x", srcs=("f",), klass=IC.FloatMisc)
_op("fcvt.wu.d", "FU", 0x53, f7=0x61, rs2v=1, dst="x", srcs=("f",), klass=IC.FloatMisc)
_op("fcvt.l.d",  "FU", 0x53, f7=0x61, rs2v=2, dst="x", srcs=("f",), klass=IC.FloatMisc)
_op("fcvt.lu.d", "FU", 0x53, f7=0x61, rs2v=3, dst="x", srcs=("f",), klass=IC.FloatMisc)
_op("fcvt.d.w",  "FU", 0x53, f7=0x69, rs2v=0, dst="f", srcs=("x",), klass=IC.FloatMisc)
_op("fcvt.d.wu", "FU", 0x53, f7=0x69, rs2v=1, dst="f", srcs=("x",), klass=IC.FloatMisc)
_op("fcvt.d.l",  "FU", 0x53, f7=0x69, rs2v=2, dst="f", srcs=("x",), klass=IC.FloatMisc)
_op("fcvt.d.lu", "FU", 0x53, f7=0x69, rs2v=3, dst="f", srcs=("x",), klass=IC.FloatMisc)

_op("fmv.x.d",  "FU3", 0x53, f3=0, f7=0x71, rs2v=0, dst="x", srcs=("f",), klass=IC.FloatMisc)
_op("fclass.d", "FU3", 0x53, f3=1, f7=0x71, rs2v=0, dst="x", srcs=("f",), klass=IC.FloatMisc)
_op("fmv.d.x",  "FU3", 0x53, f3=0, f7=0x79, rs2v=0, dst="f", srcs=("x",), klass=IC.FloatMisc)


TABLE: tuple[OpSpec, ...] = tuple(_TABLE)
BY_NAME: dict[str, OpSpec] = {s.mnemonic: s for s in TABLE}
N_OPS = len(TABLE)

# Register name maps shared by the assembler and debug formatting.
X_ABI = ("zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
         "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6").split()
F_ABI = ("ft0 ft1 ft2 ft3 ft4 ft5 ft6 ft7 fs0 fs1 fa0 fa1 fa2 fa3 fa4 fa5 "
         "fa6 fa7 fs2 fs3 fs4 fs5 fs6 fs7 fs8 fs9 fs10 fs11 ft8 ft9 ft10 ft11").split()

X_NAMES = {f"x{i}": i for i in range(32)} | {n: i for i, n in enumerate(X_ABI)} | {"fp": 8}
F_NAMES = {f"f{i}": i for i in range(32)} | {n: i for i, n in enumerate(F_ABI)}
