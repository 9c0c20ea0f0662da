"""Instruction decoding and classification for the RV64IMFD subset.

decode() is total over 32-bit words: every word either maps to exactly one
Instruction or raises IllegalInstruction.  Compressed (16-bit), atomic and
vector encodings are rejected on purpose; the execution models only ever see
the IMFD subset the code generator and assembler emit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .opcodes import BY_NAME, TABLE, InstrClass, OpSpec


class IllegalInstruction(Exception):
    """Word does not encode a supported RV64IMFD instruction."""

    def __init__(self, word: int, pc: int | None = None):
        self.word = word & 0xFFFFFFFF
        self.pc = pc
        loc = f" at pc={pc:#x}" if pc is not None else ""
        super().__init__(f"illegal instruction word {self.word:#010x}{loc}")


@dataclass
class Instruction:
    mnemonic: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    rs3: int = 0
    imm: int = 0
    width: str = "D"

    @property
    def spec(self) -> OpSpec:
        return BY_NAME[self.mnemonic]

    def __str__(self) -> str:
        s = self.spec
        regs = []
        if s.dst:
            regs.append(("f" if s.dst == "f" else "x") + str(self.rd))
        for i, kind in enumerate(s.srcs):
            r = (self.rs1, self.rs2, self.rs3)[i]
            regs.append(("f" if kind == "f" else "x") + str(r))
        if s.size:  # memory operand syntax
            base = regs.pop(1 if not s.store else 0)
            return f"{self.mnemonic} {regs[0]}, {self.imm}({base})"
        out = ", ".join(regs)
        if s.fmt in ("I", "IS", "ISW", "S", "B", "U", "J"):
            out += f", {self.imm}" if out else f"{self.imm}"
        return f"{self.mnemonic} {out}" if out else self.mnemonic


def _sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value & (1 << (bits - 1)) else value


# Lookup maps built from the single instruction table.
_R: dict[tuple[int, int, int], OpSpec] = {}
_I: dict[tuple[int, int], OpSpec] = {}
_IS: dict[tuple[int, int], OpSpec] = {}     # (f3, funct6)
_ISW: dict[tuple[int, int], OpSpec] = {}    # (f3, funct7)
_S: dict[tuple[int, int], OpSpec] = {}
_B: dict[int, OpSpec] = {}
_U: dict[int, OpSpec] = {}
_J: dict[int, OpSpec] = {}
_R4: dict[tuple[int, int], OpSpec] = {}
_FR: dict[int, OpSpec] = {}
_FR3: dict[tuple[int, int], OpSpec] = {}
_FU: dict[tuple[int, int], OpSpec] = {}
_FU3: dict[tuple[int, int, int], OpSpec] = {}

for _s in TABLE:
    if _s.fmt == "R":
        _R[(_s.opcode, _s.f3, _s.f7)] = _s
    elif _s.fmt == "I":
        _I[(_s.opcode, _s.f3)] = _s
    elif _s.fmt == "IS":
        _IS[(_s.f3, _s.f7)] = _s
    elif _s.fmt == "ISW":
        _ISW[(_s.f3, _s.f7)] = _s
    elif _s.fmt == "S":
        _S[(_s.opcode, _s.f3)] = _s
    elif _s.fmt == "B":
        _B[_s.f3] = _s
    elif _s.fmt == "U":
        _U[_s.opcode] = _s
    elif _s.fmt == "J":
        _J[_s.opcode] = _s
    elif _s.fmt == "R4":
        _R4[(_s.opcode, _s.f7)] = _s
    elif _s.fmt == "FR":
        _FR[_s.f7] = _s
    elif _s.fmt == "FR3":
        _FR3[(_s.f7, _s.f3)] = _s
    elif _s.fmt == "FU":
        _FU[(_s.f7, _s.rs2v)] = _s
    elif _s.fmt == "FU3":
        _FU3[(_s.f7, _s.rs2v, _s.f3)] = _s

_VALID_RM = frozenset((0, 1, 2, 3, 4, 7))


def decode(word: int, pc: int | None = None) -> Instruction:
    word = int(word) & 0xFFFFFFFF  # plain int: numpy scalars wrap on sext
    if word & 0x3 != 0x3:
        raise IllegalInstruction(word, pc)  # compressed or malformed
    opcode = word & 0x7F
    rd = (word >> 7) & 31
    f3 = (word >> 12) & 7
    rs1 = (word >> 15) & 31
    rs2 = (word >> 20) & 31
    f7 = (word >> 25) & 0x7F

    if opcode == 0x37 or opcode == 0x17:
        return Instruction(_U[opcode].mnemonic, rd=rd, imm=(word >> 12) & 0xFFFFF)

    if opcode == 0x6F:
        imm = _sext(((word >> 31) << 20) | (((word >> 12) & 0xFF) << 12)
                    | (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1), 21)
        return Instruction("jal", rd=rd, imm=imm)

    if opcode == 0x63:
        spec = _B.get(f3)
        if spec is None:
            raise IllegalInstruction(word, pc)
        imm = _sext(((word >> 31) << 12) | (((word >> 7) & 1) << 11)
                    | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1), 13)
        return Instruction(spec.mnemonic, rs1=rs1, rs2=rs2, imm=imm)

    if opcode == 0x23 or opcode == 0x27:
        spec = _S.get((opcode, f3))
        if spec is None:
            raise IllegalInstruction(word, pc)
        imm = _sext((f7 << 5) | rd, 12)
        return Instruction(spec.mnemonic, rs1=rs1, rs2=rs2, imm=imm, width=spec.width)

    if opcode == 0x13 and f3 in (1, 5):  # 64-bit shift immediates
        funct6 = (word >> 26) & 0x3F
        spec = _IS.get((f3, funct6))
        if spec is None:
            raise IllegalInstruction(word, pc)
        return Instruction(spec.mnemonic, rd=rd, rs1=rs1, imm=(word >> 20) & 0x3F)

    if opcode == 0x1B and f3 in (1, 5):  # 32-bit shift immediates
        spec = _ISW.get((f3, f7))
        if spec is None:
            raise IllegalInstruction(word, pc)
        return Instruction(spec.mnemonic, rd=rd, rs1=rs1, imm=rs2, width="W")

    if opcode in (0x03, 0x07, 0x13, 0x1B, 0x67):
        spec = _I.get((opcode, f3))
        if spec is None:
            raise IllegalInstruction(word, pc)
        return Instruction(spec.mnemonic, rd=rd, rs1=rs1,
                           imm=_sext(word >> 20, 12), width=spec.width)

    if opcode == 0x33 or opcode == 0x3B:
        spec = _R.get((opcode, f3, f7))
        if spec is None:
            raise IllegalInstruction(word, pc)
        return Instruction(spec.mnemonic, rd=rd, rs1=rs1, rs2=rs2, width=spec.width)

    if opcode in (0x43, 0x47, 0x4B, 0x4F):
        fmt2 = (word >> 25) & 3
        spec = _R4.get((opcode, fmt2))
        if spec is None or f3 not in _VALID_RM:
            raise IllegalInstruction(word, pc)
        return Instruction(spec.mnemonic, rd=rd, rs1=rs1, rs2=rs2,
                           rs3=(word >> 27) & 31, width=spec.width)

    if opcode == 0x53:
        spec = _FR.get(f7)
        if spec is not None:
            if f3 not in _VALID_RM:
                raise IllegalInstruction(word, pc)
            return Instruction(spec.mnemonic, rd=rd, rs1=rs1, rs2=rs2, width=spec.width)
        spec = _FR3.get((f7, f3))
        if spec is not None:
            return Instruction(spec.mnemonic, rd=rd, rs1=rs1, rs2=rs2, width=spec.width)
        spec = _FU.get((f7, rs2))
        if spec is not None:
            if f3 not in _VALID_RM:
                raise IllegalInstruction(word, pc)
            return Instruction(spec.mnemonic, rd=rd, rs1=rs1, width=spec.width)
        spec = _FU3.get((f7, rs2, f3))
        if spec is not None:
            return Instruction(spec.mnemonic, rd=rd, rs1=rs1, width=spec.width)
        raise IllegalInstruction(word, pc)

    if opcode == 0x0F:
        if f3 == 0:  # fence; ordering bits carry no meaning here
            return Instruction("fence", rd=rd, rs1=rs1, imm=_sext(word >> 20, 12))
        raise IllegalInstruction(word, pc)

    if opcode == 0x73:
        if word == 0x00000073:
            return Instruction("ecall")
        if word == 0x00100073:
            return Instruction("ebreak")
        raise IllegalInstruction(word, pc)

    raise IllegalInstruction(word, pc)


def classify(instr: Instruction) -> InstrClass:
    """Map an instruction to its timing/mix class.  Total over decodable ops."""
    return BY_NAME[instr.mnemonic].klass
