"""Encoder and two-pass assembler for the RV64IMFD subset.

The assembler exists for tests, fixtures and small hand-written benchmarks;
generated tensor kernels use AsmBuilder directly.  Syntax is the usual
flavour:

    loop:                     # labels end with a colon
        addi t0, t0, -1       # ABI or numeric register names
        flw  f1, 8(a0)        # loads/stores use imm(base)
        bne  t0, zero, loop   # branch targets are labels or literals
        .word  0x00000013     # raw data directives
        .dword 0xdeadbeef

Rounding-mode fields are emitted as "dynamic" (0b111), matching common
toolchain output; execution always rounds to nearest even regardless.
"""

from __future__ import annotations

from .isa import Instruction
from .opcodes import BY_NAME, F_NAMES, X_NAMES, OpSpec


class AsmError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


class UnknownMnemonic(AsmError):
    pass


class UndefinedLabel(AsmError):
    pass


class ImmediateOutOfRange(AsmError):
    pass


_DYN_RM = 0b111

# Conversions whose result is always exact carry rm=0 rather than "dynamic",
# matching what mainstream toolchains emit.
_EXACT_CVT = frozenset(("fcvt.d.s", "fcvt.d.w", "fcvt.d.wu"))


def _check(imm: int, lo: int, hi: int, what: str, line: int | None = None) -> int:
    if not lo <= imm <= hi:
        raise ImmediateOutOfRange(f"{what} {imm} outside [{lo}, {hi}]", line)
    return imm


def encode(instr: Instruction, line: int | None = None) -> int:
    """Encode an Instruction back to its 32-bit word."""
    s = BY_NAME.get(instr.mnemonic)
    if s is None:
        raise UnknownMnemonic(f"unknown mnemonic '{instr.mnemonic}'", line)
    rd, rs1, rs2, rs3, imm = instr.rd, instr.rs1, instr.rs2, instr.rs3, instr.imm
    op = s.opcode

    if s.fmt == "R":
        return (s.f7 << 25) | (rs2 << 20) | (rs1 << 15) | (s.f3 << 12) | (rd << 7) | op
    if s.fmt == "I":
        imm = _check(imm, -2048, 2047, "immediate", line) & 0xFFF
        return (imm << 20) | (rs1 << 15) | (s.f3 << 12) | (rd << 7) | op
    if s.fmt == "IS":
        imm = _check(imm, 0, 63, "shift amount", line)
        return (s.f7 << 26) | (imm << 20) | (rs1 << 15) | (s.f3 << 12) | (rd << 7) | op
    if s.fmt == "ISW":
        imm = _check(imm, 0, 31, "shift amount", line)
        return (s.f7 << 25) | (imm << 20) | (rs1 << 15) | (s.f3 << 12) | (rd << 7) | op
    if s.fmt == "S":
        imm = _check(imm, -2048, 2047, "offset", line) & 0xFFF
        return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (s.f3 << 12) \
            | ((imm & 0x1F) << 7) | op
    if s.fmt == "B":
        _check(imm, -4096, 4094, "branch offset", line)
        if imm & 1:
            raise ImmediateOutOfRange(f"branch offset {imm} is odd", line)
        u = imm & 0x1FFF
        return ((u >> 12) << 31) | (((u >> 5) & 0x3F) << 25) | (rs2 << 20) \
            | (rs1 << 15) | (s.f3 << 12) | (((u >> 1) & 0xF) << 8) \
            | (((u >> 11) & 1) << 7) | op
    if s.fmt == "U":
        imm = _check(imm, 0, 0xFFFFF, "upper immediate", line)
        return (imm << 12) | (rd << 7) | op
    if s.fmt == "J":
        _check(imm, -(1 << 20), (1 << 20) - 2, "jump offset", line)
        if imm & 1:
            raise ImmediateOutOfRange(f"jump offset {imm} is odd", line)
        u = imm & 0x1FFFFF
        return ((u >> 20) << 31) | (((u >> 1) & 0x3FF) << 21) | (((u >> 11) & 1) << 20) \
            | (((u >> 12) & 0xFF) << 12) | (rd << 7) | op
    if s.fmt == "R4":
        return (rs3 << 27) | (s.f7 << 25) | (rs2 << 20) | (rs1 << 15) \
            | (_DYN_RM << 12) | (rd << 7) | op
    if s.fmt == "FR":
        return (s.f7 << 25) | (rs2 << 20) | (rs1 << 15) | (_DYN_RM << 12) | (rd << 7) | op
    if s.fmt == "FR3":
        return (s.f7 << 25) | (rs2 << 20) | (rs1 << 15) | (s.f3 << 12) | (rd << 7) | op
    if s.fmt == "FU":
        rm = 0 if s.mnemonic in _EXACT_CVT else _DYN_RM
        return (s.f7 << 25) | (s.rs2v << 20) | (rs1 << 15) | (rm << 12) | (rd << 7) | op
    if s.fmt == "FU3":
        return (s.f7 << 25) | (s.rs2v << 20) | (rs1 << 15) | (s.f3 << 12) | (rd << 7) | op
    if s.fmt == "SYS":
        if s.mnemonic == "fence":
            return ((imm & 0xFFF) << 20) | (rs1 << 15) | (rd << 7) | op
        if s.mnemonic == "ecall":
            return 0x00000073
        return 0x00100073  # ebreak
    raise AsmError(f"unencodable format {s.fmt}", line)


def _parse_int(tok: str, line: int) -> int:
    try:
        return int(tok, 0)
    except ValueError:
        raise AsmError(f"bad integer '{tok}'", line) from None


def _xreg(tok: str, line: int) -> int:
    r = X_NAMES.get(tok)
    if r is None:
        raise AsmError(f"bad integer register '{tok}'", line)
    return r


def _freg(tok: str, line: int) -> int:
    r = F_NAMES.get(tok)
    if r is None:
        raise AsmError(f"bad float register '{tok}'", line)
    return r


def _reg(kind: str, tok: str, line: int) -> int:
    return _xreg(tok, line) if kind == "x" else _freg(tok, line)


def _split_operands(rest: str) -> list[str]:
    return [t.strip() for t in rest.split(",") if t.strip()] if rest.strip() else []


def _mem_operand(tok: str, line: int) -> tuple[str, str]:
    """Split 'imm(base)' into (imm, base)."""
    if not tok.endswith(")") or "(" not in tok:
        raise AsmError(f"expected offset(base), got '{tok}'", line)
    off, base = tok[:-1].split("(", 1)
    return (off.strip() or "0", base.strip())


class Assembler:
    """Two-pass assembler over a text program."""

    def __init__(self, base: int = 0x1000):
        self.base = base

    def assemble(self, source: str) -> tuple[bytes, dict[str, int]]:
        lines = source.splitlines()
        items = []    # (line_no, kind, payload); kind: op | word | dword
        labels: dict[str, int] = {}
        addr = self.base

        for no, raw in enumerate(lines, 1):
            text = raw.split("#", 1)[0].strip()
            while text:
                if ":" in text.split()[0] or (text.endswith(":") and " " not in text):
                    head, _, rest = text.partition(":")
                    head = head.strip()
                    if not head or not all(c.isalnum() or c in "._$" for c in head):
                        raise AsmError(f"bad label '{head}'", no)
                    if head in labels:
                        raise AsmError(f"duplicate label '{head}'", no)
                    labels[head] = addr
                    text = rest.strip()
                    continue
                break
            if not text:
                continue
            mnem, _, rest = text.partition(" ")
            mnem = mnem.lower()
            if mnem == ".word":
                for tok in _split_operands(rest):
                    items.append((no, "word", tok))
                    addr += 4
            elif mnem == ".dword":
                for tok in _split_operands(rest):
                    items.append((no, "dword", tok))
                    addr += 8
            elif mnem.startswith("."):
                raise AsmError(f"unknown directive '{mnem}'", no)
            else:
                ops = _split_operands(rest)
                for expanded in self._expand(mnem, ops, no):
                    items.append((no, "op", expanded))
                    addr += 4

        out = bytearray()
        addr = self.base
        for no, kind, payload in items:
            if kind == "word":
                out += (_parse_int(payload, no) & 0xFFFFFFFF).to_bytes(4, "little")
                addr += 4
            elif kind == "dword":
                v = _parse_int(payload, no) & 0xFFFFFFFFFFFFFFFF
                out += v.to_bytes(8, "little")
                addr += 8
            else:
                mnem, ops = payload
                instr = self._build(mnem, ops, addr, labels, no)
                out += encode(instr, no).to_bytes(4, "little")
                addr += 4
        return bytes(out), labels

    def _expand(self, mnem: str, ops: list[str], no: int):
        """Resolve the handful of supported pseudo-instructions.

        Expansion happens in pass one so that sizing stays exact; li picks
        its one- or two-instruction form from the literal value.
        """
        if mnem == "nop":
            return [("addi", ["x0", "x0", "0"])]
        if mnem == "mv":
            if len(ops) != 2:
                raise AsmError("mv needs rd, rs", no)
            return [("addi", [ops[0], ops[1], "0"])]
        if mnem == "ret":
            return [("jalr", ["x0", "x1", "0"])]
        if mnem == "j":
            if len(ops) != 1:
                raise AsmError("j needs a target", no)
            return [("jal", ["x0", ops[0]])]
        if mnem in ("beqz", "bnez"):
            if len(ops) != 2:
                raise AsmError(f"{mnem} needs rs, target", no)
            return [(mnem[:3], [ops[0], "x0", ops[1]])]
        if mnem == "li":
            if len(ops) != 2:
                raise AsmError("li needs rd, imm", no)
            value = _parse_int(ops[1], no)
            if -2048 <= value <= 2047:
                return [("addi", [ops[0], "x0", str(value)])]
            if -(1 << 31) <= value < (1 << 31):
                lo = ((value & 0xFFF) ^ 0x800) - 0x800  # sign-extended low part
                hi = ((value - lo) >> 12) & 0xFFFFF
                seq = [("lui", [ops[0], str(hi)])]
                if lo:
                    seq.append(("addiw", [ops[0], ops[0], str(lo)]))
                return seq
            raise ImmediateOutOfRange(f"li constant {value} beyond 32 bits", no)
        return [(mnem, ops)]

    def _build(self, mnem: str, ops: list[str], addr: int,
               labels: dict[str, int], no: int) -> Instruction:
        s = BY_NAME.get(mnem)
        if s is None:
            raise UnknownMnemonic(f"unknown mnemonic '{mnem}'", no)

        def imm_or_label(tok: str, relative: bool) -> int:
            if tok in labels:
                return labels[tok] - addr if relative else labels[tok]
            if tok and (tok[0].isdigit() or tok[0] in "+-"):
                return _parse_int(tok, no)
            raise UndefinedLabel(f"undefined label '{tok}'", no)

        def want(n: int):
            if len(ops) != n:
                raise AsmError(f"{mnem} expects {n} operands, got {len(ops)}", no)

        if s.fmt == "SYS":
            if ops:
                raise AsmError(f"{mnem} takes no operands", no)
            return Instruction(mnem, imm=0x0FF if mnem == "fence" else 0)
        if s.size and not s.store:          # load: rd, imm(base)
            want(2)
            off, base = _mem_operand(ops[1], no)
            return Instruction(mnem, rd=_reg(s.dst, ops[0], no),
                               rs1=_xreg(base, no), imm=_parse_int(off, no))
        if s.size and s.store:              # store: rs2, imm(base)
            want(2)
            off, base = _mem_operand(ops[1], no)
            return Instruction(mnem, rs1=_xreg(base, no),
                               rs2=_reg(s.srcs[1], ops[0], no), imm=_parse_int(off, no))
        if s.fmt in ("R", "FR", "FR3"):
            want(3)
            return Instruction(mnem, rd=_reg(s.dst, ops[0], no),
                               rs1=_reg(s.srcs[0], ops[1], no),
                               rs2=_reg(s.srcs[1], ops[2], no))
        if s.fmt == "R4":
            want(4)
            return Instruction(mnem, rd=_freg(ops[0], no), rs1=_freg(ops[1], no),
                               rs2=_freg(ops[2], no), rs3=_freg(ops[3], no))
        if s.fmt in ("FU", "FU3"):
            want(2)
            return Instruction(mnem, rd=_reg(s.dst, ops[0], no),
                               rs1=_reg(s.srcs[0], ops[1], no))
        if s.fmt == "B":
            want(3)
            return Instruction(mnem, rs1=_xreg(ops[0], no), rs2=_xreg(ops[1], no),
                               imm=imm_or_label(ops[2], relative=True))
        if s.fmt == "J":
            want(2)
            return Instruction(mnem, rd=_xreg(ops[0], no),
                               imm=imm_or_label(ops[1], relative=True))
        if s.fmt == "U":
            want(2)
            return Instruction(mnem, rd=_xreg(ops[0], no), imm=_parse_int(ops[1], no))
        if s.fmt in ("I", "IS", "ISW"):
            want(3)
            return Instruction(mnem, rd=_xreg(ops[0], no), rs1=_xreg(ops[1], no),
                               imm=imm_or_label(ops[2], relative=False)
                               if s.mnemonic == "jalr" else _parse_int(ops[2], no))
        raise AsmError(f"cannot assemble format {s.fmt}", no)


def assemble(source: str, base: int = 0x1000) -> bytes:
    """Assemble text to raw code bytes at the given base address."""
    code, _ = Assembler(base).assemble(source)
    return code


def assemble_with_labels(source: str, base: int = 0x1000) -> tuple[bytes, dict[str, int]]:
    return Assembler(base).assemble(source)
