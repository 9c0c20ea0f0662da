"""Memory images, minimal ELF64 ingestion and program exit conventions.

A MemoryImage is the handoff point between program construction (the
assembler, the tensor compiler, or an external cross-compiled ELF) and
everything that runs programs.  `prepare` turns an image into live
architectural state plus the decoded program for the segment holding the
entry point.

Exit conventions supported, in either direction of travel:
  - HTIF style: storing an odd value v to the `tohost` symbol ends the
    run with code v >> 1.
  - ecall style: ECALL with x17 == 93 ends the run with the low 32 bits
    of x10.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .asm import assemble, assemble_with_labels  # re-exported  # noqa: F401
from .engine import DEFAULT_TOHOST, ArchState, Program, SparseMemory
from .opcodes import BY_NAME

PAGE = 4096

PT_LOAD = 1
PF_X = 1
PF_W = 2
EM_RISCV = 243
ET_EXEC = 2


class LoaderError(Exception):
    """Common base for image construction failures."""


class BadMagic(LoaderError):
    pass


class WrongClass(LoaderError):
    pass


class WrongMachine(LoaderError):
    pass


class UnsupportedType(LoaderError):
    pass


class OverlappingSegments(LoaderError):
    pass


@dataclass
class Segment:
    base: int
    data: bytes
    writable: bool = True
    executable: bool = False

    @property
    def end(self):
        return self.base + len(self.data)


@dataclass
class MemoryImage:
    segments: list
    entry: int
    symbols: dict = field(default_factory=dict)

    def __post_init__(self):
        segs = sorted(self.segments, key=lambda s: s.base)
        for a, b in zip(segs, segs[1:]):
            if a.end > b.base:
                raise OverlappingSegments(
                    f"segment at {a.base:#x}+{len(a.data)} overlaps "
                    f"segment at {b.base:#x}")
        if not any(s.executable and s.base <= self.entry < s.end
                   for s in self.segments):
            raise LoaderError(
                f"entry {self.entry:#x} not inside an executable segment")

    @property
    def tohost(self):
        return self.symbols.get("tohost", DEFAULT_TOHOST)


def image_from_code(code, base=0x1000, entry=None, data=(), symbols=None):
    """Image from raw instruction bytes plus optional (base, bytes) data
    blocks.  Entry defaults to the code base."""
    segs = [Segment(base, bytes(code), writable=False, executable=True)]
    for dbase, dbytes in data:
        segs.append(Segment(dbase, bytes(dbytes), writable=True))
    return MemoryImage(segs, base if entry is None else entry,
                       dict(symbols or {}))


def image_from_asm(source, base=0x1000, data=(), symbols=None):
    """Assemble source and wrap it; assembler labels become symbols."""
    code, labels = assemble_with_labels(source, base)
    syms = dict(labels)
    syms.update(symbols or {})
    return image_from_code(code, base=base, data=data, symbols=syms)


def _u16(b, off):
    return struct.unpack_from("<H", b, off)[0]


def _u32(b, off):
    return struct.unpack_from("<I", b, off)[0]


def _u64(b, off):
    return struct.unpack_from("<Q", b, off)[0]


def load_elf(blob):
    """Parse a static RV64 little-endian executable into a MemoryImage.

    Maps every PT_LOAD segment (file bytes padded with zeros up to memsz)
    and collects named symbols, so a linked-in `tohost` is honored.
    """
    blob = bytes(blob)
    if len(blob) < 64:
        raise BadMagic(f"file too short for an ELF64 header ({len(blob)} bytes)")
    if blob[:4] != b"\x7fELF":
        raise BadMagic("missing ELF magic")
    if blob[4] != 2:
        raise WrongClass(f"not ELF64 (class {blob[4]})")
    if blob[5] != 1:
        raise WrongClass(f"not little-endian (data encoding {blob[5]})")
    e_type = _u16(blob, 16)
    machine = _u16(blob, 18)
    if machine != EM_RISCV:
        raise WrongMachine(f"machine {machine}, want {EM_RISCV} (RISC-V)")
    if e_type != ET_EXEC:
        raise UnsupportedType(
            f"type {e_type}: only static executables are supported")
    entry = _u64(blob, 24)
    phoff, shoff = _u64(blob, 32), _u64(blob, 40)
    phentsize, phnum = _u16(blob, 54), _u16(blob, 56)
    shentsize, shnum = _u16(blob, 58), _u16(blob, 60)

    segments = []
    for i in range(phnum):
        off = phoff + i * phentsize
        if off + 56 > len(blob):
            raise BadMagic("truncated program header table")
        p_type = _u32(blob, off)
        if p_type != PT_LOAD:
            continue
        flags = _u32(blob, off + 4)
        p_offset = _u64(blob, off + 8)
        vaddr = _u64(blob, off + 16)
        filesz = _u64(blob, off + 32)
        memsz = _u64(blob, off + 40)
        if p_offset + filesz > len(blob):
            raise BadMagic("PT_LOAD extends past end of file")
        data = blob[p_offset:p_offset + filesz] + b"\x00" * (memsz - filesz)
        if not data:
            continue
        segments.append(Segment(vaddr, data, writable=bool(flags & PF_W),
                                executable=bool(flags & PF_X)))

    symbols = {}
    for i in range(shnum):
        off = shoff + i * shentsize
        if off + 64 > len(blob):
            raise BadMagic("truncated section header table")
        sh_type = _u32(blob, off + 4)
        if sh_type != 2:  # SHT_SYMTAB
            continue
        sym_off = _u64(blob, off + 24)
        sym_size = _u64(blob, off + 32)
        strtab_idx = _u32(blob, off + 40)
        entsize = _u64(blob, off + 56) or 24
        soff = shoff + strtab_idx * shentsize
        str_off = _u64(blob, soff + 24)
        str_size = _u64(blob, soff + 32)
        strtab = blob[str_off:str_off + str_size]
        for j in range(sym_size // entsize):
            s = sym_off + j * entsize
            name_idx = _u32(blob, s)
            if name_idx == 0:
                continue
            end = strtab.find(b"\x00", name_idx)
            name = strtab[name_idx:end].decode("ascii", "replace")
            symbols[name] = _u64(blob, s + 8)

    return MemoryImage(segments, entry, symbols)


@dataclass
class Prepared:
    state: ArchState
    program: Program
    tohost: int


def prepare(image, extra_pages=(), console_cap=1 << 16):
    """Build runnable state from an image.

    The memory window spans every segment plus the tohost word (the exit
    store must land in mapped memory).  The program is decoded from the
    executable segment containing the entry point; control flow leaving
    that segment faults with bad-pc, which is the honest answer for this
    single-stream machine.
    """
    lows = [s.base for s in image.segments] + [image.tohost]
    highs = [s.end for s in image.segments] + [image.tohost + 8]
    for base, size in extra_pages:
        lows.append(base)
        highs.append(base + size)
    mem = SparseMemory(min(lows), max(highs))
    for seg in image.segments:
        mem.write_block(seg.base, seg.data)
    mem.map_range(image.tohost, 8)
    for base, size in extra_pages:
        mem.map_range(base, size)

    code_seg = next(s for s in image.segments
                    if s.executable and s.base <= image.entry < s.end)
    data = code_seg.data
    if len(data) % 4:
        data = data + b"\x00" * (4 - len(data) % 4)
    words = np.frombuffer(data, dtype="<u4")
    program = Program.from_words(words, base=code_seg.base)

    state = ArchState(mem, pc=image.entry, console_cap=console_cap)
    return Prepared(state, program, image.tohost)


def exit_check(state, instr, image):
    """Exit code implied by the just-committed instruction, else None.

    Pure inspection of architectural state; the JIT core applies the same
    two conventions inline, and tests hold the two paths equal.
    """
    if instr.mnemonic == "ecall":
        if int(state.x[17]) == 93:
            return int(state.x[10]) & 0xFFFFFFFF
        return None
    spec = BY_NAME[instr.mnemonic]
    if not spec.store:
        return None
    addr = (int(state.x[instr.rs1]) + instr.imm) & (1 << 64) - 1
    tohost = image.tohost if image is not None else DEFAULT_TOHOST
    if addr != tohost:
        return None
    raw = state.mem.read_block(addr, spec.size)
    v = int.from_bytes(raw, "little")
    if v & 1:
        return v >> 1
    return None
