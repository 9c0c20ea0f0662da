"""Architectural state, memory and the functional executor.

The executor runs predecoded programs through the JIT core in chunks,
handing each chunk's commit trace (pc, program index, data address) to an
optional sink.  Timing models and the cache hierarchy consume those traces;
the functional model itself only needs the class counts and final state.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import _exec
from .isa import Instruction, decode
from .opcodes import TABLE, N_OPS, N_CLASSES, InstrClass

# The JIT module carries the opcode ids as literals so its on-disk cache is
# self-contained; fail loudly if it ever drifts from the table.
if _exec.N_OPIDS != N_OPS:
    raise ImportError("_exec opcode ids out of sync with instruction table")
for _s in TABLE:
    if getattr(_exec, "OP_" + _s.mnemonic.upper().replace(".", "_")) != _s.opid:
        raise ImportError(f"_exec id mismatch for {_s.mnemonic}")
del _s

PAGE = 4096
CONSOLE_ADDR = _exec.CONSOLE_ADDR
DEFAULT_TOHOST = 0x400

OK = _exec.OK
EXITED = _exec.EXITED

STATUS_NAMES = {
    _exec.OK: "ok",
    _exec.EXITED: "exited",
    _exec.F_ILLEGAL: "illegal-instruction",
    _exec.F_UNALIGNED: "misaligned-access",
    _exec.F_UNMAPPED: "unmapped-access",
    _exec.F_BADPC: "bad-pc",
    _exec.F_ECALL: "unhandled-ecall",
    _exec.F_EBREAK: "breakpoint",
}

_MAX_WINDOW = 256 << 20


class ExecFault(RuntimeError):
    """Raised when execution stops on anything other than a clean exit."""

    def __init__(self, status, pc, addr=-1):
        self.status = status
        self.pc = pc
        self.addr = addr
        what = STATUS_NAMES.get(status, f"status {status}")
        msg = f"{what} at pc={pc:#x}"
        if addr >= 0:
            msg += f" addr={addr:#x}"
        super().__init__(msg)


class LimitExceeded(RuntimeError):
    """Instruction budget ran out before the program exited."""


class SparseMemory:
    """Byte-addressed memory over a dense window with 4 KiB mapping granules.

    Reads and writes outside mapped pages fault.  The window is sized once
    from the addresses in use; typed views over the backing buffer give the
    JIT core aligned access at every width.
    """

    def __init__(self, lo, hi):
        base = (lo // PAGE) * PAGE
        top = -(-hi // PAGE) * PAGE
        size = top - base
        if size <= 0:
            raise ValueError("empty memory window")
        if size > _MAX_WINDOW:
            raise ValueError(f"memory window {size:#x} exceeds {_MAX_WINDOW:#x}")
        self.base = base
        self.size = size
        self.buf = np.zeros(size, dtype=np.uint8)
        self.mapped = np.zeros(size // PAGE, dtype=np.uint8)
        self.u8 = self.buf
        self.i8 = self.buf.view(np.int8)
        self.i16 = self.buf.view(np.int16)
        self.i32 = self.buf.view(np.int32)
        self.i64 = self.buf.view(np.int64)
        self.u16 = self.buf.view(np.uint16)
        self.u32 = self.buf.view(np.uint32)
        self.u64 = self.buf.view(np.uint64)

    def _span(self, addr, size):
        off = addr - self.base
        if off < 0 or off + size > self.size:
            raise IndexError(f"address {addr:#x}+{size} outside memory window")
        return off

    def map_range(self, addr, size):
        """Mark whole pages covering [addr, addr+size) as mapped."""
        if size <= 0:
            return
        off = self._span(addr, size)
        self.mapped[off // PAGE:-(-(off + size) // PAGE)] = 1

    def is_mapped(self, addr):
        off = addr - self.base
        if off < 0 or off >= self.size:
            return False
        return bool(self.mapped[off // PAGE])

    def write_block(self, addr, data):
        """Store raw bytes, mapping the pages they land on."""
        data = np.frombuffer(bytes(data), dtype=np.uint8)
        if data.size == 0:
            return
        off = self._span(addr, data.size)
        self.buf[off:off + data.size] = data
        self.map_range(addr, data.size)

    def read_block(self, addr, size):
        off = self._span(addr, size)
        if not self.mapped[off // PAGE:-(-(off + size) // PAGE)].all():
            raise IndexError(f"read of unmapped range {addr:#x}+{size}")
        return self.buf[off:off + size].tobytes()

    @property
    def mem_args(self):
        return (self.base, self.size, self.mapped,
                self.i8, self.i16, self.i32, self.i64,
                self.u8, self.u16, self.u32, self.u64)


def _unified_reg(file, num):
    """Map a register to the shared rename space: x1..x31 -> 1..31,
    f0..f31 -> 32..63, and x0 (never a real dependency) -> -1."""
    if file == "x":
        return num if num != 0 else -1
    return 32 + num


class Program:
    """A decoded instruction stream with flat arrays for the JIT core.

    Alongside the execution fields the constructor derives everything the
    timing models need per instruction: class, destination and source
    registers in a unified numbering, memory size/direction and control
    kind (1 branch, 2 jal, 3 jalr).
    """

    def __init__(self, instrs, base=0x1000):
        if base % 4 != 0:
            raise ValueError("program base must be word aligned")
        self.base = base
        self.instrs = list(instrs)
        n = len(self.instrs)
        self.n = n
        self.ops = np.zeros(n, dtype=np.int64)
        self.rds = np.zeros(n, dtype=np.int64)
        self.rs1s = np.zeros(n, dtype=np.int64)
        self.rs2s = np.zeros(n, dtype=np.int64)
        self.rs3s = np.zeros(n, dtype=np.int64)
        self.imms = np.zeros(n, dtype=np.int64)
        self.clss = np.zeros(n, dtype=np.int64)
        self.sizes = np.zeros(n, dtype=np.int64)
        self.stores = np.zeros(n, dtype=np.uint8)
        self.ctrl = np.zeros(n, dtype=np.int64)
        self.dsts = np.zeros(n, dtype=np.int64)
        self.srcs = np.full((n, 3), -1, dtype=np.int64)
        for i, ins in enumerate(self.instrs):
            spec = ins.spec
            self.ops[i] = spec.opid
            self.rds[i] = ins.rd
            self.rs1s[i] = ins.rs1
            self.rs2s[i] = ins.rs2
            self.rs3s[i] = ins.rs3
            self.imms[i] = ins.imm
            self.clss[i] = int(spec.klass)
            self.sizes[i] = spec.size
            self.stores[i] = 1 if spec.store else 0
            if spec.klass == InstrClass.Branch:
                self.ctrl[i] = 1
            elif spec.mnemonic == "jal":
                self.ctrl[i] = 2
            elif spec.mnemonic == "jalr":
                self.ctrl[i] = 3
            if spec.dst is not None:
                self.dsts[i] = _unified_reg(spec.dst, ins.rd)
            else:
                self.dsts[i] = -1
            regs = (ins.rs1, ins.rs2, ins.rs3)
            for k, sf in enumerate(spec.srcs):
                self.srcs[i, k] = _unified_reg(sf, regs[k])

    @classmethod
    def from_words(cls, words, base=0x1000):
        instrs = [decode(w, pc=base + 4 * i) for i, w in enumerate(words)]
        return cls(instrs, base=base)

    @property
    def end(self):
        return self.base + 4 * self.n

    def pc_of(self, idx):
        return self.base + 4 * idx

    def __len__(self):
        return self.n


class ArchState:
    """Register file, pc, memory and the console capture buffer."""

    def __init__(self, mem, pc=0x1000, console_cap=1 << 16):
        self.mem = mem
        self.x = np.zeros(32, dtype=np.int64)
        self.f = np.zeros(32, dtype=np.uint64)
        self.pc = pc
        self.cbuf = np.zeros(console_cap, dtype=np.uint8)
        self.caux = np.zeros(1, dtype=np.int64)
        # paired views used by the JIT core to reinterpret bits
        self._f4 = np.zeros(1, dtype=np.float32)
        self._u4 = self._f4.view(np.uint32)
        self._f8 = np.zeros(1, dtype=np.float64)
        self._u8d = self._f8.view(np.uint64)

    @property
    def console(self):
        return self.cbuf[:self.caux[0]].tobytes()

    @property
    def scratch_args(self):
        return (self._f4, self._u4, self._f8, self._u8d)


@dataclass
class RunResult:
    status: int
    exitcode: int
    committed: int
    cls_counts: np.ndarray
    wall_s: float

    @property
    def exited(self):
        return self.status == EXITED

    def mix(self):
        """Fraction of committed instructions per class."""
        total = max(int(self.cls_counts.sum()), 1)
        return {InstrClass(i).name: int(c) / total
                for i, c in enumerate(self.cls_counts)}


def step(state, program, tohost=DEFAULT_TOHOST):
    """Execute one instruction.  Returns (status, aux) where aux is the
    exit code after a clean exit and the faulting address on a fault."""
    res = run(state, program, max_instrs=1, tohost=tohost, _single=True)
    return res.status, res.exitcode


def run(state, program, max_instrs=1 << 34, chunk=1 << 20,
        tohost=DEFAULT_TOHOST, sink=None, _single=False):
    """Run until exit, fault or instruction budget exhaustion.

    `sink`, if given, is called per chunk with views (pcs, idxs, maddrs) of
    the commit trace; the views are reused, so consumers must copy anything
    they keep.  Faults raise ExecFault except in single-step mode, which
    reports the status instead.
    """
    chunk = int(min(chunk, max_instrs))
    t_pc = np.zeros(chunk, dtype=np.int64)
    t_idx = np.zeros(chunk, dtype=np.int64)
    t_maddr = np.zeros(chunk, dtype=np.int64)
    cls_counts = np.zeros(N_CLASSES, dtype=np.int64)
    total = 0
    t0 = time.perf_counter()
    while True:
        limit = min(chunk, max_instrs - total)
        n, pc, status, exitc = _exec.exec_chunk(
            program.ops, program.rds, program.rs1s, program.rs2s,
            program.rs3s, program.imms, program.clss,
            program.base, program.n,
            state.pc, state.x, state.f,
            *state.mem.mem_args,
            *state.scratch_args,
            state.cbuf, state.caux, tohost,
            limit, t_pc, t_idx, t_maddr, cls_counts)
        state.pc = pc
        total += n
        if sink is not None and n:
            sink(t_pc[:n], t_idx[:n], t_maddr[:n])
        if status == OK:
            if total >= max_instrs:
                if _single:
                    return RunResult(OK, 0, total, cls_counts,
                                     time.perf_counter() - t0)
                raise LimitExceeded(f"no exit after {total} instructions")
            continue
        if status == EXITED or _single:
            return RunResult(status, int(exitc), total, cls_counts,
                             time.perf_counter() - t0)
        raise ExecFault(status, pc, addr=int(exitc))


def state_digest(state, regions=()):
    """sha256 over the register files plus the given (addr, size) regions."""
    h = hashlib.sha256()
    h.update(state.x.tobytes())
    h.update(state.f.tobytes())
    for addr, size in regions:
        h.update(state.mem.read_block(addr, size))
    return h.hexdigest()


@dataclass
class TraceEvent:
    seq: int
    pc: int
    klass: InstrClass
    mem: tuple | None  # (addr, size, is_write) for loads/stores


@dataclass
class FunctionalResult:
    digest: str
    instr_counts: dict
    total_instrs: int
    exit_code: int
    status: int
    wall_s: float
    trace: list | None = None

    @property
    def exited(self):
        return self.status == EXITED


def writable_regions(image):
    """(addr, size) spans the program may alter: the writable segments."""
    return [(seg.base, len(seg.data))
            for seg in image.segments if seg.writable]


def functional_result(state, image, res, trace=None):
    """Fold a finished run into the comparable record: a digest over
    registers and writable memory, plus the class census."""
    digest = state_digest(state, writable_regions(image))
    counts = {InstrClass(i).name: int(c)
              for i, c in enumerate(res.cls_counts)}
    return FunctionalResult(digest, counts, res.committed, res.exitcode,
                            res.status, res.wall_s, trace)


def run_functional(image, entry=None, limit=1 << 34, want_trace=False):
    """Reference (atomic) execution of an image: every instruction takes
    one step, nothing is timed.  The returned digest is what the timing
    models must reproduce exactly."""
    from . import loader  # deferred: loader builds on this module

    prep = loader.prepare(image)
    if entry is not None:
        prep.state.pc = entry
    events = [] if want_trace else None
    sink = None
    if want_trace:
        program = prep.program

        def sink(pcs, idxs, maddrs):
            base = len(events)
            for i in range(pcs.shape[0]):
                idx = idxs[i]
                klass = InstrClass(int(program.clss[idx]))
                m = None
                if klass in (InstrClass.MemRead, InstrClass.MemWrite):
                    # console bytes carry addr -1 in the raw trace so the
                    # cache model skips them; restore the real address here
                    addr = int(maddrs[i]) if maddrs[i] >= 0 else CONSOLE_ADDR
                    m = (addr, int(program.sizes[idx]),
                         bool(program.stores[idx]))
                events.append(TraceEvent(base + i, int(pcs[i]), klass, m))

    res = run(prep.state, prep.program, max_instrs=limit,
              tohost=prep.tohost, sink=sink)
    return functional_result(prep.state, image, res, events)
