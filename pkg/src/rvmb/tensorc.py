"""Tensor-operator graphs: shape inference, a reference interpreter and
lowering to RV64 loop nests.

Programs are small DAGs over f32 tensors (NHWC for rank 4).  The same
graph runs two ways: `interpret` evaluates it with numpy, and `lower`
emits naive scalar RV64 assembly for the simulator.  The two paths are
held to bitwise equality, which pins down every numeric choice:

  - dot-product reductions (MatMul, FullyConnected, Conv2D) accumulate
    with fused multiply-add in ascending reduction-index order on both
    sides; the interpreter uses a vectorized single-rounding f32 FMA
    built on exact f64 products and round-to-odd,
  - max pooling and relu use the hardware min/max rules (NaN yields the
    other operand, +0 beats -0),
  - average pooling sums in window order and multiplies by the f32
    constant nearest 1/window².

Graphs can be written in a one-op-per-line text form (see parse_graph)
which is also how the built-in benchmark suite is defined.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .asm import assemble
from .engine import DEFAULT_TOHOST
from .isa import decode
from .loader import MemoryImage, Segment

F32 = np.float32

KINDS = ("Input", "Const", "MatMul", "Conv2D", "FullyConnected", "Add",
         "Relu", "MaxPool2D", "AvgPool2D", "Flatten")
_ARITY = {"Input": 0, "Const": 0, "MatMul": 2, "Conv2D": 2,
          "FullyConnected": 3, "Add": 2, "Relu": 1, "MaxPool2D": 1,
          "AvgPool2D": 1, "Flatten": 1}


class GraphError(ValueError):
    """Malformed graph structure or text."""


class ShapeMismatch(GraphError):
    """Operand shapes incompatible with the op; names the op."""


class UnsupportedOp(GraphError):
    pass


class CapacityExceeded(GraphError):
    """Lowered data does not fit the configured memory budget."""


@dataclass(frozen=True)
class TensorType:
    dims: tuple
    dtype: str = "f32"

    def __post_init__(self):
        if not 1 <= len(self.dims) <= 4:
            raise ShapeMismatch(f"rank {len(self.dims)} outside 1..4")
        if any(d < 1 for d in self.dims):
            raise ShapeMismatch(f"non-positive extent in {self.dims}")
        if self.count >= 1 << 31:
            raise ShapeMismatch(f"element count {self.count} too large")
        if self.dtype != "f32":
            raise ShapeMismatch(f"unsupported dtype {self.dtype}")

    @property
    def count(self):
        n = 1
        for d in self.dims:
            n *= d
        return n

    @property
    def nbytes(self):
        return 4 * self.count


@dataclass
class TensorOp:
    name: str
    kind: str
    inputs: list = field(default_factory=list)
    attrs: dict = field(default_factory=dict)
    ttype: TensorType | None = None


class TensorProgram:
    """Topologically ordered ops, per-op Const payloads, one output."""

    def __init__(self, ops, output, consts=None):
        self.ops = list(ops)
        self.output = output
        self.consts = dict(consts or {})
        names = set()
        for op in self.ops:
            if op.kind not in KINDS:
                raise GraphError(f"{op.name}: unknown kind {op.kind}")
            if len(op.inputs) != _ARITY[op.kind]:
                raise GraphError(
                    f"{op.name}: {op.kind} wants {_ARITY[op.kind]} operands,"
                    f" got {len(op.inputs)}")
            for ref in op.inputs:
                if ref not in names:
                    raise GraphError(f"{op.name}: operand {ref} not defined"
                                     " before use")
            if op.name in names:
                raise GraphError(f"duplicate op name {op.name}")
            names.add(op.name)
        if output not in names:
            raise GraphError(f"output {output} is not an op")
        self.by_name = {op.name: op for op in self.ops}

    def input_ops(self):
        return [op for op in self.ops if op.kind == "Input"]


def _conv_out(extent, k, stride, padding):
    if padding == "same":
        return -(-extent // stride)
    if extent < k:
        return None
    return (extent - k) // stride + 1


def _same_pads(extent, k, stride):
    out = -(-extent // stride)
    total = max((out - 1) * stride + k - extent, 0)
    return total // 2, total - total // 2


def infer_shapes(program):
    """Annotate every op with its TensorType; returns the same program.

    Raises ShapeMismatch naming the offending op.
    """
    types = {}
    for op in program.ops:
        def fail(why):
            raise ShapeMismatch(f"{op.name} ({op.kind}): {why}")

        ins = [types[r] for r in op.inputs]
        if op.kind in ("Input", "Const"):
            if op.ttype is None:
                fail("missing declared type")
            t = op.ttype
        elif op.kind == "MatMul":
            a, b = ins
            if len(a.dims) != 2 or len(b.dims) != 2:
                fail(f"wants rank-2 operands, got {a.dims} x {b.dims}")
            if a.dims[1] != b.dims[0]:
                fail(f"inner dims differ: {a.dims} x {b.dims}")
            t = TensorType((a.dims[0], b.dims[1]))
        elif op.kind == "FullyConnected":
            x, w, bias = ins
            if len(x.dims) != 2 or len(w.dims) != 2 or len(bias.dims) != 1:
                fail(f"wants [B,K],[K,N],[N], got {x.dims},{w.dims},{bias.dims}")
            if x.dims[1] != w.dims[0] or w.dims[1] != bias.dims[0]:
                fail(f"size disagreement: {x.dims},{w.dims},{bias.dims}")
            t = TensorType((x.dims[0], w.dims[1]))
        elif op.kind == "Conv2D":
            x, w = ins
            if len(x.dims) != 4 or len(w.dims) != 4:
                fail(f"wants NHWC input and HWIO weights, got {x.dims},{w.dims}")
            n, h, wid, c = x.dims
            kh, kw, wc, oc = w.dims
            if wc != c:
                fail(f"input has {c} channels, weights expect {wc}")
            stride = op.attrs.get("stride", 1)
            padding = op.attrs.get("padding", "valid")
            if stride < 1:
                fail(f"stride {stride} < 1")
            if padding not in ("valid", "same"):
                fail(f"padding {padding!r} not valid/same")
            oh = _conv_out(h, kh, stride, padding)
            ow = _conv_out(wid, kw, stride, padding)
            if oh is None or ow is None:
                fail(f"kernel {kh}x{kw} larger than input {h}x{wid}")
            t = TensorType((n, oh, ow, oc))
        elif op.kind in ("MaxPool2D", "AvgPool2D"):
            x, = ins
            if len(x.dims) != 4:
                fail(f"wants NHWC input, got {x.dims}")
            n, h, wid, c = x.dims
            win = op.attrs.get("window", 2)
            stride = op.attrs.get("stride", win)
            if win < 1 or stride < 1:
                fail(f"window {win} / stride {stride} must be >= 1")
            if h < win or wid < win:
                fail(f"window {win} larger than input {h}x{wid}")
            t = TensorType((n, (h - win) // stride + 1,
                            (wid - win) // stride + 1, c))
        elif op.kind == "Add":
            a, b = ins
            if a.dims != b.dims:
                fail(f"shape mismatch {a.dims} vs {b.dims}")
            t = a
        elif op.kind == "Relu":
            t = ins[0]
        elif op.kind == "Flatten":
            t = TensorType((1, ins[0].count))
        else:  # pragma: no cover - KINDS is closed
            fail("unhandled kind")
        op.ttype = t
        types[op.name] = t
    return program


# ---------------------------------------------------------------------------
# deterministic tensor data

def rand_f32(seed, shape):
    """Seeded uniform values in [-1, 1) with exactly representable f32
    payloads (signed 24-bit integers scaled by 2^-23), so the bytes are
    identical on every platform."""
    rng = np.random.default_rng(seed)
    ints = rng.integers(-(1 << 23), 1 << 23, size=int(np.prod(shape)),
                        dtype=np.int64)
    return (ints.astype(np.float64) * 2.0 ** -23).astype(F32).reshape(shape)


# ---------------------------------------------------------------------------
# textual graph format

_SHAPE_RE = re.compile(r"^f32\[([0-9,]+)\]$")

_KIND_TOKENS = {
    "input": "Input", "const": "Const", "matmul": "MatMul",
    "conv2d": "Conv2D", "fc": "FullyConnected", "add": "Add",
    "relu": "Relu", "maxpool": "MaxPool2D", "avgpool": "AvgPool2D",
    "flatten": "Flatten",
}


def parse_graph(text, seed=0):
    """Parse the one-op-per-line graph form into a TensorProgram.

    Lines are `kind name operands... key=value...`; `#` starts a comment.
    Input and Const declare a shape as f32[d0,d1,...]; Const also takes a
    seed whose data is derived from it plus the parse-level seed.  The
    final `output name` line picks the program result.

        input  x   f32[1,28,28,1]
        const  w   f32[5,5,1,6]  seed=1
        conv2d c   x w           stride=1 padding=valid
        relu   r   c
        output r
    """
    ops = []
    consts = {}
    output = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind_tok = parts[0].lower()
        if kind_tok == "output":
            if len(parts) != 2:
                raise GraphError(f"line {lineno}: output wants one name")
            output = parts[1]
            continue
        if kind_tok not in _KIND_TOKENS:
            raise GraphError(f"line {lineno}: unknown op kind {parts[0]!r}")
        kind = _KIND_TOKENS[kind_tok]
        if len(parts) < 2:
            raise GraphError(f"line {lineno}: missing op name")
        name = parts[1]
        operands = []
        attrs = {}
        ttype = None
        for tok in parts[2:]:
            m = _SHAPE_RE.match(tok)
            if m:
                dims = tuple(int(d) for d in m.group(1).split(","))
                ttype = TensorType(dims)
            elif "=" in tok:
                key, value = tok.split("=", 1)
                attrs[key] = value if key == "padding" else int(value)
            else:
                operands.append(tok)
        op = TensorOp(name, kind, operands, attrs, ttype)
        if kind in ("Input", "Const") and ttype is None:
            raise GraphError(f"line {lineno}: {name} needs a f32[...] shape")
        if kind == "Const":
            cseed = attrs.pop("seed", 0)
            consts[name] = rand_f32((seed << 20) ^ cseed, ttype.dims)
        ops.append(op)
    if output is None:
        raise GraphError("no output line")
    return TensorProgram(ops, output, consts)


# ---------------------------------------------------------------------------
# reference interpreter (bitwise contract with the lowered code)

def fma32v(a, b, c):
    """Elementwise f32 fused multiply-add with a single rounding.

    The product of two f32 values is exact in f64; the f64 sum's
    rounding error is recovered exactly, and if the sum landed on an
    even mantissa it is nudged odd toward the true value.  Rounding that
    to f32 then matches a directly computed fused result bit for bit.
    """
    a64 = np.asarray(a, dtype=np.float64)
    b64 = np.asarray(b, dtype=np.float64)
    c64 = np.asarray(c, dtype=np.float64)
    p = a64 * b64
    s = p + c64
    t = s - p
    err = (p - (s - t)) + (c64 - t)
    s = np.ascontiguousarray(s)
    u = s.view(np.uint64)
    adj = (err != 0) & ((u & 1) == 0) & np.isfinite(s)
    up = adj & ((err > 0) == (s > 0))
    down = adj & ~up
    u[up] += 1
    u[down] -= 1
    return s.astype(F32)


def fmax32v(a, b):
    """fmax.s over arrays: NaN loses to a number, +0 beats -0, and a
    double NaN yields the canonical quiet NaN."""
    a = np.asarray(a, dtype=F32)
    b = np.asarray(b, dtype=F32)
    out = np.fmax(a, b)
    zz = (a == 0) & (b == 0)
    if zz.any():
        pos = zz & (~np.signbit(a) | ~np.signbit(b))
        out = out.copy()
        out[zz] = F32(-0.0)
        out[pos] = F32(0.0)
    both_nan = np.isnan(a) & np.isnan(b)
    if both_nan.any():
        out = out.copy()
        out[both_nan] = np.uint32(0x7FC00000).view(F32)
    return out


def _interp_matmul(a, b, bias=None):
    m, k = a.shape
    n = b.shape[1]
    if bias is None:
        acc = np.zeros((m, n), dtype=F32)
    else:
        acc = np.broadcast_to(bias, (m, n)).astype(F32)
    for kk in range(k):
        acc = fma32v(a[:, kk:kk + 1], b[kk:kk + 1, :], acc)
    return acc


def _interp_conv(x, w, stride, padding):
    n, h, wid, c = x.shape
    kh, kw, _, oc = w.shape
    if padding == "same":
        pt, pb = _same_pads(h, kh, stride)
        pl, pr = _same_pads(wid, kw, stride)
        x = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
        h, wid = x.shape[1], x.shape[2]
    oh = (h - kh) // stride + 1
    ow = (wid - kw) // stride + 1
    acc = np.zeros((n, oh, ow, oc), dtype=F32)
    for ih in range(kh):
        for iw in range(kw):
            for ic in range(c):
                patch = x[:, ih:ih + oh * stride:stride,
                          iw:iw + ow * stride:stride, ic]
                acc = fma32v(patch[..., None], w[ih, iw, ic], acc)
    return acc


def _pool_windows(x, win, stride):
    n, h, wid, c = x.shape
    oh = (h - win) // stride + 1
    ow = (wid - win) // stride + 1
    for ph in range(win):
        for pw in range(win):
            yield x[:, ph:ph + oh * stride:stride,
                    pw:pw + ow * stride:stride, :]


def interpret(program, inputs):
    """Evaluate the graph; `inputs` maps Input names to f32 arrays."""
    infer_shapes(program)
    values = {}
    for op in program.ops:
        ins = [values[r] for r in op.inputs]
        if op.kind == "Input":
            if op.name not in inputs:
                raise GraphError(f"no binding for input {op.name}")
            v = np.asarray(inputs[op.name], dtype=F32).reshape(op.ttype.dims)
        elif op.kind == "Const":
            v = program.consts[op.name].reshape(op.ttype.dims)
        elif op.kind == "MatMul":
            v = _interp_matmul(ins[0], ins[1])
        elif op.kind == "FullyConnected":
            v = _interp_matmul(ins[0], ins[1], bias=ins[2])
        elif op.kind == "Conv2D":
            v = _interp_conv(ins[0], ins[1], op.attrs.get("stride", 1),
                             op.attrs.get("padding", "valid"))
        elif op.kind == "Add":
            v = ins[0] + ins[1]
        elif op.kind == "Relu":
            v = fmax32v(ins[0], F32(0.0))
        elif op.kind == "MaxPool2D":
            win = op.attrs.get("window", 2)
            stride = op.attrs.get("stride", win)
            v = np.full(op.ttype.dims, -np.inf, dtype=F32)
            for patch in _pool_windows(ins[0], win, stride):
                v = fmax32v(v, patch)
        elif op.kind == "AvgPool2D":
            win = op.attrs.get("window", 2)
            stride = op.attrs.get("stride", win)
            v = np.zeros(op.ttype.dims, dtype=F32)
            for patch in _pool_windows(ins[0], win, stride):
                v = v + patch
            v = v * F32(1.0 / (win * win))
        elif op.kind == "Flatten":
            v = ins[0].reshape(1, -1)
        values[op.name] = np.ascontiguousarray(v, dtype=F32)
    return values[program.output]


# ---------------------------------------------------------------------------
# lowering

class _Asm:
    """Line-oriented assembly builder with a tiny register pool and an
    executed-instruction estimator fed by the emitters."""

    def __init__(self):
        self.lines = []
        self._nlabel = 0
        self._free = [f"x{i}" for i in range(31, 4, -1)]
        self.est = 0

    def take(self):
        if not self._free:
            raise UnsupportedOp("out of scratch registers")
        return self._free.pop()

    def give(self, *regs):
        self._free.extend(regs)

    def l(self, text):
        self.lines.append("    " + text)

    def label(self, stem):
        self._nlabel += 1
        name = f"{stem}_{self._nlabel}"
        self.lines.append(f"{name}:")
        return name

    def li(self, reg, value):
        """Load a 32-bit signed constant: lui+addi or addi alone."""
        value = int(value)
        if -2048 <= value <= 2047:
            self.l(f"addi {reg}, x0, {value}")
            return
        upper = (value + 0x800) >> 12
        lower = value - (upper << 12)
        self.l(f"lui {reg}, {upper & 0xFFFFF}")
        if lower:
            self.l(f"addi {reg}, {reg}, {lower}")

    def add_const(self, reg, value, tmp):
        """reg += constant, through tmp when it exceeds addi range."""
        value = int(value)
        if value == 0:
            return
        if -2048 <= value <= 2047:
            self.l(f"addi {reg}, {reg}, {value}")
        else:
            self.li(tmp, value)
            self.l(f"add {reg}, {reg}, {tmp}")

    def source(self):
        return "\n".join(self.lines) + "\n"


class _Buf:
    def __init__(self, addr, ttype):
        self.addr = addr
        self.ttype = ttype


@dataclass
class LoweredProgram:
    code: list                  # decoded Instructions, for inspection
    code_bytes: bytes
    data: bytes                 # one writable block: consts + buffers
    data_base: int
    entry: int
    symbols: dict               # input_addr per input, output_addr, sizes
    instr_bound: int            # analytic cap on executed instructions
    source: str                 # the emitted assembly text

    def to_image(self, inputs=None):
        """Memory image with input tensors written into their buffers."""
        data = bytearray(self.data)
        if inputs:
            for name, arr in inputs.items():
                if name not in self.symbols["input_addr"]:
                    raise GraphError(f"{name} is not an input")
                addr = self.symbols["input_addr"][name]
                want = self.symbols["sizes"][name]
                raw = np.ascontiguousarray(arr, dtype=F32).tobytes()
                if len(raw) != want:
                    raise ShapeMismatch(
                        f"input {name}: {len(raw)} bytes, buffer {want}")
                off = addr - self.data_base
                data[off:off + len(raw)] = raw
        segs = [Segment(self.entry, self.code_bytes, writable=False,
                        executable=True),
                Segment(self.data_base, bytes(data), writable=True)]
        return MemoryImage(segs, self.entry,
                           {"tohost": self.symbols["tohost"],
                            "output": self.symbols["output_addr"]})


class _Lowerer:
    def __init__(self, program, code_base, data_base, mem_limit):
        self.p = program
        self.code_base = code_base
        self.data_base = data_base
        self.mem_limit = mem_limit
        self.asm = _Asm()
        self.bufs = {}
        self.chunks = []        # (offset, bytes) inside the data block
        self.top = data_base

    def _alloc(self, nbytes):
        addr = self.top
        self.top = (self.top + nbytes + 7) & ~7
        if self.top - self.data_base > self.mem_limit:
            raise CapacityExceeded(
                f"data needs {self.top - self.data_base} bytes, "
                f"limit {self.mem_limit}")
        return addr

    def _new_buf(self, ttype):
        return _Buf(self._alloc(ttype.nbytes), ttype)

    # ---- op emitters ----

    def _emit_elemwise2(self, op, a, b, out):
        """add: one flat loop over the elements of both operands."""
        b_ = self.asm
        pa, pb, po, cnt = (b_.take() for _ in range(4))
        b_.li(pa, a.addr)
        b_.li(pb, b.addr)
        b_.li(po, out.addr)
        b_.li(cnt, out.ttype.count)
        top = b_.label(f"{op.name}_el")
        b_.l(f"flw f2, 0({pa})")
        b_.l(f"flw f3, 0({pb})")
        b_.l("fadd.s f4, f2, f3")
        b_.l(f"fsw f4, 0({po})")
        b_.l(f"addi {pa}, {pa}, 4")
        b_.l(f"addi {pb}, {pb}, 4")
        b_.l(f"addi {po}, {po}, 4")
        b_.l(f"addi {cnt}, {cnt}, -1")
        b_.l(f"bne {cnt}, x0, {top}")
        b_.give(pa, pb, po, cnt)
        b_.est += 8 + 9 * out.ttype.count

    def _emit_relu(self, op, a, out):
        b_ = self.asm
        pa, po, cnt = (b_.take() for _ in range(3))
        b_.li(pa, a.addr)
        b_.li(po, out.addr)
        b_.li(cnt, out.ttype.count)
        top = b_.label(f"{op.name}_rl")
        b_.l(f"flw f2, 0({pa})")
        b_.l("fmax.s f4, f2, f0")
        b_.l(f"fsw f4, 0({po})")
        b_.l(f"addi {pa}, {pa}, 4")
        b_.l(f"addi {po}, {po}, 4")
        b_.l(f"addi {cnt}, {cnt}, -1")
        b_.l(f"bne {cnt}, x0, {top}")
        b_.give(pa, po, cnt)
        b_.est += 6 + 7 * out.ttype.count

    def _emit_matmul(self, op, a, b, out, bias=None):
        """C[i,j] = (bias[j] +) sum_k A[i,k]*B[k,j], fused, k ascending."""
        b_ = self.asm
        m, k = a.ttype.dims
        n = b.ttype.dims[1]
        ra, rbcol, rc, ri, rj, rk, ra2, rb2, tmp = (b_.take()
                                                    for _ in range(9))
        rbias = None
        if bias is not None:
            rbias = b_.take()
        b_.li(ra, a.addr)
        b_.li(rbcol, b.addr)
        b_.li(rc, out.addr)
        b_.li(ri, m)
        li_ = b_.label(f"{op.name}_i")
        b_.li(rj, n)
        if bias is not None:
            b_.li(rbias, bias.addr)
        lj = b_.label(f"{op.name}_j")
        if bias is None:
            b_.l("fsgnj.s f4, f0, f0")
        else:
            b_.l(f"flw f4, 0({rbias})")
            b_.l(f"addi {rbias}, {rbias}, 4")
        b_.l(f"add {ra2}, {ra}, x0")
        b_.l(f"add {rb2}, {rbcol}, x0")
        b_.li(rk, k)
        lk = b_.label(f"{op.name}_k")
        b_.l(f"flw f2, 0({ra2})")
        b_.l(f"flw f3, 0({rb2})")
        b_.l("fmadd.s f4, f2, f3, f4")
        b_.l(f"addi {ra2}, {ra2}, 4")
        b_.add_const(rb2, 4 * n, tmp)
        b_.l(f"addi {rk}, {rk}, -1")
        b_.l(f"bne {rk}, x0, {lk}")
        b_.l(f"fsw f4, 0({rc})")
        b_.l(f"addi {rc}, {rc}, 4")
        b_.l(f"addi {rbcol}, {rbcol}, 4")
        b_.l(f"addi {rj}, {rj}, -1")
        b_.l(f"bne {rj}, x0, {lj}")
        b_.add_const(rbcol, -4 * n, tmp)
        b_.add_const(ra, 4 * k, tmp)
        b_.l(f"addi {ri}, {ri}, -1")
        b_.l(f"bne {ri}, x0, {li_}")
        b_.give(ra, rbcol, rc, ri, rj, rk, ra2, rb2, tmp)
        if rbias is not None:
            b_.give(rbias)
        b_.est += 8 + m * (8 + n * (12 + 9 * k))

    def _emit_conv(self, op, x, w, out):
        """Valid convolution; `same` padding was materialized upstream.

        Reduction walks kh, then the fused (kw, ic) axis, matching the
        interpreter's kh->kw->ic ascending order element for element.
        The weight pointer moves a constant outC stride through HWIO
        weights for the whole reduction; the input pointer walks each
        kernel row contiguously then skips to the next row.
        """
        b_ = self.asm
        n, h, wid, c = x.ttype.dims
        kh, kw, _, oc = w.ttype.dims
        stride = op.attrs.get("stride", 1)
        _, oh, ow, _ = out.ttype.dims
        kwic = kw * c
        rx, rw, ro = b_.take(), b_.take(), b_.take()
        rn, roh, row_, roc, rkh, rki, rx2, tmp = (b_.take()
                                                  for _ in range(8))
        b_.li(rx, x.addr)
        b_.li(rw, w.addr)
        b_.li(ro, out.addr)
        b_.li(rn, n)
        ln = b_.label(f"{op.name}_n")
        b_.li(roh, oh)
        lh = b_.label(f"{op.name}_oh")
        b_.li(row_, ow)
        lw = b_.label(f"{op.name}_ow")
        b_.li(roc, oc)
        lc = b_.label(f"{op.name}_oc")
        b_.l("fsgnj.s f4, f0, f0")
        b_.l(f"add {rx2}, {rx}, x0")
        b_.li(rkh, kh)
        lkh = b_.label(f"{op.name}_kh")
        b_.li(rki, kwic)
        lki = b_.label(f"{op.name}_ki")
        b_.l(f"flw f2, 0({rx2})")
        b_.l(f"flw f3, 0({rw})")
        b_.l("fmadd.s f4, f2, f3, f4")
        b_.l(f"addi {rx2}, {rx2}, 4")
        b_.add_const(rw, 4 * oc, tmp)
        b_.l(f"addi {rki}, {rki}, -1")
        b_.l(f"bne {rki}, x0, {lki}")
        b_.add_const(rx2, 4 * (wid - kw) * c, tmp)
        b_.l(f"addi {rkh}, {rkh}, -1")
        b_.l(f"bne {rkh}, x0, {lkh}")
        b_.l(f"fsw f4, 0({ro})")
        b_.l(f"addi {ro}, {ro}, 4")
        # next output channel: weights restart 4 bytes on, input restarts
        b_.add_const(rw, -4 * (kh * kwic * oc - 1), tmp)
        b_.l(f"addi {roc}, {roc}, -1")
        b_.l(f"bne {roc}, x0, {lc}")
        b_.add_const(rw, -4 * oc, tmp)         # back to the weight base
        b_.add_const(rx, 4 * stride * c, tmp)  # next output column
        b_.l(f"addi {row_}, {row_}, -1")
        b_.l(f"bne {row_}, x0, {lw}")
        b_.add_const(rx, 4 * c * (stride * wid - ow * stride), tmp)
        b_.l(f"addi {roh}, {roh}, -1")
        b_.l(f"bne {roh}, x0, {lh}")
        b_.add_const(rx, 4 * c * wid * (h - oh * stride), tmp)
        b_.l(f"addi {rn}, {rn}, -1")
        b_.l(f"bne {rn}, x0, {ln}")
        b_.give(rx, rw, ro, rn, roh, row_, roc, rkh, rki, rx2, tmp)
        b_.est += 8 + n * (8 + oh * (8 + ow * (10 + oc * (
            14 + kh * (8 + 9 * kwic)))))

    def _emit_pool(self, op, x, out, mode):
        b_ = self.asm
        n, h, wid, c = x.ttype.dims
        win = op.attrs.get("window", 2)
        stride = op.attrs.get("stride", win)
        _, oh, ow, _ = out.ttype.dims
        rx, ro, rn, roh, row_, rc, rph, rpw, rx2, tmp = (b_.take()
                                                         for _ in range(10))
        b_.li(rx, x.addr)
        b_.li(ro, out.addr)
        if mode == "max":
            b_.li(tmp, -0x800000 << 8)  # 0xFF800000: single -inf
            b_.l(f"fmv.w.x f1, {tmp}")
        else:
            scale = int(np.float64(1.0 / (win * win)).astype(F32).view(
                np.uint32))
            b_.li(tmp, scale - (1 << 32) if scale >= 1 << 31 else scale)
            b_.l(f"fmv.w.x f1, {tmp}")
        b_.li(rn, n)
        ln = b_.label(f"{op.name}_n")
        b_.li(roh, oh)
        lh = b_.label(f"{op.name}_oh")
        b_.li(row_, ow)
        lw = b_.label(f"{op.name}_ow")
        b_.li(rc, c)
        lc = b_.label(f"{op.name}_c")
        if mode == "max":
            b_.l("fsgnj.s f4, f1, f1")     # start from -inf
        else:
            b_.l("fsgnj.s f4, f0, f0")     # start from +0
        b_.l(f"add {rx2}, {rx}, x0")
        b_.li(rph, win)
        lph = b_.label(f"{op.name}_ph")
        b_.li(rpw, win)
        lpw = b_.label(f"{op.name}_pw")
        b_.l(f"flw f2, 0({rx2})")
        if mode == "max":
            b_.l("fmax.s f4, f4, f2")
        else:
            b_.l("fadd.s f4, f4, f2")
        b_.add_const(rx2, 4 * c, tmp)
        b_.l(f"addi {rpw}, {rpw}, -1")
        b_.l(f"bne {rpw}, x0, {lpw}")
        b_.add_const(rx2, 4 * c * (wid - win), tmp)
        b_.l(f"addi {rph}, {rph}, -1")
        b_.l(f"bne {rph}, x0, {lph}")
        if mode == "avg":
            b_.l("fmul.s f4, f4, f1")
        b_.l(f"fsw f4, 0({ro})")
        b_.l(f"addi {ro}, {ro}, 4")
        b_.l(f"addi {rx}, {rx}, 4")        # next channel
        b_.l(f"addi {rc}, {rc}, -1")
        b_.l(f"bne {rc}, x0, {lc}")
        b_.add_const(rx, 4 * (stride * c - c), tmp)   # next output column
        b_.l(f"addi {row_}, {row_}, -1")
        b_.l(f"bne {row_}, x0, {lw}")
        b_.add_const(rx, 4 * c * (stride * wid - ow * stride), tmp)
        b_.l(f"addi {roh}, {roh}, -1")
        b_.l(f"bne {roh}, x0, {lh}")
        b_.add_const(rx, 4 * c * wid * (h - oh * stride), tmp)
        b_.l(f"addi {rn}, {rn}, -1")
        b_.l(f"bne {rn}, x0, {ln}")
        b_.give(rx, ro, rn, roh, row_, rc, rph, rpw, rx2, tmp)
        b_.est += 12 + n * (8 + oh * (8 + ow * (8 + c * (
            16 + win * (8 + 7 * win)))))

    def _emit_copy2d(self, name, src_addr, dst_addr, rows, row_elems,
                     src_stride, dst_stride):
        """Row-wise f32 copy used to materialize padded inputs."""
        b_ = self.asm
        ps, pd, rr, re_, tmp = (b_.take() for _ in range(5))
        b_.li(ps, src_addr)
        b_.li(pd, dst_addr)
        b_.li(rr, rows)
        lr = b_.label(f"{name}_row")
        b_.li(re_, row_elems)
        le = b_.label(f"{name}_col")
        b_.l(f"flw f2, 0({ps})")
        b_.l(f"fsw f2, 0({pd})")
        b_.l(f"addi {ps}, {ps}, 4")
        b_.l(f"addi {pd}, {pd}, 4")
        b_.l(f"addi {re_}, {re_}, -1")
        b_.l(f"bne {re_}, x0, {le}")
        b_.add_const(ps, 4 * (src_stride - row_elems), tmp)
        b_.add_const(pd, 4 * (dst_stride - row_elems), tmp)
        b_.l(f"addi {rr}, {rr}, -1")
        b_.l(f"bne {rr}, x0, {lr}")
        b_.give(ps, pd, rr, re_, tmp)
        b_.est += 6 + rows * (8 + 6 * row_elems)

    def _pad_same(self, op, x):
        """Copy x into a zeroed buffer with `same` borders; the valid
        convolution then runs over the padded buffer."""
        n, h, wid, c = x.ttype.dims
        kh, kw = self.p.by_name[op.inputs[1]].ttype.dims[:2]
        stride = op.attrs.get("stride", 1)
        pt, pb = _same_pads(h, kh, stride)
        pl, pr = _same_pads(wid, kw, stride)
        if pt == pb == pl == pr == 0:
            return x
        ph, pw = h + pt + pb, wid + pl + pr
        padded = self._new_buf(TensorType((n, ph, pw, c)))
        for b in range(n):
            src = x.addr + b * h * wid * c * 4
            dst = (padded.addr + ((b * ph + pt) * pw + pl) * c * 4)
            self._emit_copy2d(f"{op.name}_pad{b}", src, dst,
                              rows=h, row_elems=wid * c,
                              src_stride=wid * c, dst_stride=pw * c)
        return padded

    # ---- driver ----

    def lower(self):
        infer_shapes(self.p)
        b_ = self.asm
        b_.l("fmv.w.x f0, x0")     # f0 stays +0.0f throughout
        b_.est += 1
        for op in self.p.ops:
            ins = [self.bufs[r] for r in op.inputs]
            if op.kind == "Input":
                buf = self._new_buf(op.ttype)
            elif op.kind == "Const":
                data = np.ascontiguousarray(
                    self.p.consts[op.name], dtype=F32).tobytes()
                buf = self._new_buf(op.ttype)
                self.chunks.append((buf.addr - self.data_base, data))
            elif op.kind == "Flatten":
                buf = _Buf(ins[0].addr, op.ttype)  # same bytes, new shape
            else:
                buf = self._new_buf(op.ttype)
                if op.kind == "MatMul":
                    self._emit_matmul(op, ins[0], ins[1], buf)
                elif op.kind == "FullyConnected":
                    self._emit_matmul(op, ins[0], ins[1], buf, bias=ins[2])
                elif op.kind == "Conv2D":
                    src = ins[0]
                    if op.attrs.get("padding", "valid") == "same":
                        src = self._pad_same(op, src)
                    self._emit_conv(op, src, ins[1], buf)
                elif op.kind == "Add":
                    self._emit_elemwise2(op, ins[0], ins[1], buf)
                elif op.kind == "Relu":
                    self._emit_relu(op, ins[0], buf)
                elif op.kind == "MaxPool2D":
                    self._emit_pool(op, ins[0], buf, "max")
                elif op.kind == "AvgPool2D":
                    self._emit_pool(op, ins[0], buf, "avg")
                else:  # pragma: no cover
                    raise UnsupportedOp(op.kind)
            self.bufs[op.name] = buf
        # exit: store 1 (exit code 0) to tohost
        rt = b_.take()
        rv = b_.take()
        b_.li(rt, DEFAULT_TOHOST)
        b_.li(rv, 1)
        b_.l(f"sw {rv}, 0({rt})")
        b_.give(rt, rv)
        b_.est += 4

        source = b_.source()
        code = assemble(source, self.code_base)
        data = bytearray(self.top - self.data_base)
        for off, chunk in self.chunks:
            data[off:off + len(chunk)] = chunk
        syms = {
            "input_addr": {op.name: self.bufs[op.name].addr
                           for op in self.p.input_ops()},
            "output_addr": self.bufs[self.p.output].addr,
            "sizes": {op.name: self.bufs[op.name].ttype.nbytes
                      for op in self.p.ops},
            "tohost": DEFAULT_TOHOST,
        }
        words = np.frombuffer(code, dtype="<u4")
        instrs = [decode(w) for w in words]
        return LoweredProgram(
            code=instrs, code_bytes=code, data=bytes(data),
            data_base=self.data_base, entry=self.code_base,
            symbols=syms, instr_bound=2 * b_.est, source=source)


def lower(program, code_base=0x1000, data_base=0x10000,
          mem_limit=192 << 20):
    """Compile the graph to a runnable RV64 image description."""
    return _Lowerer(program, code_base, data_base, mem_limit).lower()


# ---------------------------------------------------------------------------
# built-in benchmark suite

def _matmul_text(n):
    return f"""
input  a  f32[{n},{n}]
const  b  f32[{n},{n}]  seed=2
matmul c  a b
output c
"""


_CONV_SMALL = """
input  x  f32[1,32,32,3]
const  w  f32[3,3,3,8]  seed=3
conv2d c  x w  stride=1 padding=valid
output c
"""

_LENET5 = """
input   x   f32[1,28,28,1]
const   w1  f32[5,5,1,6]    seed=10
conv2d  c1  x w1            stride=1 padding=valid
relu    r1  c1
maxpool p1  r1              window=2 stride=2
const   w2  f32[5,5,6,16]   seed=11
conv2d  c2  p1 w2           stride=1 padding=valid
relu    r2  c2
maxpool p2  r2              window=2 stride=2
flatten fl  p2
const   w3  f32[256,120]    seed=12
const   b3  f32[120]        seed=13
fc      f3  fl w3 b3
relu    r3  f3
const   w4  f32[120,84]     seed=14
const   b4  f32[84]         seed=15
fc      f4  r3 w4 b4
relu    r4  f4
const   w5  f32[84,10]      seed=16
const   b5  f32[10]         seed=17
fc      f5  r4 w5 b5
output  f5
"""

_MLP = """
input x   f32[1,784]
const w1  f32[784,256]  seed=20
const b1  f32[256]      seed=21
fc    h1  x w1 b1
relu  a1  h1
const w2  f32[256,128]  seed=22
const b2  f32[128]      seed=23
fc    h2  a1 w2 b2
relu  a2  h2
const w3  f32[128,10]   seed=24
const b3  f32[10]       seed=25
fc    h3  a2 w3 b3
output h3
"""

_STREAM_ADD = """
input a  f32[1048576]
input b  f32[1048576]
add   c  a b
output c
"""

SUITE_TEXTS = {
    "matmul16": _matmul_text(16),
    "matmul64": _matmul_text(64),
    "matmul128": _matmul_text(128),
    "conv_small": _CONV_SMALL,
    "lenet5": _LENET5,
    "mlp_3layer": _MLP,
    "stream_add": _STREAM_ADD,
}


def _input_gen(program):
    inputs = program.input_ops()

    def gen(seed=0):
        return {op.name: rand_f32((seed << 8) ^ (0xA5 + i), op.ttype.dims)
                for i, op in enumerate(inputs)}
    return gen


def builtin_suite(seed=0):
    """[(name, TensorProgram, input generator)] for the fixed benchmark
    set; same seed, same bytes."""
    out = []
    for name, text in SUITE_TEXTS.items():
        program = infer_shapes(parse_graph(text, seed=seed))
        out.append((name, program, _input_gen(program)))
    return out
