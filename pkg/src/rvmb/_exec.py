"""JIT-compiled execution core.

Everything here is numba nopython code operating on plain numpy arrays so a
full benchmark run stays in machine code.  The module is deliberately
self-contained: opcode ids are literal constants (checked against the
instruction table at import time by engine.py) so the on-disk JIT cache
never goes stale through an unrelated import.

Floating point follows round-to-nearest-even throughout:

* single-precision add/sub/mul/div/sqrt are computed in double and rounded
  once to single, which is exact because binary64 carries more than 2p+2
  digits of binary32;
* fused multiply-add keeps a single rounding by combining the error-free
  double product with a round-to-odd low word before the final rounding;
* double-precision FMA uses the same construction on top of a Veltkamp
  split; operands whose product magnitude falls outside [2^-968, 2^996]
  take a double-rounded fallback.

Bit reinterpretation uses pre-built paired views (float/uint aliases of one
scratch element) because nopython mode has no direct bitcast.
"""

import numpy as np
from numba import njit

# Opcode ids, mirroring rvmb.opcodes.TABLE order (asserted at import).
OP_LUI = 0; OP_AUIPC = 1; OP_JAL = 2; OP_JALR = 3
OP_BEQ = 4; OP_BNE = 5; OP_BLT = 6; OP_BGE = 7
OP_BLTU = 8; OP_BGEU = 9; OP_LB = 10; OP_LH = 11
OP_LW = 12; OP_LD = 13; OP_LBU = 14; OP_LHU = 15
OP_LWU = 16; OP_SB = 17; OP_SH = 18; OP_SW = 19
OP_SD = 20; OP_ADDI = 21; OP_SLTI = 22; OP_SLTIU = 23
OP_XORI = 24; OP_ORI = 25; OP_ANDI = 26; OP_SLLI = 27
OP_SRLI = 28; OP_SRAI = 29; OP_ADD = 30; OP_SUB = 31
OP_SLL = 32; OP_SLT = 33; OP_SLTU = 34; OP_XOR = 35
OP_SRL = 36; OP_SRA = 37; OP_OR = 38; OP_AND = 39
OP_ADDIW = 40; OP_SLLIW = 41; OP_SRLIW = 42; OP_SRAIW = 43
OP_ADDW = 44; OP_SUBW = 45; OP_SLLW = 46; OP_SRLW = 47
OP_SRAW = 48; OP_FENCE = 49; OP_ECALL = 50; OP_EBREAK = 51
OP_MUL = 52; OP_MULH = 53; OP_MULHSU = 54; OP_MULHU = 55
OP_DIV = 56; OP_DIVU = 57; OP_REM = 58; OP_REMU = 59
OP_MULW = 60; OP_DIVW = 61; OP_DIVUW = 62; OP_REMW = 63
OP_REMUW = 64; OP_FLW = 65; OP_FSW = 66; OP_FMADD_S = 67
OP_FMSUB_S = 68; OP_FNMSUB_S = 69; OP_FNMADD_S = 70; OP_FADD_S = 71
OP_FSUB_S = 72; OP_FMUL_S = 73; OP_FDIV_S = 74; OP_FSQRT_S = 75
OP_FSGNJ_S = 76; OP_FSGNJN_S = 77; OP_FSGNJX_S = 78; OP_FMIN_S = 79
OP_FMAX_S = 80; OP_FCVT_W_S = 81; OP_FCVT_WU_S = 82; OP_FCVT_L_S = 83
OP_FCVT_LU_S = 84; OP_FCVT_S_W = 85; OP_FCVT_S_WU = 86; OP_FCVT_S_L = 87
OP_FCVT_S_LU = 88; OP_FMV_X_W = 89; OP_FCLASS_S = 90; OP_FMV_W_X = 91
OP_FEQ_S = 92; OP_FLT_S = 93; OP_FLE_S = 94; OP_FLD = 95
OP_FSD = 96; OP_FMADD_D = 97; OP_FMSUB_D = 98; OP_FNMSUB_D = 99
OP_FNMADD_D = 100; OP_FADD_D = 101; OP_FSUB_D = 102; OP_FMUL_D = 103
OP_FDIV_D = 104; OP_FSQRT_D = 105; OP_FSGNJ_D = 106; OP_FSGNJN_D = 107
OP_FSGNJX_D = 108; OP_FMIN_D = 109; OP_FMAX_D = 110; OP_FCVT_S_D = 111
OP_FCVT_D_S = 112; OP_FEQ_D = 113; OP_FLT_D = 114; OP_FLE_D = 115
OP_FCVT_W_D = 116; OP_FCVT_WU_D = 117; OP_FCVT_L_D = 118; OP_FCVT_LU_D = 119
OP_FCVT_D_W = 120; OP_FCVT_D_WU = 121; OP_FCVT_D_L = 122; OP_FCVT_D_LU = 123
OP_FMV_X_D = 124; OP_FCLASS_D = 125; OP_FMV_D_X = 126
N_OPIDS = 127

# Step/run status values.
OK = 0
EXITED = 1
F_ILLEGAL = 2
F_UNALIGNED = 3
F_UNMAPPED = 4
F_BADPC = 5
F_ECALL = 6
F_EBREAK = 7

CONSOLE_ADDR = 0x10000000

_BOX = np.uint64(0xFFFFFFFF00000000)
_CANON32 = np.uint64(0x7FC00000)
_CANON64 = np.uint64(0x7FF8000000000000)
_SIGN32 = np.uint64(0x80000000)
_SIGN64 = np.uint64(0x8000000000000000)
_U32MASK = np.uint64(0xFFFFFFFF)
_ONE64 = np.uint64(1)

_I32_MIN = -2147483648
_I32_MAX = 2147483647
_I64_MIN = -9223372036854775808
_I64_MAX = 9223372036854775807


# --------------------------------------------------------------------------
# floating-point primitives


@njit(cache=True)
def _f32_from_bits(bits, f4v, u4v):
    """float64 value of a binary32 bit pattern."""
    u4v[0] = np.uint32(bits)
    return np.float64(f4v[0])


@njit(cache=True)
def _f32_to_bits(d, f4v, u4v):
    """Round a float64 to binary32, returning the bit pattern."""
    f4v[0] = d
    return np.uint64(u4v[0])


@njit(cache=True)
def _f64_from_bits(raw, f8v, u8v):
    u8v[0] = raw
    return f8v[0]


@njit(cache=True)
def _f64_to_bits(d, f8v, u8v):
    f8v[0] = d
    return u8v[0]


@njit(cache=True)
def _unbox32(raw):
    """NaN-boxed single: anything without the high 32 bits set reads as NaN."""
    if (raw >> np.uint64(32)) != _U32MASK:
        return _CANON32
    return raw & _U32MASK


@njit(cache=True)
def _odd_round(s, err, f8v, u8v):
    """Nudge s to the round-to-odd result of the exact value s + err.

    Requires err to be the exact residual of a prior rounding, so that the
    true value lies strictly between s and one of its neighbours.  With 53
    bits available this makes a later rounding to binary32 equivalent to a
    single rounding of the exact value.
    """
    if err == 0.0 or not np.isfinite(s) or s == 0.0:
        return s
    f8v[0] = s
    bits = u8v[0]
    if bits & _ONE64 == np.uint64(0):
        if (err > 0.0) == (s > 0.0):
            bits += _ONE64           # step away from zero
        else:
            bits -= _ONE64           # step toward zero
        u8v[0] = bits
        return f8v[0]
    return s


@njit(cache=True)
def _fma32(a, b, c, f8v, u8v):
    """Fused multiply-add over binary32 operands held as exact float64s.

    The double product of two singles is exact, so one 2Sum gives the exact
    residual of (a*b) + c; round-to-odd on the double then makes the final
    binary32 rounding single.
    """
    p = a * b
    s = p + c
    t = s - p
    err = (p - (s - t)) + (c - t)
    return _odd_round(s, err, f8v, u8v)


@njit(cache=True)
def _fma64(a, b, c, f8v, u8v):
    """Correctly rounded double FMA for products in the exact-split range."""
    if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
        return a * b + c
    p = a * b
    if p == 0.0 or not np.isfinite(p):
        return p + c
    ap = abs(p)
    if ap > 6.696928794914171e299 or ap < 4.008336720017946e-292:
        # |p| outside [2^-968, 2^996]: Veltkamp splitting would overflow or
        # the product error underflow; accept a double-rounded result.
        return p + c
    split = 134217729.0  # 2^27 + 1
    ca = split * a
    ah = ca - (ca - a)
    al = a - ah
    cb = split * b
    bh = cb - (cb - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl   # p + e == a*b exactly
    s = p + c
    if not np.isfinite(s):
        return s
    t = s - p
    r = (p - (s - t)) + (c - t)                          # s + r == p + c exactly
    low = r + e
    t2 = low - r
    g = (r - (low - t2)) + (e - t2)                      # low + g == r + e exactly
    low = _odd_round(low, g, f8v, u8v)
    return s + low


@njit(cache=True)
def _i64_to_f32_bits(v, f4v, u4v):
    """Round int64 to binary32 with a single rounding."""
    if -9007199254740992 < v < 9007199254740992:         # exact in double
        return _f32_to_bits(np.float64(v), f4v, u4v)
    neg = v < 0
    uv = np.uint64(-v) if neg else np.uint64(v)
    sh = 0
    sticky = np.uint64(0)
    while uv >= np.uint64(1 << 25):
        sticky |= uv & _ONE64
        uv >>= _ONE64
        sh += 1
    mant = uv >> _ONE64                                   # 24-bit significand
    rnd = uv & _ONE64
    if rnd != np.uint64(0) and (sticky != np.uint64(0) or (mant & _ONE64) != np.uint64(0)):
        mant += _ONE64
    d = np.float64(mant) * (2.0 ** (sh + 1))
    if neg:
        d = -d
    return _f32_to_bits(d, f4v, u4v)


@njit(cache=True)
def _u64_to_f32_bits(uv, f4v, u4v):
    if uv < np.uint64(9007199254740992):
        return _f32_to_bits(np.float64(uv), f4v, u4v)
    sh = 0
    sticky = np.uint64(0)
    while uv >= np.uint64(1 << 25):
        sticky |= uv & _ONE64
        uv >>= _ONE64
        sh += 1
    mant = uv >> _ONE64
    rnd = uv & _ONE64
    if rnd != np.uint64(0) and (sticky != np.uint64(0) or (mant & _ONE64) != np.uint64(0)):
        mant += _ONE64
    return _f32_to_bits(np.float64(mant) * (2.0 ** (sh + 1)), f4v, u4v)


@njit(cache=True)
def _u64_to_f64(uv):
    return np.float64(uv)


@njit(cache=True)
def _rne_w(d):
    """Convert to int32 range with RNE and RISC-V saturation, sign-extended."""
    if d != d:
        return np.int64(_I32_MAX)
    r = np.rint(d)
    if r >= 2147483648.0:
        return np.int64(_I32_MAX)
    if r <= -2147483649.0:
        return np.int64(_I32_MIN)
    return np.int64(np.int32(r))


@njit(cache=True)
def _rne_wu(d):
    if d != d:
        return np.int64(np.int32(-1))
    r = np.rint(d)
    if r >= 4294967296.0:
        return np.int64(np.int32(-1))           # sext(0xFFFFFFFF)
    if r <= -1.0:
        return np.int64(0)
    return np.int64(np.int32(np.uint32(r)))


@njit(cache=True)
def _rne_l(d):
    if d != d:
        return np.int64(_I64_MAX)
    r = np.rint(d)
    if r >= 9223372036854775808.0:
        return np.int64(_I64_MAX)
    if r <= -9223372036854775808.0:
        return np.int64(_I64_MIN)
    return np.int64(r)


@njit(cache=True)
def _rne_lu(d):
    if d != d:
        return np.int64(-1)
    r = np.rint(d)
    if r >= 18446744073709551616.0:
        return np.int64(-1)                      # 0xFFFF...F
    if r <= -1.0:
        return np.int64(0)
    return np.int64(np.uint64(r))


@njit(cache=True)
def _fclass32(bits):
    sign = bits >> np.uint64(31)
    exp = (bits >> np.uint64(23)) & np.uint64(0xFF)
    frac = bits & np.uint64(0x7FFFFF)
    if exp == np.uint64(0xFF):
        if frac == np.uint64(0):
            return 0 if sign else 7              # infinities
        return 9 if frac & np.uint64(0x400000) else 8
    if exp == np.uint64(0):
        if frac == np.uint64(0):
            return 3 if sign else 4              # zeros
        return 2 if sign else 5                  # subnormals
    return 1 if sign else 6


@njit(cache=True)
def _fclass64(raw):
    sign = raw >> np.uint64(63)
    exp = (raw >> np.uint64(52)) & np.uint64(0x7FF)
    frac = raw & np.uint64(0xFFFFFFFFFFFFF)
    if exp == np.uint64(0x7FF):
        if frac == np.uint64(0):
            return 0 if sign else 7
        return 9 if frac & np.uint64(0x8000000000000) else 8
    if exp == np.uint64(0):
        if frac == np.uint64(0):
            return 3 if sign else 4
        return 2 if sign else 5
    return 1 if sign else 6


# --------------------------------------------------------------------------
# integer primitives


@njit(cache=True)
def _sx32(v):
    return np.int64(np.int32(v))


@njit(cache=True)
def _mulhu(a, b):
    a0 = a & _U32MASK
    a1 = a >> np.uint64(32)
    b0 = b & _U32MASK
    b1 = b >> np.uint64(32)
    t = a0 * b0
    k = t >> np.uint64(32)
    t = a1 * b0 + k
    w1 = t & _U32MASK
    w2 = t >> np.uint64(32)
    t = a0 * b1 + w1
    k = t >> np.uint64(32)
    return a1 * b1 + w2 + k


@njit(cache=True)
def _div_signed(a, b):
    if b == 0:
        return np.int64(-1)
    if a == _I64_MIN and b == -1:
        return np.int64(a)
    q = a // b
    if q * b != a and ((a < 0) != (b < 0)):
        q += 1                                   # floor -> truncate
    return q


@njit(cache=True)
def _rem_signed(a, b):
    if b == 0:
        return a
    if a == _I64_MIN and b == -1:
        return np.int64(0)
    return a - _div_signed(a, b) * b


# --------------------------------------------------------------------------
# memory access


@njit(cache=True)
def _locate(addr, size, membase, memcap, mapped):
    """Byte offset into the backing array, or -1 unmapped / -2 unaligned."""
    if addr & (size - 1) != 0:
        return np.int64(-2)
    off = addr - membase
    if off < 0 or off + size > memcap:
        return np.int64(-1)
    if mapped[off >> 12] == 0:
        return np.int64(-1)
    return off


@njit(cache=True)
def _box_s(d, f4v, u4v):
    """Round to binary32 and NaN-box, canonicalizing NaN results."""
    if d != d:
        return _BOX | _CANON32
    return _BOX | _f32_to_bits(d, f4v, u4v)


@njit(cache=True)
def _pack_d(d, f8v, u8v):
    if d != d:
        return _CANON64
    return _f64_to_bits(d, f8v, u8v)


@njit(cache=True, error_model='numpy', inline='always')
def exec_one(op, rd, r1, r2, r3, imm, pc,
             x, f,
             membase, memcap, mapped,
             i8v, i16v, i32v, i64v, u8v, u16v, u32v, u64v,
             f4v, u4v, f8v, u8dv,
             cbuf, caux, tohost):
    """Execute one predecoded instruction.

    Returns (status, next_pc, maddr, exitcode).  maddr is the effective
    address for loads and stores, -1 otherwise (console writes report -1 so
    they never reach the cache model).
    """
    nxt = pc + 4
    zero = np.int64(0)
    none = np.int64(-1)

    # ---- integer ALU -----------------------------------------------------
    if op == OP_ADDI:
        if rd:
            x[rd] = x[r1] + imm
        return (OK, nxt, none, zero)
    if op == OP_ADD:
        if rd:
            x[rd] = x[r1] + x[r2]
        return (OK, nxt, none, zero)

    # ---- loads -----------------------------------------------------------
    if OP_LB <= op <= OP_LWU or op == OP_FLW or op == OP_FLD:
        addr = x[r1] + imm
        if op == OP_LW or op == OP_FLW or op == OP_LWU:
            sz = 4
        elif op == OP_LD or op == OP_FLD:
            sz = 8
        elif op == OP_LH or op == OP_LHU:
            sz = 2
        else:
            sz = 1
        off = _locate(addr, sz, membase, memcap, mapped)
        if off == -2:
            return (F_UNALIGNED, pc, addr, zero)
        if off == -1:
            return (F_UNMAPPED, pc, addr, zero)
        if op == OP_FLW:
            f[rd] = _BOX | np.uint64(u32v[off >> 2])
        elif op == OP_FLD:
            f[rd] = u64v[off >> 3]
        elif rd:
            if op == OP_LW:
                x[rd] = np.int64(i32v[off >> 2])
            elif op == OP_LD:
                x[rd] = i64v[off >> 3]
            elif op == OP_LWU:
                x[rd] = np.int64(u32v[off >> 2])
            elif op == OP_LB:
                x[rd] = np.int64(i8v[off])
            elif op == OP_LBU:
                x[rd] = np.int64(u8v[off])
            elif op == OP_LH:
                x[rd] = np.int64(i16v[off >> 1])
            else:
                x[rd] = np.int64(u16v[off >> 1])
        return (OK, nxt, addr, zero)

    # ---- stores ----------------------------------------------------------
    if OP_SB <= op <= OP_SD or op == OP_FSW or op == OP_FSD:
        addr = x[r1] + imm
        if op == OP_SB and addr == CONSOLE_ADDR:
            ln = caux[0]
            if ln < cbuf.shape[0]:
                cbuf[ln] = np.uint8(x[r2])
                caux[0] = ln + 1
            return (OK, nxt, none, zero)
        if op == OP_SW or op == OP_FSW:
            sz = 4
        elif op == OP_SD or op == OP_FSD:
            sz = 8
        elif op == OP_SH:
            sz = 2
        else:
            sz = 1
        off = _locate(addr, sz, membase, memcap, mapped)
        if off == -2:
            return (F_UNALIGNED, pc, addr, zero)
        if off == -1:
            return (F_UNMAPPED, pc, addr, zero)
        if op == OP_SD:
            v = np.uint64(x[r2])
            u64v[off >> 3] = v
        elif op == OP_SW:
            v = np.uint64(x[r2]) & _U32MASK
            u32v[off >> 2] = np.uint32(v)
        elif op == OP_FSW:
            v = f[r2] & _U32MASK
            u32v[off >> 2] = np.uint32(v)
        elif op == OP_FSD:
            v = f[r2]
            u64v[off >> 3] = v
        elif op == OP_SH:
            v = np.uint64(x[r2]) & np.uint64(0xFFFF)
            u16v[off >> 1] = np.uint16(v)
        else:
            v = np.uint64(x[r2]) & np.uint64(0xFF)
            u8v[off] = np.uint8(v)
        if addr == tohost and (v & _ONE64) != np.uint64(0):
            return (EXITED, nxt, addr, np.int64(v >> _ONE64))
        return (OK, nxt, addr, zero)

    # ---- branches and jumps ----------------------------------------------
    if OP_BEQ <= op <= OP_BGEU:
        if op == OP_BNE:
            taken = x[r1] != x[r2]
        elif op == OP_BEQ:
            taken = x[r1] == x[r2]
        elif op == OP_BLT:
            taken = x[r1] < x[r2]
        elif op == OP_BGE:
            taken = x[r1] >= x[r2]
        elif op == OP_BLTU:
            taken = np.uint64(x[r1]) < np.uint64(x[r2])
        else:
            taken = np.uint64(x[r1]) >= np.uint64(x[r2])
        if taken:
            nxt = pc + imm
        return (OK, nxt, none, zero)
    if op == OP_JAL:
        if rd:
            x[rd] = pc + 4
        return (OK, pc + imm, none, zero)
    if op == OP_JALR:
        t = (x[r1] + imm) & np.int64(-2)
        if rd:
            x[rd] = pc + 4
        return (OK, t, none, zero)

    # ---- remaining integer ALU -------------------------------------------
    if op == OP_LUI:
        # imm carries the raw 20-bit field, as in assembly syntax
        if rd:
            x[rd] = _sx32(imm << 12)
        return (OK, nxt, none, zero)
    if op == OP_AUIPC:
        if rd:
            x[rd] = pc + _sx32(imm << 12)
        return (OK, nxt, none, zero)
    if op == OP_ADDIW:
        if rd:
            x[rd] = _sx32(x[r1] + imm)
        return (OK, nxt, none, zero)
    if OP_SLTI <= op <= OP_SRAI:
        if rd:
            if op == OP_SLTI:
                x[rd] = np.int64(1) if x[r1] < imm else zero
            elif op == OP_SLTIU:
                x[rd] = np.int64(1) if np.uint64(x[r1]) < np.uint64(imm) else zero
            elif op == OP_XORI:
                x[rd] = x[r1] ^ imm
            elif op == OP_ORI:
                x[rd] = x[r1] | imm
            elif op == OP_ANDI:
                x[rd] = x[r1] & imm
            elif op == OP_SLLI:
                x[rd] = x[r1] << imm
            elif op == OP_SRLI:
                x[rd] = np.int64(np.uint64(x[r1]) >> np.uint64(imm))
            else:
                x[rd] = x[r1] >> imm
        return (OK, nxt, none, zero)
    if OP_SUB <= op <= OP_AND:
        if rd:
            if op == OP_SUB:
                x[rd] = x[r1] - x[r2]
            elif op == OP_SLL:
                x[rd] = x[r1] << (x[r2] & 63)
            elif op == OP_SLT:
                x[rd] = np.int64(1) if x[r1] < x[r2] else zero
            elif op == OP_SLTU:
                x[rd] = np.int64(1) if np.uint64(x[r1]) < np.uint64(x[r2]) else zero
            elif op == OP_XOR:
                x[rd] = x[r1] ^ x[r2]
            elif op == OP_SRL:
                x[rd] = np.int64(np.uint64(x[r1]) >> np.uint64(x[r2] & 63))
            elif op == OP_SRA:
                x[rd] = x[r1] >> (x[r2] & 63)
            elif op == OP_OR:
                x[rd] = x[r1] | x[r2]
            else:
                x[rd] = x[r1] & x[r2]
        return (OK, nxt, none, zero)
    if OP_SLLIW <= op <= OP_SRAW:
        if rd:
            if op == OP_SLLIW:
                x[rd] = _sx32(x[r1] << imm)
            elif op == OP_SRLIW:
                x[rd] = _sx32((np.uint64(x[r1]) & _U32MASK) >> np.uint64(imm))
            elif op == OP_SRAIW:
                x[rd] = _sx32(x[r1]) >> imm
            elif op == OP_ADDW:
                x[rd] = _sx32(x[r1] + x[r2])
            elif op == OP_SUBW:
                x[rd] = _sx32(x[r1] - x[r2])
            elif op == OP_SLLW:
                x[rd] = _sx32(x[r1] << (x[r2] & 31))
            elif op == OP_SRLW:
                x[rd] = _sx32((np.uint64(x[r1]) & _U32MASK) >> np.uint64(x[r2] & 31))
            else:
                x[rd] = _sx32(x[r1]) >> (x[r2] & 31)
        return (OK, nxt, none, zero)

    # ---- multiply / divide -----------------------------------------------
    if OP_MUL <= op <= OP_REMUW:
        if rd:
            if op == OP_MUL:
                x[rd] = x[r1] * x[r2]
            elif op == OP_MULH:
                ua = np.uint64(x[r1])
                ub = np.uint64(x[r2])
                h = _mulhu(ua, ub)
                if x[r1] < 0:
                    h = h - ub
                if x[r2] < 0:
                    h = h - ua
                x[rd] = np.int64(h)
            elif op == OP_MULHSU:
                ua = np.uint64(x[r1])
                ub = np.uint64(x[r2])
                h = _mulhu(ua, ub)
                if x[r1] < 0:
                    h = h - ub
                x[rd] = np.int64(h)
            elif op == OP_MULHU:
                x[rd] = np.int64(_mulhu(np.uint64(x[r1]), np.uint64(x[r2])))
            elif op == OP_DIV:
                x[rd] = _div_signed(x[r1], x[r2])
            elif op == OP_DIVU:
                if x[r2] == 0:
                    x[rd] = np.int64(-1)
                else:
                    x[rd] = np.int64(np.uint64(x[r1]) // np.uint64(x[r2]))
            elif op == OP_REM:
                x[rd] = _rem_signed(x[r1], x[r2])
            elif op == OP_REMU:
                if x[r2] == 0:
                    x[rd] = x[r1]
                else:
                    x[rd] = np.int64(np.uint64(x[r1]) % np.uint64(x[r2]))
            elif op == OP_MULW:
                x[rd] = _sx32(x[r1] * x[r2])
            elif op == OP_DIVW:
                x[rd] = _sx32(_div_signed(_sx32(x[r1]), _sx32(x[r2])))
            elif op == OP_DIVUW:
                a32 = np.uint64(x[r1]) & _U32MASK
                b32 = np.uint64(x[r2]) & _U32MASK
                if b32 == np.uint64(0):
                    x[rd] = np.int64(-1)
                else:
                    x[rd] = _sx32(a32 // b32)
            elif op == OP_REMW:
                x[rd] = _sx32(_rem_signed(_sx32(x[r1]), _sx32(x[r2])))
            else:
                a32 = np.uint64(x[r1]) & _U32MASK
                b32 = np.uint64(x[r2]) & _U32MASK
                if b32 == np.uint64(0):
                    x[rd] = _sx32(a32)
                else:
                    x[rd] = _sx32(a32 % b32)
        return (OK, nxt, none, zero)

    # ---- single-precision arithmetic -------------------------------------
    if OP_FMADD_S <= op <= OP_FSQRT_S:
        a = _f32_from_bits(_unbox32(f[r1]), f4v, u4v)
        if op == OP_FSQRT_S:
            f[rd] = _box_s(np.sqrt(a), f4v, u4v)
            return (OK, nxt, none, zero)
        b = _f32_from_bits(_unbox32(f[r2]), f4v, u4v)
        if op <= OP_FNMADD_S:
            c = _f32_from_bits(_unbox32(f[r3]), f4v, u4v)
            if op == OP_FMADD_S:
                d = _fma32(a, b, c, f8v, u8dv)
            elif op == OP_FMSUB_S:
                d = _fma32(a, b, -c, f8v, u8dv)
            elif op == OP_FNMSUB_S:
                d = _fma32(-a, b, c, f8v, u8dv)
            else:
                d = _fma32(-a, b, -c, f8v, u8dv)
        elif op == OP_FADD_S:
            d = a + b
        elif op == OP_FSUB_S:
            d = a - b
        elif op == OP_FMUL_S:
            d = a * b
        else:
            d = a / b
        f[rd] = _box_s(d, f4v, u4v)
        return (OK, nxt, none, zero)

    # ---- single-precision moves, sign ops, compares, converts ------------
    if OP_FSGNJ_S <= op <= OP_FSGNJX_S:
        ab = _unbox32(f[r1])
        bb = _unbox32(f[r2])
        if op == OP_FSGNJ_S:
            res = (ab & np.uint64(0x7FFFFFFF)) | (bb & _SIGN32)
        elif op == OP_FSGNJN_S:
            res = (ab & np.uint64(0x7FFFFFFF)) | ((~bb) & _SIGN32)
        else:
            res = ab ^ (bb & _SIGN32)
        f[rd] = _BOX | res
        return (OK, nxt, none, zero)
    if op == OP_FMIN_S or op == OP_FMAX_S:
        ab = _unbox32(f[r1])
        bb = _unbox32(f[r2])
        a = _f32_from_bits(ab, f4v, u4v)
        b = _f32_from_bits(bb, f4v, u4v)
        an = a != a
        bn = b != b
        if an and bn:
            res = _CANON32
        elif an:
            res = bb
        elif bn:
            res = ab
        elif a < b:
            res = ab if op == OP_FMIN_S else bb
        elif b < a:
            res = bb if op == OP_FMIN_S else ab
        elif op == OP_FMIN_S:
            res = ab | bb
        else:
            res = ab & bb
        f[rd] = _BOX | res
        return (OK, nxt, none, zero)
    if op == OP_FEQ_S or op == OP_FLT_S or op == OP_FLE_S:
        a = _f32_from_bits(_unbox32(f[r1]), f4v, u4v)
        b = _f32_from_bits(_unbox32(f[r2]), f4v, u4v)
        if op == OP_FEQ_S:
            hit = a == b
        elif op == OP_FLT_S:
            hit = a < b
        else:
            hit = a <= b
        if rd:
            x[rd] = np.int64(1) if hit else zero
        return (OK, nxt, none, zero)
    if OP_FCVT_W_S <= op <= OP_FCVT_LU_S:
        a = _f32_from_bits(_unbox32(f[r1]), f4v, u4v)
        if rd:
            if op == OP_FCVT_W_S:
                x[rd] = _rne_w(a)
            elif op == OP_FCVT_WU_S:
                x[rd] = _rne_wu(a)
            elif op == OP_FCVT_L_S:
                x[rd] = _rne_l(a)
            else:
                x[rd] = _rne_lu(a)
        return (OK, nxt, none, zero)
    if OP_FCVT_S_W <= op <= OP_FCVT_S_LU:
        if op == OP_FCVT_S_W:
            f[rd] = _box_s(np.float64(_sx32(x[r1])), f4v, u4v)
        elif op == OP_FCVT_S_WU:
            f[rd] = _box_s(np.float64(np.uint64(x[r1]) & _U32MASK), f4v, u4v)
        elif op == OP_FCVT_S_L:
            f[rd] = _BOX | _i64_to_f32_bits(x[r1], f4v, u4v)
        else:
            f[rd] = _BOX | _u64_to_f32_bits(np.uint64(x[r1]), f4v, u4v)
        return (OK, nxt, none, zero)
    if op == OP_FMV_X_W:
        if rd:
            x[rd] = _sx32(f[r1] & _U32MASK)
        return (OK, nxt, none, zero)
    if op == OP_FMV_W_X:
        f[rd] = _BOX | (np.uint64(x[r1]) & _U32MASK)
        return (OK, nxt, none, zero)
    if op == OP_FCLASS_S:
        if rd:
            x[rd] = np.int64(1) << _fclass32(_unbox32(f[r1]))
        return (OK, nxt, none, zero)

    # ---- double-precision arithmetic -------------------------------------
    if OP_FMADD_D <= op <= OP_FSQRT_D:
        a = _f64_from_bits(f[r1], f8v, u8dv)
        if op == OP_FSQRT_D:
            f[rd] = _pack_d(np.sqrt(a), f8v, u8dv)
            return (OK, nxt, none, zero)
        b = _f64_from_bits(f[r2], f8v, u8dv)
        if op <= OP_FNMADD_D:
            c = _f64_from_bits(f[r3], f8v, u8dv)
            if op == OP_FMADD_D:
                d = _fma64(a, b, c, f8v, u8dv)
            elif op == OP_FMSUB_D:
                d = _fma64(a, b, -c, f8v, u8dv)
            elif op == OP_FNMSUB_D:
                d = _fma64(-a, b, c, f8v, u8dv)
            else:
                d = _fma64(-a, b, -c, f8v, u8dv)
        elif op == OP_FADD_D:
            d = a + b
        elif op == OP_FSUB_D:
            d = a - b
        elif op == OP_FMUL_D:
            d = a * b
        else:
            d = a / b
        f[rd] = _pack_d(d, f8v, u8dv)
        return (OK, nxt, none, zero)

    # ---- double-precision moves, sign ops, compares, converts ------------
    if OP_FSGNJ_D <= op <= OP_FSGNJX_D:
        ab = f[r1]
        bb = f[r2]
        if op == OP_FSGNJ_D:
            res = (ab & ~_SIGN64) | (bb & _SIGN64)
        elif op == OP_FSGNJN_D:
            res = (ab & ~_SIGN64) | ((~bb) & _SIGN64)
        else:
            res = ab ^ (bb & _SIGN64)
        f[rd] = res
        return (OK, nxt, none, zero)
    if op == OP_FMIN_D or op == OP_FMAX_D:
        ab = f[r1]
        bb = f[r2]
        a = _f64_from_bits(ab, f8v, u8dv)
        b = _f64_from_bits(bb, f8v, u8dv)
        an = a != a
        bn = b != b
        if an and bn:
            res = _CANON64
        elif an:
            res = bb
        elif bn:
            res = ab
        elif a < b:
            res = ab if op == OP_FMIN_D else bb
        elif b < a:
            res = bb if op == OP_FMIN_D else ab
        elif op == OP_FMIN_D:
            res = ab | bb
        else:
            res = ab & bb
        f[rd] = res
        return (OK, nxt, none, zero)
    if op == OP_FCVT_S_D:
        a = _f64_from_bits(f[r1], f8v, u8dv)
        f[rd] = _box_s(a, f4v, u4v)
        return (OK, nxt, none, zero)
    if op == OP_FCVT_D_S:
        a = _f32_from_bits(_unbox32(f[r1]), f4v, u4v)
        f[rd] = _pack_d(a, f8v, u8dv)
        return (OK, nxt, none, zero)
    if op == OP_FEQ_D or op == OP_FLT_D or op == OP_FLE_D:
        a = _f64_from_bits(f[r1], f8v, u8dv)
        b = _f64_from_bits(f[r2], f8v, u8dv)
        if op == OP_FEQ_D:
            hit = a == b
        elif op == OP_FLT_D:
            hit = a < b
        else:
            hit = a <= b
        if rd:
            x[rd] = np.int64(1) if hit else zero
        return (OK, nxt, none, zero)
    if OP_FCVT_W_D <= op <= OP_FCVT_LU_D:
        a = _f64_from_bits(f[r1], f8v, u8dv)
        if rd:
            if op == OP_FCVT_W_D:
                x[rd] = _rne_w(a)
            elif op == OP_FCVT_WU_D:
                x[rd] = _rne_wu(a)
            elif op == OP_FCVT_L_D:
                x[rd] = _rne_l(a)
            else:
                x[rd] = _rne_lu(a)
        return (OK, nxt, none, zero)
    if OP_FCVT_D_W <= op <= OP_FCVT_D_LU:
        if op == OP_FCVT_D_W:
            f[rd] = _f64_to_bits(np.float64(_sx32(x[r1])), f8v, u8dv)
        elif op == OP_FCVT_D_WU:
            f[rd] = _f64_to_bits(np.float64(np.uint64(x[r1]) & _U32MASK), f8v, u8dv)
        elif op == OP_FCVT_D_L:
            f[rd] = _f64_to_bits(np.float64(x[r1]), f8v, u8dv)
        else:
            f[rd] = _f64_to_bits(np.float64(np.uint64(x[r1])), f8v, u8dv)
        return (OK, nxt, none, zero)
    if op == OP_FMV_X_D:
        if rd:
            x[rd] = np.int64(f[r1])
        return (OK, nxt, none, zero)
    if op == OP_FMV_D_X:
        f[rd] = np.uint64(x[r1])
        return (OK, nxt, none, zero)
    if op == OP_FCLASS_D:
        if rd:
            x[rd] = np.int64(1) << _fclass64(f[r1])
        return (OK, nxt, none, zero)

    # ---- system ----------------------------------------------------------
    if op == OP_FENCE:
        return (OK, nxt, none, zero)
    if op == OP_ECALL:
        if x[17] == 93:
            return (EXITED, nxt, none, np.int64(np.uint64(x[10]) & _U32MASK))
        return (F_ECALL, pc, none, zero)
    if op == OP_EBREAK:
        return (F_EBREAK, pc, none, zero)
    return (F_ILLEGAL, pc, none, zero)


@njit(cache=True, error_model='numpy')
def exec_chunk(ops, rds, rs1s, rs2s, rs3s, imms, clss,
               code_base, n_instrs,
               pc0, x, f,
               membase, memcap, mapped,
               i8v, i16v, i32v, i64v, u8v, u16v, u32v, u64v,
               f4v, u4v, f8v, u8dv,
               cbuf, caux, tohost,
               limit, t_pc, t_idx, t_maddr, cls_counts):
    """Run up to `limit` instructions, recording a commit trace.

    Returns (n_committed, pc_after, status, aux).  status OK means the
    chunk filled without incident; EXITED and the fault codes are final.
    aux is the exit code for EXITED and the faulting address (or pc) for
    faults.  The trace arrays hold, per committed instruction, its pc, its
    index in the program and the data address touched (-1 if none).
    """
    pc = pc0
    n = 0
    status = OK
    exitc = np.int64(0)
    while n < limit:
        if (pc & 3) != 0 or pc < code_base:
            status = F_BADPC
            exitc = pc
            break
        idx = (pc - code_base) >> 2
        if idx >= n_instrs:
            status = F_BADPC
            exitc = pc
            break
        st, nxt, maddr, ec = exec_one(
            ops[idx], rds[idx], rs1s[idx], rs2s[idx], rs3s[idx], imms[idx], pc,
            x, f, membase, memcap, mapped,
            i8v, i16v, i32v, i64v, u8v, u16v, u32v, u64v,
            f4v, u4v, f8v, u8dv, cbuf, caux, tohost)
        if st != OK and st != EXITED:
            status = st
            exitc = maddr
            break
        t_pc[n] = pc
        t_idx[n] = idx
        t_maddr[n] = maddr
        cls_counts[clss[idx]] += 1
        n += 1
        pc = nxt
        if st == EXITED:
            status = EXITED
            exitc = ec
            break
    return (n, pc, status, exitc)
