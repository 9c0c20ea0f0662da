"""Two-level cache hierarchy replayed over commit traces.

Split 64 KiB 4-way L1 instruction and data caches sit over a shared 8 MiB
4-way L2 with 64-byte lines, write-allocate write-back and strict LRU.
Latency is 2 cycles on an L1 hit, 14 with an L2 hit behind an L1 miss and
114 when the line comes from memory.

The replay walks a commit trace in order: one instruction fetch per line
transition of the pc, one data access per load or store.  Every timing
model sees the identical sequence, so cache statistics agree across them
by construction.

Tags, valid, dirty and recency stamps live in flat numpy arrays and the
walk itself is JIT-compiled; a one-access Python entry point (`access`)
exists for direct address streams and for checking against the reference
model in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LINE = 64
L1_HIT_LAT = 2
L2_HIT_LAT = 12
DRAM_LAT = 100

# counter slots: per cache (accesses, misses, evictions, writebacks)
_TICK = 0
_L1I_ACC = 1
_L1I_MISS = 2
_L1I_EVICT = 3
_L1I_WB = 4
_L1D_ACC = 5
_L1D_MISS = 6
_L1D_EVICT = 7
_L1D_WB = 8
_L2_ACC = 9
_L2_MISS = 10
_L2_EVICT = 11
_L2_WB = 12
_N_CTR = 13


@dataclass(frozen=True)
class CacheConfig:
    size: int
    assoc: int
    line: int = LINE

    @property
    def nsets(self):
        return self.size // (self.assoc * self.line)


L1I_DEFAULT = CacheConfig(64 << 10, 4)
L1D_DEFAULT = CacheConfig(64 << 10, 4)
L2_DEFAULT = CacheConfig(8 << 20, 4)


@njit(cache=True)
def _lookup(tags, valid, dirty, stamp, nsets, assoc, lineaddr, write, tick):
    """One cache access.  Returns (hit, victim_line, victim_dirty); the
    victim fields are -1/0 when nothing was evicted."""
    si = lineaddr % nsets
    base = si * assoc
    for w in range(assoc):
        j = base + w
        if valid[j] == 1 and tags[j] == lineaddr:
            stamp[j] = tick
            if write:
                dirty[j] = 1
            return (1, np.int64(-1), 0)
    way = -1
    for w in range(assoc):
        if valid[base + w] == 0:
            way = w
            break
    vline = np.int64(-1)
    vdirty = 0
    if way < 0:
        oldest = stamp[base]
        way = 0
        for w in range(1, assoc):
            if stamp[base + w] < oldest:
                oldest = stamp[base + w]
                way = w
        j = base + way
        vline = tags[j]
        vdirty = int(dirty[j])
    j = base + way
    tags[j] = lineaddr
    valid[j] = 1
    dirty[j] = 1 if write else 0
    stamp[j] = tick
    return (0, vline, vdirty)


@njit(cache=True)
def _mark_dirty_quiet(tags, valid, dirty, nsets, assoc, lineaddr):
    """Set the dirty bit if present; no access counted, no recency touch."""
    base = (lineaddr % nsets) * assoc
    for w in range(assoc):
        j = base + w
        if valid[j] == 1 and tags[j] == lineaddr:
            dirty[j] = 1
            return 1
    return 0


@njit(cache=True)
def _hier_access(l1t, l1v, l1d_, l1s, n1, a1,
                 l2t, l2v, l2d_, l2s, n2, a2,
                 ctr, slot0, lineaddr, write):
    """L1 (whichever side, counters starting at slot0) then L2 on a miss.
    Returns the latency.  A writeback at a level means a dirty line left
    that level; it adds no latency to the access that triggered it."""
    ctr[slot0] += 1
    ctr[_TICK] += 1
    hit, vline, vdirty = _lookup(l1t, l1v, l1d_, l1s, n1, a1,
                                 lineaddr, write, ctr[_TICK])
    if hit == 1:
        return L1_HIT_LAT
    ctr[slot0 + 1] += 1
    if vline >= 0:
        ctr[slot0 + 2] += 1
    lat = L1_HIT_LAT + L2_HIT_LAT
    ctr[_L2_ACC] += 1
    ctr[_TICK] += 1
    h2, v2line, v2dirty = _lookup(l2t, l2v, l2d_, l2s, n2, a2,
                                  lineaddr, False, ctr[_TICK])
    if h2 == 0:
        ctr[_L2_MISS] += 1
        lat += DRAM_LAT
        if v2line >= 0:
            ctr[_L2_EVICT] += 1
        if v2dirty == 1:
            ctr[_L2_WB] += 1
    if vdirty == 1:
        ctr[slot0 + 3] += 1
        _mark_dirty_quiet(l2t, l2v, l2d_, n2, a2, vline)
    return lat


@njit(cache=True)
def _replay(pcs, idxs, maddrs, stores, prev_line,
            l1it, l1iv, l1id, l1is, ni, ai,
            l1dt, l1dv, l1dd, l1ds, nd, ad,
            l2t, l2v, l2d, l2s, n2, a2,
            ctr, out_il, out_dl):
    """Replay a trace chunk.  out_il[i] is the fetch latency when
    instruction i starts a new pc line (else 0); out_dl[i] is the data
    access latency for loads/stores (else 0)."""
    n = pcs.shape[0]
    for i in range(n):
        pline = pcs[i] >> 6
        il = 0
        if pline != prev_line:
            il = _hier_access(l1it, l1iv, l1id, l1is, ni, ai,
                              l2t, l2v, l2d, l2s, n2, a2,
                              ctr, _L1I_ACC, pline, False)
            prev_line = pline
        out_il[i] = il
        m = maddrs[i]
        dl = 0
        if m >= 0:
            w = stores[idxs[i]] == 1
            dl = _hier_access(l1dt, l1dv, l1dd, l1ds, nd, ad,
                              l2t, l2v, l2d, l2s, n2, a2,
                              ctr, _L1D_ACC, m >> 6, w)
        out_dl[i] = dl
    return prev_line


class _Arrays:
    def __init__(self, cfg):
        n = cfg.nsets * cfg.assoc
        self.cfg = cfg
        self.tags = np.full(n, -1, dtype=np.int64)
        self.valid = np.zeros(n, dtype=np.uint8)
        self.dirty = np.zeros(n, dtype=np.uint8)
        self.stamp = np.zeros(n, dtype=np.int64)

    @property
    def args(self):
        return (self.tags, self.valid, self.dirty, self.stamp,
                self.cfg.nsets, self.cfg.assoc)


class ZeroInstructions(ValueError):
    """MPKI is undefined without committed instructions."""


@dataclass
class CacheStats:
    l1i_accesses: int
    l1i_misses: int
    l1i_evictions: int
    l1i_writebacks: int
    l1d_accesses: int
    l1d_misses: int
    l1d_evictions: int
    l1d_writebacks: int
    l2_accesses: int
    l2_misses: int
    l2_evictions: int
    l2_writebacks: int

    def mpki(self, which, instructions):
        """Misses per thousand instructions for 'l1i', 'l1d' or 'l2'."""
        return mpki(self, which, instructions)


def mpki(stats, level, committed):
    """Misses per thousand committed instructions at 'l1i', 'l1d' or 'l2'."""
    if committed <= 0:
        raise ZeroInstructions("mpki over zero instructions")
    return getattr(stats, f"{level}_misses") * 1000.0 / committed


class MemoryHierarchy:
    def __init__(self, l1i=L1I_DEFAULT, l1d=L1D_DEFAULT, l2=L2_DEFAULT):
        for cfg in (l1i, l1d, l2):
            if cfg.line != LINE:
                raise ValueError("line size is fixed at 64 bytes")
            if cfg.nsets * cfg.assoc * cfg.line != cfg.size:
                raise ValueError(f"cache size {cfg.size:#x} not divisible")
            if cfg.nsets & (cfg.nsets - 1):
                raise ValueError(f"set count {cfg.nsets} is not a power of two")
        self.l1i = _Arrays(l1i)
        self.l1d = _Arrays(l1d)
        self.l2 = _Arrays(l2)
        self.ctr = np.zeros(_N_CTR, dtype=np.int64)
        self.prev_line = -1

    def access(self, addr, write=False, ifetch=False):
        """Single data-side or fetch-side access; returns its latency."""
        side = self.l1i if ifetch else self.l1d
        acc = _L1I_ACC if ifetch else _L1D_ACC
        return int(_hier_access(*side.args[:4], side.cfg.nsets, side.cfg.assoc,
                                *self.l2.args[:4], self.l2.cfg.nsets,
                                self.l2.cfg.assoc,
                                self.ctr, acc, addr // LINE, write))

    def replay(self, pcs, idxs, maddrs, stores, out_il, out_dl):
        """Walk one trace chunk; carries the current fetch line across
        calls so chunk boundaries are invisible."""
        self.prev_line = int(_replay(
            pcs, idxs, maddrs, stores, self.prev_line,
            *self.l1i.args, *self.l1d.args, *self.l2.args,
            self.ctr, out_il, out_dl))

    @property
    def stats(self):
        c = [int(v) for v in self.ctr]
        return CacheStats(*c[_L1I_ACC:_L1I_ACC + 4],
                          *c[_L1D_ACC:_L1D_ACC + 4],
                          *c[_L2_ACC:_L2_ACC + 4])
