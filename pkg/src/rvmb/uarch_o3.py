"""Out-of-order core timing model: ROB-windowed list scheduling.

The committed trace is scheduled oldest-first under the machine's
resource limits instead of being replayed cycle by cycle:

  dispatch[i] = max(dispatch[i-1], dispatch[i-width]+1,
                    commit[i-rob]+1, queue-capacity and redirect bounds)
  start[i]    = first cycle >= max(dispatch[i], source readiness, older
                overlapping-store completion) with an issue slot and a
                functional unit free
  complete[i] = start[i] + latency (memory ops add the data latency)
  commit[i]   = max(complete[i], commit[i-1], commit[i-cwidth]+1)

and total cycles = commit[N-1].  Mispredicted control transfers hold
dispatch of everything younger until their completion plus the penalty.
Issue slots and per-cycle unit capacity live in generation-stamped ring
buffers, so booking is O(1) amortized with no per-run zeroing.

Memory ports are held for an access's full duration: two ports bound the
memory-level parallelism the window can extract, the way a small miss
buffer would.  Fetch is not modeled at all (the window hides it on the
loops this machine exists to run), but the instruction trace is still
replayed through the hierarchy so cache statistics stay comparable with
the in-order model.  Store-to-load ordering uses the trace's physical
addresses at 4-byte granularity: loads wait for the completion of every
older store touching a shared granule.

Stall attribution needs a single binding constraint per cycle, which a
list schedule does not have; stall_cycles reports zeros here and the
interesting contrast lives in the cycles/CPI/speedup numbers.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import loader
from .engine import functional_result, run
from .memhier import L1_HIT_LAT
from .opcodes import N_CLASSES, InstrClass
from .predictor import new_state, resolve
from .uarch_minor import (InvalidConfig, LatencyTable, STALL_KEYS,
                          TimingResult, predictor_stats)

_MEMREAD = int(InstrClass.MemRead)
_MEMWRITE = int(InstrClass.MemWrite)

FU_GROUPS = ("IntAlu", "IntMulDiv", "FpFma", "MemPort")
_GROUP_OF = {
    InstrClass.IntAlu: 0,
    InstrClass.Branch: 0,
    InstrClass.Jump: 0,
    InstrClass.Other: 0,
    InstrClass.IntMult: 1,
    InstrClass.IntDiv: 1,
    InstrClass.FloatAdd: 2,
    InstrClass.FloatMult: 2,
    InstrClass.FloatMultAcc: 2,
    InstrClass.FloatDiv: 2,
    InstrClass.FloatMisc: 2,
    InstrClass.MemRead: 3,
    InstrClass.MemWrite: 3,
}

_RBITS = 17
_RSIZE = 1 << _RBITS
_RMASK = _RSIZE - 1

_COMMIT_RING = 256
_DISP_RING = 8


class MismatchedRuns(ValueError):
    """Speedup between runs that did not execute the same instructions."""


@dataclass
class O3Config:
    rob_size: int = 128
    dispatch_width: int = 4
    issue_width: int = 4
    commit_width: int = 4
    fu_counts: dict = field(default_factory=lambda: dict(
        IntAlu=2, IntMulDiv=1, FpFma=2, MemPort=2))
    load_queue: int = 32
    store_queue: int = 32
    mispredict_penalty: int = 8
    latency_table: LatencyTable = field(default_factory=LatencyTable)

    def __post_init__(self):
        for name, value in (("rob_size", self.rob_size),
                            ("dispatch_width", self.dispatch_width),
                            ("issue_width", self.issue_width),
                            ("commit_width", self.commit_width),
                            ("load_queue", self.load_queue),
                            ("store_queue", self.store_queue),
                            ("mispredict_penalty", self.mispredict_penalty)):
            if value < 1:
                raise InvalidConfig(f"{name} must be at least 1")
        if self.rob_size < self.dispatch_width:
            raise InvalidConfig("rob_size must cover the dispatch width")
        if self.rob_size > _COMMIT_RING:
            raise InvalidConfig(f"rob_size above {_COMMIT_RING} unsupported")
        if self.dispatch_width > _DISP_RING or self.commit_width > _DISP_RING:
            raise InvalidConfig(f"widths above {_DISP_RING} unsupported")
        if self.load_queue > 32 or self.store_queue > 32:
            raise InvalidConfig("queue sizes above 32 unsupported")
        for g in FU_GROUPS:
            if self.fu_counts.get(g, 0) < 1:
                raise InvalidConfig(f"need at least one {g} unit")


@njit(cache=True)
def _o3_batch(pcs, idxs, next_pcs, dlats, maddrs,
              clss, dsts, srcs, ctrl, rds, rs1s, sizes,
              lat_tab, group_tab, span_tab, caps,
              ready, ost, disp_ring, commit_ring, lq_ring, sq_ring,
              iss_cnt, iss_gen, fu_cnt, fu_gen,
              stclk, membase,
              pht, ras, pst,
              rob, dw, iw, cw, lq, sq, penalty):
    k = ost[0]
    dp = ost[1]
    cp = ost[2]
    redirect = ost[3]
    nl = ost[4]
    ns = ost[5]
    n = pcs.shape[0]
    for i in range(n):
        idx = idxs[i]
        cls = clss[idx]
        is_mem = cls == _MEMREAD or cls == _MEMWRITE
        lat = lat_tab[cls]
        if is_mem:
            lat = lat + dlats[i]

        # dispatch: in order, width-limited, bounded by the ROB window,
        # queue capacity and any unresolved mispredict redirect
        d = dp
        if k >= dw:
            v = disp_ring[(k - dw) % _DISP_RING] + 1
            if v > d:
                d = v
        if k >= rob:
            v = commit_ring[(k - rob) % _COMMIT_RING] + 1
            if v > d:
                d = v
        if redirect > d:
            d = redirect
        if cls == _MEMREAD and nl >= lq:
            v = lq_ring[(nl - lq) % 32] + 1
            if v > d:
                d = v
        if cls == _MEMWRITE and ns >= sq:
            v = sq_ring[(ns - sq) % 32] + 1
            if v > d:
                d = v
        disp_ring[k % _DISP_RING] = d
        dp = d

        # earliest data-ready cycle
        t = d
        for s in range(3):
            r = srcs[idx, s]
            if r >= 0 and ready[r] > t:
                t = ready[r]
        m = maddrs[i]
        if cls == _MEMREAD and m >= 0:
            g0 = (m - membase) >> 2
            g1 = (m + sizes[idx] - 1 - membase) >> 2
            for g in range(g0, g1 + 1):
                if stclk[g] > t:
                    t = stclk[g]

        # claim an issue slot and unit capacity (whole span for ops that
        # hold their unit)
        grp = group_tab[cls]
        cap = caps[grp]
        span = lat if span_tab[cls] == 1 else 1
        while True:
            s0 = t & _RMASK
            gen = t >> _RBITS
            cnt = iss_cnt[s0] if iss_gen[s0] == gen else 0
            if cnt < iw:
                ok = True
                u = t
                while u < t + span:
                    su = u & _RMASK
                    gu = u >> _RBITS
                    c = fu_cnt[grp, su] if fu_gen[grp, su] == gu else 0
                    if c >= cap:
                        ok = False
                        t = u  # no point retrying cycles before the clash
                        break
                    u += 1
                if ok:
                    break
            t += 1
        s0 = t & _RMASK
        gen = t >> _RBITS
        if iss_gen[s0] != gen:
            iss_gen[s0] = gen
            iss_cnt[s0] = 0
        iss_cnt[s0] += 1
        u = t
        while u < t + span:
            su = u & _RMASK
            gu = u >> _RBITS
            if fu_gen[grp, su] != gu:
                fu_gen[grp, su] = gu
                fu_cnt[grp, su] = 0
            fu_cnt[grp, su] += 1
            u += 1

        complete = t + lat
        dst = dsts[idx]
        if dst >= 0:
            ready[dst] = complete
        if cls == _MEMWRITE and m >= 0:
            g0 = (m - membase) >> 2
            g1 = (m + sizes[idx] - 1 - membase) >> 2
            for g in range(g0, g1 + 1):
                if complete > stclk[g]:
                    stclk[g] = complete

        kind = ctrl[idx]
        if kind != 0:
            taken = np.int64(1) if next_pcs[i] != pcs[i] + 4 else np.int64(0)
            mis = resolve(pht, ras, pst, pcs[i], kind,
                          rds[idx], rs1s[idx], taken, next_pcs[i])
            if mis == 1:
                v = complete + penalty
                if v > redirect:
                    redirect = v

        # in-order, width-limited commit
        c = complete
        if cp > c:
            c = cp
        if k >= cw:
            v = commit_ring[(k - cw) % _COMMIT_RING] + 1
            if v > c:
                c = v
        commit_ring[k % _COMMIT_RING] = c
        cp = c
        if cls == _MEMREAD:
            lq_ring[nl % 32] = c
            nl += 1
        elif cls == _MEMWRITE:
            sq_ring[ns % 32] = c
            ns += 1
        k += 1
    ost[0] = k
    ost[1] = dp
    ost[2] = cp
    ost[3] = redirect
    ost[4] = nl
    ost[5] = ns


def _class_arrays(config):
    lat = np.ones(N_CLASSES, dtype=np.int64)
    group = np.zeros(N_CLASSES, dtype=np.int64)
    span = np.zeros(N_CLASSES, dtype=np.int64)
    for klass in InstrClass:
        latency, pipelined = config.latency_table.entries[klass]
        lat[klass] = latency
        group[klass] = _GROUP_OF[klass]
        span[klass] = 0 if pipelined else 1
    caps = np.array([config.fu_counts[g] for g in FU_GROUPS], dtype=np.int64)
    return lat, group, span, caps


class _O3Sim:
    """Streaming trace consumer; same deferred-last dance as the in-order
    model so every instruction sees the pc that followed it."""

    def __init__(self, program, config, mem, membase, memsize):
        self.program = program
        self.config = config
        self.mem = mem
        self.lat_tab, self.group_tab, self.span_tab, self.caps = (
            _class_arrays(config))
        self.ready = np.zeros(64, dtype=np.int64)
        self.ost = np.zeros(6, dtype=np.int64)
        self.disp_ring = np.zeros(_DISP_RING, dtype=np.int64)
        self.commit_ring = np.zeros(_COMMIT_RING, dtype=np.int64)
        self.lq_ring = np.zeros(32, dtype=np.int64)
        self.sq_ring = np.zeros(32, dtype=np.int64)
        self.iss_cnt = np.zeros(_RSIZE, dtype=np.int64)
        self.iss_gen = np.full(_RSIZE, -1, dtype=np.int64)
        self.fu_cnt = np.zeros((4, _RSIZE), dtype=np.int64)
        self.fu_gen = np.full((4, _RSIZE), -1, dtype=np.int64)
        self.membase = membase
        self.stclk = np.zeros(memsize // 4 + 2, dtype=np.int64)
        self.pht, self.ras, self.pst = new_state()
        self.have_pend = False
        self.p_pc = np.zeros(1, dtype=np.int64)
        self.p_idx = np.zeros(1, dtype=np.int64)
        self.p_dl = np.zeros(1, dtype=np.int64)
        self.p_maddr = np.zeros(1, dtype=np.int64)

    def _kernel(self, pcs, idxs, next_pcs, dlats, maddrs):
        p = self.program
        cfg = self.config
        _o3_batch(pcs, idxs, next_pcs, dlats, maddrs,
                  p.clss, p.dsts, p.srcs, p.ctrl, p.rds, p.rs1s, p.sizes,
                  self.lat_tab, self.group_tab, self.span_tab, self.caps,
                  self.ready, self.ost, self.disp_ring, self.commit_ring,
                  self.lq_ring, self.sq_ring,
                  self.iss_cnt, self.iss_gen, self.fu_cnt, self.fu_gen,
                  self.stclk, self.membase,
                  self.pht, self.ras, self.pst,
                  cfg.rob_size, cfg.dispatch_width, cfg.issue_width,
                  cfg.commit_width, cfg.load_queue, cfg.store_queue,
                  cfg.mispredict_penalty)

    def sink(self, pcs, idxs, maddrs):
        n = pcs.shape[0]
        il = np.zeros(n, dtype=np.int64)
        dl = np.zeros(n, dtype=np.int64)
        if self.mem is not None:
            self.mem.replay(pcs, idxs, maddrs, self.program.stores, il, dl)
        else:
            dl[maddrs >= 0] = L1_HIT_LAT
        if self.have_pend:
            self._kernel(self.p_pc, self.p_idx, pcs[:1],
                         self.p_dl, self.p_maddr)
        if n > 1:
            self._kernel(pcs[:-1], idxs[:-1], pcs[1:], dl[:-1], maddrs[:-1])
        self.p_pc[0] = pcs[-1]
        self.p_idx[0] = idxs[-1]
        self.p_dl[0] = dl[-1]
        self.p_maddr[0] = maddrs[-1]
        self.have_pend = True

    def finish(self, final_pc):
        if self.have_pend:
            nxt = np.array([final_pc], dtype=np.int64)
            self._kernel(self.p_pc, self.p_idx, nxt, self.p_dl, self.p_maddr)
            self.have_pend = False
        return int(self.ost[2])


def simulate_o3(image, entry=None, config=None, mem=None, limit=1 << 34):
    """Timed out-of-order run.  Returns (TimingResult, FunctionalResult);
    `mem` as in simulate_minor (None means a perfect hierarchy)."""
    if config is None:
        config = O3Config()
    prep = loader.prepare(image)
    if entry is not None:
        prep.state.pc = entry
    sim = _O3Sim(prep.program, config, mem,
                 prep.state.mem.base, prep.state.mem.size)
    res = run(prep.state, prep.program, max_instrs=limit,
              tohost=prep.tohost, sink=sim.sink)
    cycles = sim.finish(prep.state.pc)
    committed = res.committed
    timing = TimingResult(
        cycles=cycles,
        committed=committed,
        cpi=cycles / committed if committed else float("inf"),
        stall_cycles={key: 0 for key in STALL_KEYS},
        predictor=predictor_stats(sim.pst),
    )
    return timing, functional_result(prep.state, image, res)


def speedup(minor, o3):
    """cycles_minor / cycles_o3 for two runs of the same program."""
    if minor.committed != o3.committed:
        raise MismatchedRuns(
            f"committed {minor.committed} vs {o3.committed}: "
            "not the same run")
    return minor.cycles / o3.cycles
