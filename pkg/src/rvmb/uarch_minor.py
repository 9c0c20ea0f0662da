"""In-order scalar core timing model over the committed trace.

One instruction issues per cycle at best; issue slips for four reasons,
each charged to a named stall bucket:

  issue[i] = max(issue[i-1] + 1 + fetch bubble,
                 readiness of every source register,
                 free time of the functional unit,
                 redirect after a mispredicted control transfer)
  done[i]  = issue[i] + latency (memory ops add the data access latency)

Unpipelined units (the iterative multiplier and dividers, plus the single
memory port) hold their unit until done; pipelined units accept a new
operation the next cycle, which a one-wide issue stage satisfies for free.
The fetch bubble is the instruction line's access latency beyond an L1
hit, charged once per line transition; the pipeline fill shows up as a
single depth-1 term at the end, so

  cycles == committed + sum of all stall buckets + (depth - 1)

holds exactly, and the whole recurrence can be checked by hand on paper.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import loader
from .engine import run, functional_result
from .memhier import L1_HIT_LAT
from .opcodes import N_CLASSES, InstrClass
from .predictor import (S_BR_MISP, S_BR_PRED, S_MISP, S_PRED, S_RAS_HIT,
                        S_RET, new_state, resolve)

_MEMREAD = int(InstrClass.MemRead)
_MEMWRITE = int(InstrClass.MemWrite)

STALL_KEYS = ("raw_hazard", "structural", "icache", "dcache", "branch")
_RAW, _STRUCT, _ICACHE, _DCACHE, _BRANCH = range(5)


class InvalidConfig(ValueError):
    """Configuration violates a fixed structural constraint."""


_DEFAULT_LATENCIES = {
    InstrClass.IntAlu: (1, True),
    InstrClass.IntMult: (10, False),
    InstrClass.IntDiv: (20, False),
    InstrClass.MemRead: (1, False),
    InstrClass.MemWrite: (1, False),
    InstrClass.FloatAdd: (4, True),
    InstrClass.FloatMult: (4, True),
    InstrClass.FloatMultAcc: (5, True),
    InstrClass.FloatDiv: (12, False),
    InstrClass.FloatMisc: (2, True),
    InstrClass.Branch: (1, True),
    InstrClass.Jump: (1, True),
    InstrClass.Other: (1, True),
}


@dataclass
class LatencyTable:
    """Per-class (latency, pipelined) entries.

    Memory entries hold the port-occupancy base cost; the data access
    latency from the hierarchy is added per operation.  Both memory
    classes share one port, so marking them unpipelined serializes all
    memory operations through it.
    """

    entries: dict = field(default_factory=lambda: dict(_DEFAULT_LATENCIES))

    def __post_init__(self):
        for klass in InstrClass:
            if klass not in self.entries:
                raise InvalidConfig(f"no latency entry for {klass.name}")
            lat, _ = self.entries[klass]
            if lat < 1:
                raise InvalidConfig(f"{klass.name} latency {lat} < 1")

    def with_entry(self, klass, latency, pipelined=None):
        """Copy with one class changed; handy for sensitivity sweeps."""
        entries = dict(self.entries)
        if pipelined is None:
            pipelined = entries[klass][1]
        entries[klass] = (latency, pipelined)
        return LatencyTable(entries)

    def arrays(self):
        """(latency[class], unit[class], n_units) for the kernel; unit is
        -1 for pipelined classes, shared between the memory classes."""
        lat = np.ones(N_CLASSES, dtype=np.int64)
        unit = np.full(N_CLASSES, -1, dtype=np.int64)
        nxt = 1
        for klass in InstrClass:
            latency, pipelined = self.entries[klass]
            lat[klass] = latency
            if pipelined:
                continue
            if klass in (InstrClass.MemRead, InstrClass.MemWrite):
                unit[klass] = 0
            else:
                unit[klass] = nxt
                nxt += 1
        return lat, unit, nxt


@dataclass
class MinorConfig:
    pipeline_depth: int = 5
    issue_width: int = 1
    mispredict_penalty: int = 3
    latency_table: LatencyTable = field(default_factory=LatencyTable)

    def __post_init__(self):
        if self.issue_width != 1:
            raise InvalidConfig("the in-order core issues one per cycle")
        if self.mispredict_penalty != self.pipeline_depth - 2:
            raise InvalidConfig("mispredict penalty must be depth - 2")
        if self.pipeline_depth < 3:
            raise InvalidConfig("pipeline depth below 3 leaves no penalty")


@dataclass
class TimingResult:
    cycles: int
    committed: int
    cpi: float
    stall_cycles: dict
    predictor: dict


def predictor_stats(pst):
    n = int(pst[S_BR_PRED])
    acc = (n - int(pst[S_BR_MISP])) / n if n else 1.0
    return {
        "predictions": int(pst[S_PRED]),
        "mispredictions": int(pst[S_MISP]),
        "ras_hits": int(pst[S_RAS_HIT]),
        "returns": int(pst[S_RET]),
        "branch_predictions": n,
        "branch_mispredictions": int(pst[S_BR_MISP]),
        "branch_accuracy": acc,
    }


# persistent scalar slots carried between kernel calls
_M_ISSUE = 0
_M_DONE = 1
_M_MIS = 2
_M_LASTLAT = 3
_M_LASTMEM = 4
_N_MST = 5


@njit(cache=True)
def _minor_batch(pcs, idxs, next_pcs, bubbles, dlats,
                 clss, dsts, srcs, ctrl, rds, rs1s,
                 lat_tab, unit_tab,
                 ready, prodmem, fu_free, mst, stalls,
                 pht, ras, pst, penalty):
    issue_prev = mst[_M_ISSUE]
    done_prev = mst[_M_DONE]
    prev_mis = mst[_M_MIS]
    last_lat = mst[_M_LASTLAT]
    last_mem = mst[_M_LASTMEM]
    n = pcs.shape[0]
    for i in range(n):
        idx = idxs[i]
        cls = clss[idx]
        is_mem = cls == _MEMREAD or cls == _MEMWRITE
        lat = lat_tab[cls]
        if is_mem:
            lat = lat + dlats[i]
        base = issue_prev + 1 + bubbles[i]
        src_t = np.int64(-1)
        src_mem = np.uint8(0)
        for k in range(3):
            r = srcs[idx, k]
            if r >= 0 and ready[r] > src_t:
                src_t = ready[r]
                src_mem = prodmem[r]
        u = unit_tab[cls]
        fu_t = fu_free[u] if u >= 0 else np.int64(-1)
        br_t = done_prev + penalty if prev_mis == 1 else np.int64(-1)
        issue = base
        if src_t > issue:
            issue = src_t
        if fu_t > issue:
            issue = fu_t
        if br_t > issue:
            issue = br_t
        gap = issue - (issue_prev + 1)
        if gap > 0:
            # charge the whole slip to the binding constraint; ties go to
            # the consumer-visible cause first
            if prev_mis == 1 and br_t == issue:
                stalls[_BRANCH] += gap
            elif src_t == issue:
                if src_mem == 1:
                    stalls[_DCACHE] += gap
                else:
                    stalls[_RAW] += gap
            elif fu_t == issue:
                stalls[_STRUCT] += gap
            else:
                stalls[_ICACHE] += gap
        done = issue + lat
        d = dsts[idx]
        if d >= 0:
            ready[d] = done
            prodmem[d] = np.uint8(1) if cls == _MEMREAD else np.uint8(0)
        if u >= 0:
            fu_free[u] = done
        kind = ctrl[idx]
        if kind != 0:
            taken = np.int64(1) if next_pcs[i] != pcs[i] + 4 else np.int64(0)
            prev_mis = resolve(pht, ras, pst, pcs[i], kind,
                               rds[idx], rs1s[idx], taken, next_pcs[i])
        else:
            prev_mis = 0
        issue_prev = issue
        done_prev = done
        last_lat = lat
        last_mem = np.int64(1) if is_mem else np.int64(0)
    mst[_M_ISSUE] = issue_prev
    mst[_M_DONE] = done_prev
    mst[_M_MIS] = prev_mis
    mst[_M_LASTLAT] = last_lat
    mst[_M_LASTMEM] = last_mem


class _MinorSim:
    """Streaming consumer of commit-trace chunks.

    The engine's trace views are reused per chunk and an instruction's
    branch outcome needs the pc after it, so the newest instruction is
    parked in one-element arrays until its successor (or the final pc)
    arrives.
    """

    def __init__(self, program, config, mem):
        self.program = program
        self.mem = mem
        self.penalty = config.mispredict_penalty
        self.lat_tab, self.unit_tab, n_units = config.latency_table.arrays()
        self.ready = np.zeros(64, dtype=np.int64)
        self.prodmem = np.zeros(64, dtype=np.uint8)
        self.fu_free = np.zeros(n_units, dtype=np.int64)
        self.mst = np.zeros(_N_MST, dtype=np.int64)
        self.mst[_M_ISSUE] = -1
        self.stalls = np.zeros(5, dtype=np.int64)
        self.pht, self.ras, self.pst = new_state()
        self.have_pend = False
        self.p_pc = np.zeros(1, dtype=np.int64)
        self.p_idx = np.zeros(1, dtype=np.int64)
        self.p_bub = np.zeros(1, dtype=np.int64)
        self.p_dl = np.zeros(1, dtype=np.int64)

    def _kernel(self, pcs, idxs, next_pcs, bubbles, dlats):
        p = self.program
        _minor_batch(pcs, idxs, next_pcs, bubbles, dlats,
                     p.clss, p.dsts, p.srcs, p.ctrl, p.rds, p.rs1s,
                     self.lat_tab, self.unit_tab,
                     self.ready, self.prodmem, self.fu_free,
                     self.mst, self.stalls,
                     self.pht, self.ras, self.pst, self.penalty)

    def sink(self, pcs, idxs, maddrs):
        n = pcs.shape[0]
        il = np.zeros(n, dtype=np.int64)
        dl = np.zeros(n, dtype=np.int64)
        if self.mem is not None:
            self.mem.replay(pcs, idxs, maddrs, self.program.stores, il, dl)
        else:
            # perfect hierarchy: every access behaves like an L1 hit
            dl[maddrs >= 0] = L1_HIT_LAT
        bub = np.maximum(il - L1_HIT_LAT, 0)
        if self.have_pend:
            self._kernel(self.p_pc, self.p_idx, pcs[:1],
                         self.p_bub, self.p_dl)
        if n > 1:
            self._kernel(pcs[:-1], idxs[:-1], pcs[1:], bub[:-1], dl[:-1])
        self.p_pc[0] = pcs[-1]
        self.p_idx[0] = idxs[-1]
        self.p_bub[0] = bub[-1]
        self.p_dl[0] = dl[-1]
        self.have_pend = True

    def finish(self, final_pc, depth):
        if self.have_pend:
            nxt = np.array([final_pc], dtype=np.int64)
            self._kernel(self.p_pc, self.p_idx, nxt, self.p_bub, self.p_dl)
            self.have_pend = False
        cycles = int(self.mst[_M_DONE]) + depth - 1
        # drain: the last instruction's latency past its issue slot is a
        # stall like any other, owed to its own bucket
        drain = int(self.mst[_M_LASTLAT]) - 1
        if drain > 0:
            which = _DCACHE if self.mst[_M_LASTMEM] == 1 else _RAW
            self.stalls[which] += drain
        return cycles


def simulate_minor(image, entry=None, config=None, mem=None, limit=1 << 34):
    """Timed in-order run.  Returns (TimingResult, FunctionalResult).

    `mem` is a MemoryHierarchy consumed as the run's cache state, or None
    for a perfect hierarchy (all accesses L1 hits, no fetch stalls).
    """
    if config is None:
        config = MinorConfig()
    prep = loader.prepare(image)
    if entry is not None:
        prep.state.pc = entry
    sim = _MinorSim(prep.program, config, mem)
    res = run(prep.state, prep.program, max_instrs=limit,
              tohost=prep.tohost, sink=sim.sink)
    cycles = sim.finish(prep.state.pc, config.pipeline_depth)
    committed = res.committed
    stall_cycles = {k: int(v) for k, v in zip(STALL_KEYS, sim.stalls)}
    timing = TimingResult(
        cycles=cycles,
        committed=committed,
        cpi=cycles / committed if committed else float("inf"),
        stall_cycles=stall_cycles,
        predictor=predictor_stats(sim.pst),
    )
    return timing, functional_result(prep.state, image, res)
