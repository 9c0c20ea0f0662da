"""Reference cache hierarchy: per-set Python lists with explicit LRU order.

Deliberately naive.  Each set is a list ordered least- to most-recently
used, so every policy decision is visible; the fast array implementation
is checked against this model access for access.
"""


class RefCache:
    def __init__(self, size, assoc, line=64):
        self.nsets = size // (assoc * line)
        self.assoc = assoc
        self.line = line
        self.sets = [[] for _ in range(self.nsets)]   # entries [tag, dirty]
        self.accesses = 0
        self.misses = 0
        self.evictions = 0    # valid lines displaced
        self.writebacks = 0   # of those, the dirty ones

    def _where(self, lineaddr):
        return lineaddr % self.nsets, lineaddr // self.nsets

    def access(self, lineaddr, write):
        """Returns (hit, evicted) with evicted None or (lineaddr, dirty)."""
        si, tag = self._where(lineaddr)
        s = self.sets[si]
        self.accesses += 1
        for i, ent in enumerate(s):
            if ent[0] == tag:
                s.pop(i)
                if write:
                    ent[1] = True
                s.append(ent)
                return True, None
        self.misses += 1
        evicted = None
        if len(s) == self.assoc:
            vt, vd = s.pop(0)
            self.evictions += 1
            if vd:
                self.writebacks += 1
            evicted = (vt * self.nsets + si, vd)
        s.append([tag, write])
        return False, evicted

    def mark_dirty_quietly(self, lineaddr):
        """Set the dirty bit if present, without touching LRU order or
        counting an access.  Returns True if the line was present."""
        si, tag = self._where(lineaddr)
        for ent in self.sets[si]:
            if ent[0] == tag:
                ent[1] = True
                return True
        return False

    def contents(self):
        """Frozen view of (set, tag, dirty, lru_rank) for comparisons."""
        out = []
        for si, s in enumerate(self.sets):
            for rank, (tag, dirty) in enumerate(s):
                out.append((si, tag, bool(dirty), rank))
        return sorted(out)


class RefHierarchy:
    """Two-level hierarchy: split 64 KiB 4-way L1s over a shared 8 MiB
    4-way L2, 64-byte lines, write-allocate write-back, strict LRU.

    Latency: 2 on an L1 hit, +12 for the L2 lookup on an L1 miss, +100
    for memory on an L2 miss.  A dirty L1 victim updates the L2 copy in
    place when present (no access counted, no recency change) and goes to
    memory otherwise.

    Each RefCache counts its own evictions (valid victims displaced) and
    writebacks (the dirty subset); a dirty L1 victim counts as an L1
    writeback whether the L2 copy absorbs it or it goes to memory.
    """

    L1_HIT = 2
    L2_HIT = 12
    DRAM = 100

    def __init__(self):
        self.l1i = RefCache(64 << 10, 4)
        self.l1d = RefCache(64 << 10, 4)
        self.l2 = RefCache(8 << 20, 4)

    def access(self, addr, write=False, ifetch=False):
        lineaddr = addr // 64
        l1 = self.l1i if ifetch else self.l1d
        hit, evicted = l1.access(lineaddr, write)
        if hit:
            return self.L1_HIT
        lat = self.L1_HIT + self.L2_HIT
        if not self.l2.access(lineaddr, False)[0]:
            lat += self.DRAM
        if evicted is not None and evicted[1]:
            self.l2.mark_dirty_quietly(evicted[0])
        return lat
