"""Gshare direction predictor with a circular return address stack.

Direction prediction indexes 4096 two-bit saturating counters by
(pc >> 2) XOR a 12-bit global history register; counters start at 1
(weakly not-taken) and only conditional branches shift the history.
Jumps with a known target (jal) always predict correctly; jal/jalr
writing x1 push pc+4 onto a 32-entry circular stack, and the return
idiom jalr x0, x1 pops it.  Indirect jumps that are not returns have
no target source here, so they always count as mispredicted.

Two equivalent forms are provided: a Gshare object with separate
predict/update calls, and a jitted one-shot `resolve` kernel the
timing models call per control-transfer instruction.  A test drives
both over the same stream and requires identical state and counts.
"""

import numpy as np
from numba import njit

from .opcodes import InstrClass

PHT_BITS = 12
PHT_SIZE = 1 << PHT_BITS
GHR_MASK = PHT_SIZE - 1
RAS_SIZE = 32

# control-transfer kinds, matching engine.Program.ctrl
K_BRANCH = 1
K_JAL = 2
K_JALR = 3

# slots in the int64 state vector shared with the jitted kernel
S_GHR = 0
S_SP = 1       # next push slot
S_DEPTH = 2    # live entries, capped at RAS_SIZE
S_PRED = 3
S_MISP = 4
S_RAS_HIT = 5
S_RET = 6
S_BR_PRED = 7
S_BR_MISP = 8
N_STATE = 9


def new_state():
    """(pht, ras, state) triple for the jitted kernel."""
    pht = np.ones(PHT_SIZE, dtype=np.uint8)
    ras = np.zeros(RAS_SIZE, dtype=np.int64)
    st = np.zeros(N_STATE, dtype=np.int64)
    return pht, ras, st


@njit(cache=True)
def resolve(pht, ras, st, pc, kind, rd, rs1, taken, target):
    """Predict one control instruction and immediately fold in the actual
    outcome.  Returns 1 if the prediction was wrong."""
    mis = 0
    st[S_PRED] += 1
    if kind == K_BRANCH:
        st[S_BR_PRED] += 1
        idx = ((pc >> 2) ^ st[S_GHR]) & GHR_MASK
        if (pht[idx] >= 2) != (taken == 1):
            mis = 1
            st[S_BR_MISP] += 1
        if taken == 1:
            if pht[idx] < 3:
                pht[idx] += 1
        else:
            if pht[idx] > 0:
                pht[idx] -= 1
        st[S_GHR] = ((st[S_GHR] << 1) | taken) & GHR_MASK
    elif kind == K_JAL:
        if rd == 1:
            ras[st[S_SP]] = pc + 4
            st[S_SP] = (st[S_SP] + 1) % RAS_SIZE
            if st[S_DEPTH] < RAS_SIZE:
                st[S_DEPTH] += 1
    else:  # jalr
        if rd == 0 and rs1 == 1:
            st[S_RET] += 1
            if st[S_DEPTH] > 0:
                st[S_SP] = (st[S_SP] - 1) % RAS_SIZE
                st[S_DEPTH] -= 1
                if ras[st[S_SP]] == target:
                    st[S_RAS_HIT] += 1
                else:
                    mis = 1
            else:
                mis = 1  # empty stack: predicted fall-through
        else:
            mis = 1  # register-indirect target, no way to guess it
            if rd == 1:
                ras[st[S_SP]] = pc + 4
                st[S_SP] = (st[S_SP] + 1) % RAS_SIZE
                if st[S_DEPTH] < RAS_SIZE:
                    st[S_DEPTH] += 1
    if mis == 1:
        st[S_MISP] += 1
    return mis


class Gshare:
    """Object form with the predict/update split a pipeline front-end
    would use.  State layout is shared with `resolve`."""

    def __init__(self):
        self.pht, self.ras, self.st = new_state()
        self._pending = None

    @property
    def predictions(self):
        return int(self.st[S_PRED])

    @property
    def mispredictions(self):
        return int(self.st[S_MISP])

    @property
    def ras_hits(self):
        return int(self.st[S_RAS_HIT])

    @property
    def returns(self):
        return int(self.st[S_RET])

    @property
    def branch_accuracy(self):
        n = int(self.st[S_BR_PRED])
        if n == 0:
            return 1.0
        return (n - int(self.st[S_BR_MISP])) / n

    def predict(self, pc, instr):
        """Returns (taken, target) and remembers the call so the next
        update can score it.  target is None when unknown (not-taken
        branches fall through; indirect jumps have no source)."""
        spec = instr.spec
        if spec.klass not in (InstrClass.Branch, InstrClass.Jump):
            raise ValueError(f"{instr.mnemonic} is not a control transfer")
        if spec.klass == InstrClass.Branch:
            kind = K_BRANCH
            idx = ((pc >> 2) ^ int(self.st[S_GHR])) & GHR_MASK
            taken = bool(self.pht[idx] >= 2)
            target = pc + instr.imm if taken else pc + 4
        elif instr.mnemonic == "jal":
            kind = K_JAL
            taken = True
            target = pc + instr.imm
        else:
            kind = K_JALR
            taken = True
            if instr.rd == 0 and instr.rs1 == 1 and int(self.st[S_DEPTH]) > 0:
                target = int(self.ras[(int(self.st[S_SP]) - 1) % RAS_SIZE])
            else:
                target = pc + 4  # fall-through guess; scored as a miss
        self._pending = (pc, kind, instr.rd, instr.rs1)
        return taken, target

    def update(self, pc, actual_taken, actual_target):
        """Fold in the actual outcome of the last predict call."""
        if self._pending is None or self._pending[0] != pc:
            raise ValueError("update without a matching predict")
        _, kind, rd, rs1 = self._pending
        self._pending = None
        resolve(self.pht, self.ras, self.st, pc, kind, rd, rs1,
                1 if actual_taken else 0, actual_target)
