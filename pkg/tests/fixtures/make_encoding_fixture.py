"""Regenerate encodings.json by assembling random instructions with clang.

Run from the repository root:

    python tests/fixtures/make_encoding_fixture.py

Requires a clang with RISC-V MC support (any recent clang).  The committed
fixture freezes (text, word) pairs produced by an assembler developed
entirely independently of this package, so the encoder tests do not rely on
the encoder itself for expected values.

Branch and jump cases are realized with labels and .skip padding on the
clang side; the stored text uses the equivalent numeric offset, which this
package's assembler accepts directly.
"""

import json
import pathlib
import random
import struct
import subprocess
import sys
import tempfile

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[2] / "src"))

from rvmb.opcodes import F_ABI, TABLE, X_ABI  # noqa: E402

rng = random.Random(20260824)
PER_OP = 8


class Prog:
    def __init__(self):
        self.lines = [".text"]
        self.offset = 0
        self.cases = []  # (our_text, byte_offset)
        self.nlabel = 0

    def instr(self, clang_text, our_text=None):
        self.cases.append((our_text or clang_text, self.offset))
        self.lines.append(clang_text)
        self.offset += 4

    def skip(self, n):
        if n:
            self.lines.append(f".skip {n}")
            self.offset += n

    def label(self):
        self.nlabel += 1
        name = f".Lf{self.nlabel}"
        self.lines.append(f"{name}:")
        return name

    def branchy(self, render, max_mag, step=4):
        """Emit a control transfer with a label-realized offset."""
        magnitude = step * rng.randrange(1, max_mag // step)
        if rng.random() < 0.5:  # forward
            text = render("TGT")
            at = self.offset
            self.instr(text.replace("TGT", f".Lf{self.nlabel + 1}"),
                       text.replace("TGT", str(magnitude)))
            self.skip(magnitude - 4)
            self.label()
            assert self.offset - at == magnitude
        else:  # backward
            name = self.label()
            start = self.offset
            self.skip(magnitude - 4)
            text = render("TGT")
            self.instr(text.replace("TGT", name),
                       text.replace("TGT", str(start - self.offset)))


def render_case(prog, spec):
    x = lambda: X_ABI[rng.randrange(32)]
    f = lambda: F_ABI[rng.randrange(32)]
    r = lambda kind: x() if kind == "x" else f()
    mnem = spec.mnemonic
    if spec.fmt == "SYS":
        prog.instr(mnem)
    elif spec.size and not spec.store:
        prog.instr(f"{mnem} {r(spec.dst)}, {rng.randrange(-2048, 2048)}({x()})")
    elif spec.size and spec.store:
        prog.instr(f"{mnem} {r(spec.srcs[1])}, {rng.randrange(-2048, 2048)}({x()})")
    elif spec.fmt in ("R", "FR", "FR3"):
        prog.instr(f"{mnem} {r(spec.dst)}, {r(spec.srcs[0])}, {r(spec.srcs[1])}")
    elif spec.fmt == "R4":
        prog.instr(f"{mnem} {f()}, {f()}, {f()}, {f()}")
    elif spec.fmt in ("FU", "FU3"):
        prog.instr(f"{mnem} {r(spec.dst)}, {r(spec.srcs[0])}")
    elif spec.fmt == "B":
        a, b = x(), x()
        prog.branchy(lambda t: f"{mnem} {a}, {b}, {t}", 4096)
    elif spec.fmt == "J":
        a = x()
        prog.branchy(lambda t: f"{mnem} {a}, {t}", 32768)
    elif spec.fmt == "U":
        prog.instr(f"{mnem} {x()}, {rng.randrange(0, 1 << 20)}")
    elif spec.fmt == "I":
        prog.instr(f"{mnem} {x()}, {x()}, {rng.randrange(-2048, 2048)}")
    elif spec.fmt == "IS":
        prog.instr(f"{mnem} {x()}, {x()}, {rng.randrange(0, 64)}")
    elif spec.fmt == "ISW":
        prog.instr(f"{mnem} {x()}, {x()}, {rng.randrange(0, 32)}")
    else:
        raise AssertionError(spec.fmt)


def clang_text_bytes(lines: list[str]) -> bytearray:
    with tempfile.TemporaryDirectory() as td:
        src = pathlib.Path(td, "prog.s")
        obj = pathlib.Path(td, "prog.o")
        src.write_text("\n".join(lines) + "\n")
        subprocess.run(
            ["clang", "--target=riscv64-unknown-elf", "-march=rv64imfd",
             "-mno-relax", "-c", str(src), "-o", str(obj)],
            check=True, capture_output=True)
        out = subprocess.run(
            ["objdump", "-s", "-j", ".text", str(obj)],
            check=True, capture_output=True, text=True).stdout
    data = bytearray()
    for line in out.splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0] and all(
                c in "0123456789abcdef" for c in parts[0]):
            at = int(parts[0], 16)
            blob = b"".join(bytes.fromhex(g) for g in parts[1:5]
                            if all(c in "0123456789abcdef" for c in g))
            if at + len(blob) > len(data):
                data.extend(b"\0" * (at + len(blob) - len(data)))
            data[at:at + len(blob)] = blob
    return data


def main():
    prog = Prog()
    for spec in TABLE:
        for _ in range(PER_OP):
            render_case(prog, spec)
    data = clang_text_bytes(prog.lines)
    pairs = []
    for text, offset in prog.cases:
        word = struct.unpack_from("<I", data, offset)[0]
        pairs.append([text, f"{word:08x}"])
    out = pathlib.Path(__file__).with_name("encodings.json")
    out.write_text(json.dumps(pairs, indent=0) + "\n")
    print(f"wrote {len(pairs)} pairs to {out}")


if __name__ == "__main__":
    main()
