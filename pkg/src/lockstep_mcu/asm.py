"""Mini-assembler for the built-in bare-metal kernels.

Programs are built through a small API rather than parsed from text:

    p = Program()
    p.label("loop")
    p.ins("addi", "a0", "a0", -1)
    p.ins("bnez", "a0", "loop")

``assemble(p, base)`` resolves labels and emits a little-endian image.
The supported mnemonic set covers RV32IMC plus the usual pseudo-ops
(li/la/mv/j/ret/...).  Unknown mnemonics, out-of-range immediates and
unresolved labels raise ``AsmError``.
"""

from __future__ import annotations

import struct

M32 = 0xFFFFFFFF


class AsmError(Exception):
    pass


ABI_REGS = {
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4,
    "t0": 5, "t1": 6, "t2": 7, "s0": 8, "fp": 8, "s1": 9,
    "a0": 10, "a1": 11, "a2": 12, "a3": 13, "a4": 14, "a5": 15,
    "a6": 16, "a7": 17,
    "s2": 18, "s3": 19, "s4": 20, "s5": 21, "s6": 22, "s7": 23,
    "s8": 24, "s9": 25, "s10": 26, "s11": 27,
    "t3": 28, "t4": 29, "t5": 30, "t6": 31,
}
for _i in range(32):
    ABI_REGS[f"x{_i}"] = _i

CSR_NUMS = {
    "mstatus": 0x300, "misa": 0x301, "mie": 0x304, "mtvec": 0x305,
    "mscratch": 0x340, "mepc": 0x341, "mcause": 0x342, "mtval": 0x343,
    "mip": 0x344,
    "mcycle": 0xB00, "minstret": 0xB02, "mcycleh": 0xB80, "minstreth": 0xB82,
    "cycle": 0xC00, "instret": 0xC02, "cycleh": 0xC80, "instreth": 0xC82,
    "mhartid": 0xF14,
}


def reg(name) -> int:
    if isinstance(name, int):
        if 0 <= name < 32:
            return name
        raise AsmError(f"register index out of range: {name}")
    try:
        return ABI_REGS[name]
    except KeyError:
        raise AsmError(f"unknown register: {name!r}") from None


def csr_num(name) -> int:
    if isinstance(name, int):
        return name & 0xFFF
    try:
        return CSR_NUMS[name]
    except KeyError:
        raise AsmError(f"unknown CSR: {name!r}") from None


def _check_range(value: int, bits: int, signed: bool, what: str) -> int:
    if signed:
        lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    else:
        lo, hi = 0, (1 << bits) - 1
    if not lo <= value <= hi:
        raise AsmError(f"{what} out of range: {value} (needs {bits}-bit "
                       f"{'signed' if signed else 'unsigned'})")
    return value & ((1 << bits) - 1)


# ---------------------------------------------------------------- formats

def _r(op, f3, f7, rd, rs1, rs2):
    return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | op


def _i(op, f3, rd, rs1, imm, what="immediate"):
    imm = _check_range(imm, 12, True, what)
    return (imm << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | op


def _s(op, f3, rs1, rs2, imm):
    imm = _check_range(imm, 12, True, "store offset")
    return (((imm >> 5) & 0x7F) << 25) | (rs2 << 20) | (rs1 << 15) | \
        (f3 << 12) | ((imm & 0x1F) << 7) | op


def _b(op, f3, rs1, rs2, off):
    if off % 2:
        raise AsmError(f"branch offset not 2-byte aligned: {off}")
    _check_range(off, 13, True, "branch offset")
    u = off & 0x1FFF
    return (((u >> 12) & 1) << 31) | (((u >> 5) & 0x3F) << 25) | (rs2 << 20) | \
        (rs1 << 15) | (f3 << 12) | (((u >> 1) & 0xF) << 8) | (((u >> 11) & 1) << 7) | op


def _u(op, rd, imm20):
    return ((imm20 & 0xFFFFF) << 12) | (rd << 7) | op


def _j(op, rd, off):
    if off % 2:
        raise AsmError(f"jump offset not 2-byte aligned: {off}")
    _check_range(off, 21, True, "jump offset")
    u = off & 0x1FFFFF
    return (((u >> 20) & 1) << 31) | (((u >> 1) & 0x3FF) << 21) | \
        (((u >> 11) & 1) << 20) | (((u >> 12) & 0xFF) << 12) | (rd << 7) | op


def _creg(r_):
    if not 8 <= r_ <= 15:
        raise AsmError(f"register x{r_} not encodable in compressed form (needs x8-x15)")
    return r_ - 8


# ---------------------------------------------------------- encoder table
# Each encoder returns the instruction word given resolved operands.
# Branch/jump style encoders receive the pc-relative offset as last arg.

_OPIMM = {"addi": 0, "slti": 2, "sltiu": 3, "xori": 4, "ori": 6, "andi": 7}
_OPREG = {
    "add": (0, 0x00), "sub": (0, 0x20), "sll": (1, 0x00), "slt": (2, 0x00),
    "sltu": (3, 0x00), "xor": (4, 0x00), "srl": (5, 0x00), "sra": (5, 0x20),
    "or": (6, 0x00), "and": (7, 0x00),
    "mul": (0, 0x01), "mulh": (1, 0x01), "mulhsu": (2, 0x01), "mulhu": (3, 0x01),
    "div": (4, 0x01), "divu": (5, 0x01), "rem": (6, 0x01), "remu": (7, 0x01),
}
_LOADS = {"lb": 0, "lh": 1, "lw": 2, "lbu": 4, "lhu": 5}
_STORES = {"sb": 0, "sh": 1, "sw": 2}
_BRANCHES = {"beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7}
_CSROPS = {"csrrw": 1, "csrrs": 2, "csrrc": 3, "csrrwi": 5, "csrrsi": 6, "csrrci": 7}


def _enc_c_imm6(f3, rd, imm):
    imm = _check_range(imm, 6, True, "compressed immediate")
    return 0b01 | (f3 << 13) | (((imm >> 5) & 1) << 12) | (rd << 7) | ((imm & 0x1F) << 2)


def _enc_cj(f3, off):
    _check_range(off, 12, True, "compressed jump offset")
    u = off & 0xFFF
    enc = 0b01 | (f3 << 13)
    enc |= ((u >> 11) & 1) << 12
    enc |= ((u >> 4) & 1) << 11
    enc |= ((u >> 8) & 3) << 9
    enc |= ((u >> 10) & 1) << 8
    enc |= ((u >> 6) & 1) << 7
    enc |= ((u >> 7) & 1) << 6
    enc |= ((u >> 1) & 7) << 3
    enc |= ((u >> 5) & 1) << 2
    return enc


def _enc_cb(f3, rs1, off):
    _check_range(off, 9, True, "compressed branch offset")
    u = off & 0x1FF
    enc = 0b01 | (f3 << 13) | (_creg(rs1) << 7)
    enc |= ((u >> 8) & 1) << 12
    enc |= ((u >> 3) & 3) << 10
    enc |= ((u >> 6) & 3) << 5
    enc |= ((u >> 1) & 3) << 3
    enc |= ((u >> 5) & 1) << 2
    return enc


def _enc_clwsw(f3, rr, rs1, uimm):
    if uimm % 4 or not 0 <= uimm < 128:
        raise AsmError(f"compressed word offset invalid: {uimm}")
    enc = 0b00 | (f3 << 13) | (_creg(rs1) << 7) | (_creg(rr) << 2)
    enc |= ((uimm >> 3) & 7) << 10
    enc |= ((uimm >> 2) & 1) << 6
    enc |= ((uimm >> 6) & 1) << 5
    return enc


class Program:
    """Labeled instruction/data sequence with an entry label."""

    def __init__(self, entry: str = "_start"):
        self.items: list[tuple] = []
        self.entry = entry

    def label(self, name: str) -> "Program":
        self.items.append(("label", name))
        return self

    def ins(self, mnem: str, *ops) -> "Program":
        self.items.append(("ins", mnem, ops))
        return self

    def word(self, value) -> "Program":
        self.items.append(("word", value))
        return self

    def words(self, values) -> "Program":
        for v in values:
            self.items.append(("word", v))
        return self

    def space(self, nbytes: int) -> "Program":
        self.items.append(("space", nbytes))
        return self

    def align(self, n: int = 4) -> "Program":
        self.items.append(("align", n))
        return self


def _item_size(item, addr) -> int:
    kind = item[0]
    if kind == "label":
        return 0
    if kind == "ins":
        mnem = item[1]
        if mnem in ("li", "la"):
            return 8
        return 2 if mnem.startswith("c.") else 4
    if kind == "word":
        if addr % 4:
            raise AsmError("word directive at unaligned address; insert align(4)")
        return 4
    if kind == "space":
        return item[1]
    if kind == "align":
        n = item[1]
        return (-addr) % n
    raise AsmError(f"unknown item: {item!r}")


def _resolve(v, labels, what="operand"):
    if isinstance(v, str):
        try:
            return labels[v]
        except KeyError:
            raise AsmError(f"unresolved label in {what}: {v!r}") from None
    return int(v)


def _split_hi_lo(value: int) -> tuple[int, int]:
    value &= M32
    lo = value & 0xFFF
    if lo >= 0x800:
        lo -= 0x1000
    hi = ((value - lo) >> 12) & 0xFFFFF
    return hi, lo


def _encode(mnem, ops, pc, labels) -> int:
    """Encode one (possibly pseudo) instruction to its word."""
    if mnem in _OPIMM:
        rd, rs1, imm = reg(ops[0]), reg(ops[1]), _resolve(ops[2], labels)
        return _i(0b0010011, _OPIMM[mnem], rd, rs1, imm)
    if mnem in ("slli", "srli", "srai"):
        rd, rs1, sh = reg(ops[0]), reg(ops[1]), int(ops[2])
        if not 0 <= sh < 32:
            raise AsmError(f"shift amount out of range: {sh}")
        f7 = 0x20 if mnem == "srai" else 0x00
        f3 = 1 if mnem == "slli" else 5
        return _r(0b0010011, f3, f7, rd, rs1, sh)
    if mnem in _OPREG:
        f3, f7 = _OPREG[mnem]
        return _r(0b0110011, f3, f7, reg(ops[0]), reg(ops[1]), reg(ops[2]))
    if mnem in _LOADS:
        rd, off, rs1 = reg(ops[0]), _resolve(ops[1], labels), reg(ops[2])
        return _i(0b0000011, _LOADS[mnem], rd, rs1, off, "load offset")
    if mnem in _STORES:
        rs2, off, rs1 = reg(ops[0]), _resolve(ops[1], labels), reg(ops[2])
        return _s(0b0100011, _STORES[mnem], rs1, rs2, off)
    if mnem in _BRANCHES:
        rs1, rs2 = reg(ops[0]), reg(ops[1])
        target = _resolve(ops[2], labels, "branch target")
        return _b(0b1100011, _BRANCHES[mnem], rs1, rs2, target - pc)
    if mnem == "lui":
        return _u(0b0110111, reg(ops[0]), _resolve(ops[1], labels))
    if mnem == "auipc":
        return _u(0b0010111, reg(ops[0]), _resolve(ops[1], labels))
    if mnem == "jal":
        if len(ops) == 1:  # jal label  (rd = ra)
            rd, target = 1, _resolve(ops[0], labels, "jump target")
        else:
            rd, target = reg(ops[0]), _resolve(ops[1], labels, "jump target")
        return _j(0b1101111, rd, target - pc)
    if mnem == "jalr":
        if len(ops) == 1:
            return _i(0b1100111, 0, 1, reg(ops[0]), 0)
        rd, off, rs1 = reg(ops[0]), int(ops[1]), reg(ops[2])
        return _i(0b1100111, 0, rd, rs1, off)
    if mnem in _CSROPS:
        f3 = _CSROPS[mnem]
        rd, c = reg(ops[0]), csr_num(ops[1])
        if f3 >= 5:
            src = _check_range(int(ops[2]), 5, False, "CSR immediate")
        else:
            src = reg(ops[2])
        return (c << 20) | (src << 15) | (f3 << 12) | (rd << 7) | 0b1110011
    if mnem == "fence":
        return 0x0FF0000F
    if mnem == "fence.i":
        return 0x0000100F
    if mnem == "ecall":
        return 0x00000073
    if mnem == "ebreak":
        return 0x00100073
    if mnem == "mret":
        return 0x30200073
    if mnem == "wfi":
        return 0x10500073

    # ---- compressed ----
    if mnem == "c.nop":
        return 0x0001
    if mnem == "c.addi":
        return _enc_c_imm6(0, reg(ops[0]), int(ops[1]))
    if mnem == "c.li":
        return _enc_c_imm6(2, reg(ops[0]), int(ops[1]))
    if mnem == "c.lui":
        rd = reg(ops[0])
        if rd in (0, 2):
            raise AsmError("c.lui cannot target x0/x2")
        imm = int(ops[1])
        imm = _check_range(imm, 6, True, "c.lui immediate")
        if imm == 0:
            raise AsmError("c.lui immediate must be nonzero")
        return 0b01 | (3 << 13) | (((imm >> 5) & 1) << 12) | (rd << 7) | ((imm & 0x1F) << 2)
    if mnem == "c.addi16sp":
        imm = int(ops[0])
        if imm % 16 or imm == 0:
            raise AsmError(f"c.addi16sp immediate invalid: {imm}")
        _check_range(imm, 10, True, "c.addi16sp immediate")
        u = imm & 0x3FF
        enc = 0b01 | (3 << 13) | (2 << 7)
        enc |= ((u >> 9) & 1) << 12
        enc |= ((u >> 4) & 1) << 6
        enc |= ((u >> 6) & 1) << 5
        enc |= ((u >> 7) & 3) << 3
        enc |= ((u >> 5) & 1) << 2
        return enc
    if mnem == "c.addi4spn":
        rd, imm = reg(ops[0]), int(ops[1])
        if imm % 4 or not 0 < imm < 1024:
            raise AsmError(f"c.addi4spn immediate invalid: {imm}")
        enc = 0b00 | (_creg(rd) << 2)
        enc |= ((imm >> 4) & 3) << 11
        enc |= ((imm >> 6) & 0xF) << 7
        enc |= ((imm >> 2) & 1) << 6
        enc |= ((imm >> 3) & 1) << 5
        return enc
    if mnem == "c.lw":
        return _enc_clwsw(2, reg(ops[0]), reg(ops[2]), int(ops[1]))
    if mnem == "c.sw":
        return _enc_clwsw(6, reg(ops[0]), reg(ops[2]), int(ops[1]))
    if mnem == "c.lwsp":
        rd, uimm = reg(ops[0]), int(ops[1])
        if rd == 0 or uimm % 4 or not 0 <= uimm < 256:
            raise AsmError("c.lwsp operands invalid")
        enc = 0b10 | (2 << 13) | (rd << 7)
        enc |= ((uimm >> 5) & 1) << 12
        enc |= ((uimm >> 2) & 7) << 4
        enc |= ((uimm >> 6) & 3) << 2
        return enc
    if mnem == "c.swsp":
        rs2, uimm = reg(ops[0]), int(ops[1])
        if uimm % 4 or not 0 <= uimm < 256:
            raise AsmError("c.swsp operands invalid")
        enc = 0b10 | (6 << 13) | (rs2 << 2)
        enc |= ((uimm >> 2) & 0xF) << 9
        enc |= ((uimm >> 6) & 3) << 7
        return enc
    if mnem in ("c.srli", "c.srai", "c.andi"):
        sub = {"c.srli": 0, "c.srai": 1, "c.andi": 2}[mnem]
        rd, imm = reg(ops[0]), int(ops[1])
        if mnem == "c.andi":
            imm = _check_range(imm, 6, True, "c.andi immediate")
        else:
            if not 0 <= imm < 32:
                raise AsmError("compressed shift amount invalid")
        return 0b01 | (4 << 13) | (((imm >> 5) & 1) << 12) | (sub << 10) | \
            (_creg(rd) << 7) | ((imm & 0x1F) << 2)
    if mnem in ("c.sub", "c.xor", "c.or", "c.and"):
        sub = {"c.sub": 0, "c.xor": 1, "c.or": 2, "c.and": 3}[mnem]
        return 0b01 | (4 << 13) | (3 << 10) | (_creg(reg(ops[0])) << 7) | \
            (sub << 5) | (_creg(reg(ops[1])) << 2)
    if mnem == "c.slli":
        rd, sh = reg(ops[0]), int(ops[1])
        if rd == 0 or not 0 <= sh < 32:
            raise AsmError("c.slli operands invalid")
        return 0b10 | (0 << 13) | (((sh >> 5) & 1) << 12) | (rd << 7) | ((sh & 0x1F) << 2)
    if mnem in ("c.j", "c.jal"):
        target = _resolve(ops[0], labels, "jump target")
        return _enc_cj(5 if mnem == "c.j" else 1, target - pc)
    if mnem in ("c.beqz", "c.bnez"):
        target = _resolve(ops[1], labels, "branch target")
        return _enc_cb(6 if mnem == "c.beqz" else 7, reg(ops[0]), target - pc)
    if mnem == "c.jr":
        r_ = reg(ops[0])
        if r_ == 0:
            raise AsmError("c.jr needs rs1 != 0")
        return 0b10 | (4 << 13) | (r_ << 7)
    if mnem == "c.jalr":
        r_ = reg(ops[0])
        if r_ == 0:
            raise AsmError("c.jalr needs rs1 != 0")
        return 0b10 | (4 << 13) | (1 << 12) | (r_ << 7)
    if mnem == "c.mv":
        rd, rs2 = reg(ops[0]), reg(ops[1])
        if rd == 0 or rs2 == 0:
            raise AsmError("c.mv needs rd, rs2 != 0")
        return 0b10 | (4 << 13) | (rd << 7) | (rs2 << 2)
    if mnem == "c.add":
        rd, rs2 = reg(ops[0]), reg(ops[1])
        if rd == 0 or rs2 == 0:
            raise AsmError("c.add needs rd, rs2 != 0")
        return 0b10 | (4 << 13) | (1 << 12) | (rd << 7) | (rs2 << 2)
    if mnem == "c.ebreak":
        return 0x9002

    raise AsmError(f"unknown mnemonic: {mnem!r}")


_PSEUDO_SIMPLE = {
    "nop": ("addi", lambda ops: ("x0", "x0", 0)),
    "mv": ("addi", lambda ops: (ops[0], ops[1], 0)),
    "j": ("jal", lambda ops: ("x0", ops[0])),
    "jr": ("jalr", lambda ops: ("x0", 0, ops[0])),
    "ret": ("jalr", lambda ops: ("x0", 0, "ra")),
    "beqz": ("beq", lambda ops: (ops[0], "x0", ops[1])),
    "bnez": ("bne", lambda ops: (ops[0], "x0", ops[1])),
    "csrr": ("csrrs", lambda ops: (ops[0], ops[1], "x0")),
    "csrw": ("csrrw", lambda ops: ("x0", ops[0], ops[1])),
    "csrs": ("csrrs", lambda ops: ("x0", ops[0], ops[1])),
    "csrc": ("csrrc", lambda ops: ("x0", ops[0], ops[1])),
}


def assemble(program: Program, base: int) -> bytes:
    """Two-pass assembly to a little-endian image loaded at ``base``."""
    labels: dict[str, int] = {}
    addr = base
    for item in program.items:
        if item[0] == "label":
            if item[1] in labels:
                raise AsmError(f"duplicate label: {item[1]!r}")
            labels[item[1]] = addr
        else:
            addr += _item_size(item, addr)

    out = bytearray()
    addr = base
    for item in program.items:
        kind = item[0]
        if kind == "label":
            continue
        if kind == "word":
            out += struct.pack("<I", _resolve(item[1], labels, "word") & M32)
            addr += 4
            continue
        if kind == "space":
            out += b"\x00" * item[1]
            addr += item[1]
            continue
        if kind == "align":
            pad = (-addr) % item[1]
            out += b"\x00" * pad
            addr += pad
            continue
        mnem, ops = item[1], item[2]
        if mnem in ("li", "la"):
            rd = reg(ops[0])
            value = _resolve(ops[1], labels, mnem) & M32
            hi, lo = _split_hi_lo(value)
            out += struct.pack("<I", _u(0b0110111, rd, hi))
            out += struct.pack("<I", _i(0b0010011, 0, rd, rd, lo))
            addr += 8
            continue
        if mnem in _PSEUDO_SIMPLE:
            real, f = _PSEUDO_SIMPLE[mnem]
            mnem, ops = real, f(ops)
        word = _encode(mnem, ops, addr, labels)
        if mnem.startswith("c."):
            out += struct.pack("<H", word)
            addr += 2
        else:
            out += struct.pack("<I", word)
            addr += 4
    return bytes(out)


def label_map(program: Program, base: int) -> dict[str, int]:
    labels: dict[str, int] = {}
    addr = base
    for item in program.items:
        if item[0] == "label":
            labels[item[1]] = addr
        else:
            addr += _item_size(item, addr)
    return labels


def entry_address(program: Program, base: int) -> int:
    labels = label_map(program, base)
    if program.entry not in labels:
        raise AsmError(f"entry label {program.entry!r} not defined")
    return labels[program.entry]
