"""RV32IMC core model: architectural state plus a pre-decoding executor.

Decoding produces one closure per instruction instance (keyed by pc in
the SoC's decode cache), so the per-cycle hot path is a dict hit plus
one call.  Closures mutate the core and return a small action code the
scheduler dispatches on:

    0  retired, single cycle (pc already advanced)
    1  retired after ``ev_extra`` additional cycles (taken branch 1,
       MUL 2, DIV/REM 36, trap/mret redirect 1)
    2  load issued (ev_addr/ev_rd/ev_f3 set)
    3  store issued (ev_addr/ev_val/ev_f3 set)
    4  wfi
    5  synchronous trap (ev_cause/ev_tval set)

The cycle cost model approximates a 2-stage in-order pipeline: the
fetch cycle doubles as the execute cycle for single-cycle ops, loads
pay one extra data cycle, stores are posted writes that can collide
with the next fetch, and multi-cycle ops insert bubbles.
"""

from __future__ import annotations

M32 = 0xFFFFFFFF
SIGN = 0x80000000

# trap causes
EXC_IADDR_MISALIGNED = 0
EXC_IACCESS_FAULT = 1
EXC_ILLEGAL = 2
EXC_BREAKPOINT = 3
EXC_LADDR_MISALIGNED = 4
EXC_LACCESS_FAULT = 5
EXC_SADDR_MISALIGNED = 6
EXC_SACCESS_FAULT = 7
EXC_ECALL_M = 11
IRQ_MSOFT = 0x80000003
IRQ_MEXT = 0x8000000B

MSTATUS_MIE = 0x8
MSTATUS_MPIE = 0x80
MIE_MSIE = 0x8
MIE_MEIE = 0x800

MISA_RV32IMC = 0x40001104

# core FSM phases (driven by the SoC scheduler)
PH_F0 = 0   # waiting for first fetch word
PH_F1 = 1   # waiting for second fetch word (32-bit op spanning words)
PH_EX = 2   # burning exec_left bubble cycles
PH_LD = 3   # waiting for load data
PH_DW = 4   # waiting for the data port to drain a posted store

MUL_EXTRA = 2     # 3-cycle multiply
DIV_EXTRA = 36    # 37-cycle divide/remainder


def _sx(v: int) -> int:
    return v - 0x100000000 if v & SIGN else v


def _sx12(v: int) -> int:
    return v - 4096 if v & 0x800 else v


class Core:
    """One hart: architectural state plus scheduler-facing FSM fields."""

    __slots__ = (
        "hart", "regs", "pc", "mstatus", "mtvec", "mepc", "mcause", "mtval",
        "mie", "mip", "mscratch", "mhartid", "minstret", "mcycle_base",
        "sleeping", "wake_pulse", "held", "phase", "exec_left", "exec_retire",
        "cur_pc", "cur_word", "cur_rd", "cur_mnem", "half_stash", "w0_stash",
        "pend_entry", "dw_kind",
        "ev_extra", "ev_addr", "ev_val", "ev_rd", "ev_f3", "ev_cause", "ev_tval",
        "soc",
    )

    def __init__(self, hart: int, soc=None):
        self.hart = hart
        self.soc = soc
        self.reset(0, hartid=hart)

    def reset(self, boot_pc: int, hartid: int | None = None) -> None:
        self.regs = [0] * 32
        self.pc = boot_pc
        self.mstatus = 0
        self.mtvec = 0
        self.mepc = 0
        self.mcause = 0
        self.mtval = 0
        self.mie = 0
        self.mip = 0
        self.mscratch = 0
        if hartid is not None:
            self.mhartid = hartid
        self.minstret = 0
        self.mcycle_base = 0
        self.sleeping = False
        self.wake_pulse = False
        self.held = False
        self.phase = PH_F0
        self.exec_left = 0
        self.exec_retire = False
        self.cur_pc = boot_pc
        self.cur_word = 0
        self.cur_rd = 0
        self.cur_mnem = ""
        self.half_stash = 0
        self.w0_stash = 0
        self.pend_entry = None
        self.dw_kind = 0
        self.ev_extra = 0
        self.ev_addr = 0
        self.ev_val = 0
        self.ev_rd = 0
        self.ev_f3 = 0
        self.ev_cause = 0
        self.ev_tval = 0

    # ------------------------------------------------------------- CSRs

    def mcycle(self, now: int) -> int:
        return (now - self.mcycle_base) & 0xFFFFFFFFFFFFFFFF

    def csr_read(self, num: int, now: int):
        if num == 0xF14:
            return self.mhartid
        if num == 0x300:
            return self.mstatus | 0x1800  # MPP pinned to M-mode
        if num == 0x304:
            return self.mie
        if num == 0x305:
            return self.mtvec
        if num == 0x340:
            return self.mscratch
        if num == 0x341:
            return self.mepc
        if num == 0x342:
            return self.mcause
        if num == 0x343:
            return self.mtval
        if num == 0x344:
            return self.mip
        if num == 0x301:
            return MISA_RV32IMC
        if num in (0xB00, 0xC00):
            return self.mcycle(now) & M32
        if num in (0xB80, 0xC80):
            return (self.mcycle(now) >> 32) & M32
        if num in (0xB02, 0xC02):
            return self.minstret & M32
        if num in (0xB82, 0xC82):
            return (self.minstret >> 32) & M32
        return None

    def csr_write(self, num: int, value: int, now: int) -> bool:
        value &= M32
        if num == 0x300:
            self.mstatus = value & (MSTATUS_MIE | MSTATUS_MPIE)
            return True
        if num == 0x304:
            self.mie = value
            return True
        if num == 0x305:
            self.mtvec = value & ~3
            return True
        if num == 0x340:
            self.mscratch = value
            return True
        if num == 0x341:
            self.mepc = value & ~1
            return True
        if num == 0x342:
            self.mcause = value
            return True
        if num == 0x343:
            self.mtval = value
            return True
        if num in (0x344, 0x301):
            return True  # hardware-wired / WARL: writes ignored
        if num == 0xB00:
            cur = self.mcycle(now)
            self.mcycle_base = now - ((cur & ~M32) | value)
            return True
        if num == 0xB80:
            cur = self.mcycle(now)
            self.mcycle_base = now - ((value << 32) | (cur & M32))
            return True
        if num == 0xB02:
            self.minstret = (self.minstret & ~M32) | value
            return True
        if num == 0xB82:
            self.minstret = (value << 32) | (self.minstret & M32)
            return True
        return False  # read-only or unimplemented -> illegal

    # ------------------------------------------------------- trap entry

    def take_trap(self, cause: int, tval: int, epc: int) -> None:
        self.mepc = epc & M32
        self.mcause = cause & M32
        self.mtval = tval & M32
        st = self.mstatus
        self.mstatus = (st & ~(MSTATUS_MIE | MSTATUS_MPIE)) | \
            (MSTATUS_MPIE if st & MSTATUS_MIE else 0)
        self.pc = self.mtvec

    def pending_interrupt(self) -> int:
        pend = self.mip & self.mie
        if not pend:
            return 0
        if pend & MIE_MEIE:
            return IRQ_MEXT
        if pend & MIE_MSIE:
            return IRQ_MSOFT
        return 0

    # --------------------------------------------------- scan-chain I/O

    ARCH_CSRS = ("mstatus", "mtvec", "mepc", "mcause", "mtval", "mie",
                 "mip", "mscratch")

    def dump_state(self, now: int) -> dict:
        """Complete serializable snapshot (the scan-chain payload)."""
        return {
            "hart": self.hart,
            "mhartid": self.mhartid,
            "pc": self.pc,
            "regs": list(self.regs),
            "csr": {name: getattr(self, name) for name in self.ARCH_CSRS}
            | {"mcycle": self.mcycle(now), "minstret": self.minstret,
               "mhartid": self.mhartid},
            "sleeping": self.sleeping,
            "pipeline": {
                "phase": self.phase,
                "exec_left": self.exec_left,
                "exec_retire": self.exec_retire,
                "cur_pc": self.cur_pc,
                "cur_word": self.cur_word,
                "cur_rd": self.cur_rd,
                "half_stash": self.half_stash,
                "w0_stash": self.w0_stash,
                "dw_kind": self.dw_kind,
                "ev": [self.ev_extra, self.ev_addr, self.ev_val, self.ev_rd,
                       self.ev_f3, self.ev_cause, self.ev_tval],
            },
        }

    def load_state(self, state: dict, now: int) -> None:
        self.mhartid = state["mhartid"]
        self.pc = state["pc"]
        self.regs = list(state["regs"])
        self.regs[0] = 0
        for name in self.ARCH_CSRS:
            setattr(self, name, state["csr"][name])
        self.mcycle_base = now - state["csr"]["mcycle"]
        self.minstret = state["csr"]["minstret"]
        self.sleeping = state["sleeping"]
        pipe = state["pipeline"]
        self.phase = pipe["phase"]
        self.exec_left = pipe["exec_left"]
        self.exec_retire = pipe["exec_retire"]
        self.cur_pc = pipe["cur_pc"]
        self.cur_word = pipe["cur_word"]
        self.cur_rd = pipe["cur_rd"]
        self.half_stash = pipe["half_stash"]
        self.w0_stash = pipe["w0_stash"]
        self.dw_kind = pipe["dw_kind"]
        self.pend_entry = None  # decode-cache pointer, re-derived on demand
        (self.ev_extra, self.ev_addr, self.ev_val, self.ev_rd,
         self.ev_f3, self.ev_cause, self.ev_tval) = pipe["ev"]

    def copy_from(self, other: "Core") -> None:
        """Clone another core's complete state (lockstep split helper)."""
        self.regs = list(other.regs)
        self.pc = other.pc
        self.mstatus = other.mstatus
        self.mtvec = other.mtvec
        self.mepc = other.mepc
        self.mcause = other.mcause
        self.mtval = other.mtval
        self.mie = other.mie
        self.mip = other.mip
        self.mscratch = other.mscratch
        self.mhartid = other.mhartid
        self.minstret = other.minstret
        self.mcycle_base = other.mcycle_base
        self.sleeping = other.sleeping
        self.wake_pulse = other.wake_pulse
        self.held = other.held
        self.phase = other.phase
        self.exec_left = other.exec_left
        self.exec_retire = other.exec_retire
        self.cur_pc = other.cur_pc
        self.cur_word = other.cur_word
        self.cur_rd = other.cur_rd
        self.cur_mnem = other.cur_mnem
        self.half_stash = other.half_stash
        self.w0_stash = other.w0_stash
        self.pend_entry = other.pend_entry
        self.dw_kind = other.dw_kind
        self.ev_extra = other.ev_extra
        self.ev_addr = other.ev_addr
        self.ev_val = other.ev_val
        self.ev_rd = other.ev_rd
        self.ev_f3 = other.ev_f3
        self.ev_cause = other.ev_cause
        self.ev_tval = other.ev_tval

    def state_key(self, now: int) -> tuple:
        """Hashable digest of the full state, for convergence checks.

        The decode-cache pointer is excluded: it is a pure function of
        (w0_stash, half_stash, memory) and never affects timing.
        """
        return (
            self.pc, tuple(self.regs), self.mstatus, self.mtvec, self.mepc,
            self.mcause, self.mtval, self.mie, self.mip, self.mscratch,
            self.mhartid, self.minstret, self.mcycle(now), self.sleeping,
            self.wake_pulse, self.phase, self.exec_left, self.exec_retire,
            self.cur_pc, self.cur_word, self.cur_rd, self.half_stash,
            self.w0_stash, self.dw_kind, self.ev_extra, self.ev_addr,
            self.ev_val, self.ev_rd, self.ev_f3, self.ev_cause, self.ev_tval,
        )


# ======================================================== instruction set
#
# Factory functions close over decoded fields.  ``ln`` is the encoded
# length (2 or 4) used to advance pc.

def _alu_imm(mnem, rd, rs1, imm, ln):
    if rd == 0:
        def ex(c):
            c.pc = (c.pc + ln) & M32
            return 0
        return ex
    if mnem == "addi":
        def ex(c):
            r = c.regs
            r[rd] = (r[rs1] + imm) & M32
            c.pc = (c.pc + ln) & M32
            return 0
    elif mnem == "slti":
        def ex(c):
            r = c.regs
            r[rd] = 1 if _sx(r[rs1]) < imm else 0
            c.pc = (c.pc + ln) & M32
            return 0
    elif mnem == "sltiu":
        uimm = imm & M32

        def ex(c):
            r = c.regs
            r[rd] = 1 if r[rs1] < uimm else 0
            c.pc = (c.pc + ln) & M32
            return 0
    elif mnem == "xori":
        uimm = imm & M32

        def ex(c):
            r = c.regs
            r[rd] = r[rs1] ^ uimm
            c.pc = (c.pc + ln) & M32
            return 0
    elif mnem == "ori":
        uimm = imm & M32

        def ex(c):
            r = c.regs
            r[rd] = r[rs1] | uimm
            c.pc = (c.pc + ln) & M32
            return 0
    elif mnem == "andi":
        uimm = imm & M32

        def ex(c):
            r = c.regs
            r[rd] = r[rs1] & uimm
            c.pc = (c.pc + ln) & M32
            return 0
    else:
        raise AssertionError(mnem)
    return ex


def _shift_imm(mnem, rd, rs1, sh, ln):
    if rd == 0:
        def ex(c):
            c.pc = (c.pc + ln) & M32
            return 0
        return ex
    if mnem == "slli":
        def ex(c):
            r = c.regs
            r[rd] = (r[rs1] << sh) & M32
            c.pc = (c.pc + ln) & M32
            return 0
    elif mnem == "srli":
        def ex(c):
            r = c.regs
            r[rd] = r[rs1] >> sh
            c.pc = (c.pc + ln) & M32
            return 0
    else:  # srai
        def ex(c):
            r = c.regs
            r[rd] = (_sx(r[rs1]) >> sh) & M32
            c.pc = (c.pc + ln) & M32
            return 0
    return ex


def _alu_reg(mnem, rd, rs1, rs2, ln):
    if rd == 0:
        def ex(c):
            c.pc = (c.pc + ln) & M32
            return 0
        return ex
    simple = {
        "add": lambda a, b: (a + b) & M32,
        "sub": lambda a, b: (a - b) & M32,
        "sll": lambda a, b: (a << (b & 31)) & M32,
        "slt": lambda a, b: 1 if _sx(a) < _sx(b) else 0,
        "sltu": lambda a, b: 1 if a < b else 0,
        "xor": lambda a, b: a ^ b,
        "srl": lambda a, b: a >> (b & 31),
        "sra": lambda a, b: (_sx(a) >> (b & 31)) & M32,
        "or": lambda a, b: a | b,
        "and": lambda a, b: a & b,
    }
    fn = simple[mnem]

    def ex(c):
        r = c.regs
        r[rd] = fn(r[rs1], r[rs2])
        c.pc = (c.pc + ln) & M32
        return 0
    return ex


def _muldiv(mnem, rd, rs1, rs2, ln):
    extra = MUL_EXTRA if mnem.startswith("mul") else DIV_EXTRA

    def compute(a, b):
        if mnem == "mul":
            return (a * b) & M32
        if mnem == "mulh":
            return ((_sx(a) * _sx(b)) >> 32) & M32
        if mnem == "mulhsu":
            return ((_sx(a) * b) >> 32) & M32
        if mnem == "mulhu":
            return ((a * b) >> 32) & M32
        if mnem == "div":
            if b == 0:
                return M32
            sa, sb = _sx(a), _sx(b)
            if sa == -(1 << 31) and sb == -1:
                return SIGN
            q = abs(sa) // abs(sb)
            return (q if (sa < 0) == (sb < 0) else -q) & M32
        if mnem == "divu":
            return M32 if b == 0 else a // b
        if mnem == "rem":
            if b == 0:
                return a
            sa, sb = _sx(a), _sx(b)
            if sa == -(1 << 31) and sb == -1:
                return 0
            rm = abs(sa) % abs(sb)
            return (-rm if sa < 0 else rm) & M32
        # remu
        return a if b == 0 else a % b

    def ex(c):
        r = c.regs
        v = compute(r[rs1], r[rs2])
        if rd:
            r[rd] = v
        c.pc = (c.pc + ln) & M32
        c.ev_extra = extra
        return 1
    return ex


def _lui(rd, imm_u, ln):
    def ex(c):
        if rd:
            c.regs[rd] = imm_u
        c.pc = (c.pc + ln) & M32
        return 0
    return ex


def _auipc(rd, imm_u, pc, ln):
    v = (pc + imm_u) & M32

    def ex(c):
        if rd:
            c.regs[rd] = v
        c.pc = (c.pc + ln) & M32
        return 0
    return ex


def _jal(rd, target, pc, ln):
    link = (pc + ln) & M32

    def ex(c):
        if rd:
            c.regs[rd] = link
        c.pc = target
        c.ev_extra = 1
        return 1
    return ex


def _jalr(rd, rs1, imm, pc, ln):
    link = (pc + ln) & M32

    def ex(c):
        t = (c.regs[rs1] + imm) & M32 & ~1
        if rd:
            c.regs[rd] = link
        c.pc = t
        c.ev_extra = 1
        return 1
    return ex


def _branch(mnem, rs1, rs2, target, ln):
    cmps = {
        "beq": lambda a, b: a == b,
        "bne": lambda a, b: a != b,
        "blt": lambda a, b: _sx(a) < _sx(b),
        "bge": lambda a, b: _sx(a) >= _sx(b),
        "bltu": lambda a, b: a < b,
        "bgeu": lambda a, b: a >= b,
    }
    fn = cmps[mnem]

    def ex(c):
        r = c.regs
        if fn(r[rs1], r[rs2]):
            c.pc = target
            c.ev_extra = 1
            return 1
        c.pc = (c.pc + ln) & M32
        return 0
    return ex


def _load(f3, rd, rs1, imm, ln):
    align = 3 if f3 == 2 else (1 if f3 in (1, 5) else 0)

    def ex(c):
        addr = (c.regs[rs1] + imm) & M32
        if addr & align:
            c.ev_cause = EXC_LADDR_MISALIGNED
            c.ev_tval = addr
            return 5
        c.ev_addr = addr
        c.ev_rd = rd
        c.ev_f3 = f3
        c.pc = (c.pc + ln) & M32
        return 2
    return ex


def _store(f3, rs1, rs2, imm, ln):
    align = 3 if f3 == 2 else (1 if f3 == 1 else 0)

    def ex(c):
        r = c.regs
        addr = (r[rs1] + imm) & M32
        if addr & align:
            c.ev_cause = EXC_SADDR_MISALIGNED
            c.ev_tval = addr
            return 5
        c.ev_addr = addr
        c.ev_val = r[rs2]
        c.ev_f3 = f3
        c.pc = (c.pc + ln) & M32
        return 3
    return ex


def _csr_op(f3, rd, csr, src, word, ln):
    write_only = f3 in (1, 5) and rd == 0  # csrrw/csrrwi with rd=x0 skip read
    read_only = f3 in (2, 3, 6, 7) and src == 0  # csrrs/c x0 never writes

    def ex(c):
        now = c.soc.cycle
        old = c.csr_read(csr, now)
        if old is None and not write_only:
            c.ev_cause = EXC_ILLEGAL
            c.ev_tval = word
            return 5
        v = src if f3 >= 5 else c.regs[src]
        if f3 in (1, 5):
            new = v
        elif f3 in (2, 6):
            new = (old or 0) | v
        else:
            new = (old or 0) & ~v
        if not read_only:
            if not c.csr_write(csr, new, now):
                c.ev_cause = EXC_ILLEGAL
                c.ev_tval = word
                return 5
        if rd and old is not None:
            c.regs[rd] = old
        c.pc = (c.pc + ln) & M32
        return 0
    return ex


def _mret():
    def ex(c):
        st = c.mstatus
        mie = MSTATUS_MIE if st & MSTATUS_MPIE else 0
        c.mstatus = (st & ~MSTATUS_MIE) | mie | MSTATUS_MPIE
        c.pc = c.mepc
        c.ev_extra = 1
        return 1
    return ex


def _wfi(ln):
    def ex(c):
        c.pc = (c.pc + ln) & M32
        return 4
    return ex


def _fence(ln):
    def ex(c):
        c.pc = (c.pc + ln) & M32
        return 0
    return ex


def _trap_now(cause, tval):
    def ex(c):
        c.ev_cause = cause
        c.ev_tval = tval
        return 5
    return ex


# ---------------------------------------------------- access-set analysis
#
# Conservative per-instruction state access sets, used by the lockstep
# scheduler to keep a single-bit fault "dormant" while nothing reads it.
# Register masks are bit-per-x-register; CSR masks use the tag bits
# below.  Read masks over-approximate (extra bits only cost speed);
# write masks under-approximate (only unconditional writes of retired
# instructions may appear, since a spurious bit would wrongly erase a
# live fault).

CT_MSTATUS = 1
CT_MTVEC = 2
CT_MEPC = 4
CT_MCAUSE = 8
CT_MTVAL = 16
CT_MIE = 32
CT_MSCRATCH = 64
CT_MCYCLE = 128
CT_MINSTRET = 256

CSR_TAG = {
    0x300: CT_MSTATUS, 0x305: CT_MTVEC, 0x341: CT_MEPC, 0x342: CT_MCAUSE,
    0x343: CT_MTVAL, 0x304: CT_MIE, 0x340: CT_MSCRATCH,
    0xB00: CT_MCYCLE, 0xB80: CT_MCYCLE, 0xC00: CT_MCYCLE, 0xC80: CT_MCYCLE,
    0xB02: CT_MINSTRET, 0xB82: CT_MINSTRET, 0xC02: CT_MINSTRET,
    0xC82: CT_MINSTRET,
}

CORE_LOC_TAGS = {
    "mstatus": CT_MSTATUS, "mtvec": CT_MTVEC, "mepc": CT_MEPC,
    "mcause": CT_MCAUSE, "mtval": CT_MTVAL, "mie": CT_MIE,
    "mscratch": CT_MSCRATCH, "mcycle": CT_MCYCLE, "minstret": CT_MINSTRET,
}

_RW_ALL_CSRS = (1 << 10) - 1


def rw_sets(word: int, ilen: int) -> tuple[int, int, int, int]:
    """(reg reads, reg writes, csr reads, csr writes) for one instruction.

    Unknown encodings claim to read everything and write nothing, the
    safe direction for both masks.
    """
    if ilen == 2:
        return _rw_sets16(word)
    op = word & 0x7F
    rd = (word >> 7) & 31
    f3 = (word >> 12) & 7
    rs1 = (word >> 15) & 31
    rs2 = (word >> 20) & 31
    wr = (1 << rd) & ~1
    if op in (0b0010011, 0b0000011, 0b1100111):   # op-imm, load, jalr
        return (1 << rs1) & ~1, wr, 0, 0
    if op == 0b0110011:                            # op / muldiv
        return ((1 << rs1) | (1 << rs2)) & ~1, wr, 0, 0
    if op in (0b0100011, 0b1100011):               # store, branch
        return ((1 << rs1) | (1 << rs2)) & ~1, 0, 0, 0
    if op in (0b0110111, 0b0010111, 0b1101111):    # lui, auipc, jal
        return 0, wr, 0, 0
    if op == 0b0001111:                            # fences
        return 0, 0, 0, 0
    if op == 0b1110011:
        if f3 == 0:
            if word == 0x30200073:                 # mret
                return 0, 0, CT_MEPC | CT_MSTATUS, CT_MSTATUS
            return 0, 0, _RW_ALL_CSRS, 0          # ecall/ebreak/wfi: trap/bail
        if f3 in (1, 2, 3, 5, 6, 7):               # csr ops
            tag = CSR_TAG.get(word >> 20, _RW_ALL_CSRS)
            rr = (1 << rs1) & ~1 if f3 < 4 else 0
            writes = True
            if f3 in (2, 3) and rs1 == 0:
                writes = False                     # csrrs/c with x0
            if f3 in (6, 7) and rs1 == 0:
                writes = False                     # csrrsi/ci with zimm=0
            cw = tag if (writes and tag != _RW_ALL_CSRS) else 0
            return rr, wr, tag, cw
    return (1 << 32) - 2, 0, _RW_ALL_CSRS, 0


def _rw_sets16(half: int) -> tuple[int, int, int, int]:
    q = half & 3
    f3 = (half >> 13) & 7
    rdp = 8 + ((half >> 2) & 7)
    rs1p = 8 + ((half >> 7) & 7)
    full = (half >> 7) & 31
    rs2full = (half >> 2) & 31
    if q == 0:
        if f3 == 0:
            return 1 << 2, 1 << rdp, 0, 0          # c.addi4spn
        if f3 == 2:
            return 1 << rs1p, 1 << rdp, 0, 0       # c.lw
        if f3 == 6:
            return (1 << rs1p) | (1 << rdp), 0, 0, 0   # c.sw
    elif q == 1:
        if f3 == 0 or f3 == 2:                     # c.addi / c.li
            return ((1 << full) & ~1 if f3 == 0 else 0), (1 << full) & ~1, 0, 0
        if f3 == 1:
            return 0, 1 << 1, 0, 0                 # c.jal
        if f3 == 5:
            return 0, 0, 0, 0                      # c.j
        if f3 == 3:
            if full == 2:
                return 1 << 2, 1 << 2, 0, 0        # c.addi16sp
            return 0, (1 << full) & ~1, 0, 0       # c.lui
        if f3 == 4:
            sub = (half >> 10) & 3
            if sub < 3:
                return 1 << rdp, 1 << rdp, 0, 0    # shifts / c.andi
            rs2p = 8 + ((half >> 2) & 7)
            return (1 << rdp) | (1 << rs2p), 1 << rdp, 0, 0
        return 1 << rs1p, 0, 0, 0                  # c.beqz / c.bnez
    else:
        if f3 == 0:
            return (1 << full) & ~1, (1 << full) & ~1, 0, 0  # c.slli
        if f3 == 2:
            return 1 << 2, (1 << full) & ~1, 0, 0  # c.lwsp
        if f3 == 6:
            return (1 << 2) | (1 << rs2full), 0, 0, 0  # c.swsp
        if f3 == 4:
            bit12 = (half >> 12) & 1
            if rs2full == 0:
                if full == 0:
                    return 0, 0, _RW_ALL_CSRS, 0   # c.ebreak: trap/bail
                # c.jr / c.jalr
                return (1 << full) & ~1, (1 << 1) if bit12 else 0, 0, 0
            if bit12:
                return ((1 << full) | (1 << rs2full)) & ~1, (1 << full) & ~1, 0, 0
            return (1 << rs2full) & ~1, (1 << full) & ~1, 0, 0  # c.mv
    return (1 << 32) - 2, 0, _RW_ALL_CSRS, 0


_BR_NAMES = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}
_LD_NAMES = {0: "lb", 1: "lh", 2: "lw", 4: "lbu", 5: "lhu"}
_ST_NAMES = {0: "sb", 1: "sh", 2: "sw"}
_OPIMM_NAMES = {0: "addi", 2: "slti", 3: "sltiu", 4: "xori", 6: "ori", 7: "andi"}
_OP_NAMES = {
    (0, 0x00): "add", (0, 0x20): "sub", (1, 0x00): "sll", (2, 0x00): "slt",
    (3, 0x00): "sltu", (4, 0x00): "xor", (5, 0x00): "srl", (5, 0x20): "sra",
    (6, 0x00): "or", (7, 0x00): "and",
    (0, 0x01): "mul", (1, 0x01): "mulh", (2, 0x01): "mulhsu", (3, 0x01): "mulhu",
    (4, 0x01): "div", (5, 0x01): "divu", (6, 0x01): "rem", (7, 0x01): "remu",
}
_CSR_NAMES = {1: "csrrw", 2: "csrrs", 3: "csrrc", 5: "csrrwi", 6: "csrrsi", 7: "csrrci"}


def decode32(word: int, pc: int):
    """Decode a 32-bit instruction to (closure, rd, mnemonic)."""
    op = word & 0x7F
    rd = (word >> 7) & 31
    f3 = (word >> 12) & 7
    rs1 = (word >> 15) & 31
    rs2 = (word >> 20) & 31
    f7 = word >> 25

    if op == 0b0010011:
        if f3 == 1 or f3 == 5:
            sh = rs2
            if f3 == 1 and f7 == 0:
                return _shift_imm("slli", rd, rs1, sh, 4), rd, f"slli x{rd}, x{rs1}, {sh}"
            if f3 == 5 and f7 == 0:
                return _shift_imm("srli", rd, rs1, sh, 4), rd, f"srli x{rd}, x{rs1}, {sh}"
            if f3 == 5 and f7 == 0x20:
                return _shift_imm("srai", rd, rs1, sh, 4), rd, f"srai x{rd}, x{rs1}, {sh}"
            return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
        mnem = _OPIMM_NAMES[f3]
        imm = _sx12(word >> 20)
        return _alu_imm(mnem, rd, rs1, imm, 4), rd, f"{mnem} x{rd}, x{rs1}, {imm}"
    if op == 0b0110011:
        key = (f3, f7)
        if key not in _OP_NAMES:
            return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
        mnem = _OP_NAMES[key]
        text = f"{mnem} x{rd}, x{rs1}, x{rs2}"
        if f7 == 0x01:
            return _muldiv(mnem, rd, rs1, rs2, 4), rd, text
        return _alu_reg(mnem, rd, rs1, rs2, 4), rd, text
    if op == 0b0000011:
        if f3 not in _LD_NAMES:
            return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
        imm = _sx12(word >> 20)
        return _load(f3, rd, rs1, imm, 4), rd, f"{_LD_NAMES[f3]} x{rd}, {imm}(x{rs1})"
    if op == 0b0100011:
        if f3 not in _ST_NAMES:
            return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
        imm = _sx12(((word >> 25) << 5) | ((word >> 7) & 31))
        return _store(f3, rs1, rs2, imm, 4), 0, f"{_ST_NAMES[f3]} x{rs2}, {imm}(x{rs1})"
    if op == 0b1100011:
        if f3 not in _BR_NAMES:
            return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
        imm = (((word >> 31) & 1) << 12) | (((word >> 7) & 1) << 11) | \
            (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1)
        if imm & 0x1000:
            imm -= 0x2000
        target = (pc + imm) & M32
        mnem = _BR_NAMES[f3]
        return _branch(mnem, rs1, rs2, target, 4), 0, f"{mnem} x{rs1}, x{rs2}, {target:#x}"
    if op == 0b0110111:
        return _lui(rd, word & 0xFFFFF000, 4), rd, f"lui x{rd}, {word >> 12:#x}"
    if op == 0b0010111:
        return _auipc(rd, word & 0xFFFFF000, pc, 4), rd, f"auipc x{rd}, {word >> 12:#x}"
    if op == 0b1101111:
        imm = (((word >> 31) & 1) << 20) | (((word >> 12) & 0xFF) << 12) | \
            (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1)
        if imm & 0x100000:
            imm -= 0x200000
        target = (pc + imm) & M32
        return _jal(rd, target, pc, 4), rd, f"jal x{rd}, {target:#x}"
    if op == 0b1100111 and f3 == 0:
        imm = _sx12(word >> 20)
        return _jalr(rd, rs1, imm, pc, 4), rd, f"jalr x{rd}, {imm}(x{rs1})"
    if op == 0b0001111:
        return _fence(4), 0, "fence.i" if f3 == 1 else "fence"
    if op == 0b1110011:
        if f3 == 0:
            imm12 = word >> 20
            if word == 0x00000073:
                return _trap_now(EXC_ECALL_M, 0), 0, "ecall"
            if word == 0x00100073:
                return _trap_now(EXC_BREAKPOINT, pc), 0, "ebreak"
            if word == 0x30200073:
                return _mret(), 0, "mret"
            if word == 0x10500073:
                return _wfi(4), 0, "wfi"
            return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
        if f3 in _CSR_NAMES:
            csr = word >> 20
            src = rs1
            return (_csr_op(f3, rd, csr, src, word, 4), rd,
                    f"{_CSR_NAMES[f3]} x{rd}, {csr:#x}, {src}")
        return _trap_now(EXC_ILLEGAL, word), 0, "illegal"
    return _trap_now(EXC_ILLEGAL, word), 0, "illegal"


def decode16(half: int, pc: int):
    """Decode a compressed instruction by expanding to base semantics."""
    if half == 0:
        return _trap_now(EXC_ILLEGAL, 0), 0, "illegal"
    q = half & 3
    f3 = (half >> 13) & 7
    if q == 0:
        rdp = 8 + ((half >> 2) & 7)
        rs1p = 8 + ((half >> 7) & 7)
        if f3 == 0:
            imm = (((half >> 11) & 3) << 4) | (((half >> 7) & 0xF) << 6) | \
                (((half >> 6) & 1) << 2) | (((half >> 5) & 1) << 3)
            if imm == 0:
                return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
            return (_alu_imm("addi", rdp, 2, imm, 2), rdp,
                    f"c.addi4spn x{rdp}, {imm}")
        if f3 == 2:
            imm = (((half >> 10) & 7) << 3) | (((half >> 6) & 1) << 2) | \
                (((half >> 5) & 1) << 6)
            return _load(2, rdp, rs1p, imm, 2), rdp, f"c.lw x{rdp}, {imm}(x{rs1p})"
        if f3 == 6:
            imm = (((half >> 10) & 7) << 3) | (((half >> 6) & 1) << 2) | \
                (((half >> 5) & 1) << 6)
            return _store(2, rs1p, rdp, imm, 2), 0, f"c.sw x{rdp}, {imm}(x{rs1p})"
        return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
    if q == 1:
        if f3 == 0:
            rd = (half >> 7) & 31
            imm = ((half >> 2) & 31) | (((half >> 12) & 1) << 5)
            if imm & 0x20:
                imm -= 64
            if rd == 0:
                return _fence(2), 0, "c.nop"
            return _alu_imm("addi", rd, rd, imm, 2), rd, f"c.addi x{rd}, {imm}"
        if f3 == 1 or f3 == 5:
            u = half
            imm = (((u >> 12) & 1) << 11) | (((u >> 11) & 1) << 4) | \
                (((u >> 9) & 3) << 8) | (((u >> 8) & 1) << 10) | \
                (((u >> 7) & 1) << 6) | (((u >> 6) & 1) << 7) | \
                (((u >> 3) & 7) << 1) | (((u >> 2) & 1) << 5)
            if imm & 0x800:
                imm -= 0x1000
            target = (pc + imm) & M32
            rd = 1 if f3 == 1 else 0
            mnem = "c.jal" if f3 == 1 else "c.j"
            return _jal(rd, target, pc, 2), rd, f"{mnem} {target:#x}"
        if f3 == 2:
            rd = (half >> 7) & 31
            imm = ((half >> 2) & 31) | (((half >> 12) & 1) << 5)
            if imm & 0x20:
                imm -= 64
            return _alu_imm("addi", rd, 0, imm, 2), rd, f"c.li x{rd}, {imm}"
        if f3 == 3:
            rd = (half >> 7) & 31
            if rd == 2:
                imm = (((half >> 12) & 1) << 9) | (((half >> 6) & 1) << 4) | \
                    (((half >> 5) & 1) << 6) | (((half >> 3) & 3) << 7) | \
                    (((half >> 2) & 1) << 5)
                if imm & 0x200:
                    imm -= 0x400
                return _alu_imm("addi", 2, 2, imm, 2), 2, f"c.addi16sp {imm}"
            imm = (((half >> 12) & 1) << 17) | (((half >> 2) & 31) << 12)
            if imm & 0x20000:
                imm -= 0x40000
            return _lui(rd, imm & M32, 2), rd, f"c.lui x{rd}, {(imm >> 12) & 0x3F:#x}"
        if f3 == 4:
            sub = (half >> 10) & 3
            rdp = 8 + ((half >> 7) & 7)
            if sub == 0 or sub == 1:
                sh = ((half >> 2) & 31) | (((half >> 12) & 1) << 5)
                mnem = "c.srli" if sub == 0 else "c.srai"
                return (_shift_imm("srli" if sub == 0 else "srai", rdp, rdp, sh & 31, 2),
                        rdp, f"{mnem} x{rdp}, {sh}")
            if sub == 2:
                imm = ((half >> 2) & 31) | (((half >> 12) & 1) << 5)
                if imm & 0x20:
                    imm -= 64
                return _alu_imm("andi", rdp, rdp, imm, 2), rdp, f"c.andi x{rdp}, {imm}"
            rs2p = 8 + ((half >> 2) & 7)
            op2 = (half >> 5) & 3
            if (half >> 12) & 1:
                return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
            mnem = ("sub", "xor", "or", "and")[op2]
            return (_alu_reg(mnem, rdp, rdp, rs2p, 2), rdp,
                    f"c.{mnem} x{rdp}, x{rs2p}")
        if f3 == 6 or f3 == 7:
            rs1p = 8 + ((half >> 7) & 7)
            u = half
            imm = (((u >> 12) & 1) << 8) | (((u >> 10) & 3) << 3) | \
                (((u >> 5) & 3) << 6) | (((u >> 3) & 3) << 1) | \
                (((u >> 2) & 1) << 5)
            if imm & 0x100:
                imm -= 0x200
            target = (pc + imm) & M32
            mnem = "c.beqz" if f3 == 6 else "c.bnez"
            return (_branch("beq" if f3 == 6 else "bne", rs1p, 0, target, 2),
                    0, f"{mnem} x{rs1p}, {target:#x}")
        return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
    # q == 2
    if f3 == 0:
        rd = (half >> 7) & 31
        sh = ((half >> 2) & 31) | (((half >> 12) & 1) << 5)
        return _shift_imm("slli", rd, rd, sh & 31, 2), rd, f"c.slli x{rd}, {sh}"
    if f3 == 2:
        rd = (half >> 7) & 31
        if rd == 0:
            return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
        imm = (((half >> 12) & 1) << 5) | (((half >> 4) & 7) << 2) | \
            (((half >> 2) & 3) << 6)
        return _load(2, rd, 2, imm, 2), rd, f"c.lwsp x{rd}, {imm}"
    if f3 == 4:
        bit12 = (half >> 12) & 1
        rd = (half >> 7) & 31
        rs2 = (half >> 2) & 31
        if bit12 == 0:
            if rs2 == 0:
                if rd == 0:
                    return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
                return _jalr(0, rd, 0, pc, 2), 0, f"c.jr x{rd}"
            return _alu_reg("add", rd, 0, rs2, 2), rd, f"c.mv x{rd}, x{rs2}"
        if rs2 == 0:
            if rd == 0:
                return _trap_now(EXC_BREAKPOINT, pc), 0, "c.ebreak"
            return _jalr(1, rd, 0, pc, 2), 1, f"c.jalr x{rd}"
        return _alu_reg("add", rd, rd, rs2, 2), rd, f"c.add x{rd}, x{rs2}"
    if f3 == 6:
        rs2 = (half >> 2) & 31
        imm = (((half >> 9) & 0xF) << 2) | (((half >> 7) & 3) << 6)
        return _store(2, 2, rs2, imm, 2), 0, f"c.swsp x{rs2}, {imm}"
    return _trap_now(EXC_ILLEGAL, half), 0, "illegal"
