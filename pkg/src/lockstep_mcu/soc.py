"""System assembly: cores, lockstep wrapper, crossbar, memory, devices.

One ``Soc`` owns everything reachable in a run and is advanced by a
single deterministic per-cycle loop, split into two half-cycles:

* H1: the crossbar grants at most one request per bank (voted ports
  beat core ports beat the scrubber), executes the memory or device
  operation and latches the response on the winning port.
* H2: each active core consumes responses and advances its pipeline
  state machine, posting new requests that become visible in the next
  cycle's H1.

In lockstep mode with converged cores only core 0 is stepped against
the voted ports; the three cores are bit-identical by construction so
this is an exact shortcut, not an approximation.  Any state injection
splits the group: all three cores then step against private shadow
ports whose request bundles are majority-voted into the real ports
each cycle, until the resynchronization flow (or plain overwriting of
the flipped bit) makes the cores bit-identical again.

Address map (all register accesses word-sized):

    0x1A00_0000  boot ROM (8 KiB)
    0x1B10_0000  lockstep wrapper registers
    0x1B20_0000  memory control (write-disable masks, ECC counters,
                 scrubber)
    0x1B30_0000  UART (output capture)
    0x1B40_0000  sim control (exit register, result register)
    0x1C00_0000  SRAM (256 KiB, 8 word-interleaved banks)
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field

from . import memory as mem
from .asm import Program, assemble, entry_address
from .core import (
    Core, M32, PH_F0, PH_F1, PH_EX, PH_LD, PH_DW,
    EXC_IACCESS_FAULT, EXC_LACCESS_FAULT, EXC_SACCESS_FAULT,
    MSTATUS_MIE, MIE_MEIE, MIE_MSIE, CORE_LOC_TAGS, CT_MCYCLE, CT_MINSTRET,
    decode16, decode32, rw_sets,
)
from .interconnect import (
    Crossbar, Port, R_DEV, R_NONE, R_ROM, R_SRAM,
    RS_FAULT, RS_OK, RS_UNCORRECTABLE, VOTED,
)
from .odrg import (
    ALL_DIFFER, MODE_LOCKSTEP, MODE_PERFORMANCE, OdrgUnit,
    RESYNC_DONE, RESYNC_HEALTHY_GAP, RESYNC_IDLE, RESYNC_IN_PROGRESS,
    RESYNC_REQUESTED, RESYNC_STREAK_LIMIT, vote,
)

SRAM_BASE = 0x1C000000
SRAM_SIZE = mem.TOTAL_BYTES
SRAM_END = SRAM_BASE + SRAM_SIZE
ROM_BASE = 0x1A000000
ROM_SIZE = 0x2000
ROM_END = ROM_BASE + ROM_SIZE
ODRG_BASE = 0x1B100000
MEMCTL_BASE = 0x1B200000
UART_BASE = 0x1B300000
SIMCTL_BASE = 0x1B400000
DEV_PAGE = 0xFFF00000

STACK_TOP = SRAM_END
STACK_BYTES = 2048

MIP_MEIP = MIE_MEIE
MIP_MSIP = MIE_MSIE

FATAL_EXIT_BASE = 0xDEAD0000  # unhandled trap: exit code 0xDEAD0000 | cause

# scheduler-side convergence probe period while the group is split
CONVERGENCE_CHECK_PERIOD = 64

_TRACE_REC = struct.Struct("<QBIIBI")


# ------------------------------------------------------------ boot ROM

def build_boot_rom(entry: int) -> Program:
    """Startup stub plus trap handler plus resync save/restore code.

    The cold path computes the stack pointer arithmetically from the
    hart id (no branches), so the lockstep logical core and a lone
    core 0 in performance mode execute the same instruction stream.
    """
    p = Program(entry="_reset")
    p.label("_reset")
    p.ins("csrr", "t0", "mhartid")
    p.ins("la", "t1", ODRG_BASE)
    p.ins("lw", "t2", 0x04, "t1")          # resync_state
    p.ins("li", "t3", RESYNC_IN_PROGRESS)
    p.ins("beq", "t2", "t3", "_restore")
    # cold boot: sp = STACK_TOP - hartid * STACK_BYTES
    p.ins("li", "sp", STACK_TOP)
    p.ins("slli", "t5", "t0", 11)
    p.ins("sub", "sp", "sp", "t5")
    p.ins("la", "t6", "_trap")
    p.ins("csrw", "mtvec", "t6")
    p.ins("li", "t4", MIE_MEIE | MIE_MSIE)
    p.ins("csrw", "mie", "t4")
    p.ins("li", "t4", MSTATUS_MIE)
    p.ins("csrw", "mstatus", "t4")
    p.ins("la", "t4", entry)
    p.ins("jr", "t4")

    # Trap entry: spill x1/x3, dispatch on mcause.  The resync path
    # then saves the remaining state; frame layout (136 bytes):
    # [0]=mepc [4]=x1 [8]=x2(original sp) [12]=x3 ... [124]=x31
    # [128]=mstatus [132]=mscratch
    p.label("_trap")
    p.ins("addi", "sp", "sp", -136)
    p.ins("sw", "x1", 4, "sp")
    p.ins("sw", "x3", 12, "sp")
    p.ins("csrr", "x1", "mcause")
    p.ins("li", "x3", 0x8000000B)
    p.ins("beq", "x1", "x3", "_resync_save")
    p.ins("li", "x3", 0x80000003)
    p.ins("beq", "x1", "x3", "_soft_irq")
    p.ins("li", "x3", FATAL_EXIT_BASE)
    p.ins("or", "x3", "x3", "x1")
    p.ins("li", "x1", SIMCTL_BASE)
    p.ins("sw", "x3", 0, "x1")
    p.label("_halt")
    p.ins("j", "_halt")

    p.label("_soft_irq")
    p.ins("csrr", "x1", "mhartid")
    p.ins("slli", "x1", "x1", 2)
    p.ins("la", "x3", ODRG_BASE + 0x2C)    # msip[hart]
    p.ins("add", "x3", "x3", "x1")
    p.ins("sw", "x0", 0, "x3")
    p.ins("lw", "x1", 4, "sp")
    p.ins("lw", "x3", 12, "sp")
    p.ins("sw", "x0", 4, "sp")
    p.ins("sw", "x0", 12, "sp")
    p.ins("addi", "sp", "sp", 136)
    p.ins("mret")

    p.label("_resync_save")
    for i in range(4, 32):
        p.ins("sw", f"x{i}", 4 * i, "sp")
    p.ins("addi", "x1", "sp", 136)
    p.ins("sw", "x1", 8, "sp")             # original sp
    p.ins("csrr", "x1", "mepc")
    p.ins("sw", "x1", 0, "sp")
    p.ins("csrr", "x1", "mstatus")
    p.ins("sw", "x1", 128, "sp")
    p.ins("csrr", "x1", "mscratch")
    p.ins("sw", "x1", 132, "sp")
    p.ins("la", "x3", ODRG_BASE)
    p.ins("sw", "sp", 0x1C, "x3")          # saved_sp
    p.ins("sw", "x0", 0x14, "x3")          # trigger: reset pulse fires here
    p.label("_spin")
    p.ins("j", "_spin")

    # Post-reset reload: runs with t0=hartid, t1=ODRG base from the
    # stub head.  CSRs are staged through t4 before the bulk register
    # restore overwrites it; the frame is zeroed afterwards using only
    # x0/sp so the stack matches a run that never resynced.
    p.label("_restore")
    p.ins("lw", "sp", 0x1C, "t1")          # saved_sp
    p.ins("la", "t4", "_trap")
    p.ins("csrw", "mtvec", "t4")
    p.ins("li", "t4", MIE_MEIE | MIE_MSIE)
    p.ins("csrw", "mie", "t4")
    p.ins("lw", "t4", 0, "sp")
    p.ins("csrw", "mepc", "t4")
    p.ins("lw", "t4", 128, "sp")
    p.ins("csrw", "mstatus", "t4")
    p.ins("lw", "t4", 132, "sp")
    p.ins("csrw", "mscratch", "t4")
    p.ins("sw", "x0", 0x18, "t1")          # resync done
    for i in range(3, 32):
        p.ins("lw", f"x{i}", 4 * i, "sp")
    p.ins("lw", "x1", 4, "sp")
    for off in range(0, 136, 4):
        p.ins("sw", "x0", off, "sp")
    p.ins("addi", "sp", "sp", 136)
    p.ins("mret")
    return p


def rom_words(entry: int) -> list[int]:
    image = assemble(build_boot_rom(entry), ROM_BASE)
    if len(image) > ROM_SIZE:
        raise ValueError("boot ROM overflow")
    image = image + b"\x00" * ((-len(image)) % 4)
    words = list(struct.unpack(f"<{len(image) // 4}I", image))
    words += [0] * (ROM_SIZE // 4 - len(words))
    return words


# --------------------------------------------------------------- config

@dataclass
class SocConfig:
    mode: str = "lockstep"          # lockstep | single | parallel
    max_cycles: int = 10_000_000
    scrub_enabled: bool = True
    scrub_interval: int = 64
    record_trace: bool = True       # accumulate the retirement hash
    trace_lines: bool = False       # keep formatted per-instruction lines
    fast_loop: bool = True          # fused single-core burst execution
    dormant_opt: bool = True        # defer lockstep splits for unread faults

    def odrg_mode(self) -> int:
        return MODE_LOCKSTEP if self.mode == "lockstep" else MODE_PERFORMANCE

    def release_mask(self) -> int:
        if self.mode == "parallel":
            return 0b111
        return 0b001  # lockstep logical core / performance single


@dataclass
class RunResult:
    mode: str
    cycles: int
    exit_code: int | None
    timed_out: bool
    unrecoverable: bool
    checksum: int
    uart: bytes
    instret: list[int]
    mismatch_count: list[int]
    resync_events: int
    ecc_correctable: list[int]
    ecc_uncorrectable: list[int]
    scrub_corrections: int
    scrub_uncorrectable: int
    latent_uncorrectable: int
    conflict_stalls: int
    trace_hash: str | None
    outputs_digest: str
    trace_lines: list[str] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "schema": "run-report/1",
            "mode": self.mode,
            "cycles": self.cycles,
            "exit_code": self.exit_code,
            "timed_out": self.timed_out,
            "unrecoverable": self.unrecoverable,
            "checksum": self.checksum,
            "uart_text": self.uart.decode("latin-1"),
            "uart_hex": self.uart.hex(),
            "instret": list(self.instret),
            "mismatch_count": list(self.mismatch_count),
            "resync_events": self.resync_events,
            "ecc_correctable": list(self.ecc_correctable),
            "ecc_uncorrectable": list(self.ecc_uncorrectable),
            "scrub_corrections": self.scrub_corrections,
            "scrub_uncorrectable": self.scrub_uncorrectable,
            "latent_uncorrectable": self.latent_uncorrectable,
            "conflict_stalls": self.conflict_stalls,
            "trace_hash": self.trace_hash,
            "outputs_digest": self.outputs_digest,
        }


class LoadError(Exception):
    pass


class Soc:
    """One simulation instance; nothing is shared between instances."""

    def __init__(self, config: SocConfig | None = None):
        self.config = config or SocConfig()
        self.cycle = 0
        self.banks = mem.BankArray()
        self.rom: list[int] = [0] * (ROM_SIZE // 4)
        self.odrg = OdrgUnit(self.config.odrg_mode())
        self.xbar = Crossbar()
        self.scrub = mem.Scrubber(self.config.scrub_interval,
                                  self.config.scrub_enabled)
        self.uart_out = bytearray()
        self.checksum_reg = 0
        self.running = False
        self.exited = False
        self.exit_code: int | None = None
        self.timed_out = False
        self.unrecoverable = False
        self.entry = SRAM_BASE
        self.loaded = False

        self.cores = [Core(i, self) for i in range(3)]
        self.vports = (Port(VOTED, True), Port(VOTED, False))   # (D, I)
        self.cports = [(Port(i, True), Port(i, False)) for i in range(3)]
        self.converged = True
        self.lockstep = self.odrg.mode == MODE_LOCKSTEP
        self.bus_ports: list[Port] = []
        self.active: list[tuple[Core, Port, Port]] = []

        self.dcache: dict[int, tuple] = {}
        self.tracebuf = bytearray()
        self.trace_lines: list[str] | None = [] if self.config.trace_lines else None
        self.rec_trace = self.config.record_trace
        self._done_pending = False
        self._diverge_check_at = 0
        # dormant lockstep fault: the minority's deviating locations are
        # carried beside the converged fast path until something reads them
        self.dorm_hart = -1
        self.dorm_regs = 0
        self.dorm_csrs = 0
        self.dorm_vals: dict[str, int] = {}

    # ---------------------------------------------------------- loading

    def load_program(self, image, entry: int | None = None) -> None:
        """Initialize SRAM through the loader path and build the ROM."""
        if isinstance(image, Program):
            entry = entry_address(image, SRAM_BASE) if entry is None else entry
            image = assemble(image, SRAM_BASE)
        if entry is None:
            entry = SRAM_BASE
        if len(image) > SRAM_SIZE:
            raise LoadError(f"image of {len(image)} bytes exceeds SRAM capacity")
        if not SRAM_BASE <= entry < SRAM_END:
            raise LoadError(f"entry {entry:#x} outside SRAM")
        self.banks = mem.BankArray()  # a fresh load means fresh memory
        self.banks.load_image(image)
        self.rom = rom_words(entry)
        self.entry = entry
        self.loaded = True
        self.reset()

    def reset(self) -> None:
        self.cycle = 0
        self.running = True
        self.exited = False
        self.exit_code = None
        self.timed_out = False
        self.unrecoverable = False
        self.uart_out = bytearray()
        self.checksum_reg = 0
        self.tracebuf = bytearray()
        if self.trace_lines is not None:
            self.trace_lines = []
        self.odrg = OdrgUnit(self.config.odrg_mode())
        self.lockstep = self.odrg.mode == MODE_LOCKSTEP
        self.converged = True
        self.scrub.next_cycle = self.scrub.interval
        self.scrub.next_address = 0
        self.scrub.corrections = 0
        self.scrub.uncorrectable_seen = 0
        self._done_pending = False
        self._diverge_check_at = 0
        self.dorm_hart = -1
        self.dorm_regs = 0
        self.dorm_csrs = 0
        self.dorm_vals = {}
        release = self.config.release_mask()
        for i, c in enumerate(self.cores):
            hartid = 0 if self.lockstep else i
            c.reset(ROM_BASE, hartid=hartid)
            c.held = (not self.lockstep) and not (release >> i) & 1
            if c.held:
                c.sleeping = True
        for p in (*self.vports, *(q for pair in self.cports for q in pair)):
            p.clear()
        self._wire_ports()
        for core, ip, _dp in self.active:
            self._post_fetch(core, ip)

    def _wire_ports(self) -> None:
        if self.lockstep:
            self.bus_ports = [self.vports[0], self.vports[1]]
            if self.converged:
                self.active = [(self.cores[0], self.vports[1], self.vports[0])]
            else:
                self.active = [(self.cores[i], self.cports[i][1],
                                self.cports[i][0]) for i in range(3)]
        else:
            self.bus_ports = []
            self.active = []
            for i, c in enumerate(self.cores):
                if c.held:
                    continue
                d, ins = self.cports[i]
                self.bus_ports += [d, ins]
                self.active.append((c, ins, d))

    # --------------------------------------------------------- routing

    @staticmethod
    def _route(addr: int) -> tuple[int, int, int]:
        """addr -> (region, bank, row)."""
        if SRAM_BASE <= addr < SRAM_END:
            word = (addr - SRAM_BASE) >> 2
            return R_SRAM, word & 7, word >> 3
        if ROM_BASE <= addr < ROM_END:
            return R_ROM, 0, (addr - ROM_BASE) >> 2
        page = addr & DEV_PAGE
        if page in (ODRG_BASE, MEMCTL_BASE, UART_BASE, SIMCTL_BASE):
            return R_DEV, 0, 0
        return R_NONE, 0, 0

    # ---------------------------------------------------------- devices

    def _dev_read(self, addr: int) -> int | None:
        page = addr & DEV_PAGE
        off = addr & 0xFFFFF
        if page == ODRG_BASE:
            return self.odrg.read(off, self)
        if page == MEMCTL_BASE:
            return self._memctl_read(off)
        if page == UART_BASE:
            if off == 0x4:
                return 1  # tx always ready
            return 0
        if page == SIMCTL_BASE:
            if off == 0x4:
                return self.checksum_reg
            return 0
        return None

    def _dev_write(self, addr: int, value: int) -> None:
        page = addr & DEV_PAGE
        off = addr & 0xFFFFF
        value &= M32
        if page == ODRG_BASE:
            self.odrg.write(off, value, self)
        elif page == MEMCTL_BASE:
            self._memctl_write(off, value)
        elif page == UART_BASE:
            if off == 0x0:
                self.uart_out.append(value & 0xFF)
        elif page == SIMCTL_BASE:
            if off == 0x0:
                self.exited = True
                self.running = False
                self.exit_code = value
            elif off == 0x4:
                self.checksum_reg = value

    def _memctl_read(self, off: int) -> int | None:
        banks = self.banks.banks
        if off < 0x40:
            bank, hi = divmod(off, 8)
            if bank < 8:
                wd = banks[bank].write_disable
                return (wd >> 32) & 0x7F if hi else wd & M32
        elif 0x40 <= off < 0x60:
            return banks[(off - 0x40) >> 2].correctable_count & M32
        elif 0x60 <= off < 0x80:
            return banks[(off - 0x60) >> 2].uncorrectable_count & M32
        elif off == 0x80:
            return 1 if self.scrub.enabled else 0
        elif off == 0x84:
            return self.scrub.interval
        elif off == 0x88:
            return self.scrub.next_address
        elif off == 0x8C:
            return self.scrub.corrections & M32
        elif off == 0x90:
            return self.scrub.uncorrectable_seen & M32
        return None

    def _memctl_write(self, off: int, value: int) -> None:
        banks = self.banks.banks
        if off < 0x40:
            bank, hi = divmod(off, 8)
            if bank < 8:
                b = banks[bank]
                if hi:
                    b.write_disable = (b.write_disable & M32) | ((value & 0x7F) << 32)
                else:
                    b.write_disable = (b.write_disable & ~M32) | value
        elif 0x40 <= off < 0x60:
            banks[(off - 0x40) >> 2].correctable_count = 0
        elif 0x60 <= off < 0x80:
            banks[(off - 0x60) >> 2].uncorrectable_count = 0
        elif off == 0x80:
            self.scrub.enabled = bool(value & 1)
            if self.scrub.enabled:
                self.scrub.next_cycle = self.cycle + self.scrub.interval
        elif off == 0x84:
            self.scrub.interval = max(1, value)
            self.scrub.next_cycle = self.cycle + self.scrub.interval

    # ----------------------------------------------- lockstep callbacks

    def _set_msip(self, hart: int, value: int) -> None:
        self.odrg.msip[hart] = value
        if self.dorm_hart >= 0 and value:
            self._dormant_split()
        if self.lockstep:
            # one logical core: the software interrupt hits the group
            for c in self.cores:
                c.mip = (c.mip | MIP_MSIP) if value else (c.mip & ~MIP_MSIP)
        else:
            c = self.cores[hart]
            c.mip = (c.mip | MIP_MSIP) if value else (c.mip & ~MIP_MSIP)

    def request_resync(self) -> None:
        """Raise the resync interrupt as a mismatch would (test hook)."""
        if self.dorm_hart >= 0:
            self._dormant_split()
        o = self.odrg
        if o.resync_state == RESYNC_IDLE:
            o.resync_state = RESYNC_REQUESTED
            if self.cycle - o.last_done_cycle <= RESYNC_HEALTHY_GAP:
                o.resync_streak += 1
            else:
                o.resync_streak = 1
            if o.resync_streak >= RESYNC_STREAK_LIMIT:
                self.running = False
                self.unrecoverable = True
                return
            for c in self.cores:
                c.mip |= MIP_MEIP

    def _resync_reset_pulse(self) -> None:
        """Guest wrote the trigger register: reset all three cores."""
        o = self.odrg
        o.resync_state = RESYNC_IN_PROGRESS
        self.dorm_hart = -1
        self.dorm_regs = 0
        self.dorm_csrs = 0
        self.dorm_vals = {}
        for c in self.cores:
            c.mip &= ~MIP_MEIP
        hartid_all = 0 if self.lockstep else None
        for i, c in enumerate(self.cores):
            c.reset(ROM_BASE, hartid=hartid_all if hartid_all is not None else i)
        for p in (*self.vports, *(q for pair in self.cports for q in pair)):
            p.clear()
        if self.lockstep:
            self.converged = True
        self._wire_ports()
        for core, ip, _dp in self.active:
            self._post_fetch(core, ip)

    def _resync_done(self) -> None:
        o = self.odrg
        o.resync_state = RESYNC_DONE
        o.resync_events += 1
        o.last_done_cycle = self.cycle
        self._done_pending = True

    # ------------------------------------------------------ fault hooks

    CORE_FAULT_LOCS = tuple(f"x{i}" for i in range(1, 32)) + (
        "pc", "mstatus", "mtvec", "mepc", "mcause", "mtval", "mie",
        "mscratch", "mcycle", "minstret")

    def materialize(self) -> None:
        """Make cores 1/2 real (they mirror core 0 on the fast path)."""
        if self.dorm_hart >= 0:
            self._dormant_split()
            return
        if self.lockstep and self.converged:
            for c in self.cores[1:]:
                c.copy_from(self.cores[0])

    def split(self) -> None:
        """Leave the converged fast path; cores step individually."""
        if not (self.lockstep and self.converged):
            return
        self.materialize()
        for i in range(3):
            self.cports[i][0].copy_from(self.vports[0])
            self.cports[i][1].copy_from(self.vports[1])
        self.converged = False
        self._wire_ports()
        self._diverge_check_at = self.cycle + CONVERGENCE_CHECK_PERIOD

    def _try_collapse(self) -> None:
        now = self.cycle
        k0 = self.cores[0].state_key(now)
        if (k0 != self.cores[1].state_key(now)
                or k0 != self.cores[2].state_key(now)):
            return
        p0 = (self.cports[0][0].state_tuple(), self.cports[0][1].state_tuple())
        for i in (1, 2):
            if (self.cports[i][0].state_tuple(),
                    self.cports[i][1].state_tuple()) != p0:
                return
        self.vports[0].load_state(p0[0])
        self.vports[1].load_state(p0[1])
        self.converged = True
        self._wire_ports()

    def inject_core_fault(self, hart: int, loc: str, bit: int) -> None:
        """Flip one bit of architectural core state (scan-chain style)."""
        if loc not in self.CORE_FAULT_LOCS:
            raise ValueError(f"bad fault location: {loc!r}")
        if not 0 <= bit < 32:
            raise ValueError(f"bad fault bit: {bit}")
        if (self.lockstep and self.converged and self.config.dormant_opt
                and loc != "pc" and self.dorm_hart in (-1, hart)):
            self._dormant_inject(hart, loc, bit)
            return
        if self.lockstep:
            if self.dorm_hart >= 0:
                self._dormant_split()
            self.split()
        c = self.cores[hart]
        m = 1 << bit
        now = self.cycle
        if loc == "pc":
            c.pc ^= m
        elif loc.startswith("x"):
            c.regs[int(loc[1:])] ^= m
        elif loc == "mcycle":
            c.mcycle_base = now - (c.mcycle(now) ^ m)
        elif loc == "minstret":
            c.minstret ^= m
        else:
            setattr(c, loc, getattr(c, loc) ^ m)

    # A single-bit fault in a location nothing is reading cannot change
    # any core output, so the converged fast path may keep running with
    # the deviation carried on the side.  The group splits into real
    # 3-way stepping the moment an instruction reads a deviating
    # location, any trap or interrupt line fires, or a second core gets
    # faulted; a write to the deviating location erases it (both sides
    # would write identical data), possibly re-converging the group.

    def _dormant_inject(self, hart: int, loc: str, bit: int) -> None:
        self.dorm_hart = hart
        vals = self.dorm_vals
        c0 = self.cores[0]
        m = 1 << bit
        if loc.startswith("x"):
            idx = int(loc[1:])
            maj = c0.regs[idx]
            new = vals.get(loc, maj) ^ m
            if new == maj:
                vals.pop(loc, None)
                self.dorm_regs &= ~(1 << idx)
            else:
                vals[loc] = new
                self.dorm_regs |= 1 << idx
        elif loc == "mcycle":
            now = self.cycle
            maj_base = c0.mcycle_base
            cur_base = vals.get(loc, maj_base)
            new_base = now - ((now - cur_base) ^ m)
            if new_base == maj_base:
                vals.pop(loc, None)
                self.dorm_csrs &= ~CT_MCYCLE
            else:
                vals[loc] = new_base
                self.dorm_csrs |= CT_MCYCLE
        elif loc == "minstret":
            maj = c0.minstret
            delta = ((maj + vals.get(loc, 0)) ^ m) - maj
            if delta == 0:
                vals.pop(loc, None)
                self.dorm_csrs &= ~CT_MINSTRET
            else:
                vals[loc] = delta
                self.dorm_csrs |= CT_MINSTRET
        else:
            tag = CORE_LOC_TAGS[loc]
            maj = getattr(c0, loc)
            new = vals.get(loc, maj) ^ m
            if new == maj:
                vals.pop(loc, None)
                self.dorm_csrs &= ~tag
            else:
                vals[loc] = new
                self.dorm_csrs |= tag
        if not vals:
            self.dorm_hart = -1
            self.dorm_regs = 0
            self.dorm_csrs = 0

    def _dormant_split(self) -> None:
        """Materialize the carried fault and enter real 3-way stepping."""
        hart = self.dorm_hart
        vals = self.dorm_vals
        self.dorm_hart = -1
        self.dorm_regs = 0
        self.dorm_csrs = 0
        self.dorm_vals = {}
        self.split()
        minority = self.cores[hart]
        for loc, v in vals.items():
            if loc.startswith("x"):
                minority.regs[int(loc[1:])] = v
            elif loc == "mcycle":
                minority.mcycle_base = v
            elif loc == "minstret":
                minority.minstret += v
            else:
                setattr(minority, loc, v)

    def _dormant_erase(self, wr: int, cw: int) -> None:
        vals = self.dorm_vals
        hit = wr & self.dorm_regs
        while hit:
            low = hit & -hit
            vals.pop(f"x{low.bit_length() - 1}", None)
            hit ^= low
        self.dorm_regs &= ~wr
        if cw & self.dorm_csrs:
            for loc, tag in CORE_LOC_TAGS.items():
                if cw & tag:
                    vals.pop(loc, None)
            self.dorm_csrs &= ~cw
        if not vals:
            self.dorm_hart = -1
            self.dorm_regs = 0
            self.dorm_csrs = 0

    def _dormant_replay(self, port: Port, now: int) -> None:
        """Un-consume a just-granted response, split, and re-run this
        cycle's core step 3-way so the replay lands in the same cycle
        the converged path would have used."""
        port.has_resp = True
        self._dormant_split()
        self.vports[0].has_resp = False
        self.vports[1].has_resp = False
        for core, sip, sdp in self.active:
            self._tick_core(core, sip, sdp, now)
        if self.running and self.lockstep and not self.converged:
            self._vote_cycle(now)

    def _trap_all_or_one(self, c: Core, cause: int, tval: int) -> None:
        """Synchronous trap after architectural mutation: when a dormant
        fault is pending every core reached this point identically, so
        split and let each take the trap with its own state."""
        if self.dorm_hart >= 0:
            self._dormant_split()
            for core in self.cores:
                core.take_trap(cause, tval, core.cur_pc)
                core.phase = PH_EX
                core.exec_left = 1
                core.exec_retire = False
            return
        self._enter_trap(c, cause, tval)

    # ------------------------------------------------------ cycle engine

    def _post_fetch(self, c: Core, ip: Port) -> None:
        pc = c.pc
        c.cur_pc = pc
        word_addr = pc & ~3 & M32
        region, bank, row = self._route(word_addr)
        if region == R_DEV:
            region = R_NONE  # register pages are not executable
        ip.want(region, bank, row, word_addr)
        c.phase = PH_F0

    def _retire(self, c: Core, now: int) -> None:
        c.minstret += 1
        rd = c.cur_rd
        if self.rec_trace:
            self.tracebuf += _TRACE_REC.pack(
                now, c.mhartid, c.cur_pc, c.cur_word & M32, rd, c.regs[rd])
        if self.trace_lines is not None:
            self.trace_lines.append(
                f"{now} {c.mhartid} {c.cur_pc:#010x} {c.cur_word & M32:#010x} "
                f"{c.cur_mnem} x{rd}={c.regs[rd]:#010x}")

    def _boundary(self, c: Core, ip: Port, now: int, retire: bool) -> None:
        if retire:
            self._retire(c, now)
        if c.mstatus & MSTATUS_MIE:
            irq = c.pending_interrupt()
            if irq:
                c.take_trap(irq, 0, c.pc)
                c.phase = PH_EX
                c.exec_left = 1
                c.exec_retire = False
                return
        self._post_fetch(c, ip)

    def _enter_trap(self, c: Core, cause: int, tval: int) -> None:
        c.take_trap(cause, tval, c.cur_pc)
        c.phase = PH_EX
        c.exec_left = 1
        c.exec_retire = False

    def _issue_data(self, c: Core, ip: Port, dp: Port, kind: int, now: int) -> None:
        """Route a load (kind 2) or store (kind 3) onto the data port."""
        addr = c.ev_addr
        region, bank, row = self._route(addr)
        if kind == 2:
            if dp.pending:
                c.phase = PH_DW
                c.dw_kind = 2
                return
            dp.want(region, bank, row, addr)
            c.phase = PH_LD
            return
        # store: position the data lanes, fault unmapped/ROM targets now
        if region == R_ROM or region == R_NONE:
            self._trap_all_or_one(c, EXC_SACCESS_FAULT, addr)
            return
        if dp.pending:
            c.phase = PH_DW
            c.dw_kind = 3
            return
        f3 = c.ev_f3
        val = c.ev_val
        if f3 == 2:
            strobes, wdata = 0xF, val
        elif f3 == 1:
            sh = addr & 2
            strobes, wdata = 0x3 << sh, (val & 0xFFFF) << (sh * 8)
        else:
            b = addr & 3
            strobes, wdata = 1 << b, (val & 0xFF) << (b * 8)
        dp.want(region, bank, row, addr & ~3, True, wdata, strobes)
        self._boundary(c, ip, now, True)

    def _dispatch(self, c: Core, ip: Port, dp: Port, entry: tuple, now: int) -> None:
        if self.dorm_hart >= 0:
            if (entry[7] & self.dorm_regs) or (entry[9] & self.dorm_csrs) \
                    or c.mip:
                # the carried fault is about to be read: undo the fetch
                # consume and restart this instruction 3-way this cycle
                self._dormant_replay(ip, now)
                return
        c.cur_word = entry[4]
        c.cur_rd = entry[5]
        c.cur_mnem = entry[6]
        code = entry[0](c)
        if code == 0 or code == 1:
            if self.dorm_hart >= 0 and ((entry[8] & self.dorm_regs)
                                        or (entry[10] & self.dorm_csrs)):
                self._dormant_erase(entry[8], entry[10])
            if code == 0:
                self._boundary(c, ip, now, True)
            else:
                c.phase = PH_EX
                c.exec_left = c.ev_extra
                c.exec_retire = True
        elif code == 2 or code == 3:
            self._issue_data(c, ip, dp, code, now)
        elif code == 4:
            self._retire(c, now)
            c.sleeping = True
            c.phase = PH_F0
        else:
            if self.dorm_hart >= 0:
                # no architectural mutation yet: replay the fetch 3-way
                self._dormant_replay(ip, now)
                return
            self._enter_trap(c, c.ev_cause, c.ev_tval)

    def _consume_fetch(self, c: Core, ip: Port, dp: Port, now: int) -> None:
        val, status = ip.take_resp()
        if status >= RS_UNCORRECTABLE:
            if self.dorm_hart >= 0:
                self._dormant_replay(ip, now)
                return
            self._enter_trap(c, EXC_IACCESS_FAULT, c.cur_pc)
            return
        pc = c.cur_pc
        if c.phase == PH_F0:
            entry = self.dcache.get(pc)
            if entry is not None and entry[2] == val:
                if entry[1] == 1:
                    self._dispatch(c, ip, dp, entry, now)
                    return
                # spanning instruction: second word still fetched each time
                c.pend_entry = entry
                c.w0_stash = val
                c.half_stash = val >> 16
                region, bank, row = self._route((pc & ~3) + 4)
                ip.want(region, bank, row, (pc & ~3) + 4)
                c.phase = PH_F1
                return
            half = (val >> 16) if pc & 2 else (val & 0xFFFF)
            if half & 3 != 3:
                op, rd, mnem = decode16(half, pc)
                entry = (op, 1, val, 0, half, rd, mnem) + rw_sets(half, 2)
                self.dcache[pc] = entry
                self._dispatch(c, ip, dp, entry, now)
                return
            if not pc & 2:
                op, rd, mnem = decode32(val, pc)
                entry = (op, 1, val, 0, val, rd, mnem) + rw_sets(val, 4)
                self.dcache[pc] = entry
                self._dispatch(c, ip, dp, entry, now)
                return
            c.pend_entry = None
            c.w0_stash = val
            c.half_stash = half
            region, bank, row = self._route((pc & ~3) + 4)
            ip.want(region, bank, row, (pc & ~3) + 4)
            c.phase = PH_F1
            return
        # PH_F1
        entry = c.pend_entry
        c.pend_entry = None
        if entry is not None and entry[3] == val:
            self._dispatch(c, ip, dp, entry, now)
            return
        word = (c.half_stash | ((val & 0xFFFF) << 16)) & M32
        op, rd, mnem = decode32(word, pc)
        entry = (op, 2, c.w0_stash, val, word, rd, mnem) + rw_sets(word, 4)
        self.dcache[pc] = entry
        self._dispatch(c, ip, dp, entry, now)

    _LOAD_SIGN = {0: 0xFF, 1: 0xFFFF}

    def _consume_load(self, c: Core, dp: Port, ip: Port, now: int) -> None:
        val, status = dp.take_resp()
        if status >= RS_UNCORRECTABLE:
            if self.dorm_hart >= 0:
                self._dormant_replay(dp, now)
                return
            self._enter_trap(c, EXC_LACCESS_FAULT, c.ev_addr)
            return
        f3 = c.ev_f3
        if f3 != 2:
            addr = c.ev_addr
            if f3 & 1:  # lh/lhu
                v = (val >> ((addr & 2) * 8)) & 0xFFFF
                if f3 == 1 and v & 0x8000:
                    v |= 0xFFFF0000
            else:       # lb/lbu
                v = (val >> ((addr & 3) * 8)) & 0xFF
                if f3 == 0 and v & 0x80:
                    v |= 0xFFFFFF00
            val = v
        rd = c.ev_rd
        if rd:
            c.regs[rd] = val
            if (1 << rd) & self.dorm_regs:
                self._dormant_erase(1 << rd, 0)
        self._boundary(c, ip, now, True)

    def _tick_core(self, c: Core, ip: Port, dp: Port, now: int) -> None:
        if c.sleeping:
            if c.wake_pulse or (c.mip & c.mie):
                c.sleeping = False
                c.wake_pulse = False
                self._boundary(c, ip, now, False)
            return
        # stray store acks clear silently; loads consume below
        if dp.has_resp and c.phase != PH_LD:
            dp.has_resp = False
        ph = c.phase
        if ph == PH_F0 or ph == PH_F1:
            if ip.has_resp:
                self._consume_fetch(c, ip, dp, now)
            return
        if ph == PH_EX:
            c.exec_left -= 1
            if c.exec_left <= 0:
                self._boundary(c, ip, now, c.exec_retire)
            return
        if ph == PH_LD:
            if dp.has_resp:
                self._consume_load(c, dp, ip, now)
            return
        # PH_DW: waiting for the data port to drain a posted store
        if not dp.pending:
            self._issue_data(c, ip, dp, c.dw_kind, now)

    def _bus_cycle(self, now: int) -> None:
        """H1: arbitration plus memory/device operation execution."""
        sram_single = None
        sram_multi = None
        banks = self.banks.banks
        for p in self.bus_ports:
            if not p.pending or p.has_resp:
                continue
            region = p.region
            if region == R_SRAM:
                if sram_single is None:
                    sram_single = p
                else:
                    if sram_multi is None:
                        sram_multi = [sram_single]
                    sram_multi.append(p)
                continue
            if region == R_ROM:
                p.respond(self.rom[p.row] if p.row < len(self.rom) else 0, RS_OK)
            elif region == R_DEV:
                if p.is_write:
                    self._dev_write(p.addr, p.wdata)
                    p.respond(0, RS_OK)
                else:
                    v = self._dev_read(p.addr)
                    if v is None:
                        p.respond(0, RS_FAULT)
                    else:
                        p.respond(v & M32, RS_OK)
            else:
                p.respond(0, RS_FAULT)
        if sram_multi is None:
            if sram_single is not None:
                p = sram_single
                bank = banks[p.bank]
                if bank.busy_until < now:
                    self._bank_op(p, bank, now)
        else:
            by_bank: dict[int, list[Port]] = {}
            for p in sram_multi:
                by_bank.setdefault(p.bank, []).append(p)
            for bank_idx, plist in by_bank.items():
                bank = banks[bank_idx]
                if bank.busy_until >= now:
                    continue
                winner = plist[0] if len(plist) == 1 else \
                    self.xbar.arbitrate(plist, bank_idx)
                self._bank_op(winner, bank, now)
        s = self.scrub
        if s.enabled and now >= s.next_cycle and self.running:
            target = s.target_bank()
            blocked = banks[target].busy_until >= now
            if not blocked:
                for p in self.bus_ports:
                    if p.pending and p.region == R_SRAM and p.bank == target:
                        blocked = True
                        break
            if not blocked:
                s.step(self.banks)
            s.next_cycle = now + s.interval

    @staticmethod
    def _bank_op(p: Port, bank: mem.Bank, now: int) -> None:
        if p.is_write:
            bank.write(p.row, p.wdata, p.strobes)
            if p.strobes != 0xF:
                bank.busy_until = now + 1
            p.pending = False
            p.has_resp = True
            p.resp_val = 0
            p.resp_status = RS_OK
        else:
            data, status = bank.read(p.row)
            p.respond(data, status)

    def _vote_cycle(self, now: int) -> None:
        """Majority-vote the shadow request bundles into the real ports."""
        bundles = []
        for i in range(3):
            d, ins = self.cports[i]
            bundles.append((ins.request_tuple(), d.request_tuple()))
        vr = vote(*bundles)
        if vr.disagreeing == ALL_DIFFER:
            self.running = False
            self.unrecoverable = True
            return
        if vr.disagreeing is not None:
            o = self.odrg
            o.mismatch_count[vr.disagreeing] += 1
            if o.resync_state == RESYNC_IDLE:
                self.request_resync()
        maj_i, maj_d = vr.value
        vd, vi = self.vports
        if maj_i is None:
            vi.pending = False
        elif not vi.pending or vi.request_tuple() != maj_i:
            vi.want(*maj_i)
        if maj_d is None:
            vd.pending = False
        elif not vd.pending or vd.request_tuple() != maj_d:
            vd.want(*maj_d)

    def _broadcast_resps(self) -> None:
        """Deliver voted-port responses to every shadow port."""
        for real, idx in ((self.vports[1], 1), (self.vports[0], 0)):
            if real.has_resp:
                for i in range(3):
                    sp = self.cports[i][idx]
                    if sp.pending:
                        sp.pending = False
                        sp.has_resp = True
                        sp.resp_val = real.resp_val
                        sp.resp_status = real.resp_status
                real.has_resp = False
                real.pending = False

    # ------------------------------------------------------------- run

    def run(self, stop_at: int | None = None) -> RunResult | None:
        """Advance until guest exit, error, timeout, or ``stop_at``.

        Returns the RunResult when the run finished, or None when
        paused at ``stop_at`` (fault-injection boundary).
        """
        if not self.loaded:
            raise RuntimeError("no program loaded")
        limit = self.config.max_cycles
        fast = self.config.fast_loop
        cycle = self.cycle
        while self.running:
            if cycle >= limit:
                self.timed_out = True
                break
            if stop_at is not None and cycle >= stop_at:
                self.cycle = cycle
                return None
            if fast and len(self.active) == 1:
                c, ip, dp = self.active[0]
                if (c.phase == PH_F0 and ip.pending and not ip.has_resp
                        and not dp.pending and not c.sleeping):
                    self._fast_burst(stop_at, limit)
                    cycle = self.cycle
                    if not self.running or cycle >= limit or \
                            (stop_at is not None and cycle >= stop_at):
                        continue
            cycle += 1
            self.cycle = cycle
            self._bus_cycle(cycle)
            if self.lockstep and not self.converged:
                self._broadcast_resps()
                for c, ip, dp in self.active:
                    self._tick_core(c, ip, dp, cycle)
                if self.running:
                    self._vote_cycle(cycle)
                    if self._done_pending:
                        self._done_pending = False
                    if self.odrg.resync_state == RESYNC_DONE:
                        self.odrg.resync_state = RESYNC_IDLE
                    if (self.converged is False and self.running
                            and cycle >= self._diverge_check_at):
                        self._try_collapse()
                        self._diverge_check_at = cycle + CONVERGENCE_CHECK_PERIOD
            else:
                for c, ip, dp in self.active:
                    self._tick_core(c, ip, dp, cycle)
                if self._done_pending:
                    self._done_pending = False
                    self.odrg.resync_state = RESYNC_IDLE
                    if self.lockstep and not self.converged:
                        self._try_collapse()
            if self.odrg.pending_mode is not None:
                self._maybe_switch_mode()
            if self.running:
                self._maybe_skip_idle(cycle, stop_at, limit)
                cycle = self.cycle
        self.cycle = cycle
        return self._finalize()

    def _fast_burst(self, stop_at: int | None, limit: int) -> None:
        """Fused single-core execution between scheduler events.

        Exact shortcut of the general H1/H2 loop for the common case
        (one active core in fetch phase, idle data port): whole
        instructions are processed with local state, and the loop falls
        back to the general engine at any complication, always leaving
        the SoC in a valid end-of-cycle state.  A burst never crosses a
        scrubber tick, ``stop_at``, or the cycle limit, so hidden local
        requests can never be observed by anything else.
        """
        c, ip, dp = self.active[0]
        banks = self.banks.banks
        rom = self.rom
        dget = self.dcache.get
        rec = self.rec_trace
        lines = self.trace_lines
        pack = _TRACE_REC.pack
        scrub = self.scrub
        big = 1 << 62
        allowed = min(limit,
                      (scrub.next_cycle - 1) if scrub.enabled else big,
                      stop_at if stop_at is not None else big)
        cy = self.cycle
        pc = c.pc
        m32 = M32
        sram_lo, sram_hi = SRAM_BASE, SRAM_END
        rom_lo, rom_hi = ROM_BASE, ROM_END
        hart = c.mhartid

        while True:
            f = cy + 1
            if f > allowed:
                break
            wa = pc & ~3
            if sram_lo <= wa < sram_hi:
                widx = (wa - sram_lo) >> 2
                bank = banks[widx & 7]
                row = widx >> 3
                if bank.busy_until >= f or (bank.tainted and row in bank.tainted):
                    break
                val = bank.cws[row] & m32
            elif rom_lo <= wa < rom_hi:
                val = rom[(wa - rom_lo) >> 2]
            else:
                break
            entry = dget(pc)
            if entry is None or entry[2] != val:
                break
            if self.dorm_hart >= 0 and ((entry[7] & self.dorm_regs)
                                        or (entry[9] & self.dorm_csrs)):
                self.cycle = cy
                self._post_fetch(c, ip)
                self._dormant_split()
                return
            if entry[1] == 2:
                f2 = f + 1
                wa2 = wa + 4
                if f2 > allowed or not sram_lo <= wa2 < sram_hi:
                    break
                widx2 = (wa2 - sram_lo) >> 2
                bank2 = banks[widx2 & 7]
                row2 = widx2 >> 3
                if bank2.busy_until >= f2 or \
                        (bank2.tainted and row2 in bank2.tainted):
                    break
                if entry[3] != bank2.cws[row2] & m32:
                    break
                f = f2
            cy = f
            self.cycle = f
            c.cur_pc = pc
            c.cur_word = entry[4]
            c.cur_rd = entry[5]
            code = entry[0](c)
            if self.dorm_csrs | self.dorm_regs and code < 2 and \
                    ((entry[8] & self.dorm_regs) or (entry[10] & self.dorm_csrs)):
                self._dormant_erase(entry[8], entry[10])

            if code == 0:
                rd = entry[5]
                c.minstret += 1
                if rec:
                    self.tracebuf += pack(cy, hart, pc, entry[4] & m32,
                                          rd, c.regs[rd])
                if lines is not None:
                    c.cur_mnem = entry[6]
                    lines.append(
                        f"{cy} {hart} {pc:#010x} {entry[4] & m32:#010x} "
                        f"{entry[6]} x{rd}={c.regs[rd]:#010x}")
                if c.mip & c.mie and c.mstatus & MSTATUS_MIE:
                    ip.pending = False
                    ip.has_resp = False
                    self._boundary(c, ip, cy, False)
                    return
                pc = c.pc
                continue

            if code == 1:
                extra = c.ev_extra
                if cy + extra > allowed:
                    c.phase = PH_EX
                    c.exec_left = extra
                    c.exec_retire = True
                    ip.pending = False
                    ip.has_resp = False
                    return
                cy += extra
                self.cycle = cy
                rd = entry[5]
                c.minstret += 1
                if rec:
                    self.tracebuf += pack(cy, hart, pc, entry[4] & m32,
                                          rd, c.regs[rd])
                if lines is not None:
                    c.cur_mnem = entry[6]
                    lines.append(
                        f"{cy} {hart} {pc:#010x} {entry[4] & m32:#010x} "
                        f"{entry[6]} x{rd}={c.regs[rd]:#010x}")
                if c.mip & c.mie and c.mstatus & MSTATUS_MIE:
                    ip.pending = False
                    ip.has_resp = False
                    self._boundary(c, ip, cy, False)
                    return
                pc = c.pc
                continue

            if code == 2:  # load
                addr = c.ev_addr
                d = cy + 1
                if sram_lo <= addr < sram_hi:
                    widx = (addr - sram_lo) >> 2
                    bank = banks[widx & 7]
                    row = widx >> 3
                    while bank.busy_until >= d:
                        d += 1
                    if d > allowed or (bank.tainted and row in bank.tainted
                                       and self.dorm_hart >= 0):
                        ip.pending = False
                        ip.has_resp = False
                        dp.want(R_SRAM, widx & 7, row, addr)
                        c.phase = PH_LD
                        self.cycle = cy
                        if self.dorm_hart >= 0 and bank.tainted and \
                                row in bank.tainted:
                            self._dormant_split()
                        return
                    if bank.tainted and row in bank.tainted:
                        data, status = bank.read(row)
                        if status == mem.UNCORRECTABLE:
                            cy = d
                            self.cycle = d
                            ip.pending = False
                            ip.has_resp = False
                            self._enter_trap(c, EXC_LACCESS_FAULT, addr)
                            return
                    else:
                        data = bank.cws[row] & m32
                elif rom_lo <= addr < rom_hi:
                    if d > allowed:
                        ip.pending = False
                        ip.has_resp = False
                        dp.want(R_ROM, 0, ((addr & ~3) - rom_lo) >> 2, addr)
                        c.phase = PH_LD
                        self.cycle = cy
                        return
                    data = rom[((addr & ~3) - rom_lo) >> 2]
                else:
                    region, bk, rw = self._route(addr)
                    ip.pending = False
                    ip.has_resp = False
                    dp.want(region, bk, rw, addr)
                    c.phase = PH_LD
                    self.cycle = cy
                    if self.dorm_hart >= 0:
                        self._dormant_split()
                    return
                cy = d
                self.cycle = d
                f3 = c.ev_f3
                if f3 != 2:
                    if f3 & 1:
                        v = (data >> ((addr & 2) * 8)) & 0xFFFF
                        if f3 == 1 and v & 0x8000:
                            v |= 0xFFFF0000
                    else:
                        v = (data >> ((addr & 3) * 8)) & 0xFF
                        if f3 == 0 and v & 0x80:
                            v |= 0xFFFFFF00
                    data = v
                rd = c.ev_rd
                if rd:
                    c.regs[rd] = data
                    if (1 << rd) & self.dorm_regs:
                        self._dormant_erase(1 << rd, 0)
                c.minstret += 1
                if rec:
                    self.tracebuf += pack(cy, hart, pc, entry[4] & m32,
                                          rd, c.regs[rd])
                if lines is not None:
                    c.cur_mnem = entry[6]
                    lines.append(
                        f"{cy} {hart} {pc:#010x} {entry[4] & m32:#010x} "
                        f"{entry[6]} x{rd}={c.regs[rd]:#010x}")
                if c.mip & c.mie and c.mstatus & MSTATUS_MIE:
                    ip.pending = False
                    ip.has_resp = False
                    self._boundary(c, ip, cy, False)
                    return
                pc = c.pc
                continue

            if code == 3:  # store
                addr = c.ev_addr
                f3 = c.ev_f3
                val = c.ev_val
                if f3 == 2:
                    strobes, wdata = 0xF, val
                elif f3 == 1:
                    sh = addr & 2
                    strobes, wdata = 0x3 << sh, (val & 0xFFFF) << (sh * 8)
                else:
                    bsel = addr & 3
                    strobes, wdata = 1 << bsel, (val & 0xFF) << (bsel * 8)
                if sram_lo <= addr < sram_hi:
                    widx = (addr - sram_lo) >> 2
                    bidx = widx & 7
                    bank = banks[bidx]
                    row = widx >> 3
                    g = cy + 1
                    while bank.busy_until >= g:
                        g += 1
                    if g > allowed:
                        dp.want(R_SRAM, bidx, row, addr & ~3, True, wdata, strobes)
                        ip.pending = False
                        ip.has_resp = False
                        self._fast_retire_and_fetch(c, ip, cy, pc, entry)
                        return
                    bank.write(row, wdata, strobes)
                    if strobes != 0xF:
                        bank.busy_until = g + 1
                    c.minstret += 1
                    if rec:
                        self.tracebuf += pack(cy, hart, pc, entry[4] & m32,
                                              0, 0)
                    if lines is not None:
                        c.cur_mnem = entry[6]
                        lines.append(
                            f"{cy} {hart} {pc:#010x} {entry[4] & m32:#010x} "
                            f"{entry[6]} x0=0x00000000")
                    if c.mip & c.mie and c.mstatus & MSTATUS_MIE:
                        ip.pending = False
                        ip.has_resp = False
                        self._boundary(c, ip, cy, False)
                        return
                    pc = c.pc
                    nwa = pc & ~3
                    if sram_lo <= nwa < sram_hi and \
                            ((nwa - sram_lo) >> 2) & 7 == bidx:
                        # next fetch loses arbitration to the posted write
                        self.xbar.conflict_stalls += 1
                        cy = g if strobes == 0xF else g + 1
                    continue
                # device store (or fault): let the general engine run it
                region, bk, rw = self._route(addr)
                if region == R_ROM or region == R_NONE:
                    ip.pending = False
                    ip.has_resp = False
                    self._trap_all_or_one(c, EXC_SACCESS_FAULT, addr)
                    return
                dp.want(region, bk, rw, addr, True, wdata, strobes)
                ip.pending = False
                ip.has_resp = False
                self._fast_retire_and_fetch(c, ip, cy, pc, entry)
                return

            if code == 4:  # wfi
                c.minstret += 1
                if rec:
                    self.tracebuf += pack(cy, hart, pc, entry[4] & m32, 0, 0)
                if lines is not None:
                    c.cur_mnem = entry[6]
                    lines.append(
                        f"{cy} {hart} {pc:#010x} {entry[4] & m32:#010x} "
                        f"{entry[6]} x0=0x00000000")
                c.sleeping = True
                c.phase = PH_F0
                ip.pending = False
                ip.has_resp = False
                return

            # code 5: synchronous trap
            ip.pending = False
            ip.has_resp = False
            self._trap_all_or_one(c, c.ev_cause, c.ev_tval)
            return

        # break: nothing consumed for the current pc; repost and let the
        # general engine take the next cycle
        self.cycle = cy
        self._post_fetch(c, ip)

    def _fast_retire_and_fetch(self, c: Core, ip: Port, cy: int, pc: int,
                               entry: tuple) -> None:
        """Retire a store posted by the fast path, then schedule the
        next fetch (general-engine state)."""
        c.cur_mnem = entry[6]
        self._retire(c, cy)
        if c.mip & c.mie and c.mstatus & MSTATUS_MIE:
            self._boundary(c, ip, cy, False)
            return
        self._post_fetch(c, ip)

    def _maybe_switch_mode(self) -> None:
        """Apply a pending mode change at the sleep barrier."""
        if self.lockstep and not self.converged:
            return
        for c, _ip, _dp in self.active:
            if not c.sleeping:
                return
        for _c, ip, dp in self.active:
            if ip.pending or dp.pending:
                return
        want = self.odrg.pending_mode
        self.odrg.pending_mode = None
        if want == MODE_PERFORMANCE and self.lockstep:
            self.materialize()
            self.odrg.mode = MODE_PERFORMANCE
            self.lockstep = False
            for i, c in enumerate(self.cores):
                c.mhartid = i
                c.held = False
                c.wake_pulse = True
            for p in (*self.vports, *(q for pair in self.cports for q in pair)):
                p.clear()
            self._wire_ports()
        elif want == MODE_LOCKSTEP and not self.lockstep:
            self.odrg.mode = MODE_LOCKSTEP
            self.lockstep = True
            self.converged = True
            for c in self.cores:
                c.reset(ROM_BASE, hartid=0)
            for p in (*self.vports, *(q for pair in self.cports for q in pair)):
                p.clear()
            self._wire_ports()
            for core, ip, _dp in self.active:
                self._post_fetch(core, ip)

    def _maybe_skip_idle(self, cycle: int, stop_at: int | None, limit: int) -> None:
        """Jump the clock across provably idle stretches (wfi parking)."""
        for c, ip, dp in self.active:
            if not c.sleeping or c.wake_pulse or ip.pending or dp.pending:
                return
        targets = [limit]
        if self.scrub.enabled:
            targets.append(self.scrub.next_cycle)
        if stop_at is not None:
            targets.append(stop_at)
        nxt = min(targets)
        if nxt > cycle + 1:
            self.cycle = nxt - 1

    # ------------------------------------------------------- results

    def outputs_digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.banks.logical_image())
        h.update(bytes(self.uart_out))
        h.update(struct.pack("<iI", -1 if self.exit_code is None else 1,
                             (self.exit_code or 0) & M32))
        h.update(struct.pack("<I", self.checksum_reg & M32))
        return h.hexdigest()

    def _finalize(self) -> RunResult:
        if self.dorm_hart >= 0:
            self._dormant_split()
        self.materialize()
        counters = self.banks.counters()
        return RunResult(
            mode=self.config.mode,
            cycles=self.cycle,
            exit_code=self.exit_code,
            timed_out=self.timed_out,
            unrecoverable=self.unrecoverable,
            checksum=self.checksum_reg,
            uart=bytes(self.uart_out),
            instret=[c.minstret for c in self.cores],
            mismatch_count=list(self.odrg.mismatch_count),
            resync_events=self.odrg.resync_events,
            ecc_correctable=counters["correctable"],
            ecc_uncorrectable=counters["uncorrectable"],
            scrub_corrections=self.scrub.corrections,
            scrub_uncorrectable=self.scrub.uncorrectable_seen,
            latent_uncorrectable=self.banks.latent_uncorrectable(),
            conflict_stalls=self.xbar.conflict_stalls,
            trace_hash=hashlib.sha256(bytes(self.tracebuf)).hexdigest()
            if self.rec_trace else None,
            outputs_digest=self.outputs_digest(),
            trace_lines=self.trace_lines,
        )

    # ------------------------------------------------- snapshot/restore

    def snapshot(self) -> dict:
        if self.dorm_hart >= 0:
            self._dormant_split()
        self.materialize()
        return {
            "cycle": self.cycle,
            "flags": (self.running, self.exited, self.exit_code,
                      self.timed_out, self.unrecoverable, self.loaded,
                      self.entry, self.checksum_reg, self.lockstep,
                      self.converged, self._done_pending,
                      self._diverge_check_at),
            "uart": bytes(self.uart_out),
            "banks": self.banks.snapshot(),
            "scrub": self.scrub.snapshot(),
            "odrg": self.odrg.snapshot(),
            "xbar": self.xbar.snapshot(),
            "cores": [c.dump_state(self.cycle) for c in self.cores],
            "held": [c.held for c in self.cores],
            "wake": [c.wake_pulse for c in self.cores],
            "vports": [p.state_tuple() for p in self.vports],
            "cports": [[q.state_tuple() for q in pair] for pair in self.cports],
            "rom": list(self.rom),
        }

    def restore(self, snap: dict) -> None:
        self.cycle = snap["cycle"]
        (self.running, self.exited, self.exit_code, self.timed_out,
         self.unrecoverable, self.loaded, self.entry, self.checksum_reg,
         self.lockstep, self.converged, self._done_pending,
         self._diverge_check_at) = snap["flags"]
        self.uart_out = bytearray(snap["uart"])
        self.banks.restore(snap["banks"])
        self.scrub.restore(snap["scrub"])
        self.odrg.restore(snap["odrg"])
        self.xbar.restore(snap["xbar"])
        for c, state in zip(self.cores, snap["cores"]):
            c.load_state(state, self.cycle)
        for c, held in zip(self.cores, snap["held"]):
            c.held = held
        for c, wake in zip(self.cores, snap["wake"]):
            c.wake_pulse = wake
        for p, t in zip(self.vports, snap["vports"]):
            p.load_state(t)
        for pair, ts in zip(self.cports, snap["cports"]):
            for q, t in zip(pair, ts):
                q.load_state(t)
        self.rom = list(snap["rom"])
        self.tracebuf = bytearray()
        if self.trace_lines is not None:
            self.trace_lines = []
        self._wire_ports()
