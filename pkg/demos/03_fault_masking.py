#!/usr/bin/env python3
"""Corrupt a live register mid-flight and watch the lockstep group
detect the divergence, vote it away, and resynchronize — the program
still produces the golden result."""

from lockstep_mcu import kernels
from lockstep_mcu.soc import Soc, SocConfig

prog = kernels.matmul_kernel(24, "single")

golden = Soc(SocConfig(mode="lockstep", record_trace=False))
golden.load_program(prog)
gres = golden.run()
print(f"golden run : {gres.cycles} cycles, checksum {gres.checksum:#010x}")

soc = Soc(SocConfig(mode="lockstep", record_trace=False))
soc.load_program(prog)
soc.run(stop_at=50_000)
print("\n>>> injecting a bit flip into core 1's x21 (the B-matrix "
      "column pointer) at cycle 50000")
soc.inject_core_fault(hart=1, loc="x21", bit=7)
res = soc.run()

print(f"\nfaulty run : {res.cycles} cycles "
      f"(+{res.cycles - gres.cycles} for recovery)")
print(f"mismatch counters  : {res.mismatch_count} "
      f"(divergent cycles, charged to the minority core)")
print(f"resync round trips : {res.resync_events}")
print(f"checksum           : {res.checksum:#010x}")
print(f"outputs == golden  : {res.outputs_digest == gres.outputs_digest}")

print("\nThe same fault without redundancy (single-core mode):")
soc = Soc(SocConfig(mode="single", record_trace=False,
                    max_cycles=gres.cycles * 3))
soc.load_program(prog)
soc.run(stop_at=50_000)
soc.inject_core_fault(hart=0, loc="x21", bit=7)
res = soc.run()
corrupted = res.outputs_digest != gres.outputs_digest
state = "timed out (runaway loop)" if res.timed_out else f"exit={res.exit_code:#x}"
print(f"{state} checksum={res.checksum:#010x} corrupted={corrupted}")
