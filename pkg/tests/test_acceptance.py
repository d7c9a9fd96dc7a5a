"""Acceptance criteria, one test per criterion, pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion.  Reference cycle counts: 187337 (single-core 24x24
matmul) and 63130 (three-way parallel), +-25%; speedup band 2.80-3.10.
"""

import json
import random

from lockstep_mcu import ecc, kernels
from lockstep_mcu.campaign import (
    CampaignSpec, FaultEvent, run_campaign,
)
from lockstep_mcu.memory import TOTAL_WORDS
from lockstep_mcu.soc import Soc, SocConfig

SINGLE_REF = 187337
PARALLEL_REF = 63130
BAND = 0.25


def report(criterion, text):
    print(f"ACCEPTANCE {criterion}: PASS — {text}")


def test_01_speedup_reproduction(matmul24_single, matmul24_parallel):
    speedup = matmul24_single.cycles / matmul24_parallel.cycles
    assert 2.80 <= speedup <= 3.10, f"speedup {speedup:.3f} outside [2.80, 3.10]"
    report(1, f"parallel speedup {speedup:.2f}x within [2.80, 3.10]")


def test_02_cycle_count_proximity(matmul24_single, matmul24_parallel):
    single_dev = matmul24_single.cycles / SINGLE_REF - 1
    parallel_dev = matmul24_parallel.cycles / PARALLEL_REF - 1
    assert abs(single_dev) <= BAND, \
        f"single {matmul24_single.cycles} vs {SINGLE_REF}: {single_dev:+.1%}"
    assert abs(parallel_dev) <= BAND, \
        f"parallel {matmul24_parallel.cycles} vs {PARALLEL_REF}: {parallel_dev:+.1%}"
    report(2, f"single {matmul24_single.cycles} ({single_dev:+.1%} of "
              f"{SINGLE_REF}), parallel {matmul24_parallel.cycles} "
              f"({parallel_dev:+.1%} of {PARALLEL_REF})")


def test_03_lockstep_zero_overhead(matmul24_lockstep, matmul24_single):
    assert matmul24_lockstep.cycles == matmul24_single.cycles
    assert matmul24_lockstep.trace_hash == matmul24_single.trace_hash
    report(3, f"lockstep and single-core runs identical: "
              f"{matmul24_lockstep.cycles} cycles, equal trace hashes")


def test_04_ecc_exhaustive():
    m = ecc.matrix()
    assert all(c != 0 for c in m.columns)
    assert all(bin(c).count("1") % 2 == 1 for c in m.columns)
    assert len(set(m.columns)) == 39
    weights = m.row_weights()
    assert max(weights) - min(weights) <= 1

    rng = random.Random(2024)
    encode, decode_raw = ecc.encode, ecc.decode_raw
    words = [rng.getrandbits(32) for _ in range(1000)]
    flips = [1 << i for i in range(39)]
    pairs = [(1 << i) | (1 << j) for i in range(39) for j in range(i + 1, 39)]
    assert len(pairs) == 741
    miscorrections = 0
    for w in words:
        cw = encode(w)
        for f in flips:
            data, code, _pos = decode_raw(cw ^ f)
            if code != 1 or data != w:
                miscorrections += 1
        for p in pairs:
            if decode_raw(cw ^ p)[1] != 2:
                miscorrections += 1
    assert miscorrections == 0
    report(4, "1000 words x 39 single flips corrected, x 741 double flips "
              "detected, zero miscorrections; matrix invariants hold")


def test_05_single_fault_masking():
    golden = Soc(SocConfig(mode="lockstep", record_trace=False))
    golden.load_program(kernels.matmul_kernel(24, "single"))
    gres = golden.run()

    # exhaustive: one register (x10) x 32 bits x 50 evenly spaced cycles
    points = [round(gres.cycles * (i + 1) / 51) for i in range(50)]
    events = [FaultEvent(kind="core", at_cycle=at, hart=1, loc="x10", bit=b)
              for at in points for b in range(32)]
    sweep_spec = CampaignSpec(kernel="matmul24", mode="lockstep",
                              runs=len(events), seed=0,
                              explicit_events=events)
    sweep = run_campaign(sweep_spec)
    assert sweep["classes"]["silent_data_corruption"] == 0
    assert sweep["classes"]["crash"] == 0
    assert sweep["classes"]["timeout"] == 0
    masked = sweep["classes"]["masked_voter"] + sweep["classes"]["resynced"]
    assert masked == len(events)

    # plus 1000 uniformly random core-state upsets
    rand_spec = CampaignSpec(kernel="matmul24", mode="lockstep", runs=1000,
                             seed=20240, targets=("core",))
    rand = run_campaign(rand_spec)
    assert rand["classes"]["silent_data_corruption"] == 0
    assert rand["classes"]["crash"] == 0
    assert rand["classes"]["timeout"] == 0
    report(5, f"1600-run exhaustive sweep + 1000 random upsets: zero SDC, "
              f"zero crash ({sweep['classes']['resynced']} + "
              f"{rand['classes']['resynced']} resyncs, rest masked)")


def test_06_resync_round_trip():
    golden = Soc(SocConfig(mode="lockstep", record_trace=False))
    golden.load_program(kernels.matmul_kernel(24, "single"))
    gres = golden.run()

    soc = Soc(SocConfig(mode="lockstep", record_trace=False))
    soc.load_program(kernels.matmul_kernel(24, "single"))
    injected = 0
    for at in (30000, 90000, 150000):
        soc.run(stop_at=at)
        soc.inject_core_fault(2, "pc", 5)   # manifests immediately
        injected += 1
        soc.run(stop_at=at + 400)           # recovery completes
        soc.materialize()
        now = soc.cycle
        k0 = soc.cores[0].state_key(now)
        assert soc.cores[1].state_key(now) == k0
        assert soc.cores[2].state_key(now) == k0
    res = soc.run()
    assert res.exit_code == 0
    assert res.outputs_digest == gres.outputs_digest
    assert res.resync_events == injected
    report(6, f"{injected} injected divergences -> {res.resync_events} "
              f"resyncs, post-resync core dumps pairwise identical, "
              f"golden output")


def test_07_scrubber():
    # a latent flip with no guest traffic is corrected within one sweep
    interval = 64
    soc = Soc(SocConfig(mode="lockstep", record_trace=False,
                        scrub_interval=interval,
                        max_cycles=TOTAL_WORDS * interval + 10_000))
    soc.load_program(kernels.park_kernel())
    soc.banks.flip_bit(5, 4321, 11)
    soc.run(stop_at=TOTAL_WORDS * interval + 100)
    assert soc.scrub.corrections == 1
    assert 4321 not in soc.banks.banks[5].tainted

    # deferral non-interference: identical fault-free timing either way
    runs = []
    for enabled in (True, False):
        s = Soc(SocConfig(mode="lockstep", scrub_enabled=enabled,
                          scrub_interval=interval))
        s.load_program(kernels.matmul_kernel(24, "single"))
        runs.append(s.run())
    assert runs[0].cycles == runs[1].cycles
    assert runs[0].trace_hash == runs[1].trace_hash
    report(7, f"latent error corrected within one {TOTAL_WORDS}x{interval}"
              f"-cycle sweep; scrubber on/off runs bit-identical "
              f"({runs[0].cycles} cycles)")


def test_08_determinism():
    # repeated identical runs: bit-identical reports and trace hashes
    dicts = []
    for _ in range(2):
        soc = Soc(SocConfig(mode="parallel"))
        soc.load_program(kernels.matmul_kernel(24, "parallel3"))
        dicts.append(soc.run().to_dict())
    assert dicts[0] == dicts[1]
    assert dicts[0]["trace_hash"] is not None

    # identical (binary, mode, seed, fault schedule) across --jobs
    spec = dict(kernel="matmul8", mode="lockstep", runs=6, seed=77,
                targets=("core",))
    reports = [run_campaign(CampaignSpec(**spec), jobs=j) for j in (1, 2)]
    assert json.dumps(reports[0], sort_keys=True) == \
        json.dumps(reports[1], sort_keys=True)
    report(8, "bit-identical run reports, trace hashes, and campaign "
              "reports across repeats and worker counts")


def test_09_guest_host_oracle_equivalence():
    checks = []
    for n in (3, 8, 24):
        want = kernels.host_checksum(n)
        for mode, variant in (("lockstep", "single"),
                              ("parallel", "parallel3")):
            soc = Soc(SocConfig(mode=mode, record_trace=False))
            soc.load_program(kernels.matmul_kernel(n, variant))
            res = soc.run()
            assert res.exit_code == 0
            assert res.checksum == want, (n, mode)
        checks.append(n)
    report(9, f"guest checksums equal the host matrix oracle for n in "
              f"{checks}, both modes")
