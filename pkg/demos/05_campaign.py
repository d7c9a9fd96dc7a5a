#!/usr/bin/env python3
"""A small fault-injection campaign: uniformly random single-event
upsets against the lockstep group versus an unprotected single core."""

import json

from lockstep_mcu.campaign import CampaignSpec, run_campaign

COMMON = dict(kernel="matmul8", runs=60, seed=42, targets=("core",))

print("60 random core-state upsets, lockstep group:")
protected = run_campaign(CampaignSpec(mode="lockstep", **COMMON))
for cls, n in protected["classes"].items():
    if n:
        print(f"  {cls:24s} {n}")

print("\nthe same fault pressure on a lone core (hart 0 targets only):")
unprotected = run_campaign(CampaignSpec(mode="single", harts=(0,), **COMMON))
for cls, n in unprotected["classes"].items():
    if n:
        print(f"  {cls:24s} {n}")

sdc_p = protected["classes"]["silent_data_corruption"]
sdc_u = unprotected["classes"]["silent_data_corruption"]
print(f"\nsilent data corruption: lockstep={sdc_p}, unprotected={sdc_u}")
print("\n(a campaign report is plain JSON; see `lockstep-mcu campaign run`)")
print(json.dumps({k: protected[k] for k in ("schema", "totals")}, indent=2))
