"""Triple-core lockstep RV32IMC microcontroller simulator.

A deterministic, cycle-approximate model of a fault-tolerant
microcontroller: three RV32IMC cores run in a lockstep group over
eight word-interleaved SRAM banks protected by a Hsiao (39,32)
SEC-DED code, with a background scrubber, per-bit write-disable
fault-injection hooks, and a campaign engine that classifies the
outcome of injected single-event upsets.
"""

__version__ = "0.1.0"

from . import ecc
from .memory import BankArray, Scrubber, bank_of
from .soc import Soc, SocConfig, RunResult
from .asm import Program, assemble
from . import kernels
from .campaign import CampaignSpec, FaultEvent, run_campaign

__all__ = [
    "ecc",
    "BankArray",
    "Scrubber",
    "bank_of",
    "Soc",
    "SocConfig",
    "RunResult",
    "Program",
    "assemble",
    "kernels",
    "CampaignSpec",
    "FaultEvent",
    "run_campaign",
]
