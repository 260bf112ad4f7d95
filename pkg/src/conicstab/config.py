"""Default tolerances and knobs."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace

TAU_MEM = 1e-9
TAU_NUM = 1e-10
TAU_KKT = 1e-10
TAU_PDC = 1e-5
TAU_RANK = 1e-8
FD_STEP = 1e-6
FACE_CAP = 4096
PDC_SAMPLES = 200


@dataclass(frozen=True)
class Tolerances:
    mem: float = TAU_MEM
    num: float = TAU_NUM
    kkt: float = TAU_KKT
    pdc: float = TAU_PDC
    rank: float = TAU_RANK

    def updated(self, **overrides) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(overrides) - known
        if bad:
            raise KeyError(f"unknown tolerance(s): {sorted(bad)}")
        return replace(self, **overrides)
