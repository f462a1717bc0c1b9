"""
Behaviours of Alice's measuring device. w = 0 is the honest procedure.
"""
from typing import Callable, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from Linalg_Core.Linalg_Core import StateVector
from MBQC_Engine.MBQC_Engine import MeasurementPattern

DeviceKind = Literal["honest", "angle_offset", "outcome_flip", "always_accept", "trap_blind", "always_reject"]
DEVICE_KINDS = ("honest", "angle_offset", "outcome_flip", "always_accept", "trap_blind", "always_reject")


class DeviceBehavior(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DeviceKind = "honest"
    offset: float = 0.0
    flip_vertices: Tuple[int, ...] = ()
    output_state: str = "0"

    @property
    def w(self) -> int:
        return DEVICE_KINDS.index(self.kind)

    @property
    def honest(self) -> bool:
        return self.kind == "honest"

    def pattern_for(self, pattern: MeasurementPattern) -> MeasurementPattern:
        if self.kind == "angle_offset":
            return pattern.with_angle_offset(self.offset)
        return pattern

    def signal_map(self) -> Optional[Callable[[Dict[int, int]], Dict[int, int]]]:
        if self.kind != "outcome_flip":
            return None
        flips = set(self.flip_vertices)

        def misreport(signals: Dict[int, int]) -> Dict[int, int]:
            return {s: b ^ (1 if s in flips else 0) for s, b in signals.items()}

        return misreport

    def fixed_output(self) -> Optional[StateVector]:
        return StateVector.from_bits(self.output_state) if self.kind == "always_accept" else None

    def forced_flag(self) -> Optional[int]:
        """Flag the device reports regardless of the trap results."""
        if self.kind in ("always_accept", "trap_blind"):
            return 0
        if self.kind == "always_reject":
            return 1
        return None


HONEST_DEVICE = DeviceBehavior()
