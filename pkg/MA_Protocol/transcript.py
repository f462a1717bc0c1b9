import hashlib
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from Utils.helpers import TOOL_VERSION, canonical_json

Sender = Literal["bob", "alice"]


class TranscriptEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    round: int
    sender: Sender
    kind: str
    payload_hash: str
    alice_private: bool


class Transcript:
    """Port-level record of one protocol execution."""

    def __init__(self, variant: str, seed: int, config: Dict[str, Any]):
        self.variant = variant
        self.seed = seed
        self.config = config
        self.events: List[TranscriptEvent] = []
        self._rounds: Dict[str, int] = {}
        # Alice-private values kept for inspection; only hashes reach the file.
        self.private: Dict[str, Any] = {}
        self.rho_out = None
        self.e: Optional[int] = None

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.config).encode("utf-8")).hexdigest()[:16]

    def record(self, sender: Sender, kind: str, payload: Any, alice_private: bool) -> TranscriptEvent:
        digest = hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()
        # rounds are numbered per sender
        rnd = self._rounds.get(sender, 0)
        event = TranscriptEvent(round=rnd, sender=sender, kind=kind,
                                payload_hash=digest, alice_private=alice_private)
        self._rounds[sender] = rnd + 1
        self.events.append(event)
        if alice_private:
            self.private.setdefault(kind, []).append(payload)
        return event

    def header(self) -> Dict[str, Any]:
        return {
            "kind": "header",
            "variant": self.variant,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "tool_version": TOOL_VERSION,
        }

    def to_jsonl(self) -> str:
        lines = [canonical_json(self.header())]
        lines += [canonical_json(e.model_dump()) for e in self.events]
        return "\n".join(lines) + "\n"

    def write(self, path: str):
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_jsonl())


class BobView(BaseModel):
    """What Bob can ever hold: his own sends and the qubit counts."""
    model_config = ConfigDict(frozen=True)

    variant: str
    events: Tuple[TranscriptEvent, ...]
    qubits_sent: int


def bob_view(transcript: Transcript) -> BobView:
    events = tuple(e for e in transcript.events if e.sender == "bob" and not e.alice_private)
    sent = sum(1 for e in events if e.kind == "qubit")
    return BobView(variant=transcript.variant, events=events, qubits_sent=sent)
