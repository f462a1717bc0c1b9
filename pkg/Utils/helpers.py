import os
import json
import hashlib
from typing import Any, Dict, List

import click
import numpy as np

TOOL_VERSION = "0.3.0"

# ---- Tolerances ----
STRUCT_TOL = 1e-12
DERIVED_TOL = 1e-9
CHANNEL_TOL = 1e-10
PSD_TOL = 1e-10

_LEVELS = {"debug": 0, "info": 1, "check": 1, "brain": 1, "warn": 2, "error": 3, "quiet": 9}


# ---------------- Errors ----------------
class BlindSimError(Exception):
    """Root of every error raised by the simulator."""


class DimensionError(BlindSimError):
    pass


class InvariantError(BlindSimError):
    pass


class CapacityError(BlindSimError):
    pass


class PatternError(BlindSimError):
    pass


class ProtocolError(BlindSimError):
    pass


class DecompositionError(BlindSimError):
    pass


class ConfigError(BlindSimError):
    pass


# ---------------- Logging ----------------
def log_message(level: str, message: str):
    logos = {
        "info": "🟢 [SIM INFO]",
        "warn": "🟡 [SIM WARN]",
        "error": "🔴 [SIM ERROR]",
        "brain": "🧠 [SIM PLAN]",
        "check": "🔬 [SIM CHECK]",
        "debug": "⚪ [SIM DEBUG]",
    }
    threshold = _LEVELS.get(os.getenv("BLINDSIM_LOG_LEVEL", "info").lower(), 1)
    if _LEVELS.get(level.lower(), 1) < threshold:
        return
    prefix = logos.get(level.lower(), "ℹ️ [SIM]")
    click.echo(f"{prefix} {message}", err=True)


def progress_disabled() -> bool:
    return os.getenv("BLINDSIM_LOG_LEVEL", "info").lower() in ("quiet", "error", "warn")


# ---------------- Seeds ----------------
def seed_children(seed: int, count: int) -> List[np.random.SeedSequence]:
    """Child seed sequences indexed by shard number, independent of worker count."""
    return np.random.SeedSequence(seed).spawn(count)


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Generator for a fixed position in the seed tree (e.g. rng_for(seed, 0) for Alice)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(path)))


def fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (2**64))


def worker_count() -> int:
    try:
        return max(1, int(os.getenv("BLINDSIM_WORKERS", "1")))
    except ValueError:
        return 1


# ---------------- JSON / hashing ----------------
def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=_json_default)


def _json_default(obj: Any):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"Not JSON serializable: {type(obj).__name__}")


def short_hash(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()[:16]


def write_json(path: str, data: Dict[str, Any]):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(json.dumps(data, sort_keys=True, indent=2, default=_json_default))
        f.write("\n")
