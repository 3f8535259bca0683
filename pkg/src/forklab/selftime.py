"""Self-time accounting: per-activation frame timers, outlier-filtered
aggregation into a flat 64-bit slot array, and storage persistence.

Storage layout per unit (all slots unsigned 64-bit, little-endian on disk):

    [forkControl][fork0.invocations][fork0.totalTime][fork1.invocations]...

A unit with n forks occupies exactly 1 + 2n contiguous slots; slot indices
are fixed when the unit is compiled.
"""

from __future__ import annotations

import json
import struct
import threading
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .ast import FunctionIR, deep_copy
from .errors import AlreadyInstrumented, CapacityExceeded, FormatError

U64_MASK = 2**64 - 1

DEFAULT_CAPACITY = 65_536


@dataclass(frozen=True)
class OutlierConfig:
    """On-the-fly outlier rejection: drop a sample once the fork has seen
    `warmup` invocations and the sample exceeds `factor` times the running
    average.  A rejected sample changes neither slot."""

    factor: float = 10.0
    warmup: int = 30
    enabled: bool = True

    def __post_init__(self):
        if self.factor <= 1:
            raise ValueError("outlier factor must exceed 1")
        if self.warmup < 1:
            raise ValueError("outlier warmup must be at least 1")


@dataclass(frozen=True)
class InstrSpec:
    """Marker attached to a fork body; the runtime gives marked functions
    region-timing semantics (open at entry, close around calls and
    safepoints, record at exits)."""

    storage_base: int
    fork_index: int
    outlier: OutlierConfig


class PerfStorage:
    """Pre-allocated flat array of 64-bit unsigned slots.

    The two per-fork slots are updated under a lock (the atomic
    fetch-add analog); they are individually atomic but not jointly, so
    consistent reads happen after the run quiesces.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        self.slots: list[int] = [0] * capacity
        self.capacity = capacity
        self.cursor = 0
        self._lock = threading.Lock()

    def add(self, index: int, amount: int) -> None:
        with self._lock:
            self.slots[index] = (self.slots[index] + amount) & U64_MASK


def alloc_unit(storage: PerfStorage, n_forks: int) -> int:
    """Reserve 1 + 2*n_forks zeroed slots; returns the unit's base index."""
    need = 1 + 2 * n_forks
    if storage.cursor + need > storage.capacity:
        raise CapacityExceeded(
            f"storage needs {need} slots, {storage.capacity - storage.cursor} free"
        )
    base = storage.cursor
    storage.cursor += need
    return base


def slot_invocations(base: int, fork_index: int) -> int:
    return base + 1 + 2 * fork_index

def slot_total_time(base: int, fork_index: int) -> int:
    return base + 2 + 2 * fork_index


def instrument(
    fn: FunctionIR,
    storage_base: int,
    fork_index: int,
    outlier: Optional[OutlierConfig] = None,
) -> FunctionIR:
    """Attach self-time instrumentation to a fork body.

    The runtime opens a measured region at entry, closes it before every
    call and safepoint, reopens after, and on exit adds the accumulated
    frame-local time to the fork's slots via record_exit.  Instrumentation
    bookkeeping itself is taken outside every region, so it contributes
    zero measured time on the virtual clock.
    """
    if fn.instr is not None:
        raise AlreadyInstrumented(f"'{fn.name}' is already instrumented")
    out = deep_copy(fn)
    out.instr = InstrSpec(storage_base, fork_index, outlier or OutlierConfig())
    return out


def record_exit(
    storage: PerfStorage,
    storage_base: int,
    fork_index: int,
    local_t: int,
    outlier: Optional[OutlierConfig],
) -> bool:
    """Aggregate one activation's self time; returns False for rejected
    outliers (neither slot changes).

    The threshold `local_t > factor * (total/invocations)` is evaluated by
    cross-multiplication, exact for integer factors.
    """
    inv_slot = slot_invocations(storage_base, fork_index)
    tot_slot = slot_total_time(storage_base, fork_index)
    inv = storage.slots[inv_slot]
    tot = storage.slots[tot_slot]
    if (
        outlier is not None
        and outlier.enabled
        and inv >= outlier.warmup
        and local_t * inv > outlier.factor * tot
    ):
        return False
    storage.add(tot_slot, local_t)
    storage.add(inv_slot, 1)
    return True


def fork_avg(storage: PerfStorage, storage_base: int, fork_index: int) -> Optional[Fraction]:
    inv = storage.slots[slot_invocations(storage_base, fork_index)]
    if inv == 0:
        return None
    return Fraction(storage.slots[slot_total_time(storage_base, fork_index)], inv)


# -- persistence -----------------------------------------------------------

STORAGE_FILE = "storage.bin"
META_FILE = "meta.json"


def unit_meta(unit) -> dict:
    return {
        "unit_id": unit.unit_id,
        "function": unit.function_name,
        "phase": unit.phase,
        "storage_base": unit.storage_base,
        "n_forks": unit.n_forks,
        "forks": [
            {"index": k, "loop_id": loop_id, "param": param}
            for k, (loop_id, param) in enumerate(unit.fork_decisions())
        ],
    }


def persist(storage: PerfStorage, units: list, out_dir, clock_mode: str = "virtual",
            cost_table_version: str = "default-1") -> None:
    """Write storage.bin (raw little-endian u64 slots, exact layout) and
    meta.json.  Only the allocated prefix of the storage is persisted."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    used = storage.slots[: storage.cursor]
    (out / STORAGE_FILE).write_bytes(struct.pack(f"<{len(used)}Q", *used))
    meta = {
        "units": [unit_meta(u) for u in units],
        "clock": clock_mode,
        "cost_table_version": cost_table_version,
    }
    (out / META_FILE).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load(run_dir) -> tuple[PerfStorage, dict]:
    """Restore a storage snapshot and its metadata; FormatError when the
    binary length disagrees with the slot count meta.json implies."""
    run = Path(run_dir)
    try:
        raw = (run / STORAGE_FILE).read_bytes()
        meta = json.loads((run / META_FILE).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FormatError(f"cannot read run directory {run}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(f"corrupt meta.json: {exc}") from exc
    if len(raw) % 8 != 0:
        raise FormatError(f"storage.bin length {len(raw)} is not a multiple of 8")
    expected = sum(1 + 2 * u["n_forks"] for u in meta.get("units", []))
    n_slots = len(raw) // 8
    if n_slots != expected:
        raise FormatError(
            f"storage.bin holds {n_slots} slots, meta.json implies {expected}"
        )
    storage = PerfStorage(capacity=max(n_slots, 1))
    storage.slots[:n_slots] = struct.unpack(f"<{n_slots}Q", raw)
    storage.cursor = n_slots
    return storage, meta
