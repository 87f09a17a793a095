"""Access-pattern accounting.

Counters are the evidence for the sublinearity audits: every tree-node touch,
entry read and rng draw performed by the sampling structures is recorded here.
Increments go through a lock so concurrent readers of a finished structure can
share one ledger.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field


@dataclass
class CostLedger:
    node_touches: int = 0
    entry_reads: int = 0
    rng_draws: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, node_touches: int = 0, entry_reads: int = 0, rng_draws: int = 0) -> None:
        with self._lock:
            self.node_touches += node_touches
            self.entry_reads += entry_reads
            self.rng_draws += rng_draws

    def reset(self) -> None:
        with self._lock:
            self.node_touches = 0
            self.entry_reads = 0
            self.rng_draws = 0

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "node_touches": self.node_touches,
                "entry_reads": self.entry_reads,
                "rng_draws": self.rng_draws,
            }
