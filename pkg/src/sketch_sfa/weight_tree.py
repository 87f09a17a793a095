"""Binary tree over squared entries of a vector.

The tree is an implicit complete binary tree in a flat array: node 1 is the
root, node ``k`` has children ``2k`` and ``2k+1``, and the leaves occupy
``cap .. 2*cap - 1`` where ``cap`` is the vector length padded to the next
power of two (padding leaves carry zero weight). Signed entries are kept in a
separate array so queries return the stored value while the tree aggregates
squares.

Supports O(log n) entry update, O(log n) sampling proportional to squared
entries, and O(1) squared-norm readout.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateDistribution, InvalidInput
from .ledger import CostLedger

# Full re-aggregation is triggered after this many in-place updates to bound
# accumulated floating-point drift in the partial sums.
REBUILD_INTERVAL = 1_000_000


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


class WeightTree:
    def __init__(self, values, ledger: CostLedger | None = None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise InvalidInput("WeightTree requires a non-empty 1-D sequence")
        self.n = int(values.size)
        self.cap = _next_pow2(self.n)
        self.depth = int(np.log2(self.cap))
        self.ledger = ledger if ledger is not None else CostLedger()
        self.values = np.zeros(self.cap, dtype=np.float64)
        self.values[: self.n] = values
        self.weights = np.zeros(2 * self.cap, dtype=np.float64)
        self._updates_since_rebuild = 0
        self._rebuild()
        self.ledger.add(entry_reads=self.n)

    def _rebuild(self) -> None:
        w = self.weights
        w[self.cap :] = self.values * self.values
        for node in range(self.cap - 1, 0, -1):
            w[node] = w[2 * node] + w[2 * node + 1]
        self._updates_since_rebuild = 0

    @property
    def norm_sq(self) -> float:
        """Exact squared l2 norm (root read)."""
        self.ledger.add(node_touches=1)
        return float(self.weights[1])

    def query(self, i: int) -> float:
        if not 0 <= i < self.n:
            raise IndexError(f"index {i} out of range for length {self.n}")
        self.ledger.add(entry_reads=1, node_touches=1)
        return float(self.values[i])

    def update(self, i: int, value: float) -> None:
        if not 0 <= i < self.n:
            raise IndexError(f"index {i} out of range for length {self.n}")
        self.values[i] = value
        node = self.cap + i
        self.weights[node] = value * value
        touches = 1
        node //= 2
        while node >= 1:
            self.weights[node] = self.weights[2 * node] + self.weights[2 * node + 1]
            touches += 1
            node //= 2
        self.ledger.add(node_touches=touches)
        self._updates_since_rebuild += 1
        if self._updates_since_rebuild >= REBUILD_INTERVAL:
            self._rebuild()

    def sample(self, rng: np.random.Generator) -> int:
        """Draw index i with probability values[i]**2 / ||values||**2."""
        root = self.weights[1]
        touches = 1
        if root <= 0.0:
            raise DegenerateDistribution("cannot sample from an all-zero vector")
        u = rng.random() * root
        node = 1
        for _ in range(self.depth):
            left = 2 * node
            lw = self.weights[left]
            touches += 2
            if u < lw:
                node = left
            else:
                u -= lw
                node = left + 1
        self.ledger.add(node_touches=touches, rng_draws=1)
        return node - self.cap

    def sample_many(self, m: int, rng: np.random.Generator) -> np.ndarray:
        """Vectorized batch of independent samples (level-synchronous descent)."""
        root = self.weights[1]
        if root <= 0.0:
            raise DegenerateDistribution("cannot sample from an all-zero vector")
        u = rng.random(m) * root
        nodes = np.ones(m, dtype=np.int64)
        w = self.weights
        for _ in range(self.depth):
            left = 2 * nodes
            lw = w[left]
            go_right = u >= lw
            u -= lw * go_right
            nodes = left + go_right
        self.ledger.add(node_touches=m * (2 * self.depth + 1), rng_draws=m)
        return nodes - self.cap

    def probabilities(self) -> np.ndarray:
        """Exact sampling distribution (diagnostics / tests only)."""
        root = self.weights[1]
        if root <= 0.0:
            raise DegenerateDistribution("all-zero vector has no sampling distribution")
        sq = self.values[: self.n] ** 2
        return sq / root

    def to_array(self) -> np.ndarray:
        return self.values[: self.n].copy()

    def validate(self, rtol: float = 1e-9) -> bool:
        """Check the parent-sum invariant through the whole tree."""
        w = self.weights
        parents = w[1 : self.cap]
        children = w[2 : 2 * self.cap : 2] + w[3 : 2 * self.cap : 2]
        scale = np.maximum(np.abs(parents), np.abs(children)) + 1e-300
        return bool(np.all(np.abs(parents - children) <= rtol * scale + 1e-15))


def build_vector(values, ledger: CostLedger | None = None) -> WeightTree:
    """Build the sampling tree; reads each entry exactly once."""
    return WeightTree(values, ledger=ledger)


def update_entry(tree: WeightTree, i: int, value: float) -> None:
    tree.update(i, value)


def sample_index(tree: WeightTree, rng: np.random.Generator) -> int:
    return tree.sample(rng)
