"""Two-level sampling structure for a dense matrix.

One implicit weight tree per row (all rows share a single 2-D array so the
structure stays cache friendly for large n), plus a row-norm tree over the
vector of squared row norms. Together they support row sampling proportional
to squared row norms, within-row sampling proportional to squared entries,
entry queries, and O(1) readout of squared row norms and the squared
Frobenius norm.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateDistribution, InvalidInput
from .ledger import CostLedger
from .weight_tree import WeightTree, _next_pow2


class MatrixSQ:
    def __init__(self, rows, ledger: CostLedger | None = None):
        a = np.asarray(rows, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise InvalidInput("MatrixSQ requires a non-empty 2-D array")
        self.n, self.d = (int(s) for s in a.shape)
        self.cap = _next_pow2(self.d)
        self.depth = int(np.log2(self.cap))
        self.ledger = ledger if ledger is not None else CostLedger()
        self.values = np.zeros((self.n, self.cap), dtype=np.float64)
        self.values[:, : self.d] = a
        # heap layout per row: column 1 is the row's root, leaves at cap..2cap-1
        self.row_weights = np.zeros((self.n, 2 * self.cap), dtype=np.float64)
        self._rebuild_rows()
        row_norms = np.sqrt(self.row_weights[:, 1])
        self.row_norm_tree = WeightTree(row_norms, ledger=self.ledger)
        # the row-norm tree build logged n reads of derived values; only the
        # n*d raw entries count as data access
        self.ledger.add(entry_reads=self.n * (self.d - 1))

    def _rebuild_rows(self) -> None:
        w = self.row_weights
        w[:, self.cap :] = self.values * self.values
        for node in range(self.cap - 1, 0, -1):
            w[:, node] = w[:, 2 * node] + w[:, 2 * node + 1]

    @property
    def frob_sq(self) -> float:
        return self.row_norm_tree.norm_sq

    def row_norm_sq(self, i: int) -> float:
        if not 0 <= i < self.n:
            raise IndexError(f"row {i} out of range for {self.n} rows")
        self.ledger.add(node_touches=1)
        return float(self.row_weights[i, 1])

    def query(self, i: int, j: int) -> float:
        if not (0 <= i < self.n and 0 <= j < self.d):
            raise IndexError(f"entry ({i}, {j}) out of range for {self.n}x{self.d}")
        self.ledger.add(entry_reads=1, node_touches=1)
        return float(self.values[i, j])

    def query_row(self, i: int) -> np.ndarray:
        """Dense copy of one row; costs d entry reads."""
        if not 0 <= i < self.n:
            raise IndexError(f"row {i} out of range for {self.n} rows")
        self.ledger.add(entry_reads=self.d)
        return self.values[i, : self.d].copy()

    def query_col(self, j: int) -> np.ndarray:
        """Dense copy of one column; costs n entry reads."""
        if not 0 <= j < self.d:
            raise IndexError(f"column {j} out of range for {self.d} columns")
        self.ledger.add(entry_reads=self.n)
        return self.values[:, j].copy()

    def update(self, i: int, j: int, value: float) -> None:
        if not (0 <= i < self.n and 0 <= j < self.d):
            raise IndexError(f"entry ({i}, {j}) out of range for {self.n}x{self.d}")
        self.values[i, j] = value
        node = self.cap + j
        self.row_weights[i, node] = value * value
        touches = 1
        node //= 2
        while node >= 1:
            self.row_weights[i, node] = (
                self.row_weights[i, 2 * node] + self.row_weights[i, 2 * node + 1]
            )
            touches += 1
            node //= 2
        self.ledger.add(node_touches=touches)
        self.row_norm_tree.update(i, float(np.sqrt(self.row_weights[i, 1])))

    def sample_row(self, rng: np.random.Generator) -> int:
        """Row index i with probability ||A(i,.)||^2 / ||A||_F^2."""
        return self.row_norm_tree.sample(rng)

    def sample_rows(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return self.row_norm_tree.sample_many(m, rng)

    def sample_in_row(self, i: int, rng: np.random.Generator) -> int:
        """Column index j with probability A(i,j)^2 / ||A(i,.)||^2."""
        w = self.row_weights[i]
        root = w[1]
        touches = 1
        if root <= 0.0:
            raise DegenerateDistribution(f"row {i} is all zero")
        u = rng.random() * root
        node = 1
        for _ in range(self.depth):
            left = 2 * node
            lw = w[left]
            touches += 2
            if u < lw:
                node = left
            else:
                u -= lw
                node = left + 1
        self.ledger.add(node_touches=touches, rng_draws=1)
        return node - self.cap

    def sample_in_rows(self, row_idx: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Vectorized within-row sampling, one draw per entry of row_idx."""
        row_idx = np.asarray(row_idx, dtype=np.int64)
        m = row_idx.size
        roots = self.row_weights[row_idx, 1]
        if np.any(roots <= 0.0):
            bad = int(row_idx[np.argmax(roots <= 0.0)])
            raise DegenerateDistribution(f"row {bad} is all zero")
        u = rng.random(m) * roots
        nodes = np.ones(m, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * nodes
            lw = self.row_weights[row_idx, left]
            go_right = u >= lw
            u -= lw * go_right
            nodes = left + go_right
        self.ledger.add(node_touches=m * (2 * self.depth + 1), rng_draws=m)
        return nodes - self.cap

    def sample_entry(self, rng: np.random.Generator) -> tuple[int, int]:
        """Two-stage draw hitting (i, j) with probability A(i,j)^2 / ||A||_F^2."""
        i = self.sample_row(rng)
        return i, self.sample_in_row(i, rng)

    def to_array(self) -> np.ndarray:
        return self.values[:, : self.d].copy()

    def validate(self, rtol: float = 1e-9) -> bool:
        """Row-tree parent sums, row-norm leaves and Frobenius root all consistent."""
        w = self.row_weights
        parents = w[:, 1 : self.cap]
        children = w[:, 2 : 2 * self.cap : 2] + w[:, 3 : 2 * self.cap : 2]
        scale = np.maximum(np.abs(parents), np.abs(children)) + 1e-300
        if not np.all(np.abs(parents - children) <= rtol * scale + 1e-15):
            return False
        leaf_sq = self.row_norm_tree.values[: self.n] ** 2
        roots = w[:, 1]
        scale = np.maximum(leaf_sq, roots) + 1e-300
        if not np.all(np.abs(leaf_sq - roots) <= rtol * scale + 1e-15):
            return False
        return self.row_norm_tree.validate(rtol)


def build_matrix(rows, ledger: CostLedger | None = None) -> MatrixSQ:
    """Build the two-level structure; reads each entry exactly once."""
    return MatrixSQ(rows, ledger=ledger)
