"""Sample/query handles over stored and composed vectors.

A handle exposes three capabilities: drawing indices proportional to squared
entries, querying signed entries, and reporting the norm. Stored handles do
all three exactly; composed handles (matrix-vector products) answer queries
deterministically and realize sampling by rejection against a tractable
proposal, with the norm recovered from the measured acceptance rate.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateDistribution, InvalidInput, RejectionStall
from .matrix_sq import MatrixSQ
from .weight_tree import WeightTree

REJECTION_CAP_FACTOR = 64


class VectorHandle:
    """Stored vector: exact sampling, queries, and norm."""

    kind = "stored-vector"

    def __init__(self, tree: WeightTree):
        self.tree = tree
        self.n = tree.n

    def sample(self, rng: np.random.Generator) -> int:
        return self.tree.sample(rng)

    def sample_many(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return self.tree.sample_many(m, rng)

    def query(self, i: int) -> float:
        return self.tree.query(i)

    def query_many(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        self.tree.ledger.add(entry_reads=idx.size)
        return self.tree.values[idx]

    def norm_sq(self, nu: float = 0.0, rng: np.random.Generator | None = None) -> float:
        # Exact for stored structures; the nu-error path is only exercised by
        # composed handles.
        return self.tree.norm_sq


class RowViewHandle:
    """View of one stored matrix row; shares the matrix's trees."""

    kind = "stored-matrix-row-view"

    def __init__(self, mat: MatrixSQ, i: int):
        if not 0 <= i < mat.n:
            raise IndexError(f"row {i} out of range for {mat.n} rows")
        self.mat = mat
        self.i = i
        self.n = mat.d

    def sample(self, rng: np.random.Generator) -> int:
        return self.mat.sample_in_row(self.i, rng)

    def sample_many(self, m: int, rng: np.random.Generator) -> np.ndarray:
        rows = np.full(m, self.i, dtype=np.int64)
        return self.mat.sample_in_rows(rows, rng)

    def query(self, j: int) -> float:
        return self.mat.query(self.i, j)

    def query_many(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        self.mat.ledger.add(entry_reads=idx.size)
        return self.mat.values[self.i, idx]

    def norm_sq(self, nu: float = 0.0, rng: np.random.Generator | None = None) -> float:
        return self.mat.row_norm_sq(self.i)


class MatVecHandle:
    """Composed handle for V @ w given the structure over V^T and a dense w.

    Queries are deterministic k-term sums. Sampling draws a proposal index
    pair (term i weighted by w(i)^2 ||V(.,i)||^2, then an output coordinate
    from that column of V) and accepts with the exact ratio, so accepted
    coordinates follow the product's squared-entry distribution. The expected
    trial count per accepted sample is k times the overhead ratio

        C(V, w) = sum_i w(i)^2 ||V(.,i)||^2 / ||V w||^2.
    """

    kind = "composed"

    def __init__(self, vT: MatrixSQ, w):
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 1 or w.size != vT.n:
            raise InvalidInput(
                f"w has length {w.size}, expected {vT.n} (rows of the V^T structure)"
            )
        self.vT = vT
        self.w = w
        self.k = vT.n
        self.n = vT.d
        # proposal over terms: weight(i) = w(i)^2 * ||V^T(i,.)||^2
        row_norms = np.sqrt(vT.row_weights[: vT.n, 1])
        vT.ledger.add(node_touches=vT.n)
        self._proposal = WeightTree(w * row_norms, ledger=vT.ledger)
        self.proposal_mass = self._proposal.norm_sq  # sum_i w(i)^2 ||V(.,i)||^2
        if self.proposal_mass <= 0.0:
            raise DegenerateDistribution("w is zero or hits only zero columns of V")
        self._trials = 0
        self._accepts = 0

    # -- query path (exact, rng-free) -------------------------------------

    def query(self, j: int) -> float:
        col = self.vT.query_col(j)
        return float(self.w @ col)

    def query_many(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        self.vT.ledger.add(entry_reads=self.k * idx.size)
        return self.w @ self.vT.values[: self.k, idx]

    # -- sampling path ------------------------------------------------------

    def overhead_estimate(self) -> float:
        """Running estimate of C(V, w) from the observed acceptance rate.

        With no acceptances yet the estimate grows with the trial count, so
        the cap keeps pace with the evidence that the overhead is large.
        """
        if self._accepts == 0:
            return max(1.0, self._trials / self.k)
        return self._trials / (self.k * self._accepts)

    def _trial_cap(self) -> int:
        return max(
            REJECTION_CAP_FACTOR * self.k,
            math.ceil(REJECTION_CAP_FACTOR * self.k * self.overhead_estimate()),
        )

    # absolute ceiling: declare a stall once this many consecutive trials of
    # one draw produce no acceptance, whatever the running overhead says
    STALL_LIMIT_FACTOR = REJECTION_CAP_FACTOR * REJECTION_CAP_FACTOR

    def _one_trial(self, rng: np.random.Generator) -> tuple[int, bool]:
        i = self._proposal.sample(rng)
        j = self.vT.sample_in_row(i, rng)
        col = self.vT.query_col(j)
        val = float(self.w @ col)
        denom = self.k * float(np.sum((self.w * col) ** 2))
        self.vT.ledger.add(rng_draws=1)
        accept = denom > 0.0 and rng.random() * denom < val * val
        return j, accept

    def sample(self, rng: np.random.Generator) -> int:
        used = 0
        limit = self.STALL_LIMIT_FACTOR * self.k
        while used < limit:
            cap = max(self._trial_cap(), used + 1)
            while used < cap:
                used += 1
                self._trials += 1
                j, ok = self._one_trial(rng)
                if ok:
                    self._accepts += 1
                    return j
        raise RejectionStall(
            f"no acceptance within {used} trials; "
            f"overhead estimate C={self.overhead_estimate():.3g}"
        )

    def norm_sq(self, nu: float = 0.1, rng: np.random.Generator | None = None) -> float:
        """Multiplicative-error estimate of ||V w||^2 via the acceptance rate.

        ||V w||^2 = k * proposal_mass * P(accept), so the estimate inherits
        the binomial relative error of the measured acceptance rate.
        """
        if rng is None:
            raise InvalidInput("composed norm estimation needs an rng")
        trials = math.ceil(30 * self.k * self.overhead_estimate() / (nu * nu))
        accepts = 0
        for _ in range(trials):
            self._trials += 1
            _, ok = self._one_trial(rng)
            if ok:
                accepts += 1
                self._accepts += 1
        if accepts == 0:
            raise DegenerateDistribution("no acceptances observed; product may be zero")
        return self.k * self.proposal_mass * accepts / trials

    def exact_norm_sq(self) -> float:
        """Densify the product (n queries); diagnostics and tests only."""
        vals = self.query_many(np.arange(self.n))
        return float(vals @ vals)


def sq_matvec(vT: MatrixSQ, w) -> MatVecHandle:
    """Sample/query access to V @ w from the structure over V^T and dense w."""
    return MatVecHandle(vT, w)
