"""Dequantized linear-algebra primitives.

Three building blocks, all driven by squared-norm sampling:

* ``fkv_approx_svd`` — low-rank approximate SVD from sampled rows and
  columns, returning a succinct description of the right singular vectors.
* ``approx_matmul`` — Monte Carlo inner-dimension sampling of a matrix
  product, re-factored into a small U*D*V^T description that can itself be
  row-sampled and queried without materialization.
* ``estimate_inner_product`` — median-of-means inner-product estimation from
  sample/query access to one factor.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BudgetExceeded,
    DegenerateDistribution,
    EmptySpectrum,
    InvalidInput,
    RejectionStall,
)
from .ledger import CostLedger
from .linalg import sign_normalize
from .matrix_sq import MatrixSQ

# Oversampling constant for the FKV sketch size (rows and columns).
FKV_SKETCH_CONST = 4.0
# Default cap on FKV sketch sizes; the theoretical constants are far beyond
# any feasible budget, so sketches are clamped here unless the caller opts out.
FKV_SKETCH_BUDGET = 1024
# The column pass is capped separately: the sketch core gets a dense SVD, so
# its column count dominates the cubic cost once the row count is large.
FKV_COL_BUDGET = 2048
# Markov constant giving the 9/10 success of the sampled matrix product.
MATMUL_CONST = 10.0
MATMUL_SKETCH_BUDGET = 8192
# Median-of-means constants: ceil(6 ln(1/delta)) groups of
# ceil(9 |x|^2 |y|^2 / eps^2) samples.
MOM_GROUP_CONST = 6.0
MOM_SAMPLE_CONST = 9.0

REJECTION_CAP_FACTOR = 64


class DenseRows:
    """Row-query access to a small dense matrix, with read accounting.

    Used for the d-by-d factors of the pipeline (whitening matrices), which
    are materialized because their size is independent of the data count.
    """

    def __init__(self, array: np.ndarray, ledger: CostLedger | None = None):
        self.values = np.asarray(array, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidInput("DenseRows requires a 2-D array")
        self.n, self.d = self.values.shape
        self.ledger = ledger if ledger is not None else CostLedger()

    @property
    def frob_sq(self) -> float:
        return float(np.sum(self.values**2))

    def row_norm_sq(self, i: int) -> float:
        row = self.values[i]
        return float(row @ row)

    def query(self, i: int, j: int) -> float:
        self.ledger.add(entry_reads=1)
        return float(self.values[i, j])

    def query_row(self, i: int) -> np.ndarray:
        self.ledger.add(entry_reads=self.d)
        return self.values[i].copy()


# ---------------------------------------------------------------------------
# Approximate SVD (FKV)
# ---------------------------------------------------------------------------


@dataclass
class ApproxSVD:
    """Succinct description of approximate singular triples.

    The right singular vectors are combinations of normalized sampled rows of
    the source: v_hat(., l) = sum_s coeff(s, l) * A(i_s, .) / ||A(i_s, .)||.
    ``v_hat`` keeps the materialized d-by-r result (d is small by contract);
    left singular vectors are never materialized and are queried row-wise
    through the source.
    """

    r: int
    row_indices: np.ndarray  # (r',) sampled row indices into the source
    coeff: np.ndarray  # (r', r) combination coefficients over normalized rows
    sigma_hat: np.ndarray  # (r,) descending
    v_hat: np.ndarray  # (d, r) materialized right singular vectors
    source: object = field(repr=False)  # row-sample/query access to A
    sketch_rows: int = 0

    @property
    def sigma_inv(self) -> np.ndarray:
        return 1.0 / self.sigma_hat

    def u_row(self, i: int) -> np.ndarray:
        """Row i of U_hat = A V_hat Sigma_hat^{-1}; costs one source row read."""
        return (self.source.query_row(i) @ self.v_hat) / self.sigma_hat

    def u_dense(self) -> np.ndarray:
        """Materialize U_hat (desk-scale diagnostics only)."""
        if isinstance(self.source, (MatrixSQ, DenseRows)):
            a = self.source.values[: self.source.n, : self.source.d]
            self.source.ledger.add(entry_reads=a.size)
        else:
            a = np.stack([self.source.query_row(i) for i in range(self.source.n)])
        return (a @ self.v_hat) / self.sigma_hat

    def isometry_error(self) -> float:
        """Spectral-norm deviation of V_hat from an exact isometry."""
        g = self.v_hat.T @ self.v_hat
        return float(np.linalg.norm(g - np.eye(self.r), ord=2))

    def b_inv_half(self) -> np.ndarray:
        """V_hat Sigma_hat^{-1} V_hat^T (d-by-d, small by contract).

        With sigma_hat approximating the singular values of A, this is the
        inverse square root of A^T A restricted to the retained directions.
        """
        return (self.v_hat / self.sigma_hat) @ self.v_hat.T

    def to_json(self) -> str:
        return json.dumps(
            {
                "r": self.r,
                "row_indices": self.row_indices.tolist(),
                "coeff": self.coeff.tolist(),
                "sigma_hat": self.sigma_hat.tolist(),
                "v_hat": self.v_hat.tolist(),
                "sketch_rows": self.sketch_rows,
            }
        )

    @classmethod
    def from_json(cls, payload: str, source) -> "ApproxSVD":
        d = json.loads(payload)
        return cls(
            r=int(d["r"]),
            row_indices=np.asarray(d["row_indices"], dtype=np.int64),
            coeff=np.asarray(d["coeff"], dtype=np.float64),
            sigma_hat=np.asarray(d["sigma_hat"], dtype=np.float64),
            v_hat=np.asarray(d["v_hat"], dtype=np.float64),
            source=source,
            sketch_rows=int(d["sketch_rows"]),
        )


def fkv_approx_svd(
    a,
    sigma_threshold: float,
    eps: float,
    eta: float,
    rng: np.random.Generator,
    *,
    sketch_budget: int = FKV_SKETCH_BUDGET,
    clamp_budget: bool = True,
    max_rank: int | None = None,
) -> ApproxSVD:
    """Approximate SVD from norm-weighted row and column samples.

    ``a`` needs row sampling proportional to squared row norms, row queries,
    and the squared Frobenius norm; stored matrices and succinct product
    views both qualify. Retains the singular values at or above
    sigma_threshold * (1 - eta).
    """
    if not (0.0 < eps < 1.0 and 0.0 < eta < 1.0):
        raise InvalidInput("eps and eta must lie in (0, 1)")
    if sigma_threshold <= 0.0:
        raise InvalidInput("sigma_threshold must be positive")
    f2 = a.frob_sq
    if f2 <= 0.0:
        raise DegenerateDistribution("cannot sketch an all-zero matrix")
    if sigma_threshold * sigma_threshold > f2:
        raise EmptySpectrum(
            f"threshold {sigma_threshold:.3g} exceeds ||A||_F = {math.sqrt(f2):.3g}"
        )
    sketch = max(
        16,
        math.ceil(FKV_SKETCH_CONST / (eps * eps * eta * eta) * f2 / sigma_threshold**2),
    )
    if sketch > sketch_budget:
        if not clamp_budget:
            raise BudgetExceeded(
                f"FKV sketch size {sketch} exceeds budget {sketch_budget}"
            )
        sketch = sketch_budget

    rows = np.asarray(a.sample_rows(sketch, rng), dtype=np.int64)
    d = a.d
    f = math.sqrt(f2)
    r_mat = np.empty((sketch, d), dtype=np.float64)
    for s, i in enumerate(rows):
        row = a.query_row(int(i))
        nrm = math.sqrt(float(row @ row))
        r_mat[s] = row * (f / (math.sqrt(sketch) * nrm))

    # column pass: uniform over sampled rows, then squared-entry within row.
    # When every column fits in the budget the subsample is pure noise, so
    # the sketch keeps all of them (the lift is then an exact SVD of R and
    # v_hat comes out exactly orthonormal).
    if d <= FKV_COL_BUDGET:
        c_mat = r_mat
    else:
        col_sketch = FKV_COL_BUDGET
        row_sq = r_mat**2
        row_mass = row_sq.sum(axis=1)
        pick = rng.integers(0, sketch, size=col_sketch)
        cols = np.empty(col_sketch, dtype=np.int64)
        for t_idx, s in enumerate(pick):
            cols[t_idx] = rng.choice(d, p=row_sq[s] / row_mass[s])
        col_norms = np.sqrt(np.sum(r_mat[:, cols] ** 2, axis=0))
        c_mat = r_mat[:, cols] * (f / (math.sqrt(col_sketch) * col_norms))

    u, s_vals, _ = np.linalg.svd(c_mat, full_matrices=False)
    keep = s_vals >= sigma_threshold * (1.0 - eta)
    keep &= s_vals > 0.0
    r = int(np.count_nonzero(keep))
    if max_rank is not None:
        r = min(r, max_rank)
    if r == 0:
        raise EmptySpectrum(
            f"no approximate singular value reaches {sigma_threshold * (1 - eta):.3g}"
        )
    u = u[:, :r]
    s_vals = s_vals[:r]

    v_hat = r_mat.T @ (u / s_vals)  # (d, r)
    # deterministic sign convention; propagate to the coefficients
    idx = np.argmax(np.abs(v_hat), axis=0)
    signs = np.sign(v_hat[idx, np.arange(r)])
    signs[signs == 0] = 1.0
    v_hat *= signs
    # over normalized source rows: every row of r_mat has norm f / sqrt(sketch)
    coeff = (u * signs) / s_vals * (f / math.sqrt(sketch))

    return ApproxSVD(
        r=r,
        row_indices=rows,
        coeff=coeff,
        sigma_hat=s_vals,
        v_hat=v_hat,
        source=a,
        sketch_rows=sketch,
    )


# ---------------------------------------------------------------------------
# Sampled matrix multiplication
# ---------------------------------------------------------------------------


@dataclass
class SuccinctProduct:
    """U D V^T description of a sampled matrix product A @ B.

    The left factor is never materialized: its columns are scaled columns of
    A reachable through the structure over A^T, mixed by ``coeff``. The right
    factor and diagonal come from a dense SVD of the small sampled-row matrix
    ``right_rows`` (t-by-p with p small).
    """

    aT: object = field(repr=False)  # structure over A^T (rows = columns of A)
    indices: np.ndarray  # (t,) sampled inner indices
    scales: np.ndarray  # (t,) 1/sqrt(t * p_s)
    right_rows: np.ndarray  # (t, p) scaled rows of B
    coeff: np.ndarray  # (t, q) mixing U = Ua @ coeff
    diag: np.ndarray  # (q,)
    right: np.ndarray  # (p, q) orthonormal columns
    t: int

    @property
    def shape(self) -> tuple[int, int]:
        return (self.aT.d, self.right_rows.shape[1])

    def _ua_rows(self, idx: np.ndarray) -> np.ndarray:
        """Rows of the unorthogonalized left factor; t entry reads each."""
        idx = np.asarray(idx, dtype=np.int64)
        self.aT.ledger.add(entry_reads=self.t * idx.size)
        return self.aT.values[np.ix_(self.indices, idx)].T * self.scales

    def query_row(self, i: int) -> np.ndarray:
        return (self._ua_rows(np.array([i]))[0]) @ self.right_rows

    def query(self, i: int, j: int) -> float:
        return float(self.query_row(i)[j])

    def row_norm_sq(self, i: int) -> float:
        row = self.query_row(i)
        return float(row @ row)

    def densify(self) -> np.ndarray:
        """Materialize the full product estimate (desk-scale only)."""
        n, _ = self.shape
        ua = self._ua_rows(np.arange(n))
        return ua @ self.right_rows

    def sq_view(self, rng: np.random.Generator) -> "ProductSQView":
        return ProductSQView(self, rng)

    def to_json(self) -> str:
        return json.dumps(
            {
                "indices": self.indices.tolist(),
                "scales": self.scales.tolist(),
                "right_rows": self.right_rows.tolist(),
                "coeff": self.coeff.tolist(),
                "diag": self.diag.tolist(),
                "right": self.right.tolist(),
                "t": self.t,
            }
        )

    @classmethod
    def from_json(cls, payload: str, aT) -> "SuccinctProduct":
        d = json.loads(payload)
        return cls(
            aT=aT,
            indices=np.asarray(d["indices"], dtype=np.int64),
            scales=np.asarray(d["scales"], dtype=np.float64),
            right_rows=np.asarray(d["right_rows"], dtype=np.float64),
            coeff=np.asarray(d["coeff"], dtype=np.float64),
            diag=np.asarray(d["diag"], dtype=np.float64),
            right=np.asarray(d["right"], dtype=np.float64),
            t=int(d["t"]),
        )


class ProductSQView:
    """Row-sample/query access to a succinct product, for chained sketching.

    Row sampling is rejection against a two-stage proposal (pick a sampled
    inner index by mass, then a coordinate from that column of A); acceptance
    uses the exact row of the product, so accepted indices follow the
    squared-row-norm distribution. The squared Frobenius norm is a
    multiplicative-error importance-sampling estimate.
    """

    TRIAL_BATCH = 512
    FROB_SAMPLES = 512

    def __init__(self, product: SuccinctProduct, rng: np.random.Generator):
        self.p = product
        aT = product.aT
        col_norm_sq = aT.row_weights[product.indices, 1]
        aT.ledger.add(node_touches=product.indices.size)
        self._m_vec = np.sum(product.right_rows**2, axis=1)  # (t,)
        g = (product.scales**2) * col_norm_sq * self._m_vec
        self._g_total = float(g.sum())
        if self._g_total <= 0.0:
            raise DegenerateDistribution("sampled product has no mass")
        self._g_probs = g / self._g_total
        self.n, self.d = product.shape
        self._frob_sq = self._estimate_frob_sq(rng)

    def _proposal_batch(self, m: int, rng: np.random.Generator):
        prod = self.p
        s_idx = rng.choice(prod.t, size=m, p=self._g_probs)
        prod.aT.ledger.add(rng_draws=m)
        i_idx = prod.aT.sample_in_rows(prod.indices[s_idx], rng)
        ua = prod._ua_rows(i_idx)  # (m, t)
        qnum = (ua**2) @ self._m_vec
        rows = ua @ prod.right_rows
        rho = np.sum(rows**2, axis=1)
        return i_idx, qnum, rho

    def _estimate_frob_sq(self, rng: np.random.Generator) -> float:
        i_idx, qnum, rho = self._proposal_batch(self.FROB_SAMPLES, rng)
        good = qnum > 0.0
        if not np.any(good):
            raise DegenerateDistribution("sampled product appears to be zero")
        return self._g_total * float(np.mean(rho[good] / qnum[good]))

    @property
    def frob_sq(self) -> float:
        return self._frob_sq

    def query_row(self, i: int) -> np.ndarray:
        return self.p.query_row(i)

    def row_norm_sq(self, i: int) -> float:
        return self.p.row_norm_sq(i)

    def sample_rows(self, m: int, rng: np.random.Generator) -> np.ndarray:
        accepted: list[np.ndarray] = []
        total = 0
        trials = 0
        cap = REJECTION_CAP_FACTOR * max(self.p.t, 1) * m
        while total < m:
            if trials > cap:
                raise RejectionStall(
                    f"row sampling stalled after {trials} trials ({total}/{m} accepted)"
                )
            i_idx, qnum, rho = self._proposal_batch(self.TRIAL_BATCH, rng)
            trials += self.TRIAL_BATCH
            u = rng.random(self.TRIAL_BATCH)
            ok = (qnum > 0.0) & (u * self.p.t * qnum < rho)
            self.p.aT.ledger.add(rng_draws=self.TRIAL_BATCH)
            hits = i_idx[ok]
            accepted.append(hits)
            total += hits.size
        return np.concatenate(accepted)[:m]


def approx_matmul(
    aT,
    b,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    *,
    sketch_budget: int = MATMUL_SKETCH_BUDGET,
    clamp_budget: bool = True,
    relative: bool = False,
) -> SuccinctProduct:
    """Sampled estimate of A @ B from the structure over A^T and rows of B.

    Inner indices are drawn proportional to squared column norms of A; with
    probability >= 9/10 the estimate lands within eps of the true product in
    Frobenius norm (eps absolute by default; relative=True rescales by
    ||A||_F ||B||_F).
    """
    if not (0.0 < eps and 0.0 < delta < 1.0):
        raise InvalidInput("eps must be positive and delta in (0, 1)")
    if aT.n != b.n:
        raise InvalidInput(
            f"inner dimensions disagree: A has {aT.n} columns, B has {b.n} rows"
        )
    a_f2 = aT.frob_sq
    b_f2 = b.frob_sq
    if a_f2 <= 0.0 or b_f2 <= 0.0:
        raise DegenerateDistribution("zero factor in sampled product")
    eps_abs = eps * math.sqrt(a_f2 * b_f2) if relative else eps
    t = max(4, math.ceil(MATMUL_CONST * a_f2 * b_f2 / (eps_abs * eps_abs)))
    if t > sketch_budget:
        if not clamp_budget:
            raise BudgetExceeded(f"matmul sketch size {t} exceeds budget {sketch_budget}")
        t = sketch_budget

    indices = np.asarray(aT.sample_rows(t, rng), dtype=np.int64)
    probs = np.array([aT.row_norm_sq(int(i)) for i in indices]) / a_f2
    scales = 1.0 / np.sqrt(t * probs)
    right_rows = np.stack([b.query_row(int(i)) for i in indices]) * scales[:, None]

    p_mat, diag, qt = np.linalg.svd(right_rows, full_matrices=False)
    return SuccinctProduct(
        aT=aT,
        indices=indices,
        scales=scales,
        right_rows=right_rows,
        coeff=p_mat,
        diag=diag,
        right=qt.T,
        t=t,
    )


# ---------------------------------------------------------------------------
# Inner-product estimation
# ---------------------------------------------------------------------------


def estimate_inner_product(
    x,
    y,
    eps: float,
    delta: float,
    rng: np.random.Generator,
) -> float:
    """Median-of-means estimate of <x, y> from sample/query access to x.

    Additive error eps with probability >= 1 - delta; draws
    ceil(6 ln(1/delta)) groups of ceil(9 |x|^2 |y|^2 / eps^2) samples.
    """
    if not (0.0 < eps and 0.0 < delta < 1.0):
        raise InvalidInput("eps must be positive and delta in (0, 1)")
    y = np.asarray(y, dtype=np.float64)
    nx2 = x.norm_sq()
    if nx2 <= 0.0:
        raise DegenerateDistribution("x has zero norm")
    ny2 = float(y @ y)
    if ny2 == 0.0:
        return 0.0
    groups = max(1, math.ceil(MOM_GROUP_CONST * math.log(1.0 / delta)))
    m = max(1, math.ceil(MOM_SAMPLE_CONST * nx2 * ny2 / (eps * eps)))
    total = groups * m
    if hasattr(x, "sample_many"):
        idx = x.sample_many(total, rng)
        xv = x.query_many(idx)
    else:
        idx = np.fromiter((x.sample(rng) for _ in range(total)), dtype=np.int64, count=total)
        xv = np.fromiter((x.query(int(i)) for i in idx), dtype=np.float64, count=total)
    vals = y[idx] * (nx2 / xv)
    means = vals.reshape(groups, m).mean(axis=1)
    return float(np.median(means))
