"""Exact slow feature analysis: preprocessing, differentiation, dense solve.

This is the ground-truth oracle for the whole repository. Everything here is
dense, deterministic given a seed, and written for numerical transparency
rather than speed.

Conventions: B is the covariance X^T X / n, so whitened data Z = X B^{-1/2}
has identity second moment and the outputs Y = X W have unit variance. The
differentiated whitened matrix used for the slowness objective carries a
1/sqrt(P) pair-averaging factor (P = number of sampled pairs), which makes
the squared singular values equal the slowness values directly. The raw
(unaveraged, (X^T X)^{-1/2}-whitened) spectrum is kept alongside because the
sampling pipeline and its error bounds are stated in that scaling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceeded, InvalidInput, RankDeficient
from .ledger import CostLedger

RANK_TOL = 1e-10
TIE_TOL = 1e-10
EXPANSION_CAP = 20_000


@dataclass
class Dataset:
    X: np.ndarray
    labels: np.ndarray | None = None
    mode: str = "classification"  # or "time-series"
    dropped_columns: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise InvalidInput("Dataset.X must be 2-D")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.X.shape[0],):
                raise InvalidInput("labels length must match the number of rows")
        if self.mode not in ("classification", "time-series"):
            raise InvalidInput(f"unknown mode {self.mode!r}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass
class DiffMatrix:
    Xdot: np.ndarray
    pair_index: list  # (s, t) with row = X[s] - X[t]

    def __post_init__(self):
        self.Xdot = np.asarray(self.Xdot, dtype=np.float64)

    @property
    def pair_count(self) -> int:
        return self.Xdot.shape[0]


@dataclass
class SfaResult:
    W: np.ndarray  # d x J, maps raw data to outputs; B-orthonormal columns
    Y: np.ndarray  # n x J, unit-variance outputs
    B: np.ndarray  # d x d covariance X^T X / n
    v_slow: np.ndarray  # d x J right singular vectors of the whitened diffs
    spectra: dict  # x_sv, zdot_sv (raw scaling), theta, gamma
    gaps: dict  # consecutive squared-singular-value differences
    delta_values: np.ndarray  # slowness of each output, ascending
    n: int = 0
    pair_count: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "W": self.W.tolist(),
                "v_slow": self.v_slow.tolist(),
                "spectra": {k: np.asarray(v).tolist() for k, v in self.spectra.items()},
                "gaps": {k: np.asarray(v).tolist() for k, v in self.gaps.items()},
                "delta_values": self.delta_values.tolist(),
                "n": self.n,
                "pair_count": self.pair_count,
            }
        )


def normalize(ds: Dataset) -> Dataset:
    """Center columns and scale them to unit variance; drop constant columns."""
    if ds.n < 2:
        raise InvalidInput("normalization needs at least two samples")
    mean = ds.X.mean(axis=0)
    std = ds.X.std(axis=0)
    scale = np.maximum(np.abs(mean), 1.0)
    constant = std <= 1e-12 * scale
    keep = ~constant
    x = (ds.X[:, keep] - mean[keep]) / std[keep]
    dropped = list(ds.dropped_columns) + [int(j) for j in np.nonzero(constant)[0]]
    return Dataset(X=x, labels=ds.labels, mode=ds.mode, dropped_columns=dropped)


def quadratic_expand(ds: Dataset, cap: int = EXPANSION_CAP) -> Dataset:
    """Append all degree-2 monomials: columns [x1..xd, x1x1, x1x2, .., xdxd]."""
    d = ds.d
    if d < 1:
        raise InvalidInput("need at least one column to expand")
    out_dim = d + d * (d + 1) // 2
    if out_dim > cap:
        raise BudgetExceeded(f"expanded dimension {out_dim} exceeds cap {cap}")
    cols = [ds.X]
    for i in range(d):
        cols.append(ds.X[:, i : i + 1] * ds.X[:, i:])
    x = np.hstack(cols)
    return Dataset(X=x, labels=ds.labels, mode=ds.mode, dropped_columns=list(ds.dropped_columns))


def _sample_pairs(m: int, k: int, rng: np.random.Generator) -> list:
    """k distinct index pairs (a < b) out of the m-choose-2 possibilities."""
    total = m * (m - 1) // 2
    k = min(k, total)
    if total <= 4 * k:
        codes = rng.choice(total, size=k, replace=False)
    else:
        # sparse regime: rejection into a set is cheaper than enumerating
        seen = set()
        while len(seen) < k:
            a = int(rng.integers(0, m))
            b = int(rng.integers(0, m))
            if a == b:
                continue
            if a > b:
                a, b = b, a
            seen.add(a * m + b)
        return [(c // m, c % m) for c in sorted(seen)]
    # decode triangular code: pair index within the a<b enumeration
    pairs = []
    for c in sorted(int(c) for c in codes):
        a = 0
        rem = c
        row = m - 1
        while rem >= row:
            rem -= row
            a += 1
            row -= 1
        b = a + 1 + rem
        pairs.append((a, b))
    return pairs


def pairwise_differentiate(
    ds: Dataset, max_pairs_per_class: int = 100, rng: np.random.Generator | None = None
) -> DiffMatrix:
    """Within-class difference rows (classification) or consecutive temporal
    differences (time series)."""
    if ds.mode == "time-series":
        if ds.n < 2:
            raise InvalidInput("time series needs at least two samples")
        xdot = ds.X[1:] - ds.X[:-1]
        pairs = [(t + 1, t) for t in range(ds.n - 1)]
        return DiffMatrix(Xdot=xdot, pair_index=pairs)

    if ds.labels is None:
        raise InvalidInput("classification mode requires labels")
    if rng is None:
        raise InvalidInput("pair subsampling requires an rng")
    rows = []
    pair_index = []
    for cls in np.unique(ds.labels):
        members = np.nonzero(ds.labels == cls)[0]
        if members.size < 2:
            raise InvalidInput(f"class {cls!r} has fewer than two members")
        for a, b in _sample_pairs(members.size, max_pairs_per_class, rng):
            s, t = int(members[a]), int(members[b])
            rows.append(ds.X[s] - ds.X[t])
            pair_index.append((s, t))
    return DiffMatrix(Xdot=np.stack(rows), pair_index=pair_index)


def _order_ties(vectors: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Ascending by value; ties within TIE_TOL broken by the first differing
    coordinate of the sign-normalized vectors (deterministic oracle output)."""
    order = list(range(values.size))

    def key(i):
        return tuple(np.round(vectors[:, i], 12))

    out = []
    i = 0
    idx = sorted(order, key=lambda i: values[i])
    while i < len(idx):
        j = i
        while j + 1 < len(idx) and values[idx[j + 1]] - values[idx[i]] <= TIE_TOL:
            j += 1
        out.extend(sorted(idx[i : j + 1], key=key))
        i = j + 1
    return np.array(out, dtype=np.int64)


def exact_sfa(
    X: np.ndarray,
    xdot: DiffMatrix,
    J: int,
    *,
    pseudo_inverse: bool = False,
    ledger: CostLedger | None = None,
) -> SfaResult:
    """Dense classical SFA: whiten, difference, take the slowest directions."""
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if not 1 <= J <= d:
        raise InvalidInput(f"J must be in [1, {d}], got {J}")
    if ledger is not None:
        # the exact path reads everything once; recorded for audit contrast
        ledger.add(entry_reads=X.size + xdot.Xdot.size)

    ux, sx, vxt = np.linalg.svd(X, full_matrices=False)
    theta = float(sx[-1])
    if sx[0] <= 0.0:
        raise RankDeficient("data matrix is zero", theta=0.0)
    if theta < RANK_TOL * sx[0] and not pseudo_inverse:
        raise RankDeficient(
            f"smallest singular value {theta:.3g} below rank tolerance", theta=theta
        )
    live = sx >= RANK_TOL * sx[0]
    inv_s = np.where(live, 1.0 / np.maximum(sx, 1e-300), 0.0)

    p = xdot.pair_count
    # covariance-whitening: B = X^T X / n, so Z = X B^{-1/2} has <z z^T> = I
    b_cov = (X.T @ X) / n
    b_inv_half = (vxt.T * (np.sqrt(n) * inv_s)) @ vxt
    zdot_pair = (xdot.Xdot @ b_inv_half) / np.sqrt(p)

    _, s_zdot, v_zdot_t = np.linalg.svd(zdot_pair, full_matrices=False)
    # pad the spectrum with zeros for directions outside the row space; the
    # economy SVD keeps the left factor p x min(p, d) instead of p x p
    s_full = np.zeros(d)
    s_full[: s_zdot.size] = s_zdot
    v_all = v_zdot_t.T  # d x min(p, d)
    if v_all.shape[1] < d:
        # complete the right-vector basis with the orthogonal complement
        q, _ = np.linalg.qr(np.hstack([v_all, np.eye(d)]))
        v_all = np.hstack([v_all, q[:, v_all.shape[1] : d]])
    # deterministic ordering of the slow end
    idx = np.argmax(np.abs(v_all), axis=0)
    signs = np.sign(v_all[idx, np.arange(d)])
    signs[signs == 0] = 1.0
    v_all = v_all * signs
    order = _order_ties(v_all, s_full**2)
    v_all = v_all[:, order]
    s_full = s_full[order]

    v_slow = v_all[:, :J]
    delta_values = s_full[:J] ** 2
    w = b_inv_half @ v_slow
    y = X @ w

    # raw scaling used by the sampling pipeline: (X^T X)^{-1/2} whitening
    zdot_sv_raw = np.sort(s_full * np.sqrt(p / n))[::-1]
    gamma = float(zdot_sv_raw[zdot_sv_raw > 0].min()) if np.any(zdot_sv_raw > 0) else 0.0

    spectra = {
        "x_sv": sx,
        "zdot_sv": zdot_sv_raw,
        "theta": theta,
        "gamma": gamma,
    }
    gaps = {
        "x_sq_gaps": sx[:-1] ** 2 - sx[1:] ** 2,
        "zdot_sq_gaps": zdot_sv_raw[:-1] ** 2 - zdot_sv_raw[1:] ** 2,
    }
    return SfaResult(
        W=w,
        Y=y,
        B=b_cov,
        v_slow=v_slow,
        spectra=spectra,
        gaps=gaps,
        delta_values=delta_values,
        n=n,
        pair_count=p,
    )


def delta_value(y: np.ndarray, xdot: DiffMatrix) -> float:
    """Slowness objective: pair-averaged squared difference of the feature."""
    y = np.asarray(y, dtype=np.float64)
    diffs = np.array([y[s] - y[t] for s, t in xdot.pair_index])
    return float(np.mean(diffs**2))
