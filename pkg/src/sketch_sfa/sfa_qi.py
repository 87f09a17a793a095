"""Sampling-based slow feature analysis.

Builds, from the sampling structures alone, a model giving sample and query
access to the projection of the data onto its slowest-varying subspace:

1. approximate SVD of the data matrix X (norm-weighted row/column sketch),
2. composed access to Z_hat = U_hat V_hat^T (the approximately whitened data),
3. the small whitening matrix V_hat Sigma_hat^{-1} V_hat^T,
4. a sampled product of the difference matrix with the whitening matrix,
5. an approximate SVD of that product; the slowest right singular vectors
   form W_hat,
6. W_hat stored in a sampling structure so output rows can be drawn without
   materializing anything of size n.

The number of data points n enters only through logarithmic tree walks and a
data-independent number of sampled rows; the audit trail for that claim is
the entry-read ledger of the X structure.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    DegenerateDistribution,
    EmptySpectrum,
    InvalidInput,
    SketchSfaError,
)
from .handles import VectorHandle, sq_matvec
from .matrix_sq import MatrixSQ
from .sfa_exact import SfaResult
from .sketch_ops import (
    ApproxSVD,
    DenseRows,
    SuccinctProduct,
    approx_matmul,
    estimate_inner_product,
    fkv_approx_svd,
)
from .weight_tree import WeightTree


@dataclass
class SpectralSummary:
    """Spectral inputs to parameter selection (from the oracle or estimates)."""

    x_fro: float  # ||X||_F
    xdot_fro: float  # ||Xdot||_F
    x_spec: float  # ||X|| (largest singular value)
    xdot_spec: float  # ||Xdot||
    theta: float  # smallest singular value of X
    gamma: float  # smallest singular value of Xdot (X^T X)^{-1/2}
    eta_gap: float  # min consecutive squared-singular-value gap of X / ||X||_F^2

    @classmethod
    def from_oracle(cls, result: SfaResult, xdot: np.ndarray) -> "SpectralSummary":
        x_sv = np.asarray(result.spectra["x_sv"])
        gaps = x_sv[:-1] ** 2 - x_sv[1:] ** 2
        eta_gap = float(gaps.min() / (x_sv**2).sum()) if gaps.size else 0.5
        xdot = np.asarray(xdot)
        return cls(
            x_fro=float(np.sqrt((x_sv**2).sum())),
            xdot_fro=float(np.linalg.norm(xdot)),
            x_spec=float(x_sv[0]),
            xdot_spec=float(np.linalg.norm(xdot, ord=2)),
            theta=float(result.spectra["theta"]),
            gamma=float(result.spectra["gamma"]),
            eta_gap=max(min(eta_gap, 0.999), 1e-9),
        )


@dataclass
class PipelineParams:
    eps1: float
    eps2: float
    eps3: float
    eps4: float
    eps5: float
    eta1: float
    eta5: float
    delta2: float
    delta4: float
    sigma_threshold: float
    gamma_threshold: float
    J: int
    seed: int = 0
    sketch_budget: int = 1024
    matmul_budget: int = 8192
    clamp_budget: bool = True
    predicted_error: float = float("nan")

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3", "eps4", "eps5", "eta1", "eta5", "delta2", "delta4"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise InvalidInput(f"{name} = {v} must lie in (0, 1)")
        if self.J < 1:
            raise InvalidInput("J must be at least 1")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, payload: str) -> "PipelineParams":
        return cls(**json.loads(payload))


# failure probability left to each sampled step so the union bound keeps at
# least 2/3 overall success
STEP_DELTA = 1.0 / 12.0
ETA_CLAMP = 0.999


def select_parameters(
    eps_target: float,
    spectra: SpectralSummary,
    d: int,
    J: int,
    *,
    seed: int = 0,
    sketch_budget: int = 1024,
    matmul_budget: int = 8192,
) -> PipelineParams:
    """Evaluate the per-step error-parameter table for a target final error.

    Every parameter is the minimum of its table entries; the returned params
    also carry the predicted composite error for reporting.
    """
    if not 0.0 < eps_target < 1.0:
        raise InvalidInput("eps_target must lie in (0, 1)")
    for name in ("x_fro", "xdot_fro", "x_spec", "xdot_spec", "theta", "gamma"):
        if getattr(spectra, name) <= 0.0:
            raise InvalidInput(f"spectral input {name} must be positive")
    eps = eps_target
    # thresholds sit well below the smallest true values: the sketch's sigma
    # estimates scatter, and a dropped direction costs far more than a loose
    # cutoff (whitening needs the full spectrum, the slow step needs its
    # bottom edge)
    sigma = 0.5 * spectra.theta
    gamma_thr = 0.5 * spectra.gamma
    eta = spectra.eta_gap
    sj = math.sqrt(J)

    def clamp(v: float) -> float:
        # table entries are upper bounds; keep them inside the open unit
        # interval required of every error parameter
        return min(max(v, 1e-12), ETA_CLAMP)

    eps1p = min(
        eps / math.sqrt(d),
        eps * sigma**2 * spectra.theta / (spectra.x_fro**2 * spectra.xdot_spec * sj),
    )
    eps5p = eps / sj

    eps1 = clamp(
        min(
            eps1p * spectra.x_fro**3 / sigma**3,
            eps1p**2 * eta,
            sigma / (4.0 * spectra.x_fro**2),
        )
    )
    eta1 = eps1
    eps2 = clamp(eps)
    eps3 = clamp(eps / (spectra.xdot_fro * sj))
    eps4 = clamp(eps / sj)
    eps5 = clamp(
        min(
            eps5p * spectra.xdot_fro**3 / (spectra.theta**3 * sigma**3),
            eps1p**2 * eta,
            sigma * spectra.theta**2 / (4.0 * spectra.xdot_fro**2),
        )
    )
    denom = spectra.xdot_spec / spectra.x_spec - spectra.gamma / 10.0
    if denom <= 0.0:
        raise InvalidInput(
            "eta5 denominator ||Xdot|| / ||X|| - gamma/10 is non-positive; "
            "the error chain for this spectrum is vacuous"
        )
    eta5 = min(1.0 / denom, ETA_CLAMP)

    # predicted composite error for reporting
    r_pred = spectra.x_fro**2 / (sigma**2 * (1.0 - eta1) ** 2)
    e2 = math.sqrt(d) * eps1 * (1.0 + eta1 * eps1**2) + eps2
    e3 = (
        math.sqrt(r_pred) * eps1 / spectra.theta
        + (1.0 + math.sqrt(r_pred) * eps1) * (2.0 + math.sqrt(r_pred) * eps1) / spectra.theta
        + eps3
    )
    e4 = spectra.xdot_spec * e3 + eps4
    e5 = sj * (e4 / (eta5 * denom) + eps5)
    predicted = e5 + e2 * (1.0 + e5)

    return PipelineParams(
        eps1=eps1,
        eps2=eps2,
        eps3=eps3,
        eps4=eps4,
        eps5=eps5,
        eta1=eta1,
        eta5=eta5,
        delta2=STEP_DELTA,
        delta4=STEP_DELTA,
        sigma_threshold=sigma,
        gamma_threshold=gamma_thr,
        J=J,
        seed=seed,
        sketch_budget=sketch_budget,
        matmul_budget=matmul_budget,
        predicted_error=predicted,
    )


class ZHatHandle:
    """Composed access to Z_hat = X V_hat Sigma_hat^{-1} V_hat^T.

    Queries are deterministic: one stored row read plus small dense algebra.
    """

    kind = "composed"

    def __init__(self, x: MatrixSQ, svd_x: ApproxSVD):
        self.x = x
        self.svd_x = svd_x
        self.n = x.n
        self.d = svd_x.v_hat.shape[0]

    def row(self, i: int) -> np.ndarray:
        u = self.x.query_row(i) @ self.svd_x.v_hat
        return (u / self.svd_x.sigma_hat) @ self.svd_x.v_hat.T

    def query(self, i: int, j: int) -> float:
        return float(self.row(i)[j])

    def sample_in_row(self, i: int, rng: np.random.Generator) -> int:
        # the row is d-dimensional; materializing it exactly is cheaper than
        # any rejection scheme and keeps the draw exact
        row = self.row(i)
        mass = row * row
        total = mass.sum()
        if total <= 0.0:
            raise DegenerateDistribution(f"row {i} of Z_hat is zero")
        self.x.ledger.add(rng_draws=1)
        return int(rng.choice(self.d, p=mass / total))

    def densify(self) -> np.ndarray:
        """Materialize (desk-scale diagnostics only)."""
        return np.stack([self.row(i) for i in range(self.n)])


@dataclass
class QiSfaModel:
    svd_x: ApproxSVD
    z_hat: ZHatHandle
    b_inv_half: DenseRows  # V_hat Sigma_hat^{-1} V_hat^T, d x d
    zdot_hat: SuccinctProduct
    w_hat: np.ndarray  # d x J, slowest first
    w_hat_sq: MatrixSQ
    params: PipelineParams
    step_ledger: dict = field(default_factory=dict)
    _w_col_handles: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.z_hat.n

    @property
    def d(self) -> int:
        return self.z_hat.d

    def predict_dense(self) -> np.ndarray:
        """Y_hat = Z_hat W_hat, materialized (desk-scale diagnostics only)."""
        return self.z_hat.densify() @ self.w_hat

    def to_json(self) -> str:
        return json.dumps(
            {
                "svd_x": json.loads(self.svd_x.to_json()),
                "zdot_hat": json.loads(self.zdot_hat.to_json()),
                "w_hat": self.w_hat.tolist(),
                "params": json.loads(self.params.to_json()),
                "step_ledger": self.step_ledger,
            },
            sort_keys=True,
        )


def _check_centering(x: MatrixSQ, rng: np.random.Generator, samples: int = 64) -> None:
    """Estimated column-mean check; preprocessing is assumed, not repeated."""
    rows = x.sample_rows(samples, rng)
    norms = x.row_weights[rows, 1]
    vals = x.values[rows, : x.d]
    x.ledger.add(entry_reads=samples * x.d, node_touches=samples)
    est_mean = (x.frob_sq / x.n) * np.mean(vals / norms[:, None], axis=0)
    col_scale = math.sqrt(x.frob_sq / x.n) + 1e-300
    if np.any(np.abs(est_mean) > 0.2 * col_scale):
        warnings.warn(
            "data columns do not look centered; the pipeline assumes "
            "preprocessed input and will not center them",
            stacklevel=3,
        )


def _tag_step(step: str):
    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, SketchSfaError):
                exc.args = (f"[{step}] {exc.args[0]}",) + exc.args[1:]
            return False

    return _Ctx()


def build(
    x: MatrixSQ,
    xdotT: MatrixSQ,
    params: PipelineParams,
    rng: np.random.Generator,
) -> QiSfaModel:
    """Run the sketching pipeline end to end.

    ``x`` holds the preprocessed data matrix row-wise (row sampling drives
    the SVD sketch); ``xdotT`` holds the transposed difference matrix (row
    sampling there is inner-index sampling for the product step).
    """
    if x.d != xdotT.n:
        raise InvalidInput(
            f"dimension mismatch: X has {x.d} columns, Xdot^T has {xdotT.n} rows"
        )
    step_ledger: dict = {}

    def snap(step):
        step_ledger[step] = x.ledger.snapshot()

    _check_centering(x, rng)

    with _tag_step("step1-svd-x"):
        svd_x = fkv_approx_svd(
            x,
            params.sigma_threshold,
            params.eps1,
            params.eta1,
            rng,
            sketch_budget=params.sketch_budget,
            clamp_budget=params.clamp_budget,
        )
    snap("step1-svd-x")

    z_hat = ZHatHandle(x, svd_x)
    snap("step2-z-hat")

    with _tag_step("step3-b-inv-half"):
        b_inv = DenseRows(svd_x.b_inv_half())
    snap("step3-b-inv-half")

    with _tag_step("step4-zdot-product"):
        zdot_hat = approx_matmul(
            xdotT,
            b_inv,
            params.eps4,
            params.delta4,
            rng,
            sketch_budget=params.matmul_budget,
            clamp_budget=params.clamp_budget,
        )
    snap("step4-zdot-product")

    with _tag_step("step5-svd-zdot"):
        view = zdot_hat.sq_view(rng)
        svd_zdot = fkv_approx_svd(
            view,
            params.gamma_threshold,
            params.eps5,
            params.eta5,
            rng,
            sketch_budget=params.sketch_budget,
            clamp_budget=params.clamp_budget,
        )
        if svd_zdot.r < params.J:
            raise EmptySpectrum(
                f"only {svd_zdot.r} directions retained above the slow threshold, "
                f"need J = {params.J}"
            )
    snap("step5-svd-zdot")

    # slowest retained directions: smallest approximate singular values first
    order = np.argsort(svd_zdot.sigma_hat)[: params.J]
    w_hat = svd_zdot.v_hat[:, order]
    w_hat_sq = MatrixSQ(w_hat)
    snap("step6-store-w")

    return QiSfaModel(
        svd_x=svd_x,
        z_hat=z_hat,
        b_inv_half=b_inv,
        zdot_hat=zdot_hat,
        w_hat=w_hat,
        w_hat_sq=w_hat_sq,
        params=params,
        step_ledger=step_ledger,
    )


def sample_output_row(model: QiSfaModel, j: int, rng: np.random.Generator) -> int:
    """Draw a column index from the squared-entry distribution of Y(j, .)."""
    if not 0 <= j < model.n:
        raise InvalidInput(f"row {j} out of range for {model.n} rows")
    z_row = model.z_hat.row(j)
    handle = sq_matvec(model.w_hat_sq, z_row)
    return handle.sample(rng)


def query_entry(
    model: QiSfaModel,
    i: int,
    j: int,
    mode: str = "exact",
    eps: float = 0.05,
    delta: float = 0.1,
    rng: np.random.Generator | None = None,
) -> float:
    """Y(i, j) by direct summation (exact) or sampled estimation (estimated)."""
    if not (0 <= i < model.n and 0 <= j < model.params.J):
        raise InvalidInput(f"entry ({i}, {j}) out of range")
    if mode == "exact":
        return float(model.z_hat.row(i) @ model.w_hat[:, j])
    if mode == "estimated":
        if rng is None:
            raise InvalidInput("estimated mode needs an rng")
        if j not in model._w_col_handles:
            model._w_col_handles[j] = VectorHandle(WeightTree(model.w_hat[:, j]))
        x_handle = model._w_col_handles[j]
        y = model.z_hat.row(i)
        return estimate_inner_product(x_handle, y, eps, delta, rng)
    raise InvalidInput(f"unknown mode {mode!r}")
