"""Sampling-based slow feature analysis with an exact dense oracle."""

from .errors import (
    BudgetExceeded,
    DegenerateDistribution,
    EmptySpectrum,
    InvalidInput,
    RankDeficient,
    RejectionStall,
    SketchSfaError,
)
from .handles import MatVecHandle, RowViewHandle, VectorHandle, sq_matvec
from .ledger import CostLedger
from .matrix_sq import MatrixSQ, build_matrix
from .sfa_exact import (
    Dataset,
    DiffMatrix,
    SfaResult,
    delta_value,
    exact_sfa,
    normalize,
    pairwise_differentiate,
    quadratic_expand,
)
from .sfa_qi import (
    PipelineParams,
    QiSfaModel,
    SpectralSummary,
    build,
    query_entry,
    sample_output_row,
    select_parameters,
)
from .sketch_ops import (
    ApproxSVD,
    DenseRows,
    SuccinctProduct,
    approx_matmul,
    estimate_inner_product,
    fkv_approx_svd,
)
from .weight_tree import WeightTree, build_vector, sample_index, update_entry

__version__ = "0.1.0"
