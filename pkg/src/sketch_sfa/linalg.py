"""Small dense helpers shared by the pipeline and the verification harness."""

from __future__ import annotations

import numpy as np


def sign_normalize(m: np.ndarray) -> np.ndarray:
    """Flip column signs so each column's largest-magnitude coordinate is positive."""
    m = np.array(m, dtype=np.float64, copy=True)
    if m.ndim == 1:
        m = m[:, None]
        flat = True
    else:
        flat = False
    idx = np.argmax(np.abs(m), axis=0)
    signs = np.sign(m[idx, np.arange(m.shape[1])])
    signs[signs == 0] = 1.0
    m = m * signs
    return m[:, 0] if flat else m


def align_columns(reference: np.ndarray, approx: np.ndarray) -> np.ndarray:
    """Greedy column matching by maximal absolute inner product, then sign fix.

    Returns approx with columns permuted and sign-flipped to best match the
    reference. Singular vectors are defined up to sign (and rotation under
    near-ties), so comparisons are only meaningful after this step.
    """
    ref = np.asarray(reference, dtype=np.float64)
    app = np.asarray(approx, dtype=np.float64)
    if ref.shape != app.shape:
        raise ValueError(f"shape mismatch {ref.shape} vs {app.shape}")
    k = ref.shape[1]
    overlaps = np.abs(ref.T @ app)  # (k_ref, k_app)
    out = np.zeros_like(app)
    used = set()
    # largest overlaps claimed first
    order = np.dstack(np.unravel_index(np.argsort(-overlaps, axis=None), overlaps.shape))[0]
    assigned = {}
    for i, j in order:
        if i in assigned or j in used:
            continue
        assigned[int(i)] = int(j)
        used.add(int(j))
        if len(assigned) == k:
            break
    for i, j in assigned.items():
        col = app[:, j]
        if ref[:, i] @ col < 0:
            col = -col
        out[:, i] = col
    return out
