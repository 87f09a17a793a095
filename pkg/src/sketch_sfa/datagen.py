"""Synthetic dataset generators used by the experiments and the test suite."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInput
from .sfa_exact import Dataset


def blobs(
    n: int,
    d: int,
    classes: int = 4,
    strengths=None,
    seed: int = 0,
) -> tuple[Dataset, dict]:
    """Gaussian class clusters with planted mean-direction strengths.

    The centered class means span classes-1 directions whose singular values
    are ``strengths`` (default well-separated values); within-class noise is
    isotropic unit Gaussian. Along a mean direction of strength m the
    whitened within-class variation shrinks by 1/sqrt(1 + m^2), so the slow
    spectrum — and its gaps — are controlled directly by ``strengths``.
    Returns the dataset plus ground-truth metadata (class means).
    """
    if classes < 2 or n < 2 * classes or d < classes:
        raise InvalidInput("need >= 2 classes, >= 2 samples per class, d >= classes")
    rng = np.random.default_rng(seed)
    k = classes - 1
    if strengths is None:
        strengths = 9.0 * 0.6 ** np.arange(k)
    strengths = np.asarray(strengths, dtype=np.float64)
    if strengths.size != k:
        raise InvalidInput(f"need {k} mean strengths for {classes} classes")
    # centered orthonormal class-mix: columns orthogonal to the all-ones vector
    mix, _ = np.linalg.qr(
        np.hstack([np.ones((classes, 1)), rng.standard_normal((classes, k))])
    )
    mix = mix[:, 1:]
    vdir, _ = np.linalg.qr(rng.standard_normal((d, k)))
    means = math.sqrt(classes) * (mix * strengths) @ vdir.T
    labels = np.repeat(np.arange(classes), n // classes)
    labels = np.concatenate([labels, rng.integers(0, classes, n - labels.size)])
    rng.shuffle(labels)
    x = means[labels] + rng.standard_normal((n, d))
    ds = Dataset(X=x, labels=labels, mode="classification")
    return ds, {"class_means": means, "strengths": strengths, "directions": vdir}


def wiskott_signal(T: int = 4000, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Classic two-channel toy signal: a slow drift hidden inside a fast one.

    x1(t) = sin(t) + cos(11 t)^2, x2(t) = cos(11 t); the slow feature of the
    pair is sin(t), recoverable as a quadratic function of the inputs.
    """
    if T < 4:
        raise InvalidInput("need at least four time steps")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0 * np.pi, T)
    x1 = np.sin(t) + np.cos(11.0 * t) ** 2
    x2 = np.cos(11.0 * t)
    x = np.stack([x1, x2], axis=1)
    if noise > 0.0:
        x += noise * rng.standard_normal(x.shape)
    return Dataset(X=x, labels=None, mode="time-series")


def timescale_mix(
    n: int,
    speeds,
    seed: int = 0,
    rotate: bool = True,
) -> Dataset:
    """Rotated mixture of stationary AR(1) channels with chosen speeds.

    Channel j is a unit-variance AR(1) process whose consecutive differences
    have standard deviation speeds[j]; a random orthogonal mixing matrix
    hides the channels. The whitened-difference spectrum of the result is
    (up to sampling noise) exactly ``speeds``, so slow-direction recovery is
    fully controlled: the slowest channel is the ground-truth slow feature.
    Speeds must lie in (0, 2); speed^2 = 2 (1 - autocorrelation).
    """
    speeds = np.asarray(speeds, dtype=np.float64)
    d = speeds.size
    if n < 4 or d < 1:
        raise InvalidInput("need n >= 4 and at least one channel")
    if np.any(speeds <= 0.0) or np.any(speeds >= 2.0):
        raise InvalidInput("speeds must lie in (0, 2)")
    rng = np.random.default_rng(seed)
    rho = 1.0 - speeds**2 / 2.0
    z = np.empty((n, d))
    z[0] = rng.standard_normal(d)
    innov = rng.standard_normal((n - 1, d)) * np.sqrt(1.0 - rho**2)
    for t in range(1, n):
        z[t] = rho * z[t - 1] + innov[t - 1]
    if rotate:
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        z = z @ q.T
    return Dataset(X=z, labels=None, mode="time-series")


def low_rank(
    n: int,
    d: int,
    rank: int,
    noise: float = 1e-3,
    decay: float = 0.5,
    seed: int = 0,
) -> tuple[np.ndarray, dict]:
    """Matrix with a planted low-rank spectrum plus a small noise floor.

    Returns the matrix and ground truth: the planted singular values (before
    noise) and the planted right singular vectors, for sketching tests.
    """
    if not 1 <= rank <= min(n, d):
        raise InvalidInput("rank must be in [1, min(n, d)]")
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    v, _ = np.linalg.qr(rng.standard_normal((d, rank)))
    sv = np.sqrt(n) * decay ** np.arange(rank)
    x = (u * sv) @ v.T + noise * rng.standard_normal((n, d))
    truth = {"singular_values": sv, "right_vectors": v}
    return x, truth
