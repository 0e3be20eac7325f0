"""Seeded generators for sparse binary test data."""

from __future__ import annotations

import numpy as np

from .ingest import FingerprintMatrix, ResponseVector


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_matrix(seed, n: int, d: int, density: float) -> FingerprintMatrix:
    rng = _rng(seed)
    mask = rng.random((n, d)) < density
    return FingerprintMatrix.from_dense(mask)


def template_corpus(seed, n: int = 1000, templates: int = 10, d: int = 1000,
                    template_density: float = 0.1, noise: float = 0.05) -> FingerprintMatrix:
    """Rows copied from a few random template rows with positional noise.

    Each template position is, with probability ``noise``, shifted one column
    left or right (kept inside ``1..d``); collisions merge.
    """
    rng = _rng(seed)
    base = [np.flatnonzero(rng.random(d) < template_density) + 1 for _ in range(templates)]
    rows = []
    for _ in range(n):
        tpl = base[rng.integers(templates)]
        hit = rng.random(len(tpl)) < noise
        step = rng.choice((-1, 1), size=len(tpl))
        pos = np.clip(tpl + hit * step, 1, d)
        rows.append(tuple(np.unique(pos).tolist()))
    return FingerprintMatrix(rows, d)


def _planted_design(rng, n, d, informative, density, informative_density):
    probs = np.full(d, density)
    probs[:informative] = informative_density
    return rng.random((n, d)) < probs


def planted_classification(seed, n: int = 2000, d: int = 1000, informative: int = 20,
                           margin_noise: float = 0.1, density: float = 0.02,
                           informative_density: float = 0.2):
    """Labels in {-1,+1} from the sign of a sparse linear score.

    Features ``1..informative`` carry the signal. Gaussian noise with standard
    deviation ``margin_noise * std(score)`` is added to the score before
    thresholding at its median. Returns ``(matrix, beta)``.
    """
    rng = _rng(seed)
    X = _planted_design(rng, n, d, informative, density, informative_density)
    beta = np.zeros(d)
    beta[:informative] = rng.normal(size=informative)
    score = X @ beta
    score = score + rng.normal(scale=margin_noise * score.std(), size=n)
    y = np.where(score > np.median(score), 1.0, -1.0)
    return FingerprintMatrix.from_dense(X, ResponseVector(y)), beta


def planted_regression(seed, n: int = 2000, d: int = 1000, informative: int = 20,
                       snr: float = 5.0, density: float = 0.02,
                       informative_density: float = 0.2):
    """``y = X beta + noise`` with ``var(X beta) / var(noise) == snr``."""
    rng = _rng(seed)
    X = _planted_design(rng, n, d, informative, density, informative_density)
    beta = np.zeros(d)
    beta[:informative] = rng.normal(size=informative)
    signal = X @ beta
    y = signal + rng.normal(scale=signal.std() / np.sqrt(snr), size=n)
    return FingerprintMatrix.from_dense(X, ResponseVector(y)), beta


def split(matrix: FingerprintMatrix, seed, test_fraction: float = 0.2):
    """Random train/test split of rows and labels."""
    rng = _rng(seed)
    perm = rng.permutation(matrix.n)
    cut = int(round(matrix.n * (1 - test_fraction)))
    parts = []
    for idx in (np.sort(perm[:cut]), np.sort(perm[cut:])):
        labels = None
        if matrix.labels is not None:
            labels = ResponseVector(matrix.labels.original()[idx])
        parts.append(FingerprintMatrix([matrix.rows[i] for i in idx], matrix.dim, labels))
    return parts[0], parts[1]
