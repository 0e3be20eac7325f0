"""Partial least squares on binary design matrices.

``cpls_fit`` never modifies the design matrix: it updates a residual vector and
Gram-Schmidt-orthogonalizes the latent vectors, so it only needs ``X @ w`` and
``X.T @ r``. ``nipals_fit`` is the classical deflating algorithm on a dense
copy and exists as a reference for small problems.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import rankdata

from .cmatrix import CompressedMatrix, atomic_write_bytes
from .ingest import FingerprintMatrix, ResponseVector

log = logging.getLogger(__name__)

REORTH_COMPONENTS = 30
REORTH_TOLERANCE = 1e-10


class SingularGramError(ArithmeticError):
    def __init__(self, component: int, message: str = ""):
        self.component = component
        super().__init__(message or f"Gram matrix singular at component {component}")


@dataclass(frozen=True)
class FitConfig:
    m: int = 10
    u: int = 10
    norm_tolerance: float = 1e-12
    tmatvec_strategy: str = "row-scan"

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("number of components must be >= 1")
        if self.u < 0:
            raise ValueError("number of extracted features must be >= 0")
        if not self.norm_tolerance > 0:
            raise ValueError("norm_tolerance must be positive")


@dataclass
class FitTrace:
    """Per-fit diagnostics: latent vectors (n x m) and ``r_{i+1} . t_i`` values."""

    T: np.ndarray
    residual_dots: List[float] = field(default_factory=list)
    reorthogonalized: List[bool] = field(default_factory=list)

    def orthonormality_error(self) -> float:
        if self.T.shape[1] == 0:
            return 0.0
        G = self.T.T @ self.T
        return float(np.abs(G - np.eye(G.shape[0])).max())


@dataclass
class PlsModel:
    """Fitted model ``f(x) = y_mean + sum_i alpha_i * w_i . x``."""

    W: np.ndarray                 # m x d
    alpha: np.ndarray             # m
    y_mean: float = 0.0
    feature_rankings: List[List[Tuple[int, float]]] = field(default_factory=list)
    requested: int = 0
    trace: Optional[FitTrace] = field(default=None, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]

    @property
    def truncated(self) -> bool:
        return self.m < self.requested

    @property
    def coef(self) -> np.ndarray:
        """Collapsed primal coefficients ``W.T @ alpha`` (length d)."""
        if self.m == 0:
            return np.zeros(self.d)
        return self.W.T @ self.alpha


# -- matrix handles -----------------------------------------------------------

class _Dense:
    def __init__(self, X):
        self.X = np.asarray(X, dtype=np.float64)
        self.shape = self.X.shape

    def matvec(self, w):
        return self.X @ w

    def tmatvec(self, r):
        return self.X.T @ r

    def fro2(self):
        return float(np.sum(self.X * self.X))


class _Compressed:
    def __init__(self, cm: CompressedMatrix, strategy="row-scan"):
        self.cm = cm
        self.shape = cm.shape
        self.strategy = strategy

    def matvec(self, w):
        return self.cm.matvec(w)

    def tmatvec(self, r):
        return self.cm.tmatvec(r, strategy=self.strategy)

    def fro2(self):
        # binary matrix: squared Frobenius norm is the number of ones
        return float(self.cm.row_nnz().sum())


def _handle(X, strategy="row-scan"):
    if isinstance(X, (_Dense, _Compressed)):
        return X
    if isinstance(X, CompressedMatrix):
        return _Compressed(X, strategy)
    if isinstance(X, FingerprintMatrix):
        return _Dense(X.to_dense())
    return _Dense(X)


def _response(y) -> ResponseVector:
    if not isinstance(y, ResponseVector):
        y = ResponseVector(y)
    return y.centered()


def _fix_sign(w: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(w)
    if len(nz) and w[nz[0]] < 0:
        return -w
    return w


def _gram_schmidt(t: np.ndarray, T: np.ndarray, force_twice: bool) -> Tuple[np.ndarray, bool]:
    """Project ``t`` off the orthonormal columns of ``T``; repeat once if needed."""
    t = t - T @ (T.T @ t)
    again = force_twice
    if not again:
        nt = np.linalg.norm(t)
        again = nt > 0 and float(np.abs(T.T @ t).max()) > REORTH_TOLERANCE * nt
    if again:
        t = t - T @ (T.T @ t)
    return t, again


def _degenerate(t_norm, r_norm, y_norm, fro2, tol) -> bool:
    # residual exhausted, or the new latent vector is at rounding level of
    # ||X||^2 ||r|| (no new direction left in the Krylov space)
    if r_norm <= tol * y_norm:
        return True
    return t_norm <= tol * fro2 * r_norm


# -- fitting --------------------------------------------------------------------

def cpls_fit(cm, y, config: FitConfig = FitConfig()) -> PlsModel:
    """Fit PLS on a (compressed) matrix without deflation.

    Parameters
    ----------
    cm : CompressedMatrix or array-like
        Design matrix handle; only products with it are used.
    y : array-like or ResponseVector
        Responses; centered here, the mean is kept in ``model.y_mean``.
    config : FitConfig

    Returns
    -------
    PlsModel
        ``model.truncated`` is set when a degenerate latent vector stopped the
        iteration before ``config.m`` components.
    """
    X = _handle(cm, config.tmatvec_strategy)
    n, d = X.shape
    yv = _response(y)
    if len(yv) != n:
        raise ValueError(f"{len(yv)} responses for {n} rows")
    yc = yv.values
    y_norm = float(np.linalg.norm(yc))
    fro2 = X.fro2()
    force_twice = config.m > REORTH_COMPONENTS

    r = yc.copy()
    W: List[np.ndarray] = []
    T = np.zeros((n, 0))
    dots: List[float] = []
    reorth: List[bool] = []
    for i in range(config.m):
        w = _fix_sign(X.tmatvec(r))
        t = X.matvec(w)
        again = False
        if i > 0:
            t, again = _gram_schmidt(t, T, force_twice)
        t_norm = float(np.linalg.norm(t))
        if _degenerate(t_norm, float(np.linalg.norm(r)), y_norm, fro2, config.norm_tolerance):
            log.info("component %d degenerate; stopping with %d components", i + 1, i)
            break
        t = t / t_norm
        r = r - float(yc @ t) * t
        W.append(w)
        T = np.column_stack([T, t])
        dots.append(float(r @ t))
        reorth.append(again)

    Wm = np.array(W) if W else np.zeros((0, d))
    alpha = compute_alpha(X, Wm, yc) if W else np.zeros(0)
    model = PlsModel(Wm, alpha, yv.mean, requested=config.m,
                     trace=FitTrace(T, dots, reorth))
    extract_features(model, config.u)
    return model


def nipals_fit(X, y, config: FitConfig = FitConfig()) -> PlsModel:
    """Reference PLS by explicit deflation ``X <- X - t t^T X`` on a dense copy."""
    if isinstance(X, CompressedMatrix):
        X = X.decompress()
    X0 = _handle(X).X
    Xk = X0.copy()
    n, d = Xk.shape
    yv = _response(y)
    if len(yv) != n:
        raise ValueError(f"{len(yv)} responses for {n} rows")
    yc = yv.values
    y_norm = float(np.linalg.norm(yc))
    fro2 = float(np.sum(X0 * X0))

    W: List[np.ndarray] = []
    T = np.zeros((n, 0))
    dots: List[float] = []
    for i in range(config.m):
        w = _fix_sign(Xk.T @ yc)
        t = Xk @ w
        t_norm = float(np.linalg.norm(t))
        # residual of y after projecting on the latent vectors so far
        r = yc - T @ (T.T @ yc)
        if _degenerate(t_norm, float(np.linalg.norm(r)), y_norm, fro2, config.norm_tolerance):
            break
        t = t / t_norm
        Xk -= np.outer(t, t @ Xk)
        W.append(w)
        T = np.column_stack([T, t])
        dots.append(float((r - float(yc @ t) * t) @ t))

    Wm = np.array(W) if W else np.zeros((0, d))
    alpha = compute_alpha(X0, Wm, yc) if W else np.zeros(0)
    model = PlsModel(Wm, alpha, yv.mean, requested=config.m, trace=FitTrace(T, dots))
    extract_features(model, config.u)
    return model


def compute_alpha(X, W, y) -> np.ndarray:
    """Solve ``(W^T X^T X W) alpha = W^T X^T y`` by Cholesky.

    If the factorization fails, ``1e-10 * trace / m`` is added to the diagonal
    once before giving up with SingularGramError.
    """
    Xh = _handle(X)
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    m = W.shape[0]
    if m == 0:
        raise ValueError("W has no components")
    if not np.all(np.isfinite(W)):
        raise ValueError("W has non-finite entries")
    XW = np.column_stack([Xh.matvec(w) for w in W])
    gram = XW.T @ XW
    rhs = XW.T @ y
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(gram), rhs)
    except np.linalg.LinAlgError:
        pass
    jitter = 1e-10 * float(np.trace(gram)) / m
    jittered = gram + jitter * np.eye(m)
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(jittered), rhs)
    except np.linalg.LinAlgError:
        bad = _first_singular_leading_block(jittered)
        raise SingularGramError(bad) from None


def _first_singular_leading_block(gram) -> int:
    for k in range(1, gram.shape[0] + 1):
        try:
            scipy.linalg.cho_factor(gram[:k, :k])
        except np.linalg.LinAlgError:
            return k
    return gram.shape[0]


# -- using a model -------------------------------------------------------------

def predict(model: PlsModel, x: Sequence[int]) -> float:
    """Score one fingerprint row given as 1-based positions."""
    pos = np.asarray(x, dtype=np.int64)
    if len(pos) and (pos.min() < 1 or pos.max() > model.d):
        raise IndexError(f"feature position out of range 1..{model.d}")
    if model.m == 0 or len(pos) == 0:
        return float(model.y_mean)
    return float(model.y_mean + (model.W[:, pos - 1].sum(axis=1) @ model.alpha))


def predict_rows(model: PlsModel, rows) -> np.ndarray:
    coef = model.coef
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        pos = np.asarray(row, dtype=np.int64)
        if len(pos) and (pos.min() < 1 or pos.max() > model.d):
            raise IndexError(f"row {i + 1}: feature position out of range 1..{model.d}")
        out[i] = coef[pos - 1].sum() if len(pos) else 0.0
    return out + model.y_mean


def predict_matrix(model: PlsModel, X) -> np.ndarray:
    if isinstance(X, FingerprintMatrix):
        return predict_rows(model, X.rows)
    return _handle(X).matvec(model.coef) + model.y_mean


def extract_features(model: PlsModel, u: int) -> List[List[Tuple[int, float]]]:
    """Top-``u`` features per component by |weight|, smaller index first on ties.

    Zero weights are never listed. Results (1-based feature ids) are stored in
    ``model.feature_rankings`` and returned.
    """
    rankings = []
    for w in model.W:
        nz = np.flatnonzero(w)
        # lexsort: last key is primary
        order = nz[np.lexsort((nz, -np.abs(w[nz])))][:max(u, 0)]
        rankings.append([(int(j) + 1, float(w[j])) for j in order])
    model.feature_rankings = rankings
    return rankings


# -- metrics --------------------------------------------------------------------

@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    defined: bool = True

    def __float__(self):
        return self.value


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum statistic (ties count 1/2)."""
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels, dtype=np.float64)
    pos = lab > 0
    n_pos = int(pos.sum())
    n_neg = len(lab) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def pcc(pred, truth) -> Metric:
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    pc = p - p.mean()
    tc = t - t.mean()
    denom = math.sqrt(float(pc @ pc) * float(tc @ tc))
    if denom == 0.0:
        return Metric("pcc", 0.0, defined=False)
    return Metric("pcc", float(pc @ tc) / denom)


def evaluate(predictions, truth, task: str) -> Metric:
    """AUC for ``classification`` (truth in {-1,+1}), PCC for ``regression``."""
    p = np.asarray(predictions, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise ValueError("predictions and truth must be 1-d of equal length")
    if len(p) < 2:
        raise ValueError("need at least two samples")
    if task in ("classification", "clf"):
        if not np.all(np.isin(t, (-1.0, 1.0))):
            raise ValueError("classification truth must be in {-1, +1}")
        return Metric("auc", auc(p, t))
    if task in ("regression", "reg"):
        return pcc(p, t)
    raise ValueError(f"unknown task {task!r}")


# -- GCPM1 model files -----------------------------------------------------------
#
# magic "GCPM1"; m, d (uint64 LE); y_mean (float64 LE)
# alpha: m x float64; W: m x d float64 row-major
# ranking count (uint64), then (component uint64, feature uint64, weight float64)

GCPM_MAGIC = b"GCPM1"


class ModelFormatError(ValueError):
    pass


def dumps_model(model: PlsModel) -> bytes:
    parts = [GCPM_MAGIC, struct.pack("<QQd", model.m, model.d, model.y_mean),
             np.asarray(model.alpha, dtype="<f8").tobytes(),
             np.ascontiguousarray(model.W, dtype="<f8").tobytes()]
    triples = [(c + 1, j, w) for c, ranking in enumerate(model.feature_rankings)
               for j, w in ranking]
    parts.append(struct.pack("<Q", len(triples)))
    parts += [struct.pack("<QQd", c, j, w) for c, j, w in triples]
    return b"".join(parts)


def loads_model(data: bytes) -> PlsModel:
    if data[:5] != GCPM_MAGIC:
        raise ModelFormatError("not a GCPM1 model file (bad magic)")
    try:
        m, d, y_mean = struct.unpack_from("<QQd", data, 5)
        off = 5 + 24
        alpha = np.frombuffer(data, dtype="<f8", count=m, offset=off).astype(np.float64)
        off += 8 * m
        W = np.frombuffer(data, dtype="<f8", count=m * d, offset=off).astype(np.float64)
        off += 8 * m * d
        (count,) = struct.unpack_from("<Q", data, off)
        off += 8
        rankings: List[List[Tuple[int, float]]] = [[] for _ in range(m)]
        for _ in range(count):
            c, j, w = struct.unpack_from("<QQd", data, off)
            off += 24
            if not (1 <= c <= m and 1 <= j <= d):
                raise ModelFormatError(f"ranking entry ({c}, {j}) out of range")
            rankings[c - 1].append((j, w))
    except (struct.error, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"truncated GCPM1 data: {exc}") from None
    if off != len(data):
        raise ModelFormatError(f"{len(data) - off} trailing bytes after GCPM1 payload")
    return PlsModel(W.reshape(m, d), alpha, float(y_mean), rankings, requested=m)


def save_model(path, model: PlsModel) -> None:
    atomic_write_bytes(path, dumps_model(model))


def load_model(path) -> PlsModel:
    with open(path, "rb") as fh:
        return loads_model(fh.read())
