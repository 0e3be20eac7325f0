import numpy as np
import pytest

from gcpls.cmatrix import CompressedMatrix
from gcpls.ingest import FingerprintMatrix, ResponseVector
from gcpls.pls import (FitConfig, PlsModel, SingularGramError, auc, compute_alpha, cpls_fit,
                       evaluate, extract_features, nipals_fit, predict, predict_matrix,
                       predict_rows)
from gcpls.repair import CompressorConfig, compress
from gcpls.synthetic import planted_classification


def _instance(rng, n, d, density=0.3):
    X = (rng.random((n, d)) < density).astype(float)
    y = rng.normal(size=n)
    m = FingerprintMatrix.from_dense(X, y)
    return X, y, m, compress(m, CompressorConfig(k=8))


def lstsq_fit(A, y):
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return A @ coef


def test_nipals_identity_design(rng):
    y = rng.normal(size=6)
    y -= y.mean()
    model = nipals_fit(np.eye(6), y, FitConfig(m=1))
    # w1 = y up to the sign convention; the product alpha1 * w1 is sign-free
    w, t = model.W[0], model.trace.T[:, 0]
    s = np.sign(w[0]) * np.sign(y[0])
    np.testing.assert_allclose(w, s * y, atol=1e-15)
    np.testing.assert_allclose(t, s * y / np.linalg.norm(y), atol=1e-15)
    np.testing.assert_allclose(model.alpha[0] * w, y, atol=1e-12)


def test_first_weight_is_xty(rng):
    X, y, m, cm = _instance(rng, 40, 25)
    yc = y - y.mean()
    ref = X.T @ yc
    if ref[np.flatnonzero(ref)[0]] < 0:
        ref = -ref
    for fit in (nipals_fit(X, y, FitConfig(m=1)), cpls_fit(cm, y, FitConfig(m=1))):
        np.testing.assert_allclose(fit.W[0], ref, rtol=1e-12, atol=1e-12)


def test_m1_alpha_closed_form(rng):
    X, y, m, cm = _instance(rng, 30, 20)
    yc = y - y.mean()
    w = X.T @ yc
    if w[np.flatnonzero(w)[0]] < 0:
        w = -w
    xw = X @ w
    model = cpls_fit(cm, y, FitConfig(m=1))
    assert model.alpha[0] == pytest.approx((xw @ yc) / (xw @ xw), rel=1e-10)


def test_nipals_fit_is_projection_on_latents(rng):
    X, y, m, cm = _instance(rng, 30, 20)
    model = nipals_fit(X, y, FitConfig(m=5))
    assert model.m == 5
    fitted = predict_matrix(model, X) - model.y_mean
    expected = lstsq_fit(model.trace.T, y - y.mean())
    np.testing.assert_allclose(fitted, expected, atol=1e-9)


@pytest.mark.parametrize("n,d,m", [(30, 20, 5), (80, 40, 8), (15, 60, 10), (120, 6, 9)])
def test_cpls_equals_nipals(rng, n, d, m):
    X, y, fm, cm = _instance(rng, n, d)
    a = cpls_fit(cm, y, FitConfig(m=m))
    b = nipals_fit(X, y, FitConfig(m=m))
    assert a.m == b.m
    fa, fb = predict_matrix(a, cm), predict_matrix(b, X)
    assert np.abs(fa - fb).max() <= 1e-6 * np.abs(fb).max()
    for ta, tb in zip(a.trace.T.T, b.trace.T.T):
        assert min(np.abs(ta - tb).max(), np.abs(ta + tb).max()) <= 1e-6


def test_orthonormal_latents_and_residuals(rng):
    X, y, fm, cm = _instance(rng, 150, 80, 0.1)
    model = cpls_fit(cm, y, FitConfig(m=10))
    assert model.trace.orthonormality_error() <= 1e-8
    assert max(abs(v) for v in model.trace.residual_dots) <= 1e-8


def test_many_components_reorthogonalize(rng):
    X, y, fm, cm = _instance(rng, 120, 90, 0.2)
    model = cpls_fit(X, y, FitConfig(m=35))
    assert all(model.trace.reorthogonalized[1:])
    assert model.trace.orthonormality_error() <= 1e-8


def test_dense_and_compressed_handles_agree(rng):
    X, y, fm, cm = _instance(rng, 50, 30)
    a = cpls_fit(cm, y, FitConfig(m=4))
    b = cpls_fit(X, y, FitConfig(m=4))
    c = cpls_fit(cm, y, FitConfig(m=4, tmatvec_strategy="column-scan"))
    np.testing.assert_allclose(a.W, b.W, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a.W, c.W, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(a.alpha, b.alpha, rtol=1e-8)


def test_compression_invariance(rng):
    X, y, fm, _ = _instance(rng, 60, 50, 0.2)
    fits = []
    for cfg in (CompressorConfig(k=1), CompressorConfig(k=16, counter="lossy", interval=8),
                CompressorConfig(k=16, counter="freq", capacity=6, vacancy=30)):
        fits.append(cpls_fit(compress(fm, cfg), y, FitConfig(m=6)))
    for f in fits[1:]:
        np.testing.assert_allclose(f.W, fits[0].W, rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(f.alpha, fits[0].alpha, rtol=1e-10, atol=1e-10)


def test_monotone_training_error(rng):
    X, y, fm, cm = _instance(rng, 80, 40)
    prev = np.inf
    for m in range(1, 9):
        model = cpls_fit(cm, y, FitConfig(m=m))
        sse = float(np.sum((predict_matrix(model, cm) - y) ** 2))
        assert sse <= prev + 1e-9
        prev = sse


def test_zero_response_truncates():
    X = np.eye(4)
    model = cpls_fit(X, np.zeros(4), FitConfig(m=3))
    assert model.m == 0 and model.truncated
    assert model.alpha.shape == (0,)
    assert predict(model, (1, 2)) == 0.0


def test_rank_deficient_truncates(rng):
    X = np.zeros((20, 3))
    X[:, 0] = rng.random(20) < 0.5
    X[:, 1] = 1 - X[:, 0]
    X[:, 2] = X[:, 0]
    y = rng.normal(size=20)
    a = cpls_fit(X, y, FitConfig(m=5))
    b = nipals_fit(X, y, FitConfig(m=5))
    assert a.truncated and a.m == b.m == 2


def test_compute_alpha_examples(rng):
    y = rng.normal(size=5)
    y -= y.mean()
    assert compute_alpha(np.eye(5), y[None, :], y)[0] == pytest.approx(1.0)
    Q, _ = np.linalg.qr(rng.normal(size=(8, 3)))
    # X = I so XW = W^T columns are orthonormal
    yy = rng.normal(size=8)
    np.testing.assert_allclose(compute_alpha(np.eye(8), Q.T, yy), Q.T @ yy, atol=1e-12)
    X, y2, _, cm = _instance(rng, 25, 15)
    W = rng.normal(size=(4, 15))
    np.testing.assert_allclose(compute_alpha(cm, W, y2),
                               np.linalg.pinv(X @ W.T) @ y2, rtol=1e-8)


def test_compute_alpha_jitter_and_singular():
    X = np.eye(3)
    W = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 0]])
    # rank-deficient Gram: factorization fails, jitter rescues it
    alpha = compute_alpha(X, W, np.ones(3))
    np.testing.assert_allclose(alpha[:2], [1.0, 1.0], rtol=1e-8)
    with pytest.raises(SingularGramError) as exc:
        compute_alpha(np.zeros((3, 3)), np.ones((2, 3)), np.ones(3))
    assert exc.value.component == 1


def test_predict_examples():
    model = PlsModel(W=np.eye(5)[[2]], alpha=np.array([1.0]), y_mean=0.25)
    assert predict(model, ()) == 0.25
    assert predict(model, (3, 5)) == pytest.approx(1.25)
    with pytest.raises(IndexError):
        predict(model, (6,))
    np.testing.assert_allclose(predict_rows(model, [(), (3,), (1, 3)]), [0.25, 1.25, 1.25])


def test_predict_reproduces_training_fit(rng):
    X, y, fm, cm = _instance(rng, 50, 30)
    model = cpls_fit(cm, y, FitConfig(m=4))
    latent_fit = model.trace.T @ (model.trace.T.T @ (y - y.mean())) + y.mean()
    np.testing.assert_allclose(predict_rows(model, fm.rows), latent_fit, atol=1e-9)
    np.testing.assert_allclose(predict_matrix(model, cm), latent_fit, atol=1e-9)


def test_extract_features_examples():
    model = PlsModel(W=np.array([[0.0, 5.0, -7.0], [0.0, 0.0, 0.0], [2.0, -2.0, 1.0]]),
                     alpha=np.ones(3))
    r = extract_features(model, 2)
    assert r[0] == [(3, -7.0), (2, 5.0)]
    assert r[1] == []
    assert r[2] == [(1, 2.0), (2, -2.0)]
    assert extract_features(model, 10)[0] == [(3, -7.0), (2, 5.0)]
    assert extract_features(model, 0) == [[], [], []]
    assert model.feature_rankings == [[], [], []]


def test_planted_features_rank_first():
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, d = 300, 200
        X = rng.random((n, d)) < 0.05
        X[:, :3] = rng.random((n, 3)) < 0.3
        y = X[:, :3] @ np.array([2.0, -1.5, 1.0]) + 0.1 * rng.normal(size=n)
        cm = compress(FingerprintMatrix.from_dense(X), CompressorConfig(k=64))
        model = cpls_fit(cm, y, FitConfig(m=3, u=10))
        top = {j for j, _ in model.feature_rankings[0]}
        hits += {1, 2, 3} <= top
    assert hits >= 19


def test_sign_convention(rng):
    X, y, fm, cm = _instance(rng, 40, 20)
    model = cpls_fit(cm, y, FitConfig(m=5))
    for w in model.W:
        assert w[np.flatnonzero(w)[0]] > 0


def test_auc_values():
    assert auc([0.1, 0.2, 0.8, 0.9], [-1, -1, 1, 1]) == 1.0
    assert auc([0.1, 0.4, 0.35, 0.8], [-1, -1, 1, 1]) == 0.75
    assert auc([0.5, 0.5], [-1, 1]) == 0.5
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_pair_enumeration(rng):
    s = rng.integers(0, 5, size=40).astype(float)
    lab = np.where(rng.random(40) < 0.4, 1.0, -1.0)
    pos, neg = s[lab > 0], s[lab < 0]
    brute = np.mean([(p > q) + 0.5 * (p == q) for p in pos for q in neg])
    assert auc(s, lab) == pytest.approx(brute, abs=1e-12)


def test_evaluate():
    assert evaluate([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], "regression").value == pytest.approx(1.0)
    flat = evaluate([1.0, 1.0, 1.0], [1.0, 2.0, 3.0], "regression")
    assert flat.value == 0.0 and not flat.defined
    assert evaluate([0.1, 0.9], [-1, 1], "classification").value == 1.0
    with pytest.raises(ValueError):
        evaluate([0.1, 0.9], [0, 1], "classification")
    with pytest.raises(ValueError):
        evaluate([0.1], [1], "regression")
    with pytest.raises(ValueError):
        evaluate([0.1, 0.2], [1, 2], "ranking")


def test_classification_fit_smoke():
    fm, _ = planted_classification(3, n=400, d=150)
    cm = compress(fm, CompressorConfig(k=64))
    model = cpls_fit(cm, fm.labels, FitConfig(m=5))
    assert auc(predict_matrix(model, cm), fm.labels.values) > 0.95
