import numpy as np
import pytest

from acpsg.embedding import (
    EmbeddingModel,
    EmbeddingTrainConfig,
    GramObjective,
    VisualEmbedding,
    compute_losses,
    concat_prototypes,
    loss_gradients,
    train_embedding,
)
from acpsg.exceptions import DivergenceError, InsufficientData, ShapeError


def random_instance(rng, D=4, N=6, k=3, lam=1.0):
    model = EmbeddingModel(W_en=rng.standard_normal((k, D)), W_de=rng.standard_normal((D, k)), lam=lam)
    return model, rng.standard_normal((D, N)), rng.standard_normal((k, N))


def finite_difference_grads(model, X, T, h=1e-5):
    out = []
    for W in (model.W_en, model.W_de):
        g = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            old = W[idx]
            W[idx] = old + h
            lp = compute_losses(model, X, T)[2]
            W[idx] = old - h
            lm = compute_losses(model, X, T)[2]
            W[idx] = old
            g[idx] = (lp - lm) / (2 * h)
        out.append(g)
    return out


def max_rel_err(a, b, floor=1e-6):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))


def test_concat_example():
    t = concat_prototypes([[1.0, 0.0]], [[0.5]])
    np.testing.assert_array_equal(t.table, [[1.0, 0.0, 1.0]])
    assert t.table.shape[1] == 3 and t.latent_dim == 1


def test_concat_without_latent(rng):
    phi = rng.random((5, 4))
    t = concat_prototypes(phi, np.zeros((5, 0)))
    np.testing.assert_allclose(t.table, phi / np.linalg.norm(phi, axis=1, keepdims=True))
    np.testing.assert_array_equal(concat_prototypes(phi).table, t.table)


def test_concat_block_norms(rng):
    phi, psi = rng.random((6, 4)), rng.random((6, 3))
    psi[2] = 0
    t = concat_prototypes(phi, psi)
    np.testing.assert_allclose(np.linalg.norm(t.phi_block, axis=1), 1.0)
    norms = np.linalg.norm(t.psi_block, axis=1)
    assert norms[2] == 0
    np.testing.assert_allclose(np.delete(norms, 2), 1.0)
    raw = concat_prototypes(phi, psi, normalize=False)
    np.testing.assert_array_equal(raw.table, np.hstack([phi, psi]))


def test_concat_row_mismatch():
    with pytest.raises(ShapeError):
        concat_prototypes(np.ones((3, 2)), np.ones((2, 2)))


def test_losses_perfect_fit():
    model = EmbeddingModel(W_en=np.eye(2), W_de=np.eye(2))
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert compute_losses(model, X, X) == (0.0, 0.0, 0.0)
    for g in loss_gradients(model, X, X):
        np.testing.assert_array_equal(g, 0.0)


def test_losses_scalar_case():
    model = EmbeddingModel(W_en=np.array([[2.0]]), W_de=np.array([[0.5]]), lam=1.0)
    assert compute_losses(model, np.array([[1.0]]), np.array([[1.0]])) == (1.0, 0.0, 1.0)


def test_lambda_linearity(rng):
    model, X, T = random_instance(rng)
    L_en, L_de, L = compute_losses(model, X, T)
    assert L == L_en + model.lam * L_de
    model.lam = 2.0
    L_en2, _, L2 = compute_losses(model, X, T)
    assert L2 - L_en2 == pytest.approx(2 * (L - L_en), rel=1e-15)


def test_losses_shape_mismatch(rng):
    model, X, T = random_instance(rng)
    with pytest.raises(ShapeError):
        compute_losses(model, X[:-1], T)
    with pytest.raises(ShapeError):
        loss_gradients(model, X, T[:, :-1])


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    model, X, T = random_instance(np.random.default_rng(seed), D=4, N=6, k=3, lam=0.7)
    for a, f in zip(loss_gradients(model, X, T), finite_difference_grads(model, X, T)):
        assert max_rel_err(a, f) <= 1e-5


def test_encoder_gradient_scales_quadratically(rng):
    model, X, T = random_instance(rng, lam=0.0)
    g1, _ = loss_gradients(model, X, T)
    g3, _ = loss_gradients(model, 3 * X, 3 * T)
    np.testing.assert_allclose(g3, 9 * g1, rtol=1e-12)


def test_gram_objective_matches_direct(rng):
    model, X, T = random_instance(rng, D=7, N=40, k=5, lam=0.3)
    obj = GramObjective(X, T, model.lam)
    np.testing.assert_allclose(obj.losses(model.W_en, model.W_de), compute_losses(model, X, T), rtol=1e-10)
    for a, b in zip(obj.gradients(model.W_en, model.W_de), loss_gradients(model, X, T)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_single_sample_fits_exactly(rng):
    X = rng.standard_normal((8, 1))
    P = rng.standard_normal((1, 5))
    m = train_embedding(X, [0], P, EmbeddingTrainConfig(lr=1e-2, epochs=3000))
    assert m.training_history[-1][2] <= 1e-6


def test_lambda_zero_matches_least_squares(rng):
    D, N = 10, 20
    X = rng.standard_normal((D, N))
    y = rng.integers(0, 4, N)
    P = rng.standard_normal((4, 3))
    T = P[y].T
    W = np.linalg.solve(X @ X.T, X @ T.T).T
    best = np.sum((W @ X - T) ** 2) / N
    m = train_embedding(X, y, P, EmbeddingTrainConfig(lam=0.0, lr=1e-2, epochs=10000,
                                                      lr_decay=1e-3 ** (1 / 10000)))
    assert abs(m.training_history[-1][0] - best) <= 1e-6


def test_training_history_is_nearly_monotone(small_dataset):
    t = concat_prototypes(small_dataset.prototypes)
    m = train_embedding(small_dataset.features_train.T, small_dataset.labels_train, t)
    L = np.array([h[2] for h in m.training_history])
    assert L[-1] < L[0]
    assert np.all(L[100:] <= 1.01 * L[:-100])


def test_training_is_deterministic(small_dataset):
    t = concat_prototypes(small_dataset.prototypes)
    run = lambda: train_embedding(small_dataset.features_train.T, small_dataset.labels_train, t,  # noqa: E731
                                  EmbeddingTrainConfig(epochs=200, seed=3))
    a, b = run(), run()
    assert a.W_en.tobytes() == b.W_en.tobytes() and a.W_de.tobytes() == b.W_de.tobytes()


def test_empty_training_set():
    with pytest.raises(InsufficientData):
        train_embedding(np.zeros((4, 0)), [], np.ones((2, 3)))


def test_divergence():
    X = np.ones((3, 4)) * 1e200
    with pytest.raises(DivergenceError):
        train_embedding(X, [0, 1, 0, 1], np.ones((2, 2)), EmbeddingTrainConfig(epochs=5))


def test_save_load(tmp_path, rng):
    model, _, _ = random_instance(rng)
    model.training_history.append((1.0, 2.0, 3.0))
    model.meta.update(seed=4, epochs=10)
    model.save(tmp_path)
    back = EmbeddingModel.load(tmp_path)
    np.testing.assert_array_equal(back.W_en, model.W_en)
    np.testing.assert_array_equal(back.W_de, model.W_de)
    assert back.lam == model.lam and back.meta["seed"] == 4


def test_visual_embedding_estimator(small_dataset):
    from sklearn.base import clone

    table = concat_prototypes(small_dataset.prototypes)
    est = VisualEmbedding(n_epochs=300, random_state=1)
    assert clone(est).get_params() == est.get_params()
    Z = est.fit(small_dataset.features_train, small_dataset.labels_train, table).transform(
        small_dataset.features_test_seen)
    assert Z.shape == (small_dataset.labels_test_seen.size, small_dataset.n_attributes)
    back = est.inverse_transform(table.table)
    assert back.shape == (small_dataset.n_classes, small_dataset.feature_dim)
