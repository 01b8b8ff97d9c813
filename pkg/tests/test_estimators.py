import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from acpsg import LatentSpaceGenerator, VisualEmbedding, ZeroShotClassifier
from acpsg.evaluation import Mode, evaluate
from acpsg.pipeline import RunConfig, run_pipeline


@pytest.mark.parametrize("est", [
    LatentSpaceGenerator(latent_dim=3, n_epochs=5),
    VisualEmbedding(lam=0.5, n_epochs=5),
    ZeroShotClassifier(latent_dim=0, epochs_embed=5),
])
def test_params_roundtrip_through_clone(est):
    params = est.get_params()
    twin = clone(est)
    assert twin.get_params() == params
    twin.set_params(random_state=9)
    assert twin.get_params()["random_state"] == 9
    assert est.get_params()["random_state"] == params["random_state"]


def test_unfitted_estimators_refuse_to_predict(small_dataset):
    X = small_dataset.features_test_unseen
    with pytest.raises(NotFittedError):
        ZeroShotClassifier().predict(X)
    with pytest.raises(NotFittedError):
        VisualEmbedding().transform(X)
    with pytest.raises(NotFittedError):
        LatentSpaceGenerator().transform(small_dataset.prototypes)


def test_latent_generator_shape(small_dataset):
    gen = LatentSpaceGenerator(latent_dim=3, n_epochs=50).fit(small_dataset.prototypes)
    assert gen.psi_.shape == (small_dataset.n_classes, 3)
    np.testing.assert_allclose(gen.transform(small_dataset.prototypes), gen.psi_, atol=1e-12)


def test_visual_embedding_shapes(small_dataset):
    ds = small_dataset
    emb = VisualEmbedding(n_epochs=20).fit(ds.features_train, ds.labels_train, ds.prototypes)
    Z = emb.transform(ds.features_test_unseen)
    assert Z.shape == (ds.features_test_unseen.shape[0], ds.n_attributes)
    assert emb.inverse_transform(Z).shape == ds.features_test_unseen.shape


def test_classifier_matches_functional_pipeline(small_dataset):
    ds = small_dataset
    kw = dict(latent_dim=3, epochs_latent=200, epochs_embed=200)
    clf = ZeroShotClassifier(**kw).fit(ds.features_train, ds.labels_train, ds.prototypes)
    np.testing.assert_array_equal(clf.unseen_classes_, ds.unseen_classes)

    result = run_pipeline(ds, RunConfig(**kw))
    np.testing.assert_allclose(clf.model_.W_en, result.model.W_en, atol=1e-12)
    pred = clf.predict(ds.features_test_unseen)
    assert set(pred) <= set(ds.unseen_classes)
    rep = evaluate(result.model, result.latent, ds, Mode.CONVENTIONAL)
    acc = np.mean([np.mean(pred[ds.labels_test_unseen == c] == c) for c in ds.unseen_classes])
    assert acc == pytest.approx(rep.acc_unseen)

    everything = clf.predict(ds.features_test_seen, candidate_classes=clf.classes_)
    assert everything.shape == ds.labels_test_seen.shape
    assert clf.transform(ds.features_test_seen).shape[1] == ds.n_attributes + 3


def test_classifier_rejects_out_of_range_labels(small_dataset):
    ds = small_dataset
    y = ds.labels_train.copy()
    y[0] = ds.n_classes
    with pytest.raises(ValueError):
        ZeroShotClassifier(latent_dim=0, epochs_embed=2).fit(ds.features_train, y, ds.prototypes)
