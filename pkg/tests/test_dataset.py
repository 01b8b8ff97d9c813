import json
import shutil

import numpy as np
import pytest

from acpsg import zmat
from acpsg.dataset import (
    SynthConfig,
    ZslDataset,
    attribute_groups,
    generate_synthetic,
    load_dataset,
    save_dataset,
)
from acpsg.exceptions import LabelError, ManifestError, ShapeError, SplitError

SPEC_CFG = SynthConfig(num_seen=40, num_unseen=10, num_attributes=85, num_attribute_groups=10,
                       feature_dim=64, samples_per_class_train=50, samples_per_class_test=20,
                       noise_scale=0.5, seed=7)


def brute_covariance(C):
    n, t = C.shape
    mu = [sum(C[c, j] for c in range(n)) / n for j in range(t)]
    W = np.zeros((t, t))
    for i in range(t):
        for j in range(t):
            W[i, j] = sum((C[c, i] - mu[i]) * (C[c, j] - mu[j]) for c in range(n)) / n
    return W


def test_synthetic_shapes_and_split():
    ds = generate_synthetic(SPEC_CFG)
    assert ds.prototypes.shape == (50, 85)
    assert ds.labels_train.max() < 40
    assert ds.features_train.shape == (40 * 50, 64)
    assert ds.features_test_unseen.shape == (10 * 20, 64)
    assert set(ds.labels_test_unseen.tolist()) == set(range(40, 50))
    assert set(np.unique(ds.prototypes)) <= {0.0, 1.0}
    assert np.unique(ds.prototypes, axis=0).shape[0] == 50


def test_synthetic_is_deterministic():
    a, b = generate_synthetic(SPEC_CFG), generate_synthetic(SPEC_CFG)
    for field in ("prototypes", "features_train", "labels_train", "features_test_unseen",
                  "features_test_seen"):
        assert getattr(a, field).tobytes() == getattr(b, field).tobytes()
    c = generate_synthetic(SynthConfig(seed=8))
    assert not np.array_equal(a.features_train, c.features_train)


def _group_means(ds, cfg):
    W = brute_covariance(ds.prototypes)
    g = np.empty(cfg.num_attributes, dtype=int)
    for k, idx in enumerate(attribute_groups(cfg.num_attributes, cfg.num_attribute_groups)):
        g[idx] = k
    same = g[:, None] == g[None, :]
    off = ~np.eye(cfg.num_attributes, dtype=bool)
    return W[same & off].mean(), W[~same].mean()


def test_planted_correlation_spec_seed():
    within, across = _group_means(generate_synthetic(SPEC_CFG), SPEC_CFG)
    assert within > 0
    assert across < 0


@pytest.mark.parametrize("seed", range(5))
def test_planted_correlation_structure(seed):
    # independent groups: cross-group covariance is ~0, its sign is seed-dependent
    cfg = SynthConfig(seed=seed)
    within, across = _group_means(generate_synthetic(cfg), cfg)
    assert within > 0.2
    assert abs(across) < 0.01


def test_invalid_synth_config():
    with pytest.raises(ValueError):
        SynthConfig(num_attributes=5, num_attribute_groups=6)
    with pytest.raises(ValueError):
        SynthConfig(noise_scale=0.0)
    with pytest.raises(ValueError):
        SynthConfig(num_seen=0)


def test_degenerate_synthesis():
    from acpsg.exceptions import DegenerateSynthesis

    # 2 groups give at most 4 distinct prototypes
    with pytest.raises(DegenerateSynthesis):
        generate_synthetic(SynthConfig(num_seen=4, num_unseen=2, num_attributes=4, num_attribute_groups=2))


def test_save_load_round_trip(tmp_path, small_dataset):
    manifest = save_dataset(small_dataset, tmp_path)
    ds = load_dataset(manifest)
    assert ds.class_names == small_dataset.class_names
    np.testing.assert_array_equal(ds.features_train, small_dataset.features_train)
    np.testing.assert_array_equal(ds.labels_test_seen, small_dataset.labels_test_seen)
    assert ds.seen_classes == small_dataset.seen_classes


def _edit_manifest(tmp_path, small_dataset, **changes):
    manifest = save_dataset(small_dataset, tmp_path)
    doc = json.loads(manifest.read_text())
    for k, v in changes.items():
        if v is None:
            doc.pop(k)
        else:
            doc[k] = v
    manifest.write_text(json.dumps(doc))
    return manifest


def test_missing_key(tmp_path, small_dataset):
    with pytest.raises(ManifestError, match="prototypes"):
        load_dataset(_edit_manifest(tmp_path, small_dataset, prototypes=None))


def test_split_overlap(tmp_path, small_dataset):
    seen = list(small_dataset.seen_classes) + [small_dataset.unseen_classes[0]]
    with pytest.raises(SplitError):
        load_dataset(_edit_manifest(tmp_path, small_dataset, seen_classes=seen))


def test_split_must_cover_all_classes(tmp_path, small_dataset):
    with pytest.raises(SplitError):
        load_dataset(_edit_manifest(tmp_path, small_dataset,
                                    unseen_classes=list(small_dataset.unseen_classes[:-1])))


def test_attribute_names_mismatch_names_both_files(tmp_path, small_dataset):
    names = list(small_dataset.attribute_names[:-1])
    with pytest.raises(ShapeError, match="prototypes.zmat.*attribute_names"):
        load_dataset(_edit_manifest(tmp_path, small_dataset, attribute_names=names))


def test_feature_dimension_mismatch(tmp_path, small_dataset):
    manifest = save_dataset(small_dataset, tmp_path)
    zmat.write_matrix(small_dataset.features_test_unseen[:, :-1], tmp_path / "features_test_unseen.zmat")
    with pytest.raises(ShapeError, match="features_test_unseen.zmat.*features_train.zmat"):
        load_dataset(manifest)


def test_train_label_outside_seen(tmp_path, small_dataset):
    manifest = save_dataset(small_dataset, tmp_path)
    labels = small_dataset.labels_train.copy()
    labels[0] = small_dataset.unseen_classes[0]
    zmat.write_labels(labels, tmp_path / "labels_train.zmat")
    with pytest.raises(LabelError):
        load_dataset(manifest)


def test_seen_test_split_is_optional(tmp_path, small_dataset):
    manifest = _edit_manifest(tmp_path, small_dataset, features_test_seen=None, labels_test_seen=None)
    ds = load_dataset(manifest)
    assert not ds.has_seen_test


def test_awa2_shaped_manifest(tmp_path):
    rng = np.random.default_rng(0)
    protos = rng.random((50, 85))
    ds = ZslDataset(
        class_names=tuple(f"c{i}" for i in range(50)),
        attribute_names=tuple(f"a{i}" for i in range(85)),
        prototypes=protos,
        features_train=rng.random((80, 2048)),
        labels_train=np.repeat(np.arange(40), 2),
        features_test_unseen=rng.random((10, 2048)),
        labels_test_unseen=np.arange(40, 50),
        features_test_seen=np.zeros((0, 2048)),
        labels_test_seen=np.zeros(0, dtype=int),
        seen_classes=tuple(range(40)),
        unseen_classes=tuple(range(40, 50)),
        name="AwA2",
    )
    loaded = load_dataset(save_dataset(ds, tmp_path))
    assert (loaded.n_classes, loaded.n_attributes) == (50, 85)
    assert (len(loaded.seen_classes), len(loaded.unseen_classes)) == (40, 10)
    assert loaded.feature_dim == 2048
    assert loaded.default_latent_dim() == 40


def test_dataset_arrays_are_read_only(small_dataset):
    with pytest.raises(ValueError):
        small_dataset.prototypes[0, 0] = 5.0


def test_manifest_paths_resolve_relative_to_manifest(tmp_path, small_dataset, monkeypatch):
    sub = tmp_path / "data"
    manifest = save_dataset(small_dataset, sub)
    moved = tmp_path / "moved"
    shutil.move(str(sub), str(moved))
    monkeypatch.chdir(tmp_path)
    assert load_dataset(moved / manifest.name).n_classes == small_dataset.n_classes
