"""Zero-shot datasets: container type, manifest I/O and a synthetic generator."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import zmat
from .exceptions import (
    DegenerateSynthesis,
    LabelError,
    ManifestError,
    ShapeError,
    SplitError,
)

REQUIRED_KEYS = (
    "class_names",
    "attribute_names",
    "prototypes",
    "features_train",
    "labels_train",
    "features_test_unseen",
    "labels_test_unseen",
    "seen_classes",
    "unseen_classes",
)

# Latent dimensionality used for the common benchmarks when none is given.
DEFAULT_LATENT_DIM = {"awa2": 40, "cub": 40, "apy": 20}


@dataclass(frozen=True)
class ZslDataset:
    class_names: tuple
    attribute_names: tuple
    prototypes: np.ndarray
    features_train: np.ndarray
    labels_train: np.ndarray
    features_test_unseen: np.ndarray
    labels_test_unseen: np.ndarray
    features_test_seen: np.ndarray
    labels_test_seen: np.ndarray
    seen_classes: tuple
    unseen_classes: tuple
    name: str = ""

    def __post_init__(self):
        for attr in (
            "prototypes",
            "features_train",
            "labels_train",
            "features_test_unseen",
            "labels_test_unseen",
            "features_test_seen",
            "labels_test_seen",
        ):
            arr = np.array(getattr(self, attr))
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    @property
    def feature_dim(self) -> int:
        return self.features_train.shape[1]

    @property
    def has_seen_test(self) -> bool:
        return self.labels_test_seen.size > 0

    def summary(self) -> dict:
        return {
            "name": self.name,
            "n_classes": self.n_classes,
            "n_attributes": self.n_attributes,
            "feature_dim": self.feature_dim,
            "n_seen_classes": len(self.seen_classes),
            "n_unseen_classes": len(self.unseen_classes),
            "n_train": int(self.labels_train.size),
            "n_test_unseen": int(self.labels_test_unseen.size),
            "n_test_seen": int(self.labels_test_seen.size),
        }

    def default_latent_dim(self) -> int:
        return DEFAULT_LATENT_DIM.get(self.name.lower(), 40)


def validate(ds: ZslDataset, sources: dict | None = None) -> ZslDataset:
    """Check every dataset invariant, raising a distinct error per violation.

    ``sources`` maps field names to file names so that shape errors can name
    both offending files.
    """
    src = sources or {}

    def where(key):
        return src.get(key, key)

    d_c, d_t = ds.n_classes, ds.n_attributes
    if d_c < 1 or d_t < 1:
        raise ShapeError("dataset needs at least one class and one attribute")
    if ds.prototypes.ndim != 2 or ds.prototypes.shape[0] != d_c:
        raise ShapeError(
            f"{where('prototypes')} has {ds.prototypes.shape[0]} rows but "
            f"{where('class_names')} lists {d_c} classes"
        )
    if ds.prototypes.shape[1] != d_t:
        raise ShapeError(
            f"{where('prototypes')} has {ds.prototypes.shape[1]} columns but "
            f"{where('attribute_names')} lists {d_t} attributes"
        )

    seen, unseen = set(ds.seen_classes), set(ds.unseen_classes)
    if len(seen) != len(ds.seen_classes) or len(unseen) != len(ds.unseen_classes):
        raise SplitError("seen_classes/unseen_classes contain duplicates")
    overlap = seen & unseen
    if overlap:
        raise SplitError(f"classes {sorted(overlap)} are both seen and unseen")
    if seen | unseen != set(range(d_c)):
        missing = sorted(set(range(d_c)) - seen - unseen)
        extra = sorted((seen | unseen) - set(range(d_c)))
        raise SplitError(f"splits must cover classes 0..{d_c - 1}; missing {missing}, out of range {extra}")
    if not seen or not unseen:
        raise SplitError("both the seen and the unseen split must be non-empty")

    dim = ds.features_train.shape[1] if ds.features_train.ndim == 2 else -1
    for feat, lab in (
        ("features_train", "labels_train"),
        ("features_test_unseen", "labels_test_unseen"),
        ("features_test_seen", "labels_test_seen"),
    ):
        x, y = getattr(ds, feat), getattr(ds, lab)
        if x.size == 0 and y.size == 0 and feat == "features_test_seen":
            continue
        if x.ndim != 2 or x.shape[1] != dim:
            raise ShapeError(
                f"{where(feat)} has feature dimension {x.shape[-1]} but "
                f"{where('features_train')} has {dim}"
            )
        if y.shape[0] != x.shape[0]:
            raise ShapeError(f"{where(lab)} has {y.shape[0]} labels but {where(feat)} has {x.shape[0]} rows")

    for lab, allowed, split in (
        ("labels_train", seen, "seen"),
        ("labels_test_unseen", unseen, "unseen"),
        ("labels_test_seen", seen, "seen"),
    ):
        y = getattr(ds, lab)
        stray = sorted(set(y.tolist()) - allowed)
        if stray:
            raise LabelError(f"{where(lab)} contains classes {stray[:5]} outside the {split} split")
    if ds.labels_train.size == 0:
        raise ShapeError(f"{where('labels_train')} is empty")
    return ds


def load_dataset(manifest_path) -> ZslDataset:
    """Load and validate a dataset from its JSON manifest.

    File paths inside the manifest are resolved relative to the manifest's
    directory.
    """
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ManifestError(f"{manifest_path} must contain a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in manifest]
    if missing:
        raise ManifestError(f"{manifest_path} is missing keys: {', '.join(missing)}")
    has_seen_feat = "features_test_seen" in manifest
    if has_seen_feat != ("labels_test_seen" in manifest):
        raise ManifestError("features_test_seen and labels_test_seen must be given together")

    base = manifest_path.parent
    sources = {k: manifest[k] for k in manifest if isinstance(manifest[k], str)}
    sources["class_names"] = f"{manifest_path.name}:class_names"
    sources["attribute_names"] = f"{manifest_path.name}:attribute_names"

    def mat(key):
        return zmat.read_matrix(base / manifest[key])

    def labels(key):
        return zmat.read_labels(base / manifest[key])

    protos = mat("prototypes")
    x_tr, y_tr = mat("features_train"), labels("labels_train")
    x_u, y_u = mat("features_test_unseen"), labels("labels_test_unseen")
    if has_seen_feat:
        x_s, y_s = mat("features_test_seen"), labels("labels_test_seen")
    else:
        x_s, y_s = np.zeros((0, x_tr.shape[1])), np.zeros(0, dtype=np.int64)

    try:
        seen = tuple(int(c) for c in manifest["seen_classes"])
        unseen = tuple(int(c) for c in manifest["unseen_classes"])
    except (TypeError, ValueError) as exc:
        raise ManifestError(f"class splits must be lists of integers: {exc}") from exc

    ds = ZslDataset(
        class_names=tuple(manifest["class_names"]),
        attribute_names=tuple(manifest["attribute_names"]),
        prototypes=protos,
        features_train=x_tr,
        labels_train=y_tr,
        features_test_unseen=x_u,
        labels_test_unseen=y_u,
        features_test_seen=x_s,
        labels_test_seen=y_s,
        seen_classes=seen,
        unseen_classes=unseen,
        name=str(manifest.get("name", "")),
    )
    return validate(ds, sources)


def save_dataset(ds: ZslDataset, directory) -> Path:
    """Write ``ds`` as ``manifest.json`` plus ZMAT files; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": ds.name,
        "class_names": list(ds.class_names),
        "attribute_names": list(ds.attribute_names),
        "prototypes": "prototypes.zmat",
        "features_train": "features_train.zmat",
        "labels_train": "labels_train.zmat",
        "features_test_unseen": "features_test_unseen.zmat",
        "labels_test_unseen": "labels_test_unseen.zmat",
        "seen_classes": list(ds.seen_classes),
        "unseen_classes": list(ds.unseen_classes),
    }
    zmat.write_matrix(ds.prototypes, directory / "prototypes.zmat")
    zmat.write_matrix(ds.features_train, directory / "features_train.zmat")
    zmat.write_labels(ds.labels_train, directory / "labels_train.zmat")
    zmat.write_matrix(ds.features_test_unseen, directory / "features_test_unseen.zmat")
    zmat.write_labels(ds.labels_test_unseen, directory / "labels_test_unseen.zmat")
    if ds.has_seen_test:
        manifest["features_test_seen"] = "features_test_seen.zmat"
        manifest["labels_test_seen"] = "labels_test_seen.zmat"
        zmat.write_matrix(ds.features_test_seen, directory / "features_test_seen.zmat")
        zmat.write_labels(ds.labels_test_seen, directory / "labels_test_seen.zmat")
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class SynthConfig:
    num_seen: int = 40
    num_unseen: int = 10
    num_attributes: int = 85
    num_attribute_groups: int = 10
    feature_dim: int = 64
    samples_per_class_train: int = 50
    samples_per_class_test: int = 20
    noise_scale: float = 0.5
    seed: int = 0

    def __post_init__(self):
        counts = {k: getattr(self, k) for k in (
            "num_seen", "num_unseen", "num_attributes", "num_attribute_groups",
            "feature_dim", "samples_per_class_train", "samples_per_class_test",
        )}
        for k, v in counts.items():
            if int(v) != v or v < 1:
                raise ValueError(f"{k} must be a positive integer, got {v!r}")
        if self.num_attribute_groups > self.num_attributes:
            raise ValueError("num_attribute_groups cannot exceed num_attributes")
        if not self.noise_scale > 0:
            raise ValueError(f"noise_scale must be > 0, got {self.noise_scale!r}")


def attribute_groups(num_attributes: int, num_groups: int) -> list[np.ndarray]:
    """Contiguous, near-equal partition of the attribute indices."""
    return np.array_split(np.arange(num_attributes), num_groups)


def generate_synthetic(cfg: SynthConfig, max_attempts: int = 100) -> ZslDataset:
    """Build a dataset whose attributes are correlated in groups.

    Each class switches whole attribute groups on with probability 1/2, so
    attributes within a group co-occur and attributes of different groups
    are mutually uninformative or anti-correlated once centred. Features are
    a fixed random linear image of the prototype plus isotropic noise.
    """
    rng = np.random.default_rng(cfg.seed)
    n_cls = cfg.num_seen + cfg.num_unseen
    groups = attribute_groups(cfg.num_attributes, cfg.num_attribute_groups)

    for _ in range(max_attempts):
        on = rng.random((n_cls, cfg.num_attribute_groups)) < 0.5
        protos = np.zeros((n_cls, cfg.num_attributes))
        for g, idx in enumerate(groups):
            protos[:, idx] = on[:, [g]]
        if np.unique(protos, axis=0).shape[0] == n_cls:
            break
    else:
        raise DegenerateSynthesis(
            f"could not draw {n_cls} distinct prototypes from "
            f"{cfg.num_attribute_groups} groups in {max_attempts} attempts"
        )

    mapping = rng.standard_normal((cfg.feature_dim, cfg.num_attributes)) / np.sqrt(cfg.num_attributes)
    means = protos @ mapping.T

    def draw(classes, per_class):
        labels = np.repeat(np.asarray(classes, dtype=np.int64), per_class)
        noise = cfg.noise_scale * rng.standard_normal((labels.size, cfg.feature_dim))
        return means[labels] + noise, labels

    seen = tuple(range(cfg.num_seen))
    unseen = tuple(range(cfg.num_seen, n_cls))
    x_tr, y_tr = draw(seen, cfg.samples_per_class_train)
    x_u, y_u = draw(unseen, cfg.samples_per_class_test)
    x_s, y_s = draw(seen, cfg.samples_per_class_test)

    ds = ZslDataset(
        class_names=tuple(f"class_{c:03d}" for c in range(n_cls)),
        attribute_names=tuple(f"attr_{a:03d}" for a in range(cfg.num_attributes)),
        prototypes=protos,
        features_train=x_tr,
        labels_train=y_tr,
        features_test_unseen=x_u,
        labels_test_unseen=y_u,
        features_test_seen=x_s,
        labels_test_seen=y_s,
        seen_classes=seen,
        unseen_classes=unseen,
        name="synthetic",
    )
    return validate(ds)
