"""Zero-shot recognition with attribute-correlation graphs and latent prototype spaces."""

from .dataset import SynthConfig, ZslDataset, generate_synthetic, load_dataset, save_dataset
from .embedding import (
    EmbeddingModel,
    EmbeddingTrainConfig,
    MultiSpacePrototypes,
    VisualEmbedding,
    compute_losses,
    concat_prototypes,
    loss_gradients,
    train_embedding,
)
from .evaluation import (
    EvalReport,
    Mode,
    PredictionDirection,
    cosine_distance,
    evaluate,
    harmonic_mean,
    per_class_accuracy,
    predict_labels,
)
from .graph import (
    AttributeGraph,
    PrototypeMatrix,
    assemble_adjacency,
    assemble_node_features,
    attribute_covariance,
    build_graph,
    build_prototype_matrix,
    normalize_adjacency,
    rescale_covariance,
)
from .latent import (
    DiffusionParams,
    GraphAutoencoder,
    LatentSpace,
    LatentSpaceGenerator,
    LatentTrainConfig,
    closed_form_diffusion,
    diffusion_objective,
    train_latent_autoencoder,
    truncated_propagation,
)
from .optim import Adam
from .pipeline import RunConfig, ZeroShotClassifier, run_pipeline
from .zmat import read_matrix, write_matrix

__version__ = "0.1.0"

__all__ = [
    "EmbeddingModel",
    "EmbeddingTrainConfig",
    "MultiSpacePrototypes",
    "VisualEmbedding",
    "compute_losses",
    "concat_prototypes",
    "loss_gradients",
    "train_embedding",
    "EvalReport",
    "Mode",
    "PredictionDirection",
    "cosine_distance",
    "evaluate",
    "harmonic_mean",
    "per_class_accuracy",
    "predict_labels",
    "AttributeGraph",
    "PrototypeMatrix",
    "assemble_adjacency",
    "assemble_node_features",
    "attribute_covariance",
    "build_graph",
    "build_prototype_matrix",
    "normalize_adjacency",
    "rescale_covariance",
    "DiffusionParams",
    "GraphAutoencoder",
    "LatentSpace",
    "LatentSpaceGenerator",
    "LatentTrainConfig",
    "closed_form_diffusion",
    "diffusion_objective",
    "train_latent_autoencoder",
    "truncated_propagation",
    "SynthConfig",
    "ZslDataset",
    "generate_synthetic",
    "load_dataset",
    "save_dataset",
    "Adam",
    "RunConfig",
    "ZeroShotClassifier",
    "run_pipeline",
    "read_matrix",
    "write_matrix",
]
