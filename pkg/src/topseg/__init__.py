"""Neural text segmentation over frozen sentence embeddings.

Frozen single and pairwise sentence vectors are concatenated into a
per-document matrix, a trainable transformer encoder reads it, and two
heads jointly predict segment boundaries and per-sentence topics.
Segmentations are scored with the Pk window metric.
"""

from .autodiff import Graph, Tensor, backward, finite_diff_check, zero_grad
from .corpus import (Document, TopicVocabulary, generate_synthetic,
                     import_wikisection, load_corpus, save_corpus,
                     split_corpus, split_sentences)
from .encoding import (EmbeddingMatrix, EmbeddingStore, HashProvider,
                       compose_document_matrix, hash_encode,
                       load_embedding_store, pairwise_hash_encode,
                       save_embedding_store)
from .metrics import baseline_segment, compute_k, pk_corpus, pk_document
from .model import (ForwardOutput, ModelConfig, compute_loss,
                    derive_boundaries_from_topics, forward, forward_batch,
                    init_params, load_checkpoint, multi_head_attention,
                    predict_boundaries, save_checkpoint)
from .training import (AdamState, TrainConfig, TrainResult, adam_step,
                       evaluate_model, sample_loss_mask, train)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Document", "EmbeddingMatrix", "EmbeddingStore",
    "ForwardOutput", "Graph", "HashProvider", "ModelConfig", "Tensor",
    "TopicVocabulary", "TrainConfig", "TrainResult", "adam_step", "backward",
    "baseline_segment", "compose_document_matrix", "compute_k", "compute_loss",
    "derive_boundaries_from_topics", "evaluate_model", "finite_diff_check",
    "forward", "forward_batch", "generate_synthetic", "hash_encode",
    "import_wikisection", "init_params", "load_checkpoint", "load_corpus",
    "load_embedding_store", "multi_head_attention", "pairwise_hash_encode",
    "pk_corpus", "pk_document", "predict_boundaries", "sample_loss_mask",
    "save_checkpoint", "save_corpus", "save_embedding_store", "split_corpus",
    "split_sentences", "train", "zero_grad",
]
