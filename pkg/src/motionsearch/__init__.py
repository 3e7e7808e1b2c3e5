"""Text-to-motion retrieval: joint contrastive + synthesis training of dual
sequence encoders, a retrieval benchmark with four protocols, zero-shot
moment localization, and a search service."""

from .autograd import Parameter, Tensor, backward, grad_check
from .dataio import (Dataset, MotionFeatureSequence, SyntheticConfig,
                     TextEntry, generate_synthetic, load_dataset,
                     save_dataset, similarity_stats, text_similarity_matrix)
from .losses import LossWeights, filter_mask, info_nce, kl_gaussian, smooth_l1
from .model import (LatentDistribution, ModelConfig, TextMotionModel,
                    positional_encoding, retrieval_embedding, sample_latent)
from .retrieval import (Gallery, ProtocolConfig, RetrievalReport, build_index,
                        evaluate, encode_split, median_rank, rank,
                        recall_at_k)
from .kernels import dissimilar_subset
from .localization import (Segment, localization_accuracy, localize_pyramid,
                           sliding_similarity, temporal_iou)
from .trainer import TrainConfig, ablate, train

__version__ = "0.1.0"
