from src.losses.extractor import FeatureExtractor, load_pretrained_extractor, save_extractor
from src.losses.terms import LossBreakdown, gram_loss, gram_matrix, perceptual_loss, recon_loss, safe_sqrt, total_loss

__all__ = [
    "FeatureExtractor",
    "load_pretrained_extractor",
    "save_extractor",
    "LossBreakdown",
    "gram_loss",
    "gram_matrix",
    "perceptual_loss",
    "recon_loss",
    "safe_sqrt",
    "total_loss",
]
