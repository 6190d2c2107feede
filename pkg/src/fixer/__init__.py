from src.fixer.attention import ReferenceMixingAttention, SpatialSelfAttention, reference_mixing_attention
from src.fixer.checkpoint import load_fixer, save_fixer
from src.fixer.codec import AutoencoderCodec, IdentityCodec, make_codec, train_codec
from src.fixer.inference import DEFAULT_TAU, FixerInput, FixOutput, fix_image
from src.fixer.schedule import NoiseSchedule, add_noise, fixed_noise
from src.fixer.training import TrainResult, build_fixer, evaluate_loss, train_fixer, write_curves
from src.fixer.unet import DenoiserModel, timestep_embedding

__all__ = [
    "ReferenceMixingAttention",
    "SpatialSelfAttention",
    "reference_mixing_attention",
    "load_fixer",
    "save_fixer",
    "AutoencoderCodec",
    "IdentityCodec",
    "make_codec",
    "train_codec",
    "DEFAULT_TAU",
    "FixerInput",
    "FixOutput",
    "fix_image",
    "NoiseSchedule",
    "add_noise",
    "fixed_noise",
    "TrainResult",
    "build_fixer",
    "evaluate_loss",
    "train_fixer",
    "write_curves",
    "DenoiserModel",
    "timestep_embedding",
]
