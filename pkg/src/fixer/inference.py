from dataclasses import dataclass, field

import torch

from src.fixer.schedule import fixed_noise
from src.fixer.unet import DenoiserModel

DEFAULT_TAU = 200


@dataclass
class FixerInput:
    """Degraded novel view, its clean references and the fixing timestep."""

    novel: torch.Tensor
    references: list[torch.Tensor] = field(default_factory=list)
    tau: int = DEFAULT_TAU

    def __post_init__(self):
        for ref in self.references:
            if ref.shape != self.novel.shape:
                raise ValueError(f"reference {tuple(ref.shape)} does not match novel view {tuple(self.novel.shape)}")


@dataclass
class FixOutput:
    image: torch.Tensor
    reference_slots: torch.Tensor


def fix_image(model: DenoiserModel, fixer_input: FixerInput, return_references: bool = False):
    """
    One forward pass at `fixer_input.tau` with the model's fixed noise field.

    Returns the fixed (3, H, W) image in [0, 1]; with `return_references` the
    regenerated reference slots come back too.

    Raises:
        ResolutionError: H or W is not a multiple of `model.required_multiple`.
    """
    model.eval()
    dtype = next(model.parameters()).dtype
    novel = fixer_input.novel.to(dtype)
    model.check_resolution(*novel.shape[-2:])
    refs = torch.stack([r.to(dtype) for r in fixer_input.references])[None] if fixer_input.references else None
    latent_shape = (1, model.codec.latent_channels, novel.shape[-2] // model.codec.factor, novel.shape[-1] // model.codec.factor)
    noise = fixed_noise(latent_shape, model.config.noise_seed, dtype=dtype)
    ref_noise = None
    if refs is not None and model.config.noise_references:
        ref_noise = fixed_noise((1, refs.shape[1], *latent_shape[1:]), model.config.noise_seed + 1, dtype=dtype)
    with torch.no_grad():
        out = model(novel[None], refs, fixer_input.tau, noise=noise, reference_noise=ref_noise)[0]
    out = torch.nan_to_num(out, nan=0.5, posinf=1.0, neginf=0.0).clamp(0.0, 1.0)
    image = out[0].to(fixer_input.novel.dtype)
    if return_references:
        return FixOutput(image=image, reference_slots=out[1:])
    return image
