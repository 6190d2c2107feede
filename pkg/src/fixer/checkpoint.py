from pathlib import Path

import torch

from src.fixer.unet import DenoiserModel
from src.models.config_types import FixerConfig
from src.storage import read_container, write_container

CONTAINER_KIND = "fixer"


def save_fixer(path: str | Path, model: DenoiserModel) -> Path:
    blocks = {name: tensor.detach().cpu().numpy() for name, tensor in model.state_dict().items()}
    metadata = {"config": model.config.model_dump(mode="json"), "parameter_count": model.parameter_count}
    return write_container(path, CONTAINER_KIND, metadata, blocks)


def load_fixer(path: str | Path, dtype: torch.dtype = torch.float32) -> DenoiserModel:
    container = read_container(path, expected_kind=CONTAINER_KIND)
    model = DenoiserModel(FixerConfig.model_validate(container.metadata["config"]))
    state = {name: torch.as_tensor(array) for name, array in container.blocks.items()}
    model.load_state_dict(state)
    model.requires_grad_(False)
    return model.to(dtype).eval()
