from src.storage.container import Container, ContainerError, read_container, write_container
from src.storage.images import load_png, quantize, save_png, to_uint8

__all__ = [
    "Container",
    "ContainerError",
    "read_container",
    "write_container",
    "load_png",
    "quantize",
    "save_png",
    "to_uint8",
]
