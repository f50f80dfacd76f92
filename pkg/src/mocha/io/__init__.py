from .images import read_pfm, read_ppm, write_pfm, write_ppm
from .manifest import read_manifest, write_manifest
from .ndt import read_container, read_tensor, write_container, write_tensor

__all__ = [
    "read_container",
    "read_manifest",
    "read_pfm",
    "read_ppm",
    "read_tensor",
    "write_container",
    "write_manifest",
    "write_pfm",
    "write_ppm",
    "write_tensor",
]
