"""Model sidecar: an HTTP service exposing detection, box-prompted
segmentation, and optional texture synthesis behind a fixed JSON wire
contract, with a deterministic weight-free stub mode."""

from .adapters import ModelAdapter, load_adapter_from_env
from .service import (DEFAULT_PORT, PORT_ENV_VAR, SidecarService, make_server,
                      texture_prompts)

__version__ = "0.1.0"

__all__ = ["DEFAULT_PORT", "PORT_ENV_VAR", "ModelAdapter", "SidecarService",
           "load_adapter_from_env", "make_server", "texture_prompts"]
