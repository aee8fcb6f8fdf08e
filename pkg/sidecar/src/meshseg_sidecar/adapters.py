"""Real-model adapter loading.

The sidecar does not bundle neural models.  To serve real ones, point
MESHSEG_SIDECAR_ADAPTER at a factory ("package.module:make_adapter") whose
result satisfies the interface below; anything the adapter leaves None is
reported as "absent" by /health and answered with 503 (detect/segment) or
501 (texture).
"""
from __future__ import annotations

import importlib
import os

ADAPTER_ENV_VAR = "MESHSEG_SIDECAR_ADAPTER"


class ModelAdapter:
    """Wraps user-supplied callables behind the service's expectations.

    detect_fn(image_png: bytes, prompt: str) -> [((x0, y0, x1, y1), score), ...]
    segment_fn(image_png: bytes, bbox) -> mask PNG bytes (1-channel, 0/255)
    texture_fn(mesh_obj: bytes, prompts: dict) -> (texture PNG bytes, uvs list)
    """

    def __init__(self, detect_fn=None, segment_fn=None, texture_fn=None):
        self._detect = detect_fn
        self._segment = segment_fn
        self._texture = texture_fn

    @property
    def detector_loaded(self) -> bool:
        return self._detect is not None

    @property
    def segmenter_loaded(self) -> bool:
        return self._segment is not None

    @property
    def texture_loaded(self) -> bool:
        return self._texture is not None

    def detect(self, image_png, prompt):
        return self._detect(image_png, prompt)

    def segment(self, image_png, bbox):
        return self._segment(image_png, bbox)

    def texture(self, mesh_obj, prompts):
        return self._texture(mesh_obj, prompts)


def load_adapter_from_env():
    """None (stub mode) unless MESHSEG_SIDECAR_ADAPTER names a factory."""
    spec = os.environ.get(ADAPTER_ENV_VAR)
    if not spec:
        return None
    module_name, _, attr = spec.partition(":")
    if not attr:
        raise ValueError(f"{ADAPTER_ENV_VAR} must look like 'module:factory', "
                         f"got {spec!r}")
    module = importlib.import_module(module_name)
    factory = getattr(module, attr)
    adapter = factory()
    if not isinstance(adapter, ModelAdapter):
        raise TypeError(f"{spec} must return a ModelAdapter")
    return adapter
