"""HTTP service exposing text-grounded detection and box-prompted
segmentation behind a fixed JSON wire contract.

Endpoints (HTTP/1.1, application/json):
  POST /detect   {image: base64 PNG, prompt: str}
                 -> {detections: [{bbox: [x0, y0, x1, y1], score: float}]}
  POST /segment  {image: base64 PNG, bbox: [x0, y0, x1, y1]}
                 -> {mask: base64 1-channel PNG, values 0/255}
  POST /texture  {mesh: base64 OBJ, object_text: str}
                 -> {texture: base64 PNG, uvs: [...]} or 501 when absent
  GET  /health   -> {status, models: {detector, segmenter, texture}}

The default stub mode is deterministic and weight-free: detect returns the
central-half box with score 0.5 and segment fills the requested box.  Real
models plug in through an adapter object (see ``adapters``); requests are
serialized through a lock so a single model instance is never re-entered.
"""
from __future__ import annotations

import base64
import binascii
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import png

DEFAULT_PORT = 8731
PORT_ENV_VAR = "MESHSEG_SIDECAR_PORT"

STUB_SCORE = 0.5

TEXTURE_VIEW_NAMES = ("front", "left", "back", "right", "top", "bottom")
TEXTURE_PROMPT_TEMPLATE = "a photo of {object_text}, {view} view"


def texture_prompts(object_text: str) -> dict:
    """View-conditioned prompt strings used by the texture stage."""
    return {view: TEXTURE_PROMPT_TEMPLATE.format(object_text=object_text, view=view)
            for view in TEXTURE_VIEW_NAMES}


class RequestError(ValueError):
    """Maps to a 400 response."""


def _decode_image(payload, field="image"):
    data = payload.get(field)
    if not isinstance(data, str) or not data:
        raise RequestError(f"missing or invalid '{field}' field")
    try:
        blob = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise RequestError(f"'{field}' is not valid base64: {exc}") from exc
    try:
        width, height = png.read_dimensions(blob)
    except png.PngError as exc:
        raise RequestError(f"'{field}' is not a decodable PNG: {exc}") from exc
    return blob, width, height


def _decode_bbox(payload, width, height):
    bbox = payload.get("bbox")
    if (not isinstance(bbox, (list, tuple)) or len(bbox) != 4
            or not all(isinstance(v, (int, float)) for v in bbox)):
        raise RequestError("missing or invalid 'bbox' field")
    x0, y0, x1, y1 = (int(v) for v in bbox)
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise RequestError(f"bbox {bbox} outside {width}x{height} image")
    return x0, y0, x1, y1


def stub_detect(payload):
    _, width, height = _decode_image(payload)
    prompt = payload.get("prompt")
    if not isinstance(prompt, str) or not prompt.strip():
        raise RequestError("missing or empty 'prompt' field")
    bbox = [width // 4, height // 4, (3 * width) // 4, (3 * height) // 4]
    return {"detections": [{"bbox": bbox, "score": STUB_SCORE}]}


def stub_segment(payload):
    _, width, height = _decode_image(payload)
    box = _decode_bbox(payload, width, height)
    mask = png.encode_mask(width, height, box)
    return {"mask": base64.b64encode(mask).decode("ascii")}


class SidecarService:
    """Request routing plus the stub/real model dispatch."""

    def __init__(self, adapter=None):
        self.adapter = adapter
        self._model_lock = threading.Lock()

    def model_states(self) -> dict:
        if self.adapter is None:
            return {"detector": "stub", "segmenter": "stub", "texture": "absent"}
        return {
            "detector": "loaded" if self.adapter.detector_loaded else "absent",
            "segmenter": "loaded" if self.adapter.segmenter_loaded else "absent",
            "texture": "loaded" if self.adapter.texture_loaded else "absent",
        }

    def health(self):
        return 200, {"status": "ok", "models": self.model_states()}

    def detect(self, payload):
        if self.adapter is None:
            return 200, stub_detect(payload)
        if not self.adapter.detector_loaded:
            return 503, {"error": "detector model not loaded"}
        blob, width, height = _decode_image(payload)
        prompt = payload.get("prompt")
        if not isinstance(prompt, str) or not prompt.strip():
            raise RequestError("missing or empty 'prompt' field")
        with self._model_lock:
            detections = self.adapter.detect(blob, prompt.strip())
        entries = [{"bbox": [int(v) for v in bbox], "score": float(score)}
                   for bbox, score in detections]
        entries.sort(key=lambda e: -e["score"])
        return 200, {"detections": entries}

    def segment(self, payload):
        if self.adapter is None:
            return 200, stub_segment(payload)
        if not self.adapter.segmenter_loaded:
            return 503, {"error": "segmenter model not loaded"}
        blob, width, height = _decode_image(payload)
        box = _decode_bbox(payload, width, height)
        with self._model_lock:
            mask_png = self.adapter.segment(blob, box)
        return 200, {"mask": base64.b64encode(mask_png).decode("ascii")}

    def texture(self, payload):
        if self.adapter is None or not self.adapter.texture_loaded:
            return 501, {"error": "texture synthesis not implemented"}
        mesh = payload.get("mesh")
        object_text = payload.get("object_text")
        if not isinstance(mesh, str) or not mesh:
            raise RequestError("missing 'mesh' field")
        if not isinstance(object_text, str) or not object_text.strip():
            raise RequestError("missing or empty 'object_text' field")
        try:
            mesh_blob = base64.b64decode(mesh, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise RequestError(f"'mesh' is not valid base64: {exc}") from exc
        prompts = texture_prompts(object_text.strip())
        with self._model_lock:
            texture_png, uvs = self.adapter.texture(mesh_blob, prompts)
        return 200, {"texture": base64.b64encode(texture_png).decode("ascii"),
                     "uvs": uvs}


def make_handler(service: SidecarService):
    routes = {
        ("POST", "/detect"): service.detect,
        ("POST", "/segment"): service.segment,
        ("POST", "/texture"): service.texture,
        ("GET", "/health"): None,  # handled without a body
    }
    known_paths = {path for _, path in routes}

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"
        server_version = "meshseg-sidecar"

        def _reply(self, status, payload):
            blob = json.dumps(payload, sort_keys=True).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)

        def _dispatch(self, method):
            if self.path not in known_paths:
                self._reply(404, {"error": f"unknown route {self.path}"})
                return
            handler = routes.get((method, self.path))
            if (method, self.path) == ("GET", "/health"):
                status, payload = service.health()
                self._reply(status, payload)
                return
            if handler is None:
                self._reply(405, {"error": f"{method} not allowed on {self.path}"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            try:
                payload = json.loads(self.rfile.read(length) or b"")
                if not isinstance(payload, dict):
                    raise RequestError("request body must be a JSON object")
                status, body = handler(payload)
            except (json.JSONDecodeError, RequestError) as exc:
                self._reply(400, {"error": str(exc)})
                return
            self._reply(status, body)

        def do_POST(self):
            self._dispatch("POST")

        def do_GET(self):
            self._dispatch("GET")

        def log_message(self, *args):
            pass

    return Handler


def make_server(host: str = "127.0.0.1", port: int = DEFAULT_PORT,
                adapter=None) -> ThreadingHTTPServer:
    return ThreadingHTTPServer((host, port), make_handler(SidecarService(adapter)))
