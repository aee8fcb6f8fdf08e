"""Pluggable providers of per-view text-grounded detections and box-prompted
masks: a deterministic oracle driven by ground-truth labels, a replay backend
over recorded files, and an HTTP client for the model sidecar.

Backends receive the full RenderOutput so the oracle can consult the
face-index map; neural backends only use the rendered image.
"""
from __future__ import annotations

import base64
import io
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import requests
from PIL import Image

from .errors import (BackendUnavailable, LabelMismatch, MissingPrecomputed,
                     ParseError)
from .mesh import Bitmap, as_mask
from .render import BACKGROUND_ID, RenderOutput, load_mask_png

BRANCHES = ("untextured", "textured")


@dataclass(frozen=True)
class QuerySpec:
    """Object class text (names the whole object) and grounding text (names
    the region to segment)."""

    object_text: str
    grounding_text: str

    def __post_init__(self):
        if not self.object_text.strip():
            raise ValueError("object text must be non-empty")
        if not self.grounding_text.strip():
            raise ValueError("grounding text must be non-empty")
        object.__setattr__(self, "object_text", self.object_text.strip())
        object.__setattr__(self, "grounding_text", self.grounding_text.strip())


@dataclass(frozen=True)
class Detection:
    """Pixel box (x0, y0, x1, y1), inclusive-exclusive, with confidence in [0, 1]."""

    bbox: tuple
    confidence: float

    def __post_init__(self):
        x0, y0, x1, y1 = (int(v) for v in self.bbox)
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"empty detection box {self.bbox}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")
        object.__setattr__(self, "bbox", (x0, y0, x1, y1))
        object.__setattr__(self, "confidence", float(self.confidence))


class GroundingBackend:
    """Interface: per-view detection and box-prompted segmentation."""

    name = "base"

    def detect(self, rendered: RenderOutput, query: QuerySpec, *,
               branch: str, view_index: int) -> list:
        raise NotImplementedError

    def segment(self, rendered: RenderOutput, bbox, *,
                branch: str, view_index: int) -> Bitmap:
        raise NotImplementedError


# --- oracle -----------------------------------------------------------------

@dataclass(frozen=True)
class Corruption:
    """Scripted per-view error model applied by the oracle.

    kind:
      none        no corruption anywhere
      drop        affected views return no detection
      complement  affected views return the silhouette minus the target as mask
      shift       affected views return the clean mask translated by (dx, dy)

    Corruptions model a confused 2D segmenter: the detection box stays the
    clean target box (so it survives whole-object filtering the way a real
    part-sized detection would) while the mask and confidence change.
    """

    kind: str = "none"
    views: frozenset = frozenset()
    dx: int = 0
    dy: int = 0

    def __post_init__(self):
        if self.kind not in ("none", "drop", "complement", "shift"):
            raise ValueError(f"unknown corruption kind {self.kind!r}")
        object.__setattr__(self, "views", frozenset(int(v) for v in self.views))

    def applies(self, view_index: int) -> bool:
        return self.kind != "none" and view_index in self.views


@dataclass(frozen=True)
class OracleConfig:
    """Ground-truth labels plus the scripted error model.

    Both correct and corrupt confidences default to 0.9 so error-correction
    tests stress the voting structure rather than confidence gaps.
    """

    gt_labels: np.ndarray
    target_label: int
    corruption: Corruption = Corruption()
    confidence_correct: float = 0.9
    confidence_corrupt: float = 0.9
    seed: int = 0

    def __post_init__(self):
        labels = np.asarray(self.gt_labels, dtype=np.int64).reshape(-1)
        labels = labels.copy()
        labels.setflags(write=False)
        object.__setattr__(self, "gt_labels", labels)


class OracleView:
    """Oracle bound to one rendered view: detections and masks derive
    deterministically from the ground-truth labels and the corruption model."""

    def __init__(self, rendered: RenderOutput, config: OracleConfig, view_index: int):
        fim = rendered.face_index_map.data
        fg = fim != BACKGROUND_ID
        if fg.any() and int(fim[fg].max()) >= len(config.gt_labels):
            raise LabelMismatch(
                f"face id {int(fim[fg].max())} exceeds {len(config.gt_labels)} labels")
        self.rendered = rendered
        self.config = config
        self.view_index = view_index
        target_faces = np.nonzero(config.gt_labels == config.target_label)[0]
        self._target_pixels = fg & np.isin(fim.astype(np.int64), target_faces)
        self._silhouette = fg

    def _corrupted(self) -> bool:
        return self.config.corruption.applies(self.view_index)

    def detect(self, query: QuerySpec) -> list:
        if not self._target_pixels.any():
            return []
        if self._corrupted() and self.config.corruption.kind == "drop":
            return []
        rows = np.nonzero(self._target_pixels.any(axis=1))[0]
        cols = np.nonzero(self._target_pixels.any(axis=0))[0]
        bbox = (int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)
        conf = self.config.confidence_corrupt if self._corrupted() \
            else self.config.confidence_correct
        return [Detection(bbox=bbox, confidence=conf)]

    def segment(self, bbox) -> Bitmap:
        corruption = self.config.corruption
        if self._corrupted() and corruption.kind == "complement":
            return as_mask(self._silhouette & ~self._target_pixels)
        if self._corrupted() and corruption.kind == "shift":
            shifted = np.zeros_like(self._target_pixels)
            h, w = shifted.shape
            src = self._target_pixels
            dx, dy = corruption.dx, corruption.dy
            ys, xs = np.nonzero(src)
            ys, xs = ys + dy, xs + dx
            keep = (ys >= 0) & (ys < h) & (xs >= 0) & (xs < w)
            shifted[ys[keep], xs[keep]] = True
            return as_mask(shifted)
        return as_mask(self._target_pixels)


class OracleBackend(GroundingBackend):
    """Deterministic stand-in for the neural detector/segmenter.

    One config serves both branches unless ``textured_config`` overrides the
    textured branch (used to corrupt a single branch).
    """

    name = "oracle"

    def __init__(self, config: OracleConfig, textured_config: OracleConfig | None = None):
        self._configs = {
            "untextured": config,
            "textured": textured_config if textured_config is not None else config,
        }

    def config_for(self, branch: str) -> OracleConfig:
        return self._configs[branch]

    def attach(self, rendered: RenderOutput, *, branch: str = "untextured",
               view_index: int = 0) -> OracleView:
        return OracleView(rendered, self._configs[branch], view_index)

    def detect(self, rendered, query, *, branch, view_index):
        return self.attach(rendered, branch=branch, view_index=view_index).detect(query)

    def segment(self, rendered, bbox, *, branch, view_index):
        return self.attach(rendered, branch=branch, view_index=view_index).segment(bbox)


# --- recorded files ----------------------------------------------------------

def view_dir(root, branch: str, view_index: int) -> Path:
    """Canonical per-view directory: <root>/<branch>/view_<kkk>/"""
    return Path(root) / branch / f"view_{view_index:03d}"


class FilesBackend(GroundingBackend):
    """Replays a recorded session from ``<dir>/<branch>/view_<kkk>/`` holding
    ``detections.json`` (array of {bbox, score}) and ``mask.png``.

    ``segment`` returns the recorded mask for the view: recorded sessions
    store the mask belonging to the top surviving detection, which is the
    only box the pipeline queries.
    """

    name = "files"

    def __init__(self, root):
        self.root = Path(root)

    def detect(self, rendered, query, *, branch, view_index):
        path = view_dir(self.root, branch, view_index) / "detections.json"
        if not path.exists():
            raise MissingPrecomputed(f"missing {path}")
        try:
            entries = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad detections file: {exc}", path=str(path)) from exc
        detections = []
        for entry in entries:
            detections.append(Detection(bbox=tuple(entry["bbox"]),
                                        confidence=float(entry["score"])))
        return detections

    def segment(self, rendered, bbox, *, branch, view_index):
        path = view_dir(self.root, branch, view_index) / "mask.png"
        if not path.exists():
            raise MissingPrecomputed(f"missing {path}")
        return load_mask_png(path)


def save_detections(detections, path) -> None:
    entries = [{"bbox": list(d.bbox), "score": d.confidence} for d in detections]
    Path(path).write_text(json.dumps(entries, indent=0, sort_keys=True) + "\n")


# --- HTTP sidecar client ------------------------------------------------------

class HttpBackend(GroundingBackend):
    """Client for the model sidecar's /detect and /segment endpoints.

    A semaphore bounds in-flight requests when callers fan out per view.
    """

    name = "http"

    def __init__(self, base_url: str, timeout: float = 30.0, max_inflight: int = 4):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._gate = threading.Semaphore(max_inflight)
        self._session = requests.Session()

    def _post(self, endpoint: str, payload: dict) -> dict:
        with self._gate:
            try:
                resp = self._session.post(self.base_url + endpoint, json=payload,
                                          timeout=self.timeout)
            except requests.RequestException as exc:
                raise BackendUnavailable(f"{endpoint}: {exc}") from exc
        if resp.status_code != 200:
            raise BackendUnavailable(
                f"{endpoint}: HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.json()

    def detect(self, rendered, query, *, branch, view_index):
        payload = {"image": encode_image_b64(rendered.image),
                   "prompt": query.grounding_text}
        body = self._post("/detect", payload)
        detections = []
        for entry in body.get("detections", []):
            x0, y0, x1, y1 = (int(round(v)) for v in entry["bbox"])
            x0 = max(0, min(x0, rendered.width - 1))
            y0 = max(0, min(y0, rendered.height - 1))
            x1 = max(x0 + 1, min(x1, rendered.width))
            y1 = max(y0 + 1, min(y1, rendered.height))
            detections.append(Detection(bbox=(x0, y0, x1, y1),
                                        confidence=min(1.0, max(0.0, float(entry["score"])))))
        detections.sort(key=lambda d: -d.confidence)
        return detections

    def segment(self, rendered, bbox, *, branch, view_index):
        payload = {"image": encode_image_b64(rendered.image), "bbox": list(bbox)}
        body = self._post("/segment", payload)
        mask = decode_mask_b64(body["mask"])
        if mask.shape != rendered.image.shape:
            raise BackendUnavailable(
                f"/segment returned mask {mask.shape} for image {rendered.image.shape}")
        return mask


def encode_image_b64(bitmap: Bitmap) -> str:
    img = Image.fromarray(bitmap.data, mode="RGB" if bitmap.channels == 3 else "L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def decode_mask_b64(data: str) -> Bitmap:
    raw = base64.b64decode(data)
    with Image.open(io.BytesIO(raw)) as im:
        arr = np.asarray(im.convert("L"))
    return Bitmap((arr > 127).astype(np.uint8))
