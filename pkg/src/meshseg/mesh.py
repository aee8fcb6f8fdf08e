"""Triangle-mesh and bitmap containers, normalization, and face adjacency.

Meshes are immutable after construction (arrays are marked read-only) and
safe to share across concurrent readers.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, LengthMismatch

log = logging.getLogger(__name__)


def _readonly(arr):
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bitmap:
    """Row-major image grid: (h, w) for 1-channel data, (h, w, 3) for RGB."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim == 2:
            pass
        elif self.data.ndim == 3 and self.data.shape[2] == 3:
            pass
        else:
            raise ValueError(f"bitmap must be (h, w) or (h, w, 3), got {self.data.shape}")
        object.__setattr__(self, "data", _readonly(self.data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def shape(self):
        return (self.height, self.width)


# A MaskImage is a 1-channel Bitmap with values in {0, 1}.
MaskImage = Bitmap


def as_mask(data) -> Bitmap:
    """Wrap a 2D array as a binary mask bitmap, coercing to uint8 {0, 1}."""
    arr = np.asarray(data)
    if arr.ndim != 2:
        raise ValueError("mask must be a 2D array")
    return Bitmap((arr != 0).astype(np.uint8))


@dataclass(frozen=True)
class Mesh:
    """Triangle mesh: float64 vertices (n, 3) and int32 faces (m, 3).

    ``uvs`` holds one (u, v) pair per face corner, shape (m, 3, 2), values in
    [0, 1]^2.  ``texture`` is an RGB Bitmap; a texture requires uvs.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uvs: np.ndarray | None = None
    texture: Bitmap | None = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(self.faces, dtype=np.int32).reshape(-1, 3)
        if len(v) == 0:
            raise DegenerateGeometry("mesh has no vertices")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        if f.size:
            same = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if same.any():
                raise ValueError(f"{int(same.sum())} faces reuse a vertex index")
            areas = triangle_areas(v, f)
            if (areas <= 0.0).any():
                raise ValueError(f"{int((areas <= 0.0).sum())} faces have zero area")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f))
        if self.uvs is not None:
            uv = np.asarray(self.uvs, dtype=np.float64)
            if uv.shape != (len(f), 3, 2):
                raise ValueError(f"uvs must be (m, 3, 2), got {uv.shape}")
            object.__setattr__(self, "uvs", _readonly(uv))
        if self.texture is not None:
            if self.uvs is None:
                raise ValueError("a textured mesh requires per-corner uvs")
            if self.texture.channels != 3:
                raise ValueError("texture must be RGB")

    @property
    def face_count(self) -> int:
        return len(self.faces)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def with_texture(self, texture: Bitmap) -> "Mesh":
        return Mesh(self.vertices, self.faces, uvs=self.uvs, texture=texture)


def triangle_areas(vertices, faces) -> np.ndarray:
    """Per-face triangle areas."""
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def normalize_mesh(mesh: Mesh) -> Mesh:
    """Center the mesh at its bounding-box center and scale the maximal
    vertex distance from the origin to exactly 1.

    Idempotent within floating-point precision; face topology, uvs, and
    texture are preserved.
    """
    v = mesh.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    centered = v - (lo + hi) / 2.0
    radius = float(np.linalg.norm(centered, axis=1).max())
    if radius <= 1e-12:
        raise DegenerateGeometry("all vertices coincide; cannot normalize")
    return Mesh(centered / radius, mesh.faces, uvs=mesh.uvs, texture=mesh.texture)


@dataclass(frozen=True)
class FaceAdjacency:
    """Edge-sharing face adjacency with deterministic (ascending) neighbor order.

    ``indptr``/``indices`` form a CSR view over the same neighbor lists for
    vectorized consumers.
    """

    neighbors: tuple
    indptr: np.ndarray = field(repr=False, default=None)
    indices: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.indptr is None:
            counts = np.fromiter((len(n) for n in self.neighbors), dtype=np.int64,
                                 count=len(self.neighbors))
            indptr = np.zeros(len(self.neighbors) + 1, dtype=np.int64)
            np.cumsum(counts, out=indptr[1:])
            flat = np.concatenate([np.asarray(n, dtype=np.int64) for n in self.neighbors]) \
                if len(self.neighbors) and indptr[-1] else np.zeros(0, dtype=np.int64)
            object.__setattr__(self, "indptr", _readonly(indptr))
            object.__setattr__(self, "indices", _readonly(flat))

    @property
    def face_count(self) -> int:
        return len(self.neighbors)

    def degree(self, face: int) -> int:
        return len(self.neighbors[face])


def build_adjacency(mesh: Mesh) -> FaceAdjacency:
    """Faces are neighbors iff they share an undirected vertex edge.

    Non-manifold edges (more than two incident faces) are accepted; every
    incident pair becomes mutually adjacent and a warning is logged.
    """
    edge_faces: dict = {}
    faces = mesh.faces
    for fid in range(len(faces)):
        a, b, c = (int(x) for x in faces[fid])
        for u, w in ((a, b), (b, c), (c, a)):
            key = (u, w) if u < w else (w, u)
            edge_faces.setdefault(key, []).append(fid)
    neighbor_sets = [set() for _ in range(len(faces))]
    non_manifold = 0
    for key, incident in edge_faces.items():
        if len(incident) > 2:
            non_manifold += 1
        for i in range(len(incident)):
            for j in range(i + 1, len(incident)):
                if incident[i] != incident[j]:
                    neighbor_sets[incident[i]].add(incident[j])
                    neighbor_sets[incident[j]].add(incident[i])
    if non_manifold:
        log.warning("mesh has %d non-manifold edges (>2 incident faces)", non_manifold)
    return FaceAdjacency(tuple(tuple(sorted(s)) for s in neighbor_sets))


def check_labels_length(labels, mesh: Mesh) -> np.ndarray:
    """Validate a per-face label array against the mesh; returns int array."""
    arr = np.asarray(labels, dtype=np.int64).reshape(-1)
    if len(arr) != mesh.face_count:
        raise LengthMismatch(
            f"got {len(arr)} labels for a mesh with {mesh.face_count} faces")
    return arr
