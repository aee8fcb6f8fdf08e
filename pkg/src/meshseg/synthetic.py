"""Synthetic meshes, textures, and painted ground-truth regions for the
oracle verification harness and demos."""
from __future__ import annotations

import numpy as np

from .mesh import Bitmap, FaceAdjacency, Mesh, build_adjacency


def cube_mesh() -> Mesh:
    """Axis-aligned unit cube (8 vertices, 12 triangles), corners at +-0.5."""
    vertices = np.array([
        [-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
        [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1],
    ], dtype=np.float64) * 0.5
    quads = [
        (0, 1, 2, 3), (5, 4, 7, 6), (4, 0, 3, 7),
        (1, 5, 6, 2), (3, 2, 6, 7), (4, 5, 1, 0),
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return Mesh(vertices, np.array(faces, dtype=np.int32))


def icosphere(subdivisions: int = 3) -> Mesh:
    """Unit icosphere with 20 * 4**subdivisions faces (1280 at level 3)."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    verts = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in verts]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    for _ in range(subdivisions):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return Mesh(np.array(verts), np.array(faces, dtype=np.int32))


def face_centroids(mesh: Mesh) -> np.ndarray:
    return mesh.vertices[mesh.faces].mean(axis=1)


def attach_spherical_uvs(mesh: Mesh, texture: Bitmap | None = None) -> Mesh:
    """Per-corner latitude/longitude uvs; texture seams are irrelevant to the
    oracle harness, which never reads rendered colors."""
    corners = mesh.vertices[mesh.faces]  # (m, 3, 3)
    norm = np.linalg.norm(corners, axis=2, keepdims=True)
    unit = corners / np.maximum(norm, 1e-12)
    u = (np.arctan2(unit[..., 2], unit[..., 0]) / (2 * np.pi)) % 1.0
    v = 1.0 - np.arccos(np.clip(unit[..., 1], -1, 1)) / np.pi
    uvs = np.stack([u, v], axis=2)
    return Mesh(mesh.vertices, mesh.faces, uvs=uvs, texture=texture)


def checker_texture(size: int = 64, tiles: int = 8) -> Bitmap:
    """Deterministic two-tone checkerboard RGB texture."""
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    checker = ((xx * tiles // size) + (yy * tiles // size)) % 2
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[checker == 0] = (200, 120, 60)
    img[checker == 1] = (60, 120, 200)
    return Bitmap(img)


def paint_cap(mesh: Mesh, axis, fraction: float) -> np.ndarray:
    """Per-face {0, 1} labels: 1 for faces whose centroid lies within the
    spherical cap of the given area fraction around ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    cos_alpha = 1.0 - 2.0 * fraction  # cap area fraction = (1 - cos alpha) / 2
    centroids = face_centroids(mesh)
    unit = centroids / np.linalg.norm(centroids, axis=1, keepdims=True)
    return (unit @ axis >= cos_alpha).astype(np.int64)


def regularize_region(labels, adjacency: FaceAdjacency, max_rounds: int = 64) -> np.ndarray:
    """Flip any face that disagrees with the majority of its neighbors until
    the region is stable (every face agrees with >= half its neighbors).

    Majority dynamics on the face graph: each flip reduces the number of
    disagreeing edges, so this terminates.  Keeps painted regions free of
    single-face protrusions and notches, which mirrors how one-pass
    neighbor smoothing treats region boundaries.
    """
    labels = np.asarray(labels, dtype=np.int64).copy()
    for _ in range(max_rounds):
        changed = False
        for f in range(len(labels)):
            neigh = adjacency.neighbors[f]
            if not neigh:
                continue
            agree = sum(1 for g in neigh if labels[g] == labels[f])
            if 2 * agree < len(neigh):
                labels[f] = 1 - labels[f]
                changed = True
        if not changed:
            break
    return labels


def stable_cap(mesh: Mesh, axis, fraction: float,
               adjacency: FaceAdjacency | None = None) -> np.ndarray:
    """A painted cap regularized against the face graph (see
    ``regularize_region``)."""
    if adjacency is None:
        adjacency = build_adjacency(mesh)
    return regularize_region(paint_cap(mesh, axis, fraction), adjacency)
