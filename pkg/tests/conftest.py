"""Shared fixtures: canonical meshes, cached sphere renders, and the oracle
harness assets used across the revote and acceptance suites."""
from __future__ import annotations

import numpy as np
import pytest

import meshseg
from meshseg.mesh import Mesh
from meshseg.render import render as real_render
from meshseg.synthetic import (attach_spherical_uvs, checker_texture, cube_mesh,
                               icosphere)

# Acceptance fixture configuration.  fov 63 keeps the unit sphere fully in
# frame (a normalized sphere subtends 30 degrees from r=2, so the default
# 45-degree fov would crop it); min_pixels=1 because oracle masks carry no
# sliver noise.
SPHERE_FOV = 63.0
SPHERE_MIN_PIXELS = 1


def write_obj(path, text):
    path.write_text(text)
    return path


CUBE_OBJ = """\
# unit cube
v -0.5 -0.5 -0.5
v 0.5 -0.5 -0.5
v 0.5 0.5 -0.5
v -0.5 0.5 -0.5
v -0.5 -0.5 0.5
v 0.5 -0.5 0.5
v 0.5 0.5 0.5
v -0.5 0.5 0.5
f 1 2 3
f 1 3 4
f 6 5 8
f 6 8 7
f 5 1 4
f 5 4 8
f 2 6 7
f 2 7 3
f 4 3 7
f 4 7 8
f 5 6 2
f 5 2 1
"""


@pytest.fixture
def cube_obj(tmp_path):
    return write_obj(tmp_path / "cube.obj", CUBE_OBJ)


@pytest.fixture(scope="session")
def sphere():
    return meshseg.normalize_mesh(icosphere(3))


@pytest.fixture(scope="session")
def sphere_textured(sphere):
    return attach_spherical_uvs(sphere, checker_texture())


@pytest.fixture(scope="session")
def sphere_adjacency(sphere):
    return meshseg.build_adjacency(sphere)


@pytest.fixture(scope="session")
def sphere_trajectory():
    return meshseg.TrajectoryConfig(k=8, image_size=192, fov_y=SPHERE_FOV)


@pytest.fixture(scope="session")
def cached_render():
    """Renders are pure functions of (mesh, viewpoint, shading); this cache
    lets many pipeline runs over the same geometry share them."""
    cache = {}

    def run(mesh, viewpoint, shading="untextured"):
        key = (id(mesh), viewpoint.index, viewpoint.image_size, shading)
        if key not in cache:
            cache[key] = real_render(mesh, viewpoint, shading=shading)
        return cache[key]

    return run


@pytest.fixture(scope="session")
def sphere_views(sphere_trajectory):
    return meshseg.generate_trajectory(sphere_trajectory)


@pytest.fixture(scope="session")
def sphere_visibility(sphere, sphere_views, cached_render):
    """Per-view visible-face sets and per-face view counts (untextured)."""
    vis_sets = [set(cached_render(sphere, vp).visible_faces) for vp in sphere_views]
    counts = np.zeros(sphere.face_count, dtype=np.int64)
    for vis in vis_sets:
        for face in vis:
            counts[face] += 1
    return vis_sets, counts


def rotated_mesh(mesh: Mesh, deg_z: float = 10.0, deg_x: float = 7.0) -> Mesh:
    """Rotate a mesh off the trajectory's symmetry axes.  The canonical cube
    aligned with the camera rings projects edges exactly onto pixel-center
    rows, a measure-zero alignment where tie-breaking dominates."""
    az, ax = np.radians(deg_z), np.radians(deg_x)
    rot_z = np.array([[np.cos(az), -np.sin(az), 0.0],
                      [np.sin(az), np.cos(az), 0.0],
                      [0.0, 0.0, 1.0]])
    rot_x = np.array([[1.0, 0.0, 0.0],
                      [0.0, np.cos(ax), -np.sin(ax)],
                      [0.0, np.sin(ax), np.cos(ax)]])
    return Mesh(mesh.vertices @ (rot_z @ rot_x).T, mesh.faces)


@pytest.fixture
def rotated_cube():
    return meshseg.normalize_mesh(rotated_mesh(cube_mesh()))
