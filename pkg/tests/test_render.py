"""Rasterizer: depth correctness against the ray-casting oracle, mask
fractions, silhouette boxes, and persistence."""
import numpy as np
import pytest

import meshseg
from meshseg.errors import DimensionMismatch, EmptyRender, MissingTexture, ParseError
from meshseg.mesh import Bitmap, Mesh
from meshseg.render import (BACKGROUND_ID, RenderOutput, faces_in_mask, load_fidx,
                            object_bbox, render, save_fidx)
from meshseg.synthetic import attach_spherical_uvs, checker_texture, icosphere
from meshseg.views import TrajectoryConfig, generate_trajectory
from oracles import (point_segment_distance, projected_edges,
                     raycast_face_index_map, scan_bbox)


def single_view(image_size=64, fov=45.0):
    return generate_trajectory(TrajectoryConfig(k=2, polar_angles=(90.0,),
                                                image_size=image_size,
                                                fov_y=fov))[0]


def test_single_triangle_fills_frame():
    # camera at (2, 0, 0) looking down -x; a large triangle in the yz-plane
    mesh = Mesh([[0, -5, -5], [0, -5, 5], [0, 5, 0]], [[0, 1, 2]])
    out = render(mesh, single_view())
    assert set(out.visible_faces) == {0}
    fim = out.face_index_map.data
    center = fim[28:36, 28:36]
    assert (center == 0).all()
    assert out.visible_faces[0] == (fim == 0).sum()


def test_two_triangles_near_occludes_far():
    # both span the frame; face 1 sits nearer to the camera at (2, 0, 0)
    far = [[-0.5, -5, -5], [-0.5, -5, 5], [-0.5, 5, 0]]
    near = [[0.5, -5, -5], [0.5, -5, 5], [0.5, 5, 0]]
    mesh = Mesh(far + near, [[0, 1, 2], [3, 4, 5]])
    out = render(mesh, single_view())
    assert set(out.visible_faces) == {1}


def test_back_face_culling_is_off():
    # reversed winding must still render (visibility by depth test only)
    mesh = Mesh([[0, -5, -5], [0, 5, 0], [0, -5, 5]], [[0, 1, 2]])
    out = render(mesh, single_view())
    assert set(out.visible_faces) == {0}


@pytest.mark.parametrize("mesh_name", ["cube", "icosphere"])
def test_face_index_map_matches_ray_oracle(mesh_name, rotated_cube):
    mesh = rotated_cube if mesh_name == "cube" \
        else meshseg.normalize_mesh(icosphere(2))
    views = generate_trajectory(TrajectoryConfig(k=8, image_size=64))
    for vp in views:
        out = render(mesh, vp)
        oracle = raycast_face_index_map(mesh, vp)
        agreement = (out.face_index_map.data == oracle).mean()
        assert agreement >= 0.995
        disagreements = np.argwhere(out.face_index_map.data != oracle)
        if len(disagreements):
            segs = projected_edges(mesh, vp)
            for y, x in disagreements:
                d = min(point_segment_distance((x + 0.5, y + 0.5), a, b)
                        for a, b in segs)
                assert d <= 1.0


def test_visible_faces_match_map_tallies(sphere, sphere_views):
    out = render(sphere, sphere_views[0])
    fim = out.face_index_map.data
    ids, counts = np.unique(fim[fim != BACKGROUND_ID], return_counts=True)
    assert out.visible_faces == {int(i): int(c) for i, c in zip(ids, counts)}


def test_render_deterministic(sphere, sphere_views):
    a = render(sphere, sphere_views[0])
    b = render(sphere, sphere_views[0])
    assert np.array_equal(a.image.data, b.image.data)
    assert np.array_equal(a.face_index_map.data, b.face_index_map.data)
    assert a.visible_faces == b.visible_faces


def test_textured_render(sphere_textured, sphere_views):
    out = render(sphere_textured, sphere_views[0], shading="textured")
    untex = render(sphere_textured, sphere_views[0], shading="untextured")
    assert np.array_equal(out.face_index_map.data, untex.face_index_map.data)
    fg = out.face_index_map.data != BACKGROUND_ID
    assert not np.array_equal(out.image.data[fg], untex.image.data[fg])


def test_textured_requires_texture(sphere, sphere_views):
    with pytest.raises(MissingTexture):
        render(sphere, sphere_views[0], shading="textured")


def _tiny_render(face_pixels):
    """Hand-built RenderOutput on an 8x8 grid: {face: [(y, x), ...]}."""
    fim = np.full((8, 8), BACKGROUND_ID, dtype=np.uint32)
    for face, pixels in face_pixels.items():
        for y, x in pixels:
            fim[y, x] = face
    visible = {f: len(px) for f, px in face_pixels.items()}
    return RenderOutput(image=Bitmap(np.zeros((8, 8, 3), dtype=np.uint8)),
                        face_index_map=Bitmap(fim), visible_faces=visible)


def test_faces_in_mask_all_ones_and_zeros(sphere, sphere_views):
    out = render(sphere, sphere_views[0])
    ones = Bitmap(np.ones((192, 192), dtype=np.uint8))
    zeros = Bitmap(np.zeros((192, 192), dtype=np.uint8))
    assert all(v == 1.0 for v in faces_in_mask(out, ones).values())
    assert all(v == 0.0 for v in faces_in_mask(out, zeros).values())


def test_faces_in_mask_exact_fraction():
    pixels = [(y, x) for y in range(2) for x in range(5)]  # 10 pixels
    tiny = _tiny_render({3: pixels})
    mask = np.zeros((8, 8), dtype=np.uint8)
    for y, x in pixels[:7]:
        mask[y, x] = 1
    fractions = faces_in_mask(tiny, Bitmap(mask))
    assert fractions[3] == pytest.approx(0.7)


def test_faces_in_mask_dimension_mismatch(sphere, sphere_views):
    out = render(sphere, sphere_views[0])
    with pytest.raises(DimensionMismatch):
        faces_in_mask(out, Bitmap(np.zeros((10, 10), dtype=np.uint8)))


def test_object_bbox_single_pixel():
    tiny = _tiny_render({0: [(20 % 8, 10 % 8)]})  # (y=4, x=2)
    assert object_bbox(tiny) == (2, 4, 2, 4)


def test_object_bbox_full_frame():
    full = {0: [(y, x) for y in range(8) for x in range(8)]}
    assert object_bbox(_tiny_render(full)) == (0, 0, 7, 7)


def test_object_bbox_empty_render():
    with pytest.raises(EmptyRender):
        object_bbox(_tiny_render({}))


def test_object_bbox_matches_scan_oracle(rotated_cube):
    vp = generate_trajectory(TrajectoryConfig(k=8, image_size=64))[0]
    out = render(rotated_cube, vp)
    assert object_bbox(out) == scan_bbox(out.face_index_map.data)


def test_fidx_roundtrip(tmp_path, sphere, sphere_views):
    out = render(sphere, sphere_views[0])
    path = tmp_path / "view.fidx"
    save_fidx(out, path)
    blob = path.read_bytes()
    assert blob[:4] == b"FIDX"
    assert len(blob) == 16 + 4 * 192 * 192
    reloaded = load_fidx(path)
    assert np.array_equal(reloaded.data, out.face_index_map.data)


def test_fidx_rejects_garbage(tmp_path):
    path = tmp_path / "bad.fidx"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ParseError):
        load_fidx(path)
