"""Depth-buffered software rasterizer producing the shaded view image, the
per-pixel face-index map, and the visible-face set.

Conventions:
  - no back-face culling: only the depth test decides visibility,
  - top-left fill rule on a 1/256-subpixel integer grid, so shared-edge
    pixels are owned by exactly one triangle and output is deterministic,
  - ties in depth keep the lower face id (faces are drawn in id order),
  - flat shading with a headlight: intensity = 0.7 * |cos| + 0.15 ambient,
    white background; textured shading samples the texture with
    perspective-correct barycentric uvs and modulates by the same factor.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, EmptyRender, IoError, MissingTexture, ParseError
from .mesh import Bitmap, Mesh
from .views import NEAR_PLANE, Viewpoint, camera_coords, pixels_from_camera

BACKGROUND_ID = np.uint32(2**32 - 1)

ALBEDO = 0.7
AMBIENT = 0.15
SUBPIXEL = 256  # subpixel snap resolution (1/256 px)


@dataclass(frozen=True)
class RenderOutput:
    """One rendered view: RGB image, uint32 face-index map, and the visible
    faces with their pixel counts."""

    image: Bitmap
    face_index_map: Bitmap
    visible_faces: dict

    def __post_init__(self):
        if self.image.shape != self.face_index_map.shape:
            raise DimensionMismatch("image and face-index map dimensions differ")

    @property
    def width(self) -> int:
        return self.image.width

    @property
    def height(self) -> int:
        return self.image.height

    def visible_pixel_count(self, face: int) -> int:
        return self.visible_faces.get(face, 0)


def render(mesh: Mesh, viewpoint: Viewpoint, shading: str = "untextured") -> RenderOutput:
    """Rasterize the mesh from one viewpoint at the viewpoint's image size."""
    if shading not in ("untextured", "textured"):
        raise ValueError(f"unknown shading mode {shading!r}")
    if shading == "textured" and (mesh.texture is None or mesh.uvs is None):
        raise MissingTexture("textured shading requires uvs and a texture bitmap")

    size = viewpoint.image_size
    cam = camera_coords(viewpoint, mesh.vertices)
    in_front = cam[:, 2] > NEAR_PLANE
    pix = np.full((len(cam), 2), np.nan)
    if in_front.any():
        pix[in_front] = pixels_from_camera(viewpoint, cam[in_front])
    snapped = np.full((len(cam), 2), np.iinfo(np.int64).min, dtype=np.int64)
    snapped[in_front] = np.rint(pix[in_front] * SUBPIXEL).astype(np.int64)

    zbuf = np.zeros((size, size))  # stores 1/z; larger wins
    fidx = np.full((size, size), BACKGROUND_ID, dtype=np.uint32)
    image = np.full((size, size, 3), 255, dtype=np.uint8)

    faces = mesh.faces
    texture = mesh.texture.data if shading == "textured" else None
    for fid in range(len(faces)):
        tri = faces[fid]
        c = cam[tri]
        normal = np.cross(c[1] - c[0], c[2] - c[0])
        nlen = np.linalg.norm(normal)
        if nlen == 0.0:
            continue
        intensity = min(1.0, ALBEDO * abs(normal[2]) / nlen + AMBIENT)
        uv = mesh.uvs[fid] if shading == "textured" else None

        if in_front[tri].all():
            _fill_triangle(snapped[tri], c[:, 2], fid, intensity, uv, texture,
                           zbuf, fidx, image)
        else:
            for ctri, cuv in _clip_near(c, uv):
                spix = np.rint(pixels_from_camera(viewpoint, ctri)
                               * SUBPIXEL).astype(np.int64)
                _fill_triangle(spix, ctri[:, 2], fid, intensity, cuv, texture,
                               zbuf, fidx, image)

    ids, counts = np.unique(fidx, return_counts=True)
    visible = {int(i): int(n) for i, n in zip(ids, counts) if i != BACKGROUND_ID}
    return RenderOutput(image=Bitmap(image), face_index_map=Bitmap(fidx),
                        visible_faces=visible)


def _clip_near(cam_tri, uv):
    """Clip one camera-space triangle against z > NEAR_PLANE.

    Yields (camera-space triangle, per-corner uv or None) fans.  Attributes
    interpolate linearly in camera space, which is exact for positions and
    for uvs (affine over the surface).
    """
    payload = np.hstack([cam_tri, uv if uv is not None else np.zeros((3, 2))])
    out = []
    for i in range(3):
        cur, nxt = payload[i], payload[(i + 1) % 3]
        cur_in, nxt_in = cur[2] > NEAR_PLANE, nxt[2] > NEAR_PLANE
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (NEAR_PLANE - cur[2]) / (nxt[2] - cur[2])
            out.append(cur + t * (nxt - cur))
    for i in range(1, len(out) - 1):
        fan = np.array([out[0], out[i], out[i + 1]])
        yield fan[:, :3], (fan[:, 3:5] if uv is not None else None)


def _fill_triangle(spix, z, fid, intensity, uv, texture, zbuf, fidx, image):
    """Rasterize one screen triangle given subpixel-snapped vertices."""
    size = fidx.shape[0]
    x0, y0 = spix[0]
    x1, y1 = spix[1]
    x2, y2 = spix[2]
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area == 0:
        return
    iz = 1.0 / z
    if area < 0:
        x1, y1, x2, y2 = x2, y2, x1, y1
        iz = iz[[0, 2, 1]]
        if uv is not None:
            uv = uv[[0, 2, 1]]
        area = -area

    half = SUBPIXEL // 2
    pxmin = max(0, int((min(x0, x1, x2) - half) // SUBPIXEL))
    pxmax = min(size - 1, int((max(x0, x1, x2) - half) // SUBPIXEL) + 1)
    pymin = max(0, int((min(y0, y1, y2) - half) // SUBPIXEL))
    pymax = min(size - 1, int((max(y0, y1, y2) - half) // SUBPIXEL) + 1)
    if pxmin > pxmax or pymin > pymax:
        return

    px = (np.arange(pxmin, pxmax + 1, dtype=np.int64) * SUBPIXEL + half)[None, :]
    py = (np.arange(pymin, pymax + 1, dtype=np.int64) * SUBPIXEL + half)[:, None]

    def edge(ax, ay, bx, by):
        w = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        top_left = (by == ay and bx > ax) or (by < ay)
        return w, top_left

    w0, tl0 = edge(x1, y1, x2, y2)   # opposite vertex 0
    w1, tl1 = edge(x2, y2, x0, y0)   # opposite vertex 1
    w2, tl2 = edge(x0, y0, x1, y1)   # opposite vertex 2
    inside = (((w0 > 0) | ((w0 == 0) & tl0))
              & ((w1 > 0) | ((w1 == 0) & tl1))
              & ((w2 > 0) | ((w2 == 0) & tl2)))
    if not inside.any():
        return

    w0f = w0.astype(np.float64)
    w1f = w1.astype(np.float64)
    w2f = w2.astype(np.float64)
    invz = (w0f * iz[0] + w1f * iz[1] + w2f * iz[2]) / float(area)

    ysl = slice(pymin, pymax + 1)
    xsl = slice(pxmin, pxmax + 1)
    win = inside & (invz > zbuf[ysl, xsl])
    if not win.any():
        return
    zbuf[ysl, xsl][win] = invz[win]
    fidx[ysl, xsl][win] = fid

    if texture is None:
        image[ysl, xsl][win] = int(round(255.0 * intensity))
    else:
        denom = float(area) * invz[win]
        u = (w0f[win] * (uv[0, 0] * iz[0]) + w1f[win] * (uv[1, 0] * iz[1])
             + w2f[win] * (uv[2, 0] * iz[2])) / denom
        v = (w0f[win] * (uv[0, 1] * iz[0]) + w1f[win] * (uv[1, 1] * iz[1])
             + w2f[win] * (uv[2, 1] * iz[2])) / denom
        th, tw = texture.shape[0], texture.shape[1]
        tx = np.clip(np.floor(u * tw).astype(np.int64), 0, tw - 1)
        ty = np.clip(np.floor((1.0 - v) * th).astype(np.int64), 0, th - 1)
        texel = texture[ty, tx].astype(np.float64)
        image[ysl, xsl][win] = np.clip(np.rint(texel * intensity), 0, 255).astype(np.uint8)


def faces_in_mask(rendered: RenderOutput, mask: Bitmap) -> dict:
    """For each visible face, the fraction of its visible pixels lying in
    the mask (mask value nonzero)."""
    if mask.shape != rendered.face_index_map.shape:
        raise DimensionMismatch(
            f"mask {mask.shape} vs render {rendered.face_index_map.shape}")
    fim = rendered.face_index_map.data
    fg = fim != BACKGROUND_ID
    ids = fim[fg].astype(np.int64)
    inmask = (mask.data != 0)[fg]
    if len(ids) == 0:
        return {}
    total = np.bincount(ids)
    hit = np.bincount(ids[inmask], minlength=len(total))
    return {int(f): float(hit[f]) / float(total[f]) for f in np.nonzero(total)[0]}


def object_bbox(rendered: RenderOutput):
    """Tight inclusive pixel box (x0, y0, x1, y1) of all non-background pixels."""
    fg = rendered.face_index_map.data != BACKGROUND_ID
    if not fg.any():
        raise EmptyRender("no non-background pixels")
    rows = np.nonzero(fg.any(axis=1))[0]
    cols = np.nonzero(fg.any(axis=0))[0]
    return int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1])


# --- persistence ------------------------------------------------------------

_FIDX_MAGIC = b"FIDX"


def save_fidx(rendered_or_map, path) -> None:
    """Write a face-index map as little-endian raw uint32 with a 16-byte
    header: magic "FIDX", width, height, reserved."""
    fim = rendered_or_map.face_index_map.data if isinstance(rendered_or_map, RenderOutput) \
        else rendered_or_map.data
    header = _FIDX_MAGIC + struct.pack("<III", fim.shape[1], fim.shape[0], 0)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(fim.astype("<u4").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_fidx(path) -> Bitmap:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if len(blob) < 16 or blob[:4] != _FIDX_MAGIC:
        raise ParseError("not a FIDX file", path=str(path))
    width, height, _ = struct.unpack("<III", blob[4:16])
    expect = 16 + 4 * width * height
    if len(blob) != expect:
        raise ParseError(f"FIDX payload size {len(blob)} != {expect}", path=str(path))
    grid = np.frombuffer(blob[16:], dtype="<u4").reshape(height, width)
    return Bitmap(grid.astype(np.uint32))


def save_png(bitmap: Bitmap, path) -> None:
    """Write RGB bitmaps as-is; 1-channel bitmaps as 0/255 grayscale."""
    if bitmap.channels == 3:
        img = Image.fromarray(bitmap.data, mode="RGB")
    else:
        img = Image.fromarray((bitmap.data != 0).astype(np.uint8) * 255, mode="L")
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_mask_png(path) -> Bitmap:
    """Read a 1-channel 0/255 PNG as a binary mask."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except FileNotFoundError as exc:
        raise IoError(f"mask not found: {path}") from exc
    except Exception as exc:
        raise ParseError(f"cannot decode mask: {exc}", path=str(path)) from exc
    return Bitmap((arr > 127).astype(np.uint8))
