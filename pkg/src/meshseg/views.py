"""Fixed spherical camera trajectory and per-view camera matrices.

Cameras sit on a sphere of radius r around the world origin, on rings of
constant polar angle, looking at the origin.  The camera frame follows the
x-right / y-down / z-forward convention, so projected pixel y grows
downward and depth is the distance along the camera forward axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

NEAR_PLANE = 0.01
FAR_PLANE = 100.0


@dataclass(frozen=True)
class TrajectoryConfig:
    """Camera trajectory parameters.

    ``k`` views total, split evenly across the rings in ``polar_angles``;
    azimuths within a ring are uniform over [0, 360).  The polar axis is
    +y by default (``up_axis``).
    """

    k: int = 8
    r: float = 2.0
    polar_angles: tuple = (75.0, 115.0)
    image_size: int = 512
    fov_y: float = 45.0
    up_axis: str = "y"

    def __post_init__(self):
        if self.k < 2 or self.k % 2 != 0:
            raise ConfigError(f"view count must be even and >= 2, got {self.k}")
        if not self.polar_angles:
            raise ConfigError("at least one polar angle required")
        if self.k % len(self.polar_angles) != 0:
            raise ConfigError(
                f"view count {self.k} not divisible by {len(self.polar_angles)} rings")
        if not self.r > 0:
            raise ConfigError(f"radius must be positive, got {self.r}")
        for theta in self.polar_angles:
            if not 0.0 < theta < 180.0:
                raise ConfigError(f"polar angle must be in (0, 180), got {theta}")
        if not 10.0 < self.fov_y < 120.0:
            raise ConfigError(f"fov_y must be in (10, 120), got {self.fov_y}")
        if self.image_size < 8:
            raise ConfigError(f"image size too small: {self.image_size}")
        if self.up_axis not in ("y", "z"):
            raise ConfigError(f"up axis must be 'y' or 'z', got {self.up_axis!r}")
        object.__setattr__(self, "polar_angles", tuple(float(t) for t in self.polar_angles))

    @property
    def views_per_ring(self) -> int:
        return self.k // len(self.polar_angles)


@dataclass(frozen=True)
class Viewpoint:
    """One camera on the trajectory.

    ``view`` maps world homogeneous points into camera space (position goes
    to the origin); ``proj`` maps camera space into clip space with w = z.
    """

    index: int
    r: float
    theta: float
    phi: float
    position: np.ndarray
    view: np.ndarray = field(repr=False)
    proj: np.ndarray = field(repr=False)
    image_size: int
    fov_y: float

    @property
    def forward(self) -> np.ndarray:
        """Unit view direction (camera toward the origin) in world space."""
        return self.view[2, :3]

    @property
    def rotation(self) -> np.ndarray:
        return self.view[:3, :3]


def spherical_position(r: float, theta_deg: float, phi_deg: float, up_axis: str = "y"):
    """Spherical-to-Cartesian with the polar axis along +up_axis."""
    t, p = math.radians(theta_deg), math.radians(phi_deg)
    if up_axis == "y":
        return np.array([r * math.sin(t) * math.cos(p),
                         r * math.cos(t),
                         r * math.sin(t) * math.sin(p)])
    return np.array([r * math.sin(t) * math.cos(p),
                     r * math.sin(t) * math.sin(p),
                     r * math.cos(t)])


def look_at(position, target, up):
    """World-to-camera matrix with x-right / y-down / z-forward axes."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ConfigError("camera position coincides with its target")
    forward = forward / norm
    up = np.asarray(up, dtype=np.float64)
    if np.linalg.norm(np.cross(forward, up)) < 1e-9:
        up = np.array([1.0, 0.0, 0.0])  # fallback when view direction is parallel to up
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    view = np.eye(4)
    view[0, :3], view[1, :3], view[2, :3] = right, down, forward
    view[:3, 3] = -view[:3, :3] @ position
    return view


def perspective(fov_y_deg: float, aspect: float = 1.0,
                near: float = NEAR_PLANE, far: float = FAR_PLANE):
    """Perspective projection; clip coordinates carry w = camera-space z."""
    f = 1.0 / math.tan(math.radians(fov_y_deg) / 2.0)
    proj = np.zeros((4, 4))
    proj[0, 0] = f / aspect
    proj[1, 1] = f
    proj[2, 2] = (far + near) / (far - near)
    proj[2, 3] = -2.0 * far * near / (far - near)
    proj[3, 2] = 1.0
    return proj


def generate_trajectory(config: TrajectoryConfig) -> list:
    """All viewpoints of the trajectory, ring-major then by azimuth."""
    per_ring = config.views_per_ring
    up = np.array([0.0, 1.0, 0.0]) if config.up_axis == "y" else np.array([0.0, 0.0, 1.0])
    proj = perspective(config.fov_y)
    views = []
    index = 0
    for theta in config.polar_angles:
        for i in range(per_ring):
            phi = i * 360.0 / per_ring
            position = spherical_position(config.r, theta, phi, config.up_axis)
            view = look_at(position, np.zeros(3), up)
            views.append(Viewpoint(index=index, r=config.r, theta=theta, phi=phi,
                                   position=position, view=view, proj=proj,
                                   image_size=config.image_size, fov_y=config.fov_y))
            index += 1
    return views


class Projection(NamedTuple):
    xy: np.ndarray   # continuous pixel coordinates, y downward
    depth: float     # distance along the camera forward axis
    behind: bool     # True when depth <= near plane


def camera_coords(viewpoint: Viewpoint, points) -> np.ndarray:
    """World points (n, 3) to camera space (n, 3)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return pts @ viewpoint.rotation.T + viewpoint.view[:3, 3]


def pixels_from_camera(viewpoint: Viewpoint, cam_pts) -> np.ndarray:
    """Camera-space points (n, 3) to continuous pixel coordinates (n, 2)."""
    cam = np.atleast_2d(np.asarray(cam_pts, dtype=np.float64))
    size = viewpoint.image_size
    f = 1.0 / math.tan(math.radians(viewpoint.fov_y) / 2.0)
    z = cam[:, 2]
    ndc_x = f * cam[:, 0] / z
    ndc_y = f * cam[:, 1] / z
    return np.stack([(ndc_x + 1.0) * size / 2.0, (ndc_y + 1.0) * size / 2.0], axis=1)


def project(viewpoint: Viewpoint, point) -> Projection:
    """Project one finite world point; flags points at or behind the near plane."""
    cam = camera_coords(viewpoint, point)[0]
    depth = float(cam[2])
    if depth <= NEAR_PLANE:
        return Projection(np.array([math.nan, math.nan]), depth, True)
    return Projection(pixels_from_camera(viewpoint, cam[None])[0], depth, False)


def unproject(viewpoint: Viewpoint, xy, depth: float) -> np.ndarray:
    """Inverse of project: pixel coordinates plus depth back to a world point."""
    size = viewpoint.image_size
    f = 1.0 / math.tan(math.radians(viewpoint.fov_y) / 2.0)
    ndc_x = 2.0 * xy[0] / size - 1.0
    ndc_y = 2.0 * xy[1] / size - 1.0
    cam = np.array([ndc_x * depth / f, ndc_y * depth / f, depth])
    return viewpoint.rotation.T @ (cam - viewpoint.view[:3, 3])
