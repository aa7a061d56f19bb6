"""Deterministic rasterization of limit samples and disk configurations to PPM.

Plane view: a square-pixel window of the complex plane, y up.  Sphere view: the
two hemispheres (|z| > 1 left, |z| < 1 right) in Lambert azimuthal equal-area
projection, side by side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .moebius import INF, SpherePoint
from .sphere_geom import Disk, sphere_points, to_sphere

MAX_SIDE = 16384

Color = Union[int, tuple]


class RenderError(ValueError):
    pass


def _rgb(c: Color) -> np.ndarray:
    if isinstance(c, (int, np.integer)):
        return np.array([c, c, c], dtype=np.uint8)
    return np.array(c, dtype=np.uint8)


@dataclass
class Layer:
    kind: str  # points | circles | filled | segments
    items: list
    color: Color = 0


@dataclass
class Scene:
    width: int = 512
    height: int = 512
    view: str = "plane"
    center: complex = 0j
    half_width: float = 2.0
    background: Color = 255
    layers: list = field(default_factory=list)

    def __post_init__(self):
        if not (0 < self.width <= MAX_SIDE and 0 < self.height <= MAX_SIDE):
            raise RenderError(f"resolution {self.width}x{self.height} outside 1..{MAX_SIDE}")
        if self.view not in ("plane", "sphere"):
            raise RenderError(f"unknown view {self.view!r}")
        if self.view == "plane" and not self.half_width > 0:
            raise RenderError("half_width must be positive")

    def add(self, kind: str, items, color: Color = 0) -> "Scene":
        if kind not in ("points", "circles", "filled", "segments"):
            raise RenderError(f"unknown layer kind {kind!r}")
        items = items if isinstance(items, np.ndarray) else list(items)
        self.layers.append(Layer(kind, items, color))
        return self

    # -- coordinates

    @property
    def scale(self) -> float:
        """Pixels per unit in the plane view."""
        return self.width / (2 * self.half_width)

    def plane_to_pixel(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(column, row) floats; pixel (i, j) covers [i, i+1) x [j, j+1)."""
        z = np.asarray(z, dtype=complex)
        hh = self.half_width * self.height / self.width
        col = (z.real - (self.center.real - self.half_width)) * self.scale
        row = ((self.center.imag + hh) - z.imag) * self.scale
        return col, row

    def pixel_centers(self) -> np.ndarray:
        j, i = np.mgrid[0:self.height, 0:self.width]
        hh = self.half_width * self.height / self.width
        x = self.center.real - self.half_width + (i + 0.5) / self.scale
        y = self.center.imag + hh - (j + 0.5) / self.scale
        return x + 1j * y

    def _sphere_layout(self) -> tuple[float, float, float]:
        R = min(self.width / 4, self.height / 2)
        return R, self.width / 4, self.height / 2

    def sphere_to_pixel(self, xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        R, cx, cy = self._sphere_layout()
        x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
        north = z >= 0
        k = np.sqrt(2 / (1 + np.abs(z))) * R / math.sqrt(2)
        col = np.where(north, cx, 3 * cx) + k * x
        row = cy - k * y
        return col, row


def _put(img: np.ndarray, col: np.ndarray, row: np.ndarray, color: np.ndarray):
    col = np.floor(col).astype(np.int64)
    row = np.floor(row).astype(np.int64)
    ok = (col >= 0) & (col < img.shape[1]) & (row >= 0) & (row < img.shape[0])
    img[row[ok], col[ok]] = color


def midpoint_circle(cx: int, cy: int, r: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixels of a circle by the midpoint algorithm (8-way symmetric)."""
    xs, ys = [], []
    x, y, err = r, 0, 1 - r
    while x >= y:
        xs.append(x)
        ys.append(y)
        y += 1
        if err < 0:
            err += 2 * y + 1
        else:
            x -= 1
            err += 2 * (y - x) + 1
    x = np.array(xs)
    y = np.array(ys)
    px = np.concatenate([x, y, -y, -x, -x, -y, y, x]) + cx
    py = np.concatenate([y, x, x, y, -y, -x, -x, -y]) + cy
    return px, py


def _line(c0: float, r0: float, c1: float, r1: float) -> tuple[np.ndarray, np.ndarray]:
    n = int(max(abs(c1 - c0), abs(r1 - r0))) + 1
    t = np.linspace(0, 1, n + 1)
    return c0 + t * (c1 - c0), r0 + t * (r1 - r0)


def _disk_mask(d: Disk, z: np.ndarray) -> np.ndarray:
    A, B, D = d.signed_form()
    return (A * np.abs(z) ** 2 + 2 * (np.conj(B) * z).real + D) < 0


def _stroke_plane(scene: Scene, img: np.ndarray, d: Disk, color: np.ndarray):
    if d.circle.is_line:
        # a line through the window: clip the parametrized line to a generous box
        B, D = d.circle.B, d.circle.D
        n = B / abs(B)
        p0 = -D / (2 * abs(B)) * n
        ext = 4 * (scene.half_width + abs(scene.center) + abs(p0))
        a, b = p0 - ext * 1j * n, p0 + ext * 1j * n
        (c0, c1), (r0, r1) = scene.plane_to_pixel(np.array([a, b]))
        col, row = _line(c0, r0, c1, r1)
        _put(img, col, row, color)
        return
    c, r = d.center_radius()
    col, row = scene.plane_to_pixel(np.array([c]))
    rp = r * scene.scale
    if rp > 4 * (scene.width + scene.height):
        # nearly straight on the scale of the image: sample the visible arc
        k = int(8 * (scene.width + scene.height))
        dist = abs(scene.center - c)
        span = min(math.pi, 2 * (scene.half_width * 2 + 1) / max(r, 1e-300) + 1e-3)
        base = math.atan2((scene.center - c).imag, (scene.center - c).real) if dist else 0.0
        th = base + np.linspace(-span, span, k)
        pc, pr = scene.plane_to_pixel(c + r * np.exp(1j * th))
        _put(img, pc, pr, color)
        return
    px, py = midpoint_circle(int(np.floor(col[0])), int(np.floor(row[0])), int(round(rp)))
    _put(img, px.astype(float), py.astype(float), color)


def _stroke_sphere(scene: Scene, img: np.ndarray, d: Disk, color: np.ndarray):
    R = scene._sphere_layout()[0]
    k = max(64, int(8 * R))
    nvec, th = d.cap_center, d.cap_angle
    helper = np.array([1.0, 0, 0]) if abs(nvec[0]) < 0.9 else np.array([0, 1.0, 0])
    u = np.cross(nvec, helper)
    u /= np.linalg.norm(u)
    v = np.cross(nvec, u)
    phi = np.linspace(0, 2 * math.pi, k, endpoint=False)[:, None]
    xyz = math.cos(th) * nvec + math.sin(th) * (np.cos(phi) * u + np.sin(phi) * v)
    _put(img, *scene.sphere_to_pixel(xyz), color)


def _points_xyz(items) -> np.ndarray:
    if isinstance(items, np.ndarray) and items.ndim == 2 and items.shape[1] == 3:
        return items
    return np.array([to_sphere(z) for z in items]).reshape(-1, 3)


def render(scene: Scene) -> np.ndarray:
    """Rasterize to an (height, width, 3) uint8 array."""
    img = np.empty((scene.height, scene.width, 3), dtype=np.uint8)
    img[:] = _rgb(scene.background)
    sphere = scene.view == "sphere"
    if sphere:
        R, cx, cy = scene._sphere_layout()
        j, i = np.mgrid[0:scene.height, 0:scene.width]
    for layer in scene.layers:
        color = _rgb(layer.color)
        if layer.kind == "points":
            xyz = _points_xyz(layer.items)
            if sphere:
                _put(img, *scene.sphere_to_pixel(xyz), color)
            else:
                finite = xyz[:, 2] < 1 - 1e-15
                xyz = xyz[finite]
                z = (xyz[:, 0] + 1j * xyz[:, 1]) / (1 - xyz[:, 2])
                _put(img, *scene.plane_to_pixel(z), color)
        elif layer.kind == "circles":
            for d in layer.items:
                (_stroke_sphere if sphere else _stroke_plane)(scene, img, d, color)
        elif layer.kind == "filled":
            if sphere:
                xyz, valid = _sphere_pixel_points(scene, i, j, R, cx, cy)
                for d in layer.items:
                    m = valid & (d.margins(xyz.reshape(-1, 3)).reshape(valid.shape) > 0)
                    img[m] = color
            else:
                z = scene.pixel_centers()
                for d in layer.items:
                    img[_disk_mask(d, z)] = color
        elif layer.kind == "segments":
            for p, q in layer.items:
                _stroke_segment(scene, img, p, q, color)
    return img


def _sphere_pixel_points(scene, i, j, R, cx, cy):
    X = (i + 0.5 - np.where(i < 2 * cx, cx, 3 * cx)) / R * math.sqrt(2)
    Y = (cy - (j + 0.5)) / R * math.sqrt(2)
    rho2 = X ** 2 + Y ** 2
    valid = rho2 <= 2
    k = np.sqrt(np.maximum(1 - rho2 / 4, 0))
    z = 1 - rho2 / 2
    z = np.where(i < 2 * cx, z, -z)
    xyz = np.stack([k * X, k * Y, z], axis=-1)
    return xyz, valid


def _stroke_segment(scene: Scene, img: np.ndarray, p: SpherePoint, q: SpherePoint, color):
    if p is INF or q is INF:
        raise RenderError("segments need finite endpoints")
    if scene.view == "plane":
        (c0, c1), (r0, r1) = scene.plane_to_pixel(np.array([p, q]))
        _put(img, *_line(c0, r0, c1, r1), color)
    else:
        t = np.linspace(0, 1, 2048)
        z = p + t * (q - p)
        xyz = sphere_points(np.stack([z, np.ones_like(z)], axis=1))
        _put(img, *scene.sphere_to_pixel(xyz), color)


def to_ppm(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def write_ppm(path, img: np.ndarray):
    with open(path, "wb") as fh:
        fh.write(to_ppm(img))


def read_ppm(data: bytes) -> np.ndarray:
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise RenderError("not an 8-bit binary PPM")
    w, h = int(parts[1]), int(parts[2])
    raw = parts[4]
    return np.frombuffer(raw[:w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def default_scene(points=None, disks=(), view: str = "plane", width: int = 512,
                  height: Optional[int] = None, center: complex = 0j,
                  half_width: float = 2.0) -> Scene:
    if height is None:
        height = width // 2 if view == "sphere" else width
    s = Scene(width, height, view, complex(center), half_width)
    if disks:
        s.add("circles", disks, (40, 90, 200))
    if points is not None:
        s.add("points", points, 0)
    return s
