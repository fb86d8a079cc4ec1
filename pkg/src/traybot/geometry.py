"""Canonical world model: circular tray, rectangular manway, frames and units.

All lengths are SI meters; angles are radians in (-pi, pi]. Inch values from
vendor drawings must be converted once at config load via ``inches_to_meters``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError

INCH = 0.0254

_RECT_TOL = 1e-6


def inches_to_meters(value_in: float) -> float:
    return value_in * INCH


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]; exact for angles already in range."""
    if -math.pi < angle <= math.pi:
        return angle
    a = math.fmod(angle + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def rot2(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class ManwayRect:
    """Rectangular manway opening, given by its four corners in the global frame.

    ``vertices`` is a (4, 3) array in counterclockwise order; ``long_side`` and
    ``short_side`` are the full side lengths; ``center`` is the planar centroid
    and ``theta`` the orientation of the long side.
    """

    vertices: np.ndarray
    long_side: float
    short_side: float
    center: np.ndarray
    theta: float

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(4, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(2))
        if not (self.long_side >= self.short_side > 0.0):
            raise InvalidGeometryError(
                f"manway sides must satisfy long >= short > 0, got {self.long_side} x {self.short_side}"
            )
        if not (-math.pi < self.theta <= math.pi):
            raise InvalidGeometryError(f"theta {self.theta} outside (-pi, pi]")
        sides = np.array([v[(i + 1) % 4] - v[i] for i in range(4)])
        lengths = np.linalg.norm(sides, axis=1)
        if abs(lengths[0] - lengths[2]) > _RECT_TOL or abs(lengths[1] - lengths[3]) > _RECT_TOL:
            raise InvalidGeometryError("opposite manway sides differ beyond tolerance")
        for i in range(4):
            if abs(float(sides[i] @ sides[(i + 1) % 4])) > _RECT_TOL:
                raise InvalidGeometryError("adjacent manway sides are not orthogonal")
        if np.any(np.abs(v[:, :2].mean(axis=0) - self.center) > _RECT_TOL):
            raise InvalidGeometryError("manway center is not the vertex centroid")

    @classmethod
    def from_center(
        cls, center, theta: float, long_side: float, short_side: float, z: float = 0.0
    ) -> "ManwayRect":
        center = np.asarray(center, dtype=float).reshape(2)
        theta = wrap_angle(theta)
        r = rot2(theta)
        half = np.array(
            [
                [-long_side / 2, -short_side / 2],
                [long_side / 2, -short_side / 2],
                [long_side / 2, short_side / 2],
                [-long_side / 2, short_side / 2],
            ]
        )
        xy = center + half @ r.T
        verts = np.column_stack([xy, np.full(4, z)])
        return cls(verts, long_side, short_side, center, theta)

    def to_local(self, p) -> np.ndarray:
        """Planar point expressed in the rectangle's rotated frame (long axis = x)."""
        p = np.asarray(p, dtype=float).reshape(2)
        return rot2(-self.theta) @ (p - self.center)


def ellipse_params(manway: ManwayRect, pad_long: float, pad_short: float):
    """Quadratic-form parameters (A, B, c) of the padded keep-out ellipse.

    The ellipse has semi-axes ``a = long_side + pad_long`` and
    ``b = short_side + pad_short`` aligned with the rectangle; the barrier
    value at a point p is ``p' A p + B p + c``, negative inside.
    """
    a = manway.long_side + pad_long
    b = manway.short_side + pad_short
    if b <= 0.0:
        raise InvalidGeometryError("padded short radius is non-positive")
    if a < b:
        raise InvalidGeometryError("padded radii violate a >= b")
    ct, st = math.cos(manway.theta), math.sin(manway.theta)
    ia2, ib2 = 1.0 / a**2, 1.0 / b**2
    A = np.array(
        [
            [ct**2 * ia2 + st**2 * ib2, (ia2 - ib2) * ct * st],
            [(ia2 - ib2) * ct * st, st**2 * ia2 + ct**2 * ib2],
        ]
    )
    center = manway.center
    B = -2.0 * center @ A
    c = float(center @ A @ center) - 1.0
    return A, B, c


def rect_contains(manway: ManwayRect, margin: float, p, tol: float = 0.0) -> bool:
    """True iff p lies inside the rectangle inflated outward by ``margin``.

    ``tol`` shifts the boundary: positive values accept points slightly
    outside, negative values demand strict interiority.
    """
    u, v = manway.to_local(p)
    return (
        abs(u) <= manway.long_side / 2 + margin + tol
        and abs(v) <= manway.short_side / 2 + margin + tol
    )


def rect_boundary_projection(manway: ManwayRect, margin: float, p, clearance: float = 0.0) -> np.ndarray:
    """Nearest point on the inflated rectangle boundary, pushed outward by ``clearance``."""
    hu = manway.long_side / 2 + margin
    hv = manway.short_side / 2 + margin
    u, v = manway.to_local(p)
    # Candidate projections onto each of the four inflated edges.
    candidates = [
        (math.copysign(hu + clearance, u if u != 0 else 1.0), min(max(v, -hv), hv)),
        (min(max(u, -hu), hu), math.copysign(hv + clearance, v if v != 0 else 1.0)),
    ]
    best = min(candidates, key=lambda q: (q[0] - u) ** 2 + (q[1] - v) ** 2)
    return manway.center + rot2(manway.theta) @ np.asarray(best)


def convex_polygon_margin(vertices, p) -> tuple[float, bool]:
    """Signed inward distance of p to a convex polygon, plus a degeneracy flag.

    Positive margin means p is inside by that distance; works for any winding.
    Degenerate (near-collinear) polygons report ``(-inf, True)``.
    """
    verts = np.asarray(vertices, dtype=float).reshape(-1, 2)
    n = len(verts)
    area2 = 0.0
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        area2 += a[0] * b[1] - b[0] * a[1]
    if abs(area2) < 1e-12:
        return -math.inf, True
    sign = 1.0 if area2 > 0 else -1.0
    p = np.asarray(p, dtype=float).reshape(2)
    margin = math.inf
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        edge = b - a
        length = float(np.linalg.norm(edge))
        if length < 1e-12:
            return -math.inf, True
        inward = sign * np.array([-edge[1], edge[0]]) / length
        margin = min(margin, float(inward @ (p - a)))
    return margin, False


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise without repeated endpoint."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


@dataclass(frozen=True)
class TrayWorld:
    """Tray stack plus derived keep-out ellipse, shared read-only by all planners."""

    plate_radius: float
    base_offset: float
    layer_count: int
    layer_gap: float
    manways: tuple[ManwayRect, ...]
    tray_center: np.ndarray
    pad_long: float
    pad_short: float
    buffer_margin: float
    ellipse_a: np.ndarray = field(init=False)
    ellipse_b: np.ndarray = field(init=False)
    ellipse_c: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tray_center", np.asarray(self.tray_center, dtype=float).reshape(2))
        if self.plate_radius - self.base_offset <= 0.0:
            raise InvalidGeometryError("plate radius minus base offset must be positive")
        if self.layer_gap <= 0.0:
            raise InvalidGeometryError("layer gap must be positive")
        if self.buffer_margin < 0.0:
            raise InvalidGeometryError("buffer margin must be non-negative")
        if self.layer_count < 1 or len(self.manways) != self.layer_count:
            raise InvalidGeometryError("need one manway per layer")
        A, B, c = ellipse_params(self.manways[0], self.pad_long, self.pad_short)
        object.__setattr__(self, "ellipse_a", A)
        object.__setattr__(self, "ellipse_b", B)
        object.__setattr__(self, "ellipse_c", c)
        if not self._safe_set_nonempty():
            raise InvalidGeometryError("padded ellipse covers the whole reachable disk; safe set is empty")

    def _safe_set_nonempty(self) -> bool:
        # The ellipse may poke out of the disk (it does for the vendor tray);
        # safety only requires some disk point to lie outside the ellipse.
        r = self.safe_radius
        for t in np.linspace(0.0, 2.0 * math.pi, 128, endpoint=False):
            p = self.tray_center + r * np.array([math.cos(t), math.sin(t)])
            if float(p @ self.ellipse_a @ p + self.ellipse_b @ p + self.ellipse_c) > 0.0:
                return True
        return False

    @property
    def safe_radius(self) -> float:
        """Radius the base (and feet) must stay within."""
        return self.plate_radius - self.base_offset

    @property
    def manway(self) -> ManwayRect:
        return self.manways[0]

    def layer_height(self, layer: int) -> float:
        return layer * self.layer_gap

    @classmethod
    def from_manway(
        cls,
        manway: ManwayRect,
        plate_radius: float,
        base_offset: float,
        layer_count: int,
        layer_gap: float,
        tray_center,
        pad_long: float,
        pad_short: float,
        buffer_margin: float,
    ) -> "TrayWorld":
        rects = tuple(
            ManwayRect.from_center(
                manway.center, manway.theta, manway.long_side, manway.short_side, z=k * layer_gap
            )
            for k in range(layer_count)
        )
        return cls(
            plate_radius=plate_radius,
            base_offset=base_offset,
            layer_count=layer_count,
            layer_gap=layer_gap,
            manways=rects,
            tray_center=tray_center,
            pad_long=pad_long,
            pad_short=pad_short,
            buffer_margin=buffer_margin,
        )


@dataclass
class BaseState:
    """Planar base state: position, heading and current tray layer."""

    position: np.ndarray
    yaw: float
    layer: int

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(2)

    def copy(self) -> "BaseState":
        return BaseState(self.position.copy(), self.yaw, self.layer)


@dataclass(frozen=True)
class VelocityCommand:
    """Planar base velocity command plus yaw rate."""

    vx: float
    vy: float
    yaw_rate: float = 0.0

    @property
    def planar(self) -> np.ndarray:
        return np.array([self.vx, self.vy])

    def clamped(self, v_min: np.ndarray, v_max: np.ndarray) -> "VelocityCommand":
        return VelocityCommand(
            float(min(max(self.vx, v_min[0]), v_max[0])),
            float(min(max(self.vy, v_min[1]), v_max[1])),
            self.yaw_rate,
        )
