"""Simulated manway-vertex sensing, frame transforms, averaging, validation.

The sensor reports the four manway corners in its own frame with Gaussian
noise; collections are transformed to the global frame, averaged over a
configurable number of samples and validated against the known manway
dimensions before any planner consumes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import TraybotError
from .geometry import BaseState, ManwayRect, TrayWorld, wrap_angle

DEFAULT_SAMPLES = 100
DEFAULT_SIGMA = 0.01


class NoDataError(TraybotError):
    """Averaging requested with no collected samples."""


@dataclass(frozen=True)
class PerceptionFrame:
    """Sensor pose: rotation to global coordinates plus sensor position."""

    rotation: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        p = np.asarray(self.position, dtype=float).reshape(3)
        if float(np.abs(r.T @ r - np.eye(3)).max()) > 1e-9:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "position", p)

    @classmethod
    def from_base(cls, base: BaseState, floor_z: float, sensor_height: float = 0.35
                  ) -> "PerceptionFrame":
        c, s = math.cos(base.yaw), math.sin(base.yaw)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        p = np.array([base.position[0], base.position[1], floor_z + sensor_height])
        return cls(r, p)


def to_global(frame: PerceptionFrame, point) -> np.ndarray:
    """Sensor-frame point expressed in global coordinates."""
    v = np.asarray(point, dtype=float).reshape(3)
    return frame.rotation @ v + frame.position


def to_sensor(frame: PerceptionFrame, point) -> np.ndarray:
    v = np.asarray(point, dtype=float).reshape(3)
    return frame.rotation.T @ (v - frame.position)


@dataclass(frozen=True)
class VertexMeasurement:
    """One collection: the four manway corners in some frame."""

    vertices: np.ndarray
    sigma: float
    count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float).reshape(4, 3))
        if self.count < 1:
            raise ValueError("sample count must be at least 1")


def average_vertices(samples) -> np.ndarray:
    """Componentwise mean per vertex over the collected samples."""
    if not samples:
        raise NoDataError("no vertex samples collected")
    return np.mean([m.vertices for m in samples], axis=0)


@dataclass(frozen=True)
class ValidationTolerances:
    side: float = 0.02
    orthogonality_deg: float = 5.0
    coplanarity: float = 0.01


@dataclass(frozen=True)
class ValidationOutcome:
    accepted: bool
    rect: Optional[ManwayRect]
    failure: Optional[str]


def validate_manway(vertices, expected_long: float, expected_short: float,
                    tolerances: ValidationTolerances = ValidationTolerances()
                    ) -> ValidationOutcome:
    """Check measured corners against the known manway geometry.

    On acceptance the returned rectangle uses the measured centroid, side
    lengths and long-side direction; the centroid doubles as the tray-center
    estimate downstream.
    """
    v = np.asarray(vertices, dtype=float).reshape(4, 3)
    centroid = v.mean(axis=0)
    centered = v - centroid
    _, svals, vh = np.linalg.svd(centered)
    plane_normal = vh[2]
    dist = centered @ plane_normal
    if float(np.abs(dist).max()) > tolerances.coplanarity:
        return ValidationOutcome(False, None, "coplanarity")

    sides = np.array([v[(i + 1) % 4] - v[i] for i in range(4)])
    lengths = np.linalg.norm(sides, axis=1)
    pair_a = 0.5 * (lengths[0] + lengths[2])
    pair_b = 0.5 * (lengths[1] + lengths[3])
    long_meas, short_meas = max(pair_a, pair_b), min(pair_a, pair_b)
    if abs(long_meas - expected_long) > tolerances.side or \
            abs(short_meas - expected_short) > tolerances.side:
        return ValidationOutcome(False, None, "side-length")
    if abs(lengths[0] - lengths[2]) > tolerances.side or \
            abs(lengths[1] - lengths[3]) > tolerances.side:
        return ValidationOutcome(False, None, "side-length")

    for i in range(4):
        a, b = sides[i], sides[(i + 1) % 4]
        cosang = float(a @ b) / (lengths[i] * lengths[(i + 1) % 4])
        if abs(90.0 - math.degrees(math.acos(min(max(cosang, -1.0), 1.0)))) \
                > tolerances.orthogonality_deg:
            return ValidationOutcome(False, None, "orthogonality")

    long_vec = sides[0] if pair_a >= pair_b else sides[1]
    theta = math.atan2(long_vec[1], long_vec[0])
    # The long-side direction only fixes theta modulo pi; canonicalize.
    theta = wrap_angle(theta)
    if theta <= -math.pi / 2:
        theta += math.pi
    elif theta > math.pi / 2:
        theta -= math.pi
    rect = ManwayRect.from_center(
        centroid[:2], theta, long_meas, short_meas, z=float(centroid[2])
    )
    return ValidationOutcome(True, rect, None)


class SimulatedSensor:
    """Noisy vertex source tied to the true world; owns its RNG."""

    def __init__(self, world: TrayWorld, sigma: float = DEFAULT_SIGMA, seed: int = 0):
        self.world = world
        self.sigma = sigma
        self.rng = np.random.default_rng(seed)

    def measure(self, base: BaseState) -> tuple[PerceptionFrame, VertexMeasurement]:
        floor_z = self.world.layer_height(base.layer)
        frame = PerceptionFrame.from_base(base, floor_z)
        true_vertices = self.world.manways[base.layer].vertices
        noisy = np.array([
            to_sensor(frame, v) + self.rng.normal(0.0, self.sigma, 3)
            for v in true_vertices
        ])
        return frame, VertexMeasurement(noisy, self.sigma)


class PerceptionAggregator:
    """Buffers collections during search; averages and validates when full."""

    def __init__(self, expected_long: float, expected_short: float,
                 required_samples: int = DEFAULT_SAMPLES,
                 tolerances: ValidationTolerances = ValidationTolerances()):
        self.expected_long = expected_long
        self.expected_short = expected_short
        self.required = required_samples
        self.tolerances = tolerances
        self._global_samples: list[VertexMeasurement] = []

    def __len__(self) -> int:
        return len(self._global_samples)

    def reset(self) -> None:
        self._global_samples.clear()

    def add(self, frame: PerceptionFrame, measurement: VertexMeasurement
            ) -> Optional[ValidationOutcome]:
        """Add one collection; returns an outcome once enough samples arrived."""
        global_vertices = np.array([to_global(frame, v) for v in measurement.vertices])
        self._global_samples.append(VertexMeasurement(global_vertices, measurement.sigma))
        if len(self._global_samples) < self.required:
            return None
        mean_vertices = average_vertices(self._global_samples)
        outcome = validate_manway(
            mean_vertices, self.expected_long, self.expected_short, self.tolerances
        )
        self.reset()
        return outcome
