"""3D vector/sphere primitives and the angular measurement topology.

All lengths are micrometers.  The measurement topology places a reflecting
transmitter sphere, its surface emission point, and an absorbing receiver
sphere at a sweep angle ``alpha`` from the boresight axis.

Two placement conventions are supported:

* ``"tx_center"`` (default): the receiver center orbits the transmitter
  center at radius ``r_tx + d + r_rx``, so the surface-to-surface gap
  between transmitter body and receiver equals ``d`` at every angle.
* ``"emission"``: the receiver center orbits the emission point at radius
  ``d + r_rx``.  For large transmitters this collides with the transmitter
  body at wide angles and topology validation rejects it.

Both conventions coincide for a point transmitter (``r_tx = 0``).  The
convention in force is carried on the topology so downstream output can
record it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SURFACE_TOL = 1e-9  # µm, "on the surface" tolerance
_UNIT_TOL = 1e-12

PIVOT_TX_CENTER = "tx_center"
PIVOT_EMISSION = "emission"


class TopologyError(ValueError):
    """Raised when a measurement topology violates its invariants."""


@dataclass(frozen=True)
class Vector3:
    """Point or displacement in 3D, µm. Components must be finite."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for c in (self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"non-finite vector component: {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Vector3":
        x, y, z = (float(v) for v in a)
        return cls(x, y, z)

    def __add__(self, other: "Vector3") -> "Vector3":
        return Vector3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vector3") -> "Vector3":
        return Vector3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vector3":
        return Vector3(k * self.x, k * self.y, k * self.z)

    def dot(self, other: "Vector3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def distance_to(self, other: "Vector3") -> float:
        return (self - other).norm()

    def normalized(self) -> "Vector3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return self.scaled(1.0 / n)


@dataclass(frozen=True)
class Sphere:
    """Sphere given by center and radius (µm).  radius == 0 is a point."""

    center: Vector3
    radius: float

    def __post_init__(self):
        if not math.isfinite(self.radius) or self.radius < 0.0:
            raise ValueError(f"sphere radius must be finite and >= 0, got {self.radius}")

    def signed_surface_distance(self, point: Vector3) -> float:
        """Distance from the surface; negative inside, positive outside."""
        return point.distance_to(self.center) - self.radius

    def contains(self, point: Vector3, tol: float = 0.0) -> bool:
        return self.signed_surface_distance(point) <= tol


def _reference_normal(boresight: Vector3) -> Vector3:
    """Unit vector perpendicular to the boresight spanning the sweep plane.

    Prefers the projection of +y (so boresight +x sweeps in the x/y plane);
    falls back to the projection of +z when boresight is (anti)parallel to +y.
    """
    e_y = Vector3(0.0, 1.0, 0.0)
    cand = e_y - boresight.scaled(e_y.dot(boresight))
    if cand.norm() < 1e-6:
        e_z = Vector3(0.0, 0.0, 1.0)
        cand = e_z - boresight.scaled(e_z.dot(boresight))
    return cand.normalized()


def _check_unit(boresight: Vector3) -> None:
    if abs(boresight.norm() - 1.0) > _UNIT_TOL:
        raise ValueError(f"boresight must be a unit vector, |b| = {boresight.norm()!r}")


def place_receiver(
    emission_point: Vector3,
    boresight: Vector3,
    alpha_deg: float,
    d: float,
    r_rx: float,
    reference_normal: Vector3 | None = None,
) -> Sphere:
    """Place the absorbing receiver at sweep angle ``alpha_deg`` from boresight.

    The receiver center lies at distance ``d + r_rx`` from ``emission_point``
    in the plane spanned by the boresight and the reference normal, so the
    nearest receiver-surface point to ``emission_point`` is at distance ``d``.

    Parameters
    ----------
    emission_point : pivot of the sweep (µm)
    boresight : unit vector, the alpha = 0 direction
    alpha_deg : sweep angle, must be in [0, 180]
    d : pivot-to-receiver-surface distance, µm, > 0
    r_rx : receiver radius, µm, > 0
    reference_normal : optional explicit in-plane normal (unit, perpendicular
        to boresight); defaults to the +y-derived convention.
    """
    if not 0.0 <= alpha_deg <= 180.0:
        raise ValueError(f"alpha_deg must be in [0, 180], got {alpha_deg}")
    if d <= 0.0:
        raise ValueError(f"d must be > 0, got {d}")
    if r_rx <= 0.0:
        raise ValueError(f"r_rx must be > 0, got {r_rx}")
    _check_unit(boresight)
    normal = _reference_normal(boresight) if reference_normal is None else reference_normal
    alpha = math.radians(alpha_deg)
    direction = boresight.scaled(math.cos(alpha)) + normal.scaled(math.sin(alpha))
    center = emission_point + direction.scaled(d + r_rx)
    return Sphere(center, r_rx)


def place_transmitter(emission_point: Vector3, boresight: Vector3, r_tx: float) -> Sphere:
    """Place the transmitter body so the emission point faces alpha = 0.

    The body center sits at ``emission_point - r_tx * boresight``; for
    ``r_tx = 0`` this is the degenerate point transmitter at the emission
    point itself.
    """
    if r_tx < 0.0:
        raise ValueError(f"r_tx must be >= 0, got {r_tx}")
    _check_unit(boresight)
    return Sphere(emission_point - boresight.scaled(r_tx), r_tx)


def reflect_off_sphere(prev: Vector3, proposed: Vector3, body: Sphere) -> Vector3:
    """Resolve a proposed step against a reflecting sphere.

    Points outside the body pass through unchanged.  A penetrating point is
    reflected radially about the surface (new radial distance
    ``2 * radius - penetration distance``, same direction from the center).
    If the proposal coincides with the center or the correction still lands
    inside, the step is rolled back to ``prev``.
    """
    radial = proposed - body.center
    dist = radial.norm()
    if dist >= body.radius:
        return proposed
    if dist < 1e-12:
        return prev
    corrected = body.center + radial.scaled((2.0 * body.radius - dist) / dist)
    if corrected.distance_to(body.center) < body.radius:
        return prev
    return corrected


@dataclass(frozen=True)
class Topology:
    """One measurement placement: emitter body, emission point, receiver.

    ``gap`` is the designed surface distance d (µm); ``pivot`` records which
    placement convention produced the receiver position.
    """

    emission_point: Vector3
    tx_body: Sphere
    rx: Sphere
    boresight_axis: Vector3
    angle_deg: float
    gap: float
    pivot: str = PIVOT_TX_CENTER

    def validate(self) -> None:
        """Raise :class:`TopologyError` on any violated invariant."""
        problems = []
        if not 0.0 <= self.angle_deg <= 180.0:
            problems.append(f"angle_deg {self.angle_deg} outside [0, 180]")
        if abs(self.boresight_axis.norm() - 1.0) > _UNIT_TOL:
            problems.append("boresight_axis is not a unit vector")
        if self.gap <= 0.0:
            problems.append(f"gap {self.gap} must be > 0")
        if self.rx.radius <= 0.0:
            problems.append("receiver radius must be > 0")
        r_tx = self.tx_body.radius
        emission_offset = self.emission_point.distance_to(self.tx_body.center)
        if r_tx > 0.0:
            if abs(emission_offset - r_tx) > SURFACE_TOL:
                problems.append(
                    f"emission point is {emission_offset:.12g} µm from the transmitter "
                    f"center, expected on the surface at {r_tx:.12g}"
                )
        elif emission_offset > SURFACE_TOL:
            problems.append("point transmitter must coincide with the emission point")
        center_gap = self.tx_body.center.distance_to(self.rx.center)
        if center_gap <= r_tx + self.rx.radius:
            problems.append(
                f"transmitter and receiver overlap: center distance {center_gap:.12g} "
                f"<= {r_tx + self.rx.radius:.12g}"
            )
        if problems:
            raise TopologyError("; ".join(problems))


def measurement_topology(
    d: float,
    r_tx: float,
    r_rx: float,
    alpha_deg: float,
    emission_point: Vector3 = Vector3(0.0, 0.0, 0.0),
    boresight: Vector3 = Vector3(1.0, 0.0, 0.0),
    pivot: str = PIVOT_TX_CENTER,
    reference_normal: Vector3 | None = None,
) -> Topology:
    """Build the full measurement topology for one sweep angle.

    Under the default ``tx_center`` pivot the receiver orbits the transmitter
    center at radius ``r_tx + d + r_rx`` (surface gap d at every angle).
    Under the ``emission`` pivot it orbits the emission point at radius
    ``d + r_rx``, which reproduces :func:`place_receiver` verbatim but can
    collide with large transmitter bodies at wide angles.
    """
    tx_body = place_transmitter(emission_point, boresight, r_tx)
    if pivot == PIVOT_TX_CENTER:
        rx = place_receiver(
            tx_body.center, boresight, alpha_deg, r_tx + d, r_rx, reference_normal
        )
    elif pivot == PIVOT_EMISSION:
        rx = place_receiver(emission_point, boresight, alpha_deg, d, r_rx, reference_normal)
    else:
        raise ValueError(f"unknown pivot convention {pivot!r}")
    topo = Topology(
        emission_point=emission_point,
        tx_body=tx_body,
        rx=rx,
        boresight_axis=boresight,
        angle_deg=float(alpha_deg),
        gap=float(d),
        pivot=pivot,
    )
    topo.validate()
    return topo
