"""Rigid-body pose algebra.

Poses are stored as a position (meters) and a unit quaternion ordered
``(w, x, y, z)``. Quaternions are renormalized and sign-canonicalized on
construction so that ``q`` and ``-q`` produce the same stored pose.

Serialization order everywhere is ``[px, py, pz, qw, qx, qy, qz]``.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "Pose",
    "PoseError",
    "compose",
    "inverse",
    "relative_target",
    "retarget",
    "pose_error",
    "quat_multiply",
    "quat_conjugate",
    "quat_to_matrix",
    "matrix_to_quat",
    "quat_from_rotvec",
    "quat_to_rotvec",
    "quat_from_axis_angle",
    "translate",
    "rotz",
    "yaw_of",
]


def _canonical_quat(q):
    # plain floats: this runs for every pose ever built, and numpy overhead dominates at size 4
    w, x, y, z = np.asarray(q, dtype=float).reshape(4).tolist()
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n == 0.0 or not math.isfinite(n):
        raise ValueError(f"invalid quaternion {q!r}")
    # already-unit input is kept bit-for-bit so that construction is idempotent
    if abs(n - 1.0) > 2.0**-50:
        w, x, y, z = w / n, x / n, y / n, z / n
    # w >= 0; when w == 0 the first non-zero component decides the sign
    for c in (w, x, y, z):
        if c > 0.0:
            break
        if c < 0.0:
            w, x, y, z = -w, -x, -y, -z
            break
    return np.array([w + 0.0, x + 0.0, y + 0.0, z + 0.0])  # + 0.0 drops negative zeros


def quat_multiply(a, b):
    """Hamilton product ``a * b`` for ``(w, x, y, z)`` quaternions."""
    aw, ax, ay, az = np.asarray(a, dtype=float).tolist()
    bw, bx, by, bz = np.asarray(b, dtype=float).tolist()
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def _rotate(q, v):
    # v' = v + 2 w (u x v) + 2 u x (u x v)
    # np.cross is slow for single 3-vectors, so the products are spelled out
    w, x, y, z = np.asarray(q, dtype=float).tolist()
    vx, vy, vz = np.asarray(v, dtype=float).tolist()
    tx = 2.0 * (y * vz - z * vy)
    ty = 2.0 * (z * vx - x * vz)
    tz = 2.0 * (x * vy - y * vx)
    return np.array(
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    )


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m):
    """Convert a 3x3 rotation matrix to a canonical quaternion (Shepperd's method)."""
    m = np.asarray(m, dtype=float)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    return _canonical_quat(q)


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    h = 0.5 * angle
    return _canonical_quat(np.concatenate([[math.cos(h)], math.sin(h) * axis]))


def quat_from_rotvec(r):
    """Exponential map from a rotation vector (axis * angle) to a quaternion."""
    r = np.asarray(r, dtype=float)
    theta = math.sqrt(float(r @ r))
    h = 0.5 * theta
    if theta < 1e-8:
        # sin(h)/theta to second order
        k = 0.5 - theta * theta / 48.0
    else:
        k = math.sin(h) / theta
    return np.concatenate([[math.cos(h)], k * r])


def quat_to_rotvec(q):
    """Logarithm map; returns the rotation vector with angle in ``[0, pi]``."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    v = q[1:]
    s = math.sqrt(float(v @ v))
    theta = 2.0 * math.atan2(s, q[0])
    if s < 1e-12:
        return 2.0 * v / q[0]
    return (theta / s) * v


class Pose:
    """Immutable rigid transform.

    Args:
        position: 3-vector in meters.
        orientation: quaternion ``(w, x, y, z)``; normalized and
            sign-canonicalized here.
    """

    __slots__ = ("position", "orientation")

    def __init__(self, position=(0.0, 0.0, 0.0), orientation=(1.0, 0.0, 0.0, 0.0)):
        p = np.array(position, dtype=float).reshape(3)
        if not all(math.isfinite(c) for c in p.tolist()):
            raise ValueError(f"non-finite position {p!r}")
        q = _canonical_quat(np.array(orientation, dtype=float).reshape(4))
        p.flags.writeable = False
        q.flags.writeable = False
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "orientation", q)

    def __setattr__(self, name, value):
        raise AttributeError("Pose is immutable")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_array(cls, a):
        """Build from ``[px, py, pz, qw, qx, qy, qz]``."""
        a = np.asarray(a, dtype=float)
        return cls(a[:3], a[3:7])

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(m[:3, 3], matrix_to_quat(m[:3, :3]))

    def to_array(self):
        return np.concatenate([self.position, self.orientation])

    def to_matrix(self):
        m = np.eye(4)
        m[:3, :3] = quat_to_matrix(self.orientation)
        m[:3, 3] = self.position
        return m

    @property
    def rotation_matrix(self):
        return quat_to_matrix(self.orientation)

    def apply(self, point):
        """Map a point from this pose's frame into the parent frame."""
        return self.position + _rotate(self.orientation, np.asarray(point, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(
            np.array_equal(self.position, other.position)
            and np.array_equal(self.orientation, other.orientation)
        )

    def __hash__(self):
        return hash((self.position.tobytes(), self.orientation.tobytes()))

    def __repr__(self):
        p = ", ".join(f"{v:.6g}" for v in self.position)
        q = ", ".join(f"{v:.6g}" for v in self.orientation)
        return f"Pose(position=[{p}], orientation=[{q}])"

    def __reduce__(self):
        return (Pose, (self.position.copy(), self.orientation.copy()))


class PoseError(NamedTuple):
    translational: float
    angular: float


def translate(x, y, z):
    return Pose((x, y, z))


def rotz(angle):
    return Pose((0.0, 0.0, 0.0), quat_from_axis_angle((0.0, 0.0, 1.0), angle))


def yaw_of(pose):
    """Heading about world z of the pose's x axis, in ``(-pi, pi]``."""
    w, x, y, z = pose.orientation
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def compose(a, b):
    """Return ``a * b``: the transform ``b`` expressed in ``a``'s frame, mapped to the world."""
    return Pose(
        a.position + _rotate(a.orientation, b.position),
        quat_multiply(a.orientation, b.orientation),
    )


def inverse(p):
    qc = quat_conjugate(p.orientation)
    return Pose(-_rotate(qc, p.position), qc)


def relative_target(obj_demo, target_demo):
    """Express a world-frame target in the object's frame: ``inv(obj) * target``."""
    return compose(inverse(obj_demo), target_demo)


def retarget(relative, obj_new):
    """Map an object-frame target back to the world through the object's new pose."""
    return compose(obj_new, relative)


def pose_error(a, b):
    """Translational (m) and geodesic angular (rad) distance between two poses.

    The angle is ``2 acos(|<qa, qb>|)`` evaluated through ``atan2`` of the
    relative rotation, which stays accurate near zero.
    """
    d = a.position - b.position
    trans = math.sqrt(float(d @ d))
    if np.array_equal(a.orientation, b.orientation):
        return PoseError(trans, 0.0)
    rel = quat_multiply(quat_conjugate(a.orientation), b.orientation)
    s = math.sqrt(float(rel[1:] @ rel[1:]))
    ang = 2.0 * math.atan2(s, abs(rel[0]))
    return PoseError(trans, min(max(ang, 0.0), math.pi))
