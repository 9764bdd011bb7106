"""Kinematic surrogate of a tabletop manipulation scene.

There are no contact dynamics. The end effector follows commanded poses
through a first-order lag, closing the gripper attaches the nearest object
whose grasp point lies within ``grasp_radius``, and attached objects move
rigidly with the end effector. Objects released inside a container object
are carried along when the container moves.

The table top is the plane ``z = 0``; an object resting on it has its
center at ``z = half_extents[2]``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .se3 import (
    Pose,
    compose,
    inverse,
    quat_from_rotvec,
    quat_multiply,
    quat_conjugate,
    quat_to_rotvec,
    rotz,
    yaw_of,
)

OPEN = 0
CLOSED = 1


class CrowdedScene(RuntimeError):
    """No overlap-free placement found within the rejection budget."""


class HorizonExceeded(RuntimeError):
    """A step was requested past the task horizon."""


class UnknownPredicate(KeyError):
    """Predicate id not recognized."""


@dataclass(frozen=True)
class ObjectGeometry:
    half_extents: tuple
    grasp_offset: tuple = (0.0, 0.0, 0.0)
    container: bool = False


@dataclass(frozen=True)
class Region:
    """Axis-aligned placement box (meters) plus a yaw interval (radians)."""

    center: tuple
    half_size: tuple = (0.0, 0.0, 0.0)
    yaw: tuple = (0.0, 0.0)

    def __post_init__(self):
        if any(h < 0 for h in self.half_size):
            raise ValueError("region extents must be non-negative")
        if self.yaw[0] > self.yaw[1]:
            raise ValueError("yaw range must be ordered")


@dataclass(frozen=True)
class Subtask:
    name: str
    reference_object: str
    predicate: str
    params: dict


@dataclass(frozen=True)
class TaskSpec:
    name: str
    objects: dict
    subtasks: tuple
    reset_distributions: dict
    success: dict
    horizon: int
    home_pose: Pose = field(default_factory=lambda: Pose((0.0, 0.0, 0.25)))
    grasp_radius: float = 0.01

    def __post_init__(self):
        if not self.subtasks:
            raise ValueError("task needs at least one subtask")
        for st in self.subtasks:
            if st.reference_object not in self.objects:
                raise ValueError(f"subtask {st.name!r} references unknown object {st.reference_object!r}")
        for variant, regions in self.reset_distributions.items():
            missing = set(self.objects) - set(regions)
            if missing:
                raise ValueError(f"variant {variant!r} has no region for {sorted(missing)}")

    @property
    def object_ids(self):
        return list(self.objects)

    def to_dict(self):
        return {
            "name": self.name,
            "objects": {
                k: {
                    "half_extents": list(g.half_extents),
                    "grasp_offset": list(g.grasp_offset),
                    "container": g.container,
                }
                for k, g in self.objects.items()
            },
            "subtasks": [
                {
                    "name": s.name,
                    "reference_object": s.reference_object,
                    "predicate": s.predicate,
                    "params": s.params,
                }
                for s in self.subtasks
            ],
            "reset_distributions": {
                v: {
                    k: {"center": list(r.center), "half_size": list(r.half_size), "yaw": list(r.yaw)}
                    for k, r in regions.items()
                }
                for v, regions in self.reset_distributions.items()
            },
            "success": self.success,
            "horizon": self.horizon,
            "home_pose": self.home_pose.to_array().tolist(),
            "grasp_radius": self.grasp_radius,
        }

    @classmethod
    def from_dict(cls, d):
        objects = {
            k: ObjectGeometry(
                tuple(g["half_extents"]),
                tuple(g.get("grasp_offset", (0.0, 0.0, 0.0))),
                bool(g.get("container", False)),
            )
            for k, g in d["objects"].items()
        }
        subtasks = tuple(
            Subtask(s["name"], s["reference_object"], s["predicate"], dict(s.get("params", {})))
            for s in d["subtasks"]
        )
        dists = {
            v: {
                k: Region(tuple(r["center"]), tuple(r.get("half_size", (0, 0, 0))), tuple(r.get("yaw", (0, 0))))
                for k, r in regions.items()
            }
            for v, regions in d["reset_distributions"].items()
        }
        kw = {}
        if "home_pose" in d:
            kw["home_pose"] = Pose.from_array(d["home_pose"])
        if "grasp_radius" in d:
            kw["grasp_radius"] = float(d["grasp_radius"])
        return cls(d["name"], objects, subtasks, dists, dict(d["success"]), int(d["horizon"]), **kw)

    def digest(self):
        """SHA-256 over the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).digest()


def load_task_spec(path):
    with open(path) as fh:
        return TaskSpec.from_dict(json.load(fh))


def save_task_spec(spec, path):
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class SceneState:
    ee_pose: Pose
    gripper: int
    object_poses: dict
    attached: str | None = None
    attach_offset: Pose | None = None
    # child -> (container, offset in container frame)
    nested: dict = field(default_factory=dict)
    initial_poses: dict = field(default_factory=dict)
    step: int = 0


@dataclass(frozen=True)
class ControllerModel:
    """First-order lag tracking with per-step caps; ``gain=inf`` tracks perfectly."""

    gain: float = 20.0
    max_translation: float = 0.1
    max_rotation: float = 0.5
    dt: float = 0.05

    def __post_init__(self):
        if not (self.gain > 0 and self.max_translation > 0 and self.max_rotation > 0 and self.dt > 0):
            raise ValueError("controller parameters must be positive")

    @classmethod
    def perfect(cls, dt=0.05):
        return cls(gain=math.inf, max_translation=math.inf, max_rotation=math.inf, dt=dt)

    @property
    def blend(self):
        return 1.0 - math.exp(-self.gain * self.dt)


@dataclass(frozen=True)
class PerturbationSchedule:
    target_object: str
    subtask_index: int = 0
    fraction: float = 0.25
    half_size: tuple = (0.05, 0.05, 0.0)
    yaw: tuple = (0.0, 0.0)
    max_events: int = 1

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("trigger fraction must lie in [0, 1]")
        if any(h < 0 or not math.isfinite(h) for h in self.half_size):
            raise ValueError("displacement region must be bounded")

    def trigger_step(self, segment_len):
        return min(int(self.fraction * (segment_len - 1)), segment_len - 1)


@dataclass(frozen=True)
class PerturbationEvent:
    step: int
    target_object: str
    delta: tuple  # (dx, dy, dz, dyaw)
    suppressed: bool = False


def _resting_aabb(geom, pose):
    c, s = abs(math.cos(yaw_of(pose))), abs(math.sin(yaw_of(pose)))
    hx, hy, hz = geom.half_extents
    return np.array([c * hx + s * hy, s * hx + c * hy, hz])


def _overlap(spec, a, pa, b, pb):
    ea = _resting_aabb(spec.objects[a], pa)
    eb = _resting_aabb(spec.objects[b], pb)
    d = np.abs(pa.position - pb.position)
    return bool(np.all(d < ea + eb))


def sample_initial_state(spec, variant, rng, max_attempts=1000):
    """Place every object uniformly in its variant region without overlaps.

    The end effector starts at ``spec.home_pose`` with the gripper open.
    """
    if variant not in spec.reset_distributions:
        raise KeyError(f"unknown variant {variant!r}; have {sorted(spec.reset_distributions)}")
    regions = spec.reset_distributions[variant]
    ids = spec.object_ids
    for _ in range(max_attempts):
        poses = {}
        for oid in ids:
            r = regions[oid]
            h = np.asarray(r.half_size, dtype=float)
            pos = np.asarray(r.center, dtype=float) + rng.uniform(-h, h)
            yaw = rng.uniform(r.yaw[0], r.yaw[1])
            poses[oid] = Pose(pos, rotz(yaw).orientation)
        if not any(
            _overlap(spec, a, poses[a], b, poses[b]) for i, a in enumerate(ids) for b in ids[i + 1 :]
        ):
            return SceneState(spec.home_pose, OPEN, poses, initial_poses=dict(poses))
    raise CrowdedScene(f"no valid placement for {spec.name}/{variant} after {max_attempts} attempts")


def grasp_point(spec, oid, pose):
    return pose.apply(spec.objects[oid].grasp_offset)


def _nearest_graspable(spec, ee_pose, object_poses):
    best, best_d = None, math.inf
    for oid in spec.object_ids:
        d = float(np.linalg.norm(grasp_point(spec, oid, object_poses[oid]) - ee_pose.position))
        if d <= spec.grasp_radius and d < best_d:
            best, best_d = oid, d
    return best


def _containing(spec, oid, object_poses):
    p = object_poses[oid].position
    for cid in spec.object_ids:
        if cid == oid or not spec.objects[cid].container:
            continue
        local = inverse(object_poses[cid]).apply(p)
        if np.all(np.abs(local) <= np.asarray(spec.objects[cid].half_extents) + 1e-9):
            return cid
    return None


def _carry_nested(object_poses, nested, moved):
    """Move every object nested (transitively) in one of ``moved``."""
    frontier = set(moved)
    while frontier:
        nxt = set()
        for child, (parent, offset) in nested.items():
            if parent in frontier:
                object_poses[child] = compose(object_poses[parent], offset)
                nxt.add(child)
        frontier = nxt


def is_carried(state, oid):
    """True when ``oid`` is attached to the gripper, directly or through containers."""
    seen = set()
    while oid is not None and oid not in seen:
        if oid == state.attached:
            return True
        seen.add(oid)
        oid = state.nested.get(oid, (None,))[0]
    return False


def observe(spec, ee_pose, gripper, object_poses, initial_poses, step=0):
    """Rebuild a :class:`SceneState` from observations, inferring the attachment.

    With the gripper closed the object whose grasp point is nearest the end
    effector (within ``grasp_radius``) is taken to be held.
    """
    attached = offset = None
    if gripper == CLOSED:
        attached = _nearest_graspable(spec, ee_pose, object_poses)
        if attached is not None:
            offset = compose(inverse(ee_pose), object_poses[attached])
    return SceneState(ee_pose, gripper, dict(object_poses), attached, offset, {}, dict(initial_poses), step)


def _track(ee, cmd, controller):
    a = controller.blend
    dp = cmd.position - ee.position
    move = a * dp
    n = float(np.linalg.norm(move))
    capped = False
    if n > controller.max_translation:
        move *= controller.max_translation / n
        capped = True
    rel = quat_multiply(quat_conjugate(ee.orientation), cmd.orientation)
    r = a * quat_to_rotvec(rel)
    rn = float(np.linalg.norm(r))
    if rn > controller.max_rotation:
        r *= controller.max_rotation / rn
        capped = True
    if a == 1.0 and not capped:
        return cmd
    return Pose(ee.position + move, quat_multiply(ee.orientation, quat_from_rotvec(r)))


def step(state, command, gripper, controller, spec):
    """Advance the scene by one control period.

    The end effector (and anything it carries) moves first; the gripper
    command then takes effect at the new pose.
    """
    if state.step >= spec.horizon:
        raise HorizonExceeded(f"step {state.step} at horizon {spec.horizon}")
    if command == state.ee_pose:
        ee = state.ee_pose
    else:
        ee = _track(state.ee_pose, command, controller)
    poses = dict(state.object_poses)
    nested = dict(state.nested)
    attached, offset = state.attached, state.attach_offset
    if attached is not None and ee is not state.ee_pose:
        poses[attached] = compose(ee, offset)
        _carry_nested(poses, nested, {attached})

    if gripper == CLOSED and state.gripper == OPEN:
        attached = _nearest_graspable(spec, ee, poses)
        if attached is not None:
            offset = compose(inverse(ee), poses[attached])
            nested.pop(attached, None)
    elif gripper == OPEN and attached is not None:
        released = attached
        attached = offset = None
        cid = _containing(spec, released, poses)
        if cid is not None:
            nested[released] = (cid, compose(inverse(poses[cid]), poses[released]))
    return SceneState(ee, int(gripper), poses, attached, offset, nested, state.initial_poses, state.step + 1)


def apply_perturbation(state, schedule, rng):
    """Displace the schedule's target by a random offset and yaw.

    Always draws from ``rng`` so the random stream does not depend on the
    outcome. Returns ``(new_state, event)``; a carried target is left alone
    and the event is marked suppressed.
    """
    h = np.asarray(schedule.half_size, dtype=float)
    d = rng.uniform(-h, h)
    dyaw = rng.uniform(schedule.yaw[0], schedule.yaw[1])
    oid = schedule.target_object
    delta = (float(d[0]), float(d[1]), float(d[2]), float(dyaw))
    if is_carried(state, oid):
        return state, PerturbationEvent(state.step, oid, delta, suppressed=True)
    poses = dict(state.object_poses)
    old = poses[oid]
    poses[oid] = Pose(old.position + d, quat_multiply(rotz(dyaw).orientation, old.orientation))
    nested = dict(state.nested)
    nested.pop(oid, None)
    _carry_nested(poses, nested, {oid})
    return replace(state, object_poses=poses, nested=nested), PerturbationEvent(state.step, oid, delta)


# --- predicates -----------------------------------------------------------

def _released(state, oid):
    return not is_carried(state, oid)


def _p_grasped(spec, state, obj):
    return state.attached == obj


def _p_placed_on(spec, state, obj, base, xy_tol=0.02, z_tol=0.01):
    if not _released(state, obj):
        return False
    po = state.object_poses[obj].position
    pb = state.object_poses[base].position
    stack_h = spec.objects[base].half_extents[2] + spec.objects[obj].half_extents[2]
    return bool(np.hypot(*(po[:2] - pb[:2])) <= xy_tol and abs(po[2] - pb[2] - stack_h) <= z_tol)


def _p_in_region(spec, state, obj, center, half_size, frame=None):
    if not _released(state, obj):
        return False
    p = state.object_poses[obj].position
    if frame is not None:
        p = inverse(state.object_poses[frame]).apply(p)
    return bool(np.all(np.abs(p - np.asarray(center)) <= np.asarray(half_size)))


def _p_lifted(spec, state, obj, height):
    return bool(state.object_poses[obj].position[2] - spec.objects[obj].half_extents[2] >= height)


def _p_pulled(spec, state, obj, axis, min=None, max=None):  # noqa: A002
    if not _released(state, obj):
        return False
    p0 = state.initial_poses[obj]
    axis_w = p0.apply(axis) - p0.position
    d = float((state.object_poses[obj].position - p0.position) @ axis_w)
    return (min is None or d >= min) and (max is None or d <= max)


def _p_all(spec, state, terms):
    return all(eval_predicate(t["predicate"], t.get("params", {}), state, spec) for t in terms)


PREDICATES = {
    "grasped": _p_grasped,
    "placed_on": _p_placed_on,
    "in_region": _p_in_region,
    "lifted": _p_lifted,
    "pulled": _p_pulled,
    "all": _p_all,
}


def eval_predicate(pid, params, state, spec):
    """Evaluate a geometric predicate on ``state``.

    ``placed_on``, ``in_region`` and ``pulled`` only hold once the object has
    been let go.
    """
    try:
        fn = PREDICATES[pid]
    except KeyError:
        raise UnknownPredicate(pid) from None
    return fn(spec, state, **params)


class PredicateLatch:
    """Holds a predicate true once it has fired."""

    def __init__(self, pid, params, spec):
        if pid not in PREDICATES:
            raise UnknownPredicate(pid)
        self.pid, self.params, self.spec = pid, params, spec
        self.fired_at = None

    def update(self, state):
        if self.fired_at is None and eval_predicate(self.pid, self.params, state, self.spec):
            self.fired_at = state.step
        return self.fired_at is not None

    @property
    def value(self):
        return self.fired_at is not None
