"""Scripted expert demonstrations for the built-in tasks.

A script is a list of :class:`Move` entries. Each move drives the end
effector to a pose given in a reference object's frame, read when the move
starts, along a minimum-jerk profile. Demos are executed in the surrogate
scene with a perfect controller and recorded step by step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import scene as sc
from .se3 import Pose, compose, quat_from_rotvec, quat_multiply, quat_conjugate, quat_to_rotvec, rotz, translate, yaw_of
from .segment import Demonstration, DemoStep

CLOSE, OPEN = sc.CLOSED, sc.OPEN


@dataclass(frozen=True)
class Move:
    ref: str | None  # None: hold the current command
    target: Pose | None
    steps: int
    gripper: int


def hold(steps, gripper):
    return Move(None, None, steps, gripper)


def min_jerk(s):
    return 10 * s**3 - 15 * s**4 + 6 * s**5


def interpolate(a, b, s):
    """Minimum-jerk blend between two poses at normalized time ``s``."""
    m = min_jerk(s)
    r = quat_to_rotvec(quat_multiply(quat_conjugate(a.orientation), b.orientation))
    return Pose(a.position + m * (b.position - a.position), quat_multiply(a.orientation, quat_from_rotvec(m * r)))


def _stack_script():
    return [
        Move("cubeA", translate(0, 0, 0.10), 30, OPEN),
        Move("cubeA", translate(0, 0, 0.0), 15, OPEN),
        hold(4, OPEN),
        hold(1, CLOSE),
        Move("cubeB", translate(0, 0, 0.045 + 0.08), 30, CLOSE),
        Move("cubeB", translate(0, 0, 0.045), 15, CLOSE),
        hold(4, CLOSE),
        hold(1, OPEN),
        hold(3, OPEN),
        Move("cubeB", translate(0, 0, 0.045 + 0.08), 10, OPEN),
    ]


def _square_script():
    handle = 0.055
    seat = 0.05 + 0.01  # peg half height + nut half height
    return [
        Move("nut", translate(handle, 0, 0.08), 30, OPEN),
        Move("nut", translate(handle, 0, 0.0), 15, OPEN),
        hold(4, OPEN),
        hold(1, CLOSE),
        Move("peg", translate(handle, 0, seat + 0.08), 30, CLOSE),
        Move("peg", translate(handle, 0, seat), 15, CLOSE),
        hold(4, CLOSE),
        hold(1, OPEN),
        hold(3, OPEN),
        Move("peg", translate(handle, 0, seat + 0.08), 10, OPEN),
    ]


def _mugcleanup_script():
    hx = -0.09
    pull = 0.15
    return [
        # open the drawer
        Move("drawer", translate(hx, 0, 0.08), 30, OPEN),
        Move("drawer", translate(hx, 0, 0.0), 15, OPEN),
        hold(4, OPEN),
        hold(1, CLOSE),
        Move("drawer", translate(hx - pull, 0, 0.0), 25, CLOSE),
        hold(2, CLOSE),
        hold(1, OPEN),
        # grasp the mug
        Move("drawer", translate(hx, 0, 0.08), 10, OPEN),
        Move("mug", translate(0, 0, 0.10), 30, OPEN),
        Move("mug", translate(0, 0, 0.0), 15, OPEN),
        hold(4, OPEN),
        hold(1, CLOSE),
        # place it in the drawer
        Move("drawer", translate(0, 0, 0.12), 30, CLOSE),
        Move("drawer", translate(0, 0, 0.0), 15, CLOSE),
        hold(4, CLOSE),
        hold(1, OPEN),
        # close the drawer
        hold(2, OPEN),
        Move("drawer", translate(0, 0, 0.10), 10, OPEN),
        Move("drawer", translate(hx, 0, 0.08), 20, OPEN),
        Move("drawer", translate(hx, 0, 0.0), 12, OPEN),
        hold(3, OPEN),
        hold(1, CLOSE),
        Move("drawer", translate(hx + pull, 0, 0.0), 25, CLOSE),
        hold(2, CLOSE),
        hold(1, OPEN),
        Move("drawer", translate(hx, 0, 0.08), 10, OPEN),
    ]


SCRIPTS = {
    "stack": _stack_script,
    "square-surrogate": _square_script,
    "mugcleanup-surrogate": _mugcleanup_script,
}


def run_script(spec, state, script, dt=0.05):
    """Execute ``script`` from ``state`` and return the recorded :class:`Demonstration`."""
    ctrl = sc.ControllerModel.perfect(dt)
    steps = []
    cmd = state.ee_pose
    for move in script:
        start = cmd
        target = cmd if move.ref is None else compose(state.object_poses[move.ref], move.target)
        for k in range(1, move.steps + 1):
            if move.ref is not None:
                cmd = interpolate(start, target, k / move.steps)
            steps.append(DemoStep(cmd, move.gripper, dict(state.object_poses), len(steps) * dt))
            state = sc.step(state, cmd, move.gripper, ctrl, spec)
    return Demonstration(tuple(steps), dt, spec.name), state


def _set_yaw(pose, yaw):
    return Pose(pose.position, rotz(yaw).orientation)


def synthesize(spec, variant, rng, n_demos=1, dt=0.05):
    """Scripted source demonstrations.

    With ``n_demos > 1`` every demo shares one sampled scene and demo ``k``
    turns the first subtask's reference object by ``k * pi / 2``.
    """
    if spec.name not in SCRIPTS:
        raise KeyError(f"no scripted expert for task {spec.name!r}")
    base = sc.sample_initial_state(spec, variant, rng)
    ref = spec.subtasks[0].reference_object
    yaw0 = yaw_of(base.object_poses[ref])
    demos = []
    for k in range(n_demos):
        poses = dict(base.object_poses)
        yaw = math.remainder(yaw0 + k * math.pi / 2, 2 * math.pi)
        poses[ref] = _set_yaw(poses[ref], yaw)
        state = sc.SceneState(base.ee_pose, sc.OPEN, poses, initial_poses=dict(poses))
        demo, final = run_script(spec, state, SCRIPTS[spec.name](), dt)
        if not sc.eval_predicate(spec.success["predicate"], spec.success.get("params", {}), final, spec):
            raise RuntimeError(f"scripted demo {k} for {spec.name} did not succeed")
        demos.append(demo)
    return demos

