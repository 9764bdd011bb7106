"""Built-in task specifications for the kinematic surrogate.

End-effector orientation is a top-down grasp frame: identity means the
fingers point down with the gripper's x axis along world x, so yaw about
world z is the only rotation the scripted experts use.
"""

import math

from .scene import TaskSpec, load_task_spec

PI = math.pi

STACK = {
    "name": "stack",
    "objects": {
        "cubeA": {"half_extents": [0.02, 0.02, 0.02]},
        "cubeB": {"half_extents": [0.025, 0.025, 0.025]},
    },
    "subtasks": [
        {"name": "grasp", "reference_object": "cubeA", "predicate": "grasped", "params": {"obj": "cubeA"}},
        {
            "name": "place",
            "reference_object": "cubeB",
            "predicate": "placed_on",
            "params": {"obj": "cubeA", "base": "cubeB", "xy_tol": 0.02, "z_tol": 0.01},
        },
    ],
    # cubes are 4-fold symmetric, so a random top-down rotation is a yaw in [-pi/4, pi/4]
    "reset_distributions": {
        "D0": {
            "cubeA": {"center": [0.0, 0.0, 0.02], "half_size": [0.08, 0.08, 0.0], "yaw": [-PI / 4, PI / 4]},
            "cubeB": {"center": [0.0, 0.0, 0.025], "half_size": [0.08, 0.08, 0.0], "yaw": [-PI / 4, PI / 4]},
        },
        "D1": {
            "cubeA": {"center": [0.0, 0.0, 0.02], "half_size": [0.2, 0.2, 0.0], "yaw": [-PI / 4, PI / 4]},
            "cubeB": {"center": [0.0, 0.0, 0.025], "half_size": [0.2, 0.2, 0.0], "yaw": [-PI / 4, PI / 4]},
        },
    },
    "success": {
        "predicate": "placed_on",
        "params": {"obj": "cubeA", "base": "cubeB", "xy_tol": 0.02, "z_tol": 0.01},
    },
    "horizon": 400,
    "home_pose": [0.0, 0.0, 0.25, 1.0, 0.0, 0.0, 0.0],
    "grasp_radius": 0.01,
}

SQUARE = {
    "name": "square-surrogate",
    "objects": {
        # nut body plus handle; the grasp point sits on the handle
        "nut": {"half_extents": [0.07, 0.03, 0.01], "grasp_offset": [0.055, 0.0, 0.0]},
        "peg": {"half_extents": [0.01, 0.01, 0.05]},
    },
    "subtasks": [
        {"name": "grasp", "reference_object": "nut", "predicate": "grasped", "params": {"obj": "nut"}},
        {
            "name": "place",
            "reference_object": "peg",
            "predicate": "placed_on",
            "params": {"obj": "nut", "base": "peg", "xy_tol": 0.005, "z_tol": 0.01},
        },
    ],
    "reset_distributions": {
        "D0": {
            "nut": {"center": [-0.1, -0.05, 0.01], "half_size": [0.0025, 0.0575, 0.0], "yaw": [-PI, PI]},
            "peg": {"center": [0.12, 0.1, 0.05]},
        },
        "D1": {
            "nut": {"center": [-0.12, -0.05, 0.01], "half_size": [0.115, 0.255, 0.0], "yaw": [-PI, PI]},
            "peg": {"center": [0.15, 0.1, 0.05], "half_size": [0.2, 0.2, 0.0]},
        },
        "D2": {
            "nut": {"center": [-0.1, 0.0, 0.01], "half_size": [0.25, 0.25, 0.0], "yaw": [-PI, PI]},
            "peg": {"center": [0.1, 0.0, 0.05], "half_size": [0.25, 0.25, 0.0], "yaw": [-PI, PI]},
        },
    },
    "success": {
        "predicate": "placed_on",
        "params": {"obj": "nut", "base": "peg", "xy_tol": 0.005, "z_tol": 0.01},
    },
    "horizon": 400,
    "home_pose": [0.0, 0.0, 0.25, 1.0, 0.0, 0.0, 0.0],
    "grasp_radius": 0.01,
}

_MUG_IN_DRAWER = {
    "predicate": "in_region",
    "params": {"obj": "mug", "frame": "drawer", "center": [0.0, 0.0, 0.0], "half_size": [0.06, 0.08, 0.05]},
}
_DRAWER_SHUT = {"predicate": "pulled", "params": {"obj": "drawer", "axis": [-1.0, 0.0, 0.0], "max": 0.02}}

MUGCLEANUP = {
    "name": "mugcleanup-surrogate",
    "objects": {
        # the handle sits just outside the drawer's front (-x) face
        "drawer": {"half_extents": [0.08, 0.1, 0.04], "grasp_offset": [-0.09, 0.0, 0.0], "container": True},
        "mug": {"half_extents": [0.03, 0.03, 0.04]},
    },
    "subtasks": [
        {
            "name": "open",
            "reference_object": "drawer",
            "predicate": "pulled",
            "params": {"obj": "drawer", "axis": [-1.0, 0.0, 0.0], "min": 0.12},
        },
        {"name": "grasp", "reference_object": "mug", "predicate": "grasped", "params": {"obj": "mug"}},
        {"name": "place", "reference_object": "drawer", **_MUG_IN_DRAWER},
        {"name": "close", "reference_object": "drawer", "predicate": "all", "params": {"terms": [_MUG_IN_DRAWER, _DRAWER_SHUT]}},
    ],
    "reset_distributions": {
        "D0": {
            "drawer": {"center": [0.2, 0.0, 0.04]},
            "mug": {"center": [-0.1, 0.2, 0.04], "half_size": [0.15, 0.075, 0.0], "yaw": [-PI, PI]},
        },
        # The mug box is ambiguous in the source description; the 0.4 x 0.15 m reading is used.
        "D1": {
            "drawer": {"center": [0.2, 0.0, 0.04], "half_size": [0.1, 0.05, 0.0], "yaw": [-PI / 6, PI / 6]},
            "mug": {"center": [-0.1, 0.22, 0.04], "half_size": [0.2, 0.075, 0.0], "yaw": [-PI, PI]},
        },
    },
    "success": {"predicate": "all", "params": {"terms": [_MUG_IN_DRAWER, _DRAWER_SHUT]}},
    "horizon": 500,
    "home_pose": [0.0, 0.0, 0.25, 1.0, 0.0, 0.0, 0.0],
    "grasp_radius": 0.01,
}

BUILTIN = {d["name"]: d for d in (STACK, SQUARE, MUGCLEANUP)}


def get_task(name_or_path):
    """Resolve a built-in task name or a path to a JSON spec file."""
    if name_or_path in BUILTIN:
        return TaskSpec.from_dict(BUILTIN[name_or_path])
    if str(name_or_path).endswith(".json"):
        return load_task_spec(name_or_path)
    raise KeyError(f"unknown task {name_or_path!r}; available: {', '.join(sorted(BUILTIN))}")
