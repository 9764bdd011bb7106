"""Split demonstrations into object-centric subtask segments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import CLOSED, OPEN, PredicateLatch, observe


class PredicateNeverFires(ValueError):
    def __init__(self, index):
        super().__init__(f"completion predicate of subtask {index} never fires")
        self.index = index


class OutOfOrder(ValueError):
    def __init__(self, index):
        super().__init__(f"subtask {index + 1} completes before subtask {index}")
        self.index = index


class InvalidBoundary(ValueError):
    pass


@dataclass(frozen=True)
class DemoStep:
    """One control step of a demonstration.

    ``ee_pose`` and ``gripper`` are the commands issued at time ``t``;
    ``object_poses`` are observed at ``t`` before the command executes.
    """

    ee_pose: object
    gripper: int
    object_poses: dict
    t: float

    def __post_init__(self):
        if self.gripper not in (OPEN, CLOSED):
            raise ValueError(f"gripper must be 0 (open) or 1 (closed), got {self.gripper!r}")


@dataclass(frozen=True)
class Demonstration:
    steps: tuple
    dt: float
    task_id: str

    def __post_init__(self):
        if len(self.steps) < 2:
            raise ValueError("a demonstration needs at least two steps")
        t = np.array([s.t for s in self.steps])
        if np.any(np.diff(t) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.allclose(np.diff(t), self.dt, rtol=0, atol=1e-9):
            raise ValueError("timestamps must be uniformly spaced by dt")
        keys = set(self.steps[0].object_poses)
        if any(set(s.object_poses) != keys for s in self.steps):
            raise ValueError("every step must observe the same objects")

    def __len__(self):
        return len(self.steps)

    def ee_poses(self, start=0, end=None):
        return [s.ee_pose for s in self.steps[start:end]]


@dataclass(frozen=True)
class SubtaskSegment:
    subtask_index: int
    reference_object: str
    start: int
    end: int
    gripper_track: tuple

    @property
    def step_range(self):
        return (self.start, self.end)

    def __len__(self):
        return self.end - self.start


def pre_state(demo, t, spec):
    """Scene state just before command ``t``: the previous command has been reached."""
    prev = demo.steps[max(t - 1, 0)]
    return observe(spec, prev.ee_pose, prev.gripper, demo.steps[t].object_poses, demo.steps[0].object_poses, step=t)


def _check_objects(demo, spec):
    missing = set(spec.objects) - set(demo.steps[0].object_poses)
    if missing:
        raise ValueError(f"demonstration lacks objects {sorted(missing)}")


def firing_steps(demo, spec):
    """First step at which each subtask's completion predicate holds (``None`` if never)."""
    _check_objects(demo, spec)
    latches = [PredicateLatch(st.predicate, st.params, spec) for st in spec.subtasks]
    for t in range(len(demo)):
        state = pre_state(demo, t, spec)
        for latch in latches:
            latch.update(state)
    # state after the final command, approximated with the last observation
    last = demo.steps[-1]
    state = observe(spec, last.ee_pose, last.gripper, last.object_poses, demo.steps[0].object_poses, step=len(demo))
    for latch in latches:
        latch.update(state)
    return [latch.fired_at for latch in latches]


def _build(demo, spec, bounds):
    edges = [0, *bounds, len(demo)]
    grip = [s.gripper for s in demo.steps]
    refs = [st.reference_object for st in spec.subtasks] if spec is not None else [""] * (len(edges) - 1)
    return [
        SubtaskSegment(i, refs[i], edges[i], edges[i + 1], tuple(grip[edges[i] : edges[i + 1]]))
        for i in range(len(edges) - 1)
    ]


def segment_demo(demo, spec):
    """Cut ``demo`` where each subtask's completion predicate first fires.

    The firing step opens the next segment, so the command that completed a
    subtask is the last sample of that subtask's segment. The last segment
    runs to the end of the demonstration.
    """
    fired = firing_steps(demo, spec)
    for i, f in enumerate(fired):
        if f is None:
            raise PredicateNeverFires(i)
    for i in range(len(fired) - 1):
        if fired[i + 1] <= fired[i]:
            raise OutOfOrder(i)
    bounds = fired[:-1]
    if bounds and (bounds[0] <= 0 or bounds[-1] >= len(demo)):
        raise InvalidBoundary(f"predicate boundaries {bounds} leave an empty segment")
    return _build(demo, spec, bounds)


def annotate_manual(demo, boundaries, spec=None):
    """Segments from explicit, strictly increasing boundary indices in ``(0, len)``.

    Without ``spec`` the reference objects are left empty.
    """
    b = [int(x) for x in boundaries]
    if any(x <= 0 or x >= len(demo) for x in b):
        raise InvalidBoundary(f"boundaries {b} must lie in (0, {len(demo)})")
    if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
        raise InvalidBoundary(f"boundaries {b} must be strictly increasing")
    if spec is not None and len(b) + 1 != len(spec.subtasks):
        raise InvalidBoundary(f"{len(b)} boundaries for {len(spec.subtasks)} subtasks")
    return _build(demo, spec, b)


def parse_boundaries(text):
    """Parse a comma-separated index list such as ``"40,85"``."""
    text = text.strip()
    if not text:
        return []
    try:
        return [int(tok) for tok in text.split(",")]
    except ValueError as exc:
        raise InvalidBoundary(f"cannot parse boundaries {text!r}") from exc
