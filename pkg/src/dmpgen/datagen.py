"""Dataset generation: amplify a few source demos into many successful trials.

One trial samples a scene, picks a source demo, and replays each of its
subtask segments as a DMP whose goal is re-derived from the live pose of the
segment's reference object at every control step. Trials that end with the
task's success predicate satisfied are kept.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

import numpy as np

from . import dmp
from . import scene as sc
from .se3 import Pose, compose, inverse, relative_target, retarget, yaw_of
from .segment import Demonstration, DemoStep, segment_demo


class TargetUnreachable(RuntimeError):
    """``max_attempts`` trials ran without reaching the success target.

    The partial dataset is available as ``.dataset``.
    """

    def __init__(self, dataset):
        super().__init__(
            f"{len(dataset.records)} successes after {dataset.attempts} attempts; target not reached"
        )
        self.dataset = dataset


class SourceDataset:
    """Source demos of one task with their segmentations.

    DMP fits and demo-side relative targets are cached per (demo, segment).
    """

    def __init__(self, spec, demos, segments=None):
        if len(demos) < 1:
            raise ValueError("need at least one source demonstration")
        self.spec = spec
        self.demos = list(demos)
        self.segments = [list(s) for s in segments] if segments is not None else [segment_demo(d, spec) for d in demos]
        if len(self.segments) != len(self.demos):
            raise ValueError("one segmentation per demo required")
        self._fits = {}

    def __len__(self):
        return len(self.demos)

    def __getstate__(self):
        return {"spec": self.spec, "demos": self.demos, "segments": self.segments, "_fits": {}}

    def fit(self, demo_idx, seg_idx, config):
        key = (demo_idx, seg_idx, config)
        if key not in self._fits:
            seg = self.segments[demo_idx][seg_idx]
            poses = self.demos[demo_idx].ee_poses(seg.start, seg.end)
            self._fits[key] = dmp.fit_segment(poses, config)
        return self._fits[key]

    def relative(self, demo_idx, seg_idx):
        """End-effector pose at the segment's last command, in the reference object's frame at segment start."""
        seg = self.segments[demo_idx][seg_idx]
        demo = self.demos[demo_idx]
        obj = demo.steps[seg.start].object_poses[seg.reference_object]
        return relative_target(obj, demo.steps[seg.end - 1].ee_pose)


def select_demo(src, state, strategy="first"):
    """Pick the source demo for a new scene.

    ``"first"`` always returns 0. ``"orientation"`` returns the demo whose
    first-subtask reference object has the yaw closest to the new scene's
    (wrapped difference); ties go to the lower index.
    """
    if strategy == "first" or len(src) == 1:
        return 0
    if strategy != "orientation":
        raise ValueError(f"unknown selection strategy {strategy!r}")
    ref = src.spec.subtasks[0].reference_object
    yaw_new = yaw_of(state.object_poses[ref])
    best, best_d = 0, math.inf
    for i, demo in enumerate(src.demos):
        d = abs(math.remainder(yaw_new - yaw_of(demo.steps[0].object_poses[ref]), 2 * math.pi))
        if d < best_d - 1e-12:
            best, best_d = i, d
    return best


@dataclass
class GenerationRecord:
    """Full log of one trial.

    Row ``k`` of the state arrays is the scene just before command ``k``
    (after any perturbation applied at that step); the extra last row is the
    final scene. Command-side arrays have one row per control step.
    """

    seed: int
    variant: str
    selected_demo: int
    object_ids: list
    ee: np.ndarray  # (n+1, 7)
    gripper: np.ndarray  # (n+1,)
    attached: np.ndarray  # (n+1,) object index or -1
    objects: np.ndarray  # (n+1, n_obj, 7)
    command: np.ndarray  # (n, 7)
    command_gripper: np.ndarray  # (n,)
    goal: np.ndarray  # (n, 7)
    phase: np.ndarray  # (n,)
    segment: np.ndarray  # (n,)
    events: list = field(default_factory=list)
    completion_steps: list = field(default_factory=list)
    success: bool = False
    reason: str = ""

    @property
    def n_steps(self):
        return len(self.command)

    @property
    def outcome(self):
        return "success" if self.success else f"failure({self.reason})"

    def state_at(self, k, spec):
        """Rebuild the :class:`~dmpgen.scene.SceneState` of row ``k``, attachment included."""
        ids = self.object_ids
        poses = {oid: Pose.from_array(self.objects[k, j]) for j, oid in enumerate(ids)}
        init = {oid: Pose.from_array(self.objects[0, j]) for j, oid in enumerate(ids)}
        ee = Pose.from_array(self.ee[k])
        state = sc.SceneState(ee, int(self.gripper[k]), poses, None, None, {}, init, k)
        a = int(self.attached[k])
        if a >= 0:
            state = replace(state, attached=ids[a], attach_offset=compose(inverse(ee), poses[ids[a]]))
        return state

    def to_demonstration(self, dt=0.05, task_id=""):
        steps = tuple(
            DemoStep(
                Pose.from_array(self.command[k]),
                int(self.command_gripper[k]),
                {oid: Pose.from_array(self.objects[k, j]) for j, oid in enumerate(self.object_ids)},
                k * dt,
            )
            for k in range(self.n_steps)
        )
        return Demonstration(steps, dt, task_id)

    def same_as(self, other):
        """Field-by-field comparison, bit-exact on arrays."""
        if not isinstance(other, GenerationRecord):
            return False
        for name in self.__dataclass_fields__:
            a, b = getattr(self, name), getattr(other, name)
            if isinstance(a, np.ndarray):
                if a.dtype != b.dtype or a.shape != b.shape or a.tobytes() != b.tobytes():
                    return False
            elif a != b:
                return False
        return True


@dataclass
class GeneratedDataset:
    task: str
    spec_digest: bytes
    records: list
    attempts_by_variant: dict
    failures: dict = field(default_factory=dict)
    seed_range: tuple = (0, -1)
    spec_dict: dict | None = None
    dt: float = 0.05

    @property
    def attempts(self):
        return sum(self.attempts_by_variant.values())

    @property
    def dgr(self):
        """Exact success fraction, or ``None`` before any attempt."""
        return Fraction(len(self.records), self.attempts) if self.attempts else None

    def same_as(self, other):
        return (
            self.task == other.task
            and self.spec_digest == other.spec_digest
            and self.attempts_by_variant == other.attempts_by_variant
            and self.failures == other.failures
            and tuple(self.seed_range) == tuple(other.seed_range)
            and self.spec_dict == other.spec_dict
            and self.dt == other.dt
            and len(self.records) == len(other.records)
            and all(a.same_as(b) for a, b in zip(self.records, other.records))
        )


class _TrialLog:
    def __init__(self, ids):
        self.ids = ids
        self.ee, self.grip, self.att, self.obj = [], [], [], []
        self.cmd, self.cgrip, self.goal, self.phase, self.seg = [], [], [], [], []

    def state(self, s):
        self.ee.append(s.ee_pose.to_array())
        self.grip.append(s.gripper)
        self.att.append(self.ids.index(s.attached) if s.attached is not None else -1)
        self.obj.append([s.object_poses[o].to_array() for o in self.ids])

    def command(self, pose, grip, goal, x, seg):
        self.cmd.append(pose.to_array())
        self.cgrip.append(grip)
        self.goal.append(goal.to_array())
        self.phase.append(x)
        self.seg.append(seg)

    def arrays(self):
        n_obj = len(self.ids)
        return dict(
            ee=np.asarray(self.ee, dtype=float).reshape(-1, 7),
            gripper=np.asarray(self.grip, dtype=np.int8),
            attached=np.asarray(self.att, dtype=np.int16),
            objects=np.asarray(self.obj, dtype=float).reshape(-1, n_obj, 7),
            command=np.asarray(self.cmd, dtype=float).reshape(-1, 7),
            command_gripper=np.asarray(self.cgrip, dtype=np.int8),
            goal=np.asarray(self.goal, dtype=float).reshape(-1, 7),
            phase=np.asarray(self.phase, dtype=float),
            segment=np.asarray(self.seg, dtype=np.int16),
        )


def generate_trial(src, spec, variant, seed, perturb=None, controller=None, strategy="first", config=None):
    """Run one generation trial; failures are recorded, never raised."""
    controller = controller or sc.ControllerModel()
    config = config or dmp.DmpConfig(dt=controller.dt)
    rng = np.random.default_rng(seed)
    state = sc.sample_initial_state(spec, variant, rng)
    idx = select_demo(src, state, strategy)
    ids = spec.object_ids
    log = _TrialLog(ids)
    latches = [sc.PredicateLatch(st.predicate, st.params, spec) for st in spec.subtasks]
    events = []
    reason = None

    for i, seg in enumerate(src.segments[idx]):
        params = src.fit(idx, i, config)
        rel = src.relative(idx, i)
        ref = seg.reference_object
        origin = state.ee_pose.orientation
        ds = dmp.initial_state(np.concatenate([state.ee_pose.position, np.zeros(3)]))
        n = len(seg)
        trigger = None
        if perturb is not None and perturb.subtask_index == i and len(events) < perturb.max_events:
            trigger = perturb.trigger_step(n)
        goal = None
        for k in range(n):
            if k == trigger:
                state, ev = sc.apply_perturbation(state, perturb, rng)
                events.append(ev)
            # a carried reference object would drag its own goal along; hold the last goal instead
            if goal is None or not sc.is_carried(state, ref):
                goal = retarget(rel, state.object_poses[ref])
            try:
                g = np.concatenate([goal.position, dmp.orientation_chart(origin, goal.orientation)])
            except dmp.ChartError:
                reason = "orientation-chart"
                break
            if k > 0:
                ds = dmp.rollout_step(params, ds, g)
            cmd = dmp.chart_to_pose(origin, ds.y)
            grip = seg.gripper_track[k]
            log.state(state)
            log.command(cmd, grip, goal, ds.x, i)
            try:
                state = sc.step(state, cmd, grip, controller, spec)
            except sc.HorizonExceeded:
                reason = "horizon"
                break
            for latch in latches:
                latch.update(state)
        if reason is not None:
            break
        if not latches[i].value:
            reason = f"{spec.subtasks[i].name}-missed"
            break

    success = False
    if reason is None:
        success = sc.eval_predicate(spec.success["predicate"], spec.success.get("params", {}), state, spec)
        if not success:
            reason = "task-failed"
    log.state(state)
    return GenerationRecord(
        seed=int(seed),
        variant=variant,
        selected_demo=idx,
        object_ids=list(ids),
        events=events,
        completion_steps=[l.fired_at for l in latches],
        success=bool(success),
        reason="" if success else reason,
        **log.arrays(),
    )


_WORKER = {}


def _init_worker(kwargs):
    _WORKER.clear()
    _WORKER.update(kwargs)


def _run_seed(seed):
    return generate_trial(seed=seed, **_WORKER)


def default_workers():
    try:
        return max(1, int(os.environ.get("DMG_THREADS", "1")))
    except ValueError:
        return 1


def generate_dataset(
    src,
    spec,
    variant,
    n_success_target,
    seed0=0,
    perturb=None,
    controller=None,
    strategy="first",
    config=None,
    max_attempts=None,
    workers=None,
):
    """Run trials with seeds ``seed0, seed0 + 1, ...`` until enough succeed.

    Results are consumed in seed order, so the dataset does not depend on
    ``workers``. Raises :class:`TargetUnreachable` (carrying the partial
    dataset) after ``max_attempts`` (default ``100 * n_success_target``).
    """
    if n_success_target < 1:
        raise ValueError("n_success_target must be >= 1")
    max_attempts = max_attempts or 100 * n_success_target
    workers = workers or default_workers()
    kwargs = dict(src=src, spec=spec, variant=variant, perturb=perturb, controller=controller, strategy=strategy, config=config)

    records, failures = [], {}
    attempts = 0

    def consume(rec):
        nonlocal attempts
        attempts += 1
        if rec.success:
            records.append(rec)
        else:
            failures[rec.reason] = failures.get(rec.reason, 0) + 1
        return len(records) >= n_success_target

    done = False
    if workers == 1:
        for seed in range(seed0, seed0 + max_attempts):
            if consume(generate_trial(seed=seed, **kwargs)):
                done = True
                break
    else:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(kwargs,)) as pool:
            seed = seed0
            while not done and seed < seed0 + max_attempts:
                batch = range(seed, min(seed + 8 * workers, seed0 + max_attempts))
                for rec in pool.map(_run_seed, batch):
                    if consume(rec):
                        done = True
                        break
                seed = batch.stop

    ds = GeneratedDataset(
        task=spec.name,
        spec_digest=spec.digest(),
        records=records,
        attempts_by_variant={variant: attempts},
        failures=dict(sorted(failures.items())),
        seed_range=(seed0, seed0 + attempts - 1),
        spec_dict=spec.to_dict(),
        dt=(controller or sc.ControllerModel()).dt,
    )
    if not done:
        raise TargetUnreachable(ds)
    return ds


def format_percent(fr):
    """Render a fraction as a percentage with one decimal, rounding half up."""
    pct = Decimal(fr.numerator * 100) / Decimal(fr.denominator)
    return f"{pct.quantize(Decimal('0.1'), rounding=ROUND_HALF_UP)}%"


def dgr_report(datasets):
    """Rows ``(variant, attempts, successes, "xx.x%")``; variants with no attempts are left out."""
    if isinstance(datasets, GeneratedDataset):
        datasets = [datasets]
    attempts, successes = {}, {}
    for ds in datasets:
        for v, a in ds.attempts_by_variant.items():
            attempts[v] = attempts.get(v, 0) + a
        for r in ds.records:
            successes[r.variant] = successes.get(r.variant, 0) + 1
    rows = []
    for v in sorted(attempts):
        a = attempts[v]
        if a == 0:
            continue
        s = successes.get(v, 0)
        rows.append((v, a, s, format_percent(Fraction(s, a))))
    return rows


def report_table(rows, header=("variant", "attempts", "successes", "DGR")):
    cells = [tuple(str(c) for c in header)] + [tuple(str(c) for c in r) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def report_csv(rows, header=("variant", "attempts", "successes", "DGR")):
    return "\n".join(",".join(str(c) for c in r) for r in [header, *rows]) + "\n"


def subtask_breakdown(ds, subtask_names):
    """Rows ``(subtask, attempts reaching it, attempts completing it)``.

    A ``<name>-missed`` failure means every earlier subtask was completed, so
    the counts follow from the failure tally alone.
    """
    reached = ds.attempts
    rows = []
    for name in subtask_names:
        completed = reached - ds.failures.get(f"{name}-missed", 0)
        rows.append((name, reached, completed))
        reached = completed
    return rows


# persistence lives in its own module; re-exported here for convenience
from .storage import (  # noqa: E402
    ChecksumMismatch,
    DatasetError,
    SchemaVersionMismatch,
    read_dataset,
    read_source,
    write_dataset,
    write_source,
)
