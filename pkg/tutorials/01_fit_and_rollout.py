"""Fit a DMP to one pose trajectory and roll it out toward a new goal.

The demo is a 100-step (about 5 s at 20 Hz) minimum-jerk move in position
and orientation. We fit it, replay it to the original goal, then point the
same primitive at a goal 10 cm away and watch it converge there.
"""

import numpy as np

from dmpgen import dmp
from dmpgen.se3 import Pose, pose_error, quat_from_rotvec, translate, compose


def min_jerk(s):
    return 10 * s**3 - 15 * s**4 + 6 * s**5


s = np.linspace(0.0, 1.0, 100)
p0, p1 = np.array([0.1, -0.1, 0.3]), np.array([0.4, 0.1, 0.05])
rv = np.array([0.0, 0.0, 0.8])
demo = [Pose(p0 + min_jerk(u) * (p1 - p0), quat_from_rotvec(min_jerk(u) * rv)) for u in s]

params = dmp.fit_segment(demo)
print(f"fitted {params.layout.n_bases} bases per dimension over {params.duration:.2f} s")

# replay to the demo goal
out = dmp.rollout_poses(params, demo[0], demo[-1])
err = pose_error(out[-1], demo[-1])
print(f"replay endpoint error: {err.translational:.1e} m, {err.angular:.1e} rad")

# same shape, different goal
new_goal = compose(translate(0.0, 0.1, 0.0), demo[-1])
out = dmp.rollout_poses(params, demo[0], new_goal)
err = pose_error(out[-1], new_goal)
print(f"shifted goal endpoint error: {err.translational:.1e} m, {err.angular:.1e} rad")

# goal that jumps a quarter of the way through
jump = lambda k: new_goal if k >= 25 else demo[-1]
out = dmp.rollout_poses(params, demo[0], jump)
err = pose_error(out[-1], new_goal)
print(f"goal switched at step 25, endpoint error: {err.translational:.1e} m")
