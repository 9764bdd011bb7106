"""Express an end-effector target in an object's frame and move it with the object.

This is the core of the generation step: a demo gives the grasp pose
relative to the cube, and for a new cube pose the grasp follows rigidly.
"""

import math

from dmpgen.se3 import Pose, compose, pose_error, relative_target, retarget, rotz, translate, yaw_of

cube_demo = compose(translate(0.5, 0.0, 0.025), rotz(0.2))
grasp_demo = compose(translate(0.5, 0.0, 0.03), Pose([0, 0, 0], [0, 1, 0, 0]))

rel = relative_target(cube_demo, grasp_demo)
print("grasp in cube frame:", rel.to_array().round(4))

cube_new = compose(translate(0.42, 0.07, 0.025), rotz(-0.6))
grasp_new = retarget(rel, cube_new)
print("grasp for moved cube:", grasp_new.to_array().round(4))

# the relation is preserved exactly (up to rounding)
back = relative_target(cube_new, grasp_new)
e = pose_error(back, rel)
print(f"relative pose preserved: {e.translational:.1e} m, {e.angular:.1e} rad")
turn = yaw_of(grasp_new) - yaw_of(grasp_demo)
print(f"grasp turned by {math.degrees(turn):.1f} deg, cube by {math.degrees(-0.8):.1f} deg")
