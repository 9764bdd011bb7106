"""Move the cube mid-pick and see how late a shift the primitive can absorb.

The cube is displaced by up to 5 cm in x and y once, at a fraction of the
pick segment. Early shifts are absorbed because the goal is re-evaluated
every step; shifts right before the grasp leave too little time.
"""

import numpy as np

from dmpgen import datagen, expert, tasks
from dmpgen import scene as sc

spec = tasks.get_task("stack")
src = datagen.SourceDataset(spec, expert.synthesize(spec, "D0", np.random.default_rng(7)))

n = 50
for frac in (0.25, 0.5, 0.75, 0.9, 0.95):
    sched = sc.PerturbationSchedule("cubeA", 0, frac, half_size=(0.05, 0.05, 0.0))
    ok = sum(datagen.generate_trial(src, spec, "D0", s, perturb=sched).success for s in range(n))
    print(f"trigger at {frac:4.2f} of pick: {ok}/{n} succeed")
