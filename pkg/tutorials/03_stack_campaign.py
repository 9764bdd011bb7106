"""Generate a small stacking dataset from a single scripted demo and report DGR.

Run from the repository root. Writes stack_d0.dmg in the working directory.
"""

import numpy as np

from dmpgen import datagen, expert, tasks

spec = tasks.get_task("stack")
demos = expert.synthesize(spec, "D0", np.random.default_rng(0))
src = datagen.SourceDataset(spec, demos)
for seg in src.segments[0]:
    print(f"subtask {seg.subtask_index} ({seg.reference_object}): steps [{seg.start}, {seg.end})")

ds = datagen.generate_dataset(src, spec, "D0", n_success_target=20, seed0=0)
print()
print(datagen.report_table(datagen.dgr_report(ds)))

datagen.write_dataset(ds, "stack_d0.dmg")
again = datagen.read_dataset("stack_d0.dmg")
print(f"\nread back {len(again.records)} records, identical: {again.same_as(ds)}")
