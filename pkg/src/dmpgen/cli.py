"""Command-line entry point.

Subcommands: ``demo-synth`` writes scripted source demos, ``generate`` runs
a generation campaign, ``stats`` prints DGR tables, ``replay`` dumps one
record as per-step CSV. Exit codes: 0 ok, 1 usage/config/I-O error,
2 generation target not reached (the partial dataset is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace
from fractions import Fraction

import numpy as np

from . import datagen, expert, tasks
from . import scene as sc
from .segment import annotate_manual, parse_boundaries


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors share exit code 1 with every other configuration error
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text, n=None):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise CliError(f"cannot parse number list {text!r}") from exc
    if n is not None and len(vals) not in (1, n):
        raise CliError(f"expected 1 or {n} comma-separated values, got {text!r}")
    return vals


def _task(name):
    try:
        return tasks.get_task(name)
    except KeyError as exc:
        raise CliError(exc.args[0]) from exc


def cmd_demo_synth(args, out):
    spec = _task(args.task)
    if args.variant not in spec.reset_distributions:
        raise CliError(f"task {spec.name} has no variant {args.variant!r}")
    if args.n < 1:
        raise CliError("--n must be >= 1")
    demos = expert.synthesize(spec, args.variant, np.random.default_rng(args.seed), n_demos=args.n)
    segments = None
    if args.boundaries is not None:
        bounds = parse_boundaries(args.boundaries)
        segments = [annotate_manual(d, bounds, spec) for d in demos]
    src = datagen.SourceDataset(spec, demos, segments)
    datagen.write_source(src, args.out, seed=args.seed)
    for i, segs in enumerate(src.segments):
        spans = " ".join(f"[{s.start},{s.end})" for s in segs)
        print(f"demo {i}: {len(src.demos[i])} steps, segments {spans}", file=out)
    print(f"wrote {args.out}", file=out)


def _controller(args):
    base = sc.ControllerModel.perfect() if args.perfect else sc.ControllerModel()
    kw = {}
    if args.gain is not None:
        kw["gain"] = args.gain
    if args.max_translation is not None:
        kw["max_translation"] = args.max_translation
    if args.max_rotation is not None:
        kw["max_rotation"] = args.max_rotation
    return replace(base, **kw)


def _perturbation(args, spec):
    if args.perturb_frac is None:
        return None
    idx = args.perturb_subtask
    if not 0 <= idx < len(spec.subtasks):
        raise CliError(f"--perturb-subtask {idx} out of range")
    box = _floats(args.perturb_box, 3)
    # a single value perturbs in the table plane
    half = [box[0], box[0], 0.0] if len(box) == 1 else box
    target = args.perturb_object or spec.subtasks[idx].reference_object
    if target not in spec.objects:
        raise CliError(f"unknown object {target!r}")
    return sc.PerturbationSchedule(target, idx, args.perturb_frac, tuple(half), (-args.perturb_yaw, args.perturb_yaw))


def cmd_generate(args, out):
    src = datagen.read_source(args.source)
    spec = _task(args.task) if args.task else src.spec
    if spec.digest() != src.spec.digest():
        raise CliError(f"source demos were recorded for a different {spec.name!r} specification")
    if args.variant not in spec.reset_distributions:
        raise CliError(f"task {spec.name} has no variant {args.variant!r}")
    if args.n < 1:
        raise CliError("--n must be >= 1")
    try:
        controller = _controller(args)
        perturb = _perturbation(args, spec)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    code = 0
    try:
        ds = datagen.generate_dataset(
            src,
            spec,
            args.variant,
            args.n,
            seed0=args.seed,
            perturb=perturb,
            controller=controller,
            strategy=args.strategy,
            max_attempts=args.max_attempts,
        )
    except datagen.TargetUnreachable as exc:
        ds = exc.dataset
        code = 2
        print(f"dmpgen generate: {exc}", file=sys.stderr)
    datagen.write_dataset(ds, args.out)
    _report(ds, args.csv, out)
    return code


def _report(ds, as_csv, out):
    rows = datagen.dgr_report(ds)
    if as_csv:
        out.write(datagen.report_csv(rows))
        return
    print(datagen.report_table(rows), file=out)
    names = [s["name"] for s in (ds.spec_dict or {}).get("subtasks", [])]
    if names and ds.attempts:
        print("", file=out)
        sub = [(n, r, c, datagen.format_percent(Fraction(c, r)) if r else "-") for n, r, c in datagen.subtask_breakdown(ds, names)]
        print(datagen.report_table(sub, header=("subtask", "reached", "completed", "rate")), file=out)
    if ds.failures:
        print("", file=out)
        print(datagen.report_table(sorted(ds.failures.items()), header=("failure", "count")), file=out)


def cmd_stats(args, out):
    datasets = [datagen.read_dataset(p) for p in args.paths]
    if len(datasets) == 1:
        _report(datasets[0], args.csv, out)
        return
    rows = datagen.dgr_report(datasets)
    out.write(datagen.report_csv(rows) if args.csv else datagen.report_table(rows) + "\n")


def replay_rows(ds, index):
    """Header and per-step rows for one record."""
    if not 0 <= index < len(ds.records):
        raise CliError(f"record index {index} out of range (dataset holds {len(ds.records)})")
    r = ds.records[index]
    axes = ("px", "py", "pz", "qw", "qx", "qy", "qz")
    header = ["t", *(f"ee_{a}" for a in axes), "gripper"]
    for oid in r.object_ids:
        header += [f"{oid}_{a}" for a in axes]
    header += [f"goal_{a}" for a in axes] + ["phase", "segment"]
    rows = []
    for k in range(r.n_steps):
        row = [k * ds.dt, *r.ee[k], int(r.gripper[k])]
        for j in range(len(r.object_ids)):
            row += list(r.objects[k, j])
        row += [*r.goal[k], r.phase[k], int(r.segment[k])]
        rows.append([repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row])
    return header, rows


def cmd_replay(args, out):
    ds = datagen.read_dataset(args.path)
    header, rows = replay_rows(ds, args.index)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if args.csv_out:
        with open(args.csv_out, "w", newline="") as fh:
            fh.write(buf.getvalue())
        print(f"wrote {len(rows)} rows to {args.csv_out}", file=out)
    else:
        out.write(buf.getvalue())


def build_parser():
    p = _Parser(prog="dmpgen", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("demo-synth", help="write scripted source demonstrations")
    d.add_argument("--task", required=True, help="built-in task name or path to a JSON spec")
    d.add_argument("--variant", default="D0")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--n", type=int, default=1, help="number of demos (each turns the first object by a further pi/2)")
    d.add_argument("--boundaries", help="manual segment boundaries, e.g. 40,85 (default: predicate firings)")
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_demo_synth)

    g = sub.add_parser("generate", help="run a generation campaign")
    g.add_argument("--source", required=True, help="source demo file from demo-synth")
    g.add_argument("--task", help="override the task spec stored in the source file (must match it)")
    g.add_argument("--variant", default="D0")
    g.add_argument("--n", type=int, default=100, help="number of successful trials to collect")
    g.add_argument("--seed", type=int, default=0, help="seed of the first trial")
    g.add_argument("--strategy", choices=("first", "orientation"), default="first")
    g.add_argument("--max-attempts", type=int, help="default: 100 x --n")
    g.add_argument("--perturb-frac", type=float, help="trigger point as a fraction of the perturbed segment")
    g.add_argument("--perturb-box", default="0.05", help="half size in m; one value (x,y) or dx,dy,dz")
    g.add_argument("--perturb-yaw", type=float, default=0.0, help="yaw half range in rad")
    g.add_argument("--perturb-subtask", type=int, default=0)
    g.add_argument("--perturb-object", help="default: the perturbed subtask's reference object")
    g.add_argument("--perfect", action="store_true", help="perfect tracking controller")
    g.add_argument("--gain", type=float, help="controller gain in 1/s")
    g.add_argument("--max-translation", type=float, help="per-step translation cap in m")
    g.add_argument("--max-rotation", type=float, help="per-step rotation cap in rad")
    g.add_argument("--csv", action="store_true", help="print the report as CSV")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("stats", help="DGR report for one or more datasets")
    s.add_argument("paths", nargs="+")
    s.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_stats)

    r = sub.add_parser("replay", help="per-step CSV of one record")
    r.add_argument("path")
    r.add_argument("--index", type=int, default=0)
    r.add_argument("--csv-out", help="output file (default: standard output)")
    r.set_defaults(func=cmd_replay)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out) or 0
    except (CliError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"dmpgen {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
