"""Binary container for source demos and generated datasets.

Layout, all little-endian::

    header   magic "DMGD", u16 schema version, u8 kind, u8 reserved,
             32-byte sha256 of the task spec, i64 first seed, i64 last seed,
             u32 block count, u32 metadata length, metadata (JSON),
             u32 CRC-32 of everything above
    blocks   u32 payload length, payload, u32 CRC-32 of the payload

A block payload is a u32-prefixed JSON head (scalars, names, shapes)
followed by raw arrays. Floats are stored as float64 (JSON floats use the
shortest round-trip repr), so reading back is bit-exact. A sidecar
``<path>.index.json`` lists block offsets and outcomes for tooling.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .datagen import GeneratedDataset, GenerationRecord, SourceDataset, format_percent
from .dmp import DmpConfig
from .scene import PerturbationEvent, TaskSpec
from .se3 import Pose
from .segment import Demonstration, DemoStep, SubtaskSegment

MAGIC = b"DMGD"
SCHEMA_VERSION = 1
KIND_SOURCE = 1
KIND_GENERATED = 2

_HEAD = struct.Struct("<4sHBB32sqqII")
_U32 = struct.Struct("<I")


class DatasetError(ValueError):
    """The file is not a valid dataset container."""


class SchemaVersionMismatch(DatasetError):
    pass


class ChecksumMismatch(DatasetError):
    pass


def _json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def _crc(data):
    return zlib.crc32(data) & 0xFFFFFFFF


def _pack_block(head, arrays):
    h = _json(head)
    payload = _U32.pack(len(h)) + h + b"".join(np.ascontiguousarray(a).tobytes() for a in arrays)
    return _U32.pack(len(payload)) + payload + _U32.pack(_crc(payload))


def _unpack_arrays(buf, offset, specs):
    out = []
    for dtype, shape in specs:
        dt = np.dtype(dtype)
        n = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        if offset + n > len(buf):
            raise DatasetError("block payload truncated")
        out.append(np.frombuffer(buf, dtype=dt, count=n // dt.itemsize, offset=offset).reshape(shape).copy())
        offset += n
    if offset != len(buf):
        raise DatasetError("block payload has trailing bytes")
    return out


def _write(path, kind, digest, seed_range, meta, blocks, index_extra, block_info):
    path = Path(path)
    m = _json(meta)
    head = _HEAD.pack(MAGIC, SCHEMA_VERSION, kind, 0, digest, seed_range[0], seed_range[1], len(blocks), len(m)) + m
    head += _U32.pack(_crc(head))
    offsets, pos = [], len(head)
    for b in blocks:
        offsets.append((pos, len(b)))
        pos += len(b)
    path.write_bytes(head + b"".join(blocks))
    index = {
        "schema_version": SCHEMA_VERSION,
        "kind": "source" if kind == KIND_SOURCE else "generated",
        "spec_sha256": digest.hex(),
        "seed_range": list(seed_range),
        "blocks": [{"offset": o, "length": n, **info} for (o, n), info in zip(offsets, block_info)],
        **index_extra,
    }
    Path(str(path) + ".index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")


def _read(path):
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size or data[:4] != MAGIC:
        raise DatasetError(f"{path}: not a dataset file")
    magic, version, kind, _, digest, s0, s1, n_blocks, meta_len = _HEAD.unpack_from(data, 0)
    if version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"{path}: schema version {version}, expected {SCHEMA_VERSION}")
    end = _HEAD.size + meta_len
    if end + 4 > len(data):
        raise DatasetError(f"{path}: header truncated")
    if _U32.unpack_from(data, end)[0] != _crc(data[:end]):
        raise ChecksumMismatch(f"{path}: header checksum mismatch")
    meta = json.loads(data[_HEAD.size : end])
    pos = end + 4
    payloads = []
    for i in range(n_blocks):
        if pos + 4 > len(data):
            raise DatasetError(f"{path}: block {i} truncated")
        (n,) = _U32.unpack_from(data, pos)
        if pos + 8 + n > len(data):
            raise DatasetError(f"{path}: block {i} truncated")
        payload = data[pos + 4 : pos + 4 + n]
        if _U32.unpack_from(data, pos + 4 + n)[0] != _crc(payload):
            raise ChecksumMismatch(f"{path}: block {i} checksum mismatch")
        payloads.append(payload)
        pos += 8 + n
    if pos != len(data):
        raise DatasetError(f"{path}: trailing bytes after last block")
    return kind, digest, (s0, s1), meta, payloads


def _split(payload):
    (n,) = _U32.unpack_from(payload, 0)
    return json.loads(payload[4 : 4 + n]), 4 + n


# --- generated datasets ---------------------------------------------------

def _record_block(r):
    n, n_obj = r.n_steps, len(r.object_ids)
    head = {
        "seed": r.seed,
        "variant": r.variant,
        "selected_demo": r.selected_demo,
        "object_ids": list(r.object_ids),
        "n_steps": n,
        "events": [[e.step, e.target_object, list(e.delta), e.suppressed] for e in r.events],
        "completion_steps": list(r.completion_steps),
        "success": r.success,
        "reason": r.reason,
    }
    arrays = [np.asarray(getattr(r, name), dtype=dt) for name, dt, _ in _record_arrays(n, n_obj)]
    return _pack_block(head, arrays)


def _record_arrays(n, n_obj):
    return [
        ("ee", "<f8", (n + 1, 7)),
        ("gripper", "<i1", (n + 1,)),
        ("attached", "<i2", (n + 1,)),
        ("objects", "<f8", (n + 1, n_obj, 7)),
        ("command", "<f8", (n, 7)),
        ("command_gripper", "<i1", (n,)),
        ("goal", "<f8", (n, 7)),
        ("phase", "<f8", (n,)),
        ("segment", "<i2", (n,)),
    ]


def _native(a):
    # store little-endian, hand back native dtypes so round trips compare equal
    return a.astype(a.dtype.newbyteorder("="), copy=False)


def _parse_record(payload):
    head, off = _split(payload)
    layout = _record_arrays(head["n_steps"], len(head["object_ids"]))
    arrays = _unpack_arrays(payload, off, [(dt, shape) for _, dt, shape in layout])
    return GenerationRecord(
        seed=head["seed"],
        variant=head["variant"],
        selected_demo=head["selected_demo"],
        object_ids=head["object_ids"],
        events=[PerturbationEvent(s, o, tuple(d), bool(sup)) for s, o, d, sup in head["events"]],
        completion_steps=head["completion_steps"],
        success=head["success"],
        reason=head["reason"],
        **{name: _native(a) for (name, _, _), a in zip(layout, arrays)},
    )


def write_dataset(ds, path):
    """Write a :class:`GeneratedDataset` and its sidecar index."""
    meta = {
        "task": ds.task,
        "spec": ds.spec_dict,
        "attempts_by_variant": ds.attempts_by_variant,
        "failures": ds.failures,
        "dt": ds.dt,
    }
    dgr = ds.dgr
    extra = {
        "task": ds.task,
        "attempts": ds.attempts,
        "successes": len(ds.records),
        "dgr": None if dgr is None else [dgr.numerator, dgr.denominator],
        "dgr_percent": None if dgr is None else format_percent(dgr),
        "failures": ds.failures,
    }
    info = [{"seed": r.seed, "variant": r.variant, "outcome": r.outcome} for r in ds.records]
    _write(path, KIND_GENERATED, ds.spec_digest, ds.seed_range, meta, [_record_block(r) for r in ds.records], extra, info)


def read_dataset(path):
    kind, digest, seeds, meta, payloads = _read(path)
    if kind != KIND_GENERATED:
        raise DatasetError(f"{path}: holds source demonstrations, not a generated dataset")
    return GeneratedDataset(
        task=meta["task"],
        spec_digest=digest,
        records=[_parse_record(p) for p in payloads],
        attempts_by_variant=meta["attempts_by_variant"],
        failures=meta["failures"],
        seed_range=seeds,
        spec_dict=meta["spec"],
        dt=meta["dt"],
    )


# --- source demonstrations ------------------------------------------------

def _demo_block(demo, segments):
    ids = sorted(demo.steps[0].object_poses)
    n = len(demo)
    head = {
        "task_id": demo.task_id,
        "dt": demo.dt,
        "object_ids": ids,
        "n_steps": n,
        "segments": [[s.subtask_index, s.reference_object, s.start, s.end] for s in segments],
    }
    arrays = [
        np.array([s.ee_pose.to_array() for s in demo.steps], dtype="<f8"),
        np.array([s.gripper for s in demo.steps], dtype="<i1"),
        np.array([[s.object_poses[o].to_array() for o in ids] for s in demo.steps], dtype="<f8").reshape(n, len(ids), 7),
        np.array([s.t for s in demo.steps], dtype="<f8"),
    ]
    return _pack_block(head, arrays)


def _parse_demo(payload):
    head, off = _split(payload)
    n, ids = head["n_steps"], head["object_ids"]
    ee, grip, obj, t = _unpack_arrays(
        payload, off, [("<f8", (n, 7)), ("<i1", (n,)), ("<f8", (n, len(ids), 7)), ("<f8", (n,))]
    )
    steps = tuple(
        DemoStep(
            Pose.from_array(ee[k]),
            int(grip[k]),
            {o: Pose.from_array(obj[k, j]) for j, o in enumerate(ids)},
            float(t[k]),
        )
        for k in range(n)
    )
    demo = Demonstration(steps, head["dt"], head["task_id"])
    grips = tuple(int(g) for g in grip)
    segs = [SubtaskSegment(i, ref, a, b, grips[a:b]) for i, ref, a, b in head["segments"]]
    return demo, segs


def write_source(src, path, seed=0):
    """Write source demonstrations with their segment annotations."""
    meta = {"task": src.spec.name, "spec": src.spec.to_dict()}
    blocks = [_demo_block(d, s) for d, s in zip(src.demos, src.segments)]
    info = [
        {
            "steps": len(d),
            "segments": [[s.start, s.end] for s in segs],
            # fits with the default configuration, for inspection by external tools
            "dmp": [src.fit(i, j, DmpConfig()).to_dict() for j in range(len(segs))],
        }
        for i, (d, segs) in enumerate(zip(src.demos, src.segments))
    ]
    _write(path, KIND_SOURCE, src.spec.digest(), (seed, seed), meta, blocks, {"task": src.spec.name, "demos": len(blocks)}, info)


def read_source(path):
    kind, digest, _, meta, payloads = _read(path)
    if kind != KIND_SOURCE:
        raise DatasetError(f"{path}: holds a generated dataset, not source demonstrations")
    spec = TaskSpec.from_dict(meta["spec"])
    if spec.digest() != digest:
        raise ChecksumMismatch(f"{path}: embedded task spec does not match its hash")
    pairs = [_parse_demo(p) for p in payloads]
    return SourceDataset(spec, [d for d, _ in pairs], [s for _, s in pairs])
