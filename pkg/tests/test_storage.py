import json

import numpy as np
import pytest

from dmpgen import datagen, storage
from dmpgen import scene as sc


@pytest.fixture(scope="module")
def small_ds(stack_src, stack_spec):
    sched = sc.PerturbationSchedule("cubeA", 0, 0.9)
    return datagen.generate_dataset(stack_src, stack_spec, "D0", 10, perturb=sched)


def test_round_trip(tmp_path, small_ds):
    path = tmp_path / "g.dmg"
    datagen.write_dataset(small_ds, path)
    back = datagen.read_dataset(path)
    assert back.same_as(small_ds)
    assert len(back.records) == 10 and back.dgr == small_ds.dgr
    r = back.records[0]
    assert r.ee.dtype == np.float64 and r.ee.tobytes() == small_ds.records[0].ee.tobytes()


def test_empty_round_trip(tmp_path, stack_spec):
    ds = datagen.GeneratedDataset("stack", stack_spec.digest(), [], {}, spec_dict=stack_spec.to_dict())
    datagen.write_dataset(ds, tmp_path / "e.dmg")
    assert datagen.read_dataset(tmp_path / "e.dmg").same_as(ds)


def test_sidecar_index(tmp_path, small_ds):
    path = tmp_path / "g.dmg"
    datagen.write_dataset(small_ds, path)
    index = json.loads((tmp_path / "g.dmg.index.json").read_text())
    data = path.read_bytes()
    assert index["successes"] == 10 and index["attempts"] == small_ds.attempts
    assert index["dgr"] == [small_ds.dgr.numerator, small_ds.dgr.denominator]
    for b in index["blocks"]:
        (n,) = storage._U32.unpack_from(data, b["offset"])
        assert n + 8 == b["length"] and b["outcome"] == "success"


def test_byte_identical_reruns(tmp_path, stack_src, stack_spec):
    sched = sc.PerturbationSchedule("cubeA", 0, 0.9)
    for name in ("a", "b"):
        ds = datagen.generate_dataset(stack_src, stack_spec, "D0", 3, perturb=sched)
        datagen.write_dataset(ds, tmp_path / f"{name}.dmg")
    assert (tmp_path / "a.dmg").read_bytes() == (tmp_path / "b.dmg").read_bytes()
    assert (tmp_path / "a.dmg.index.json").read_bytes() == (tmp_path / "b.dmg.index.json").read_bytes()


def _corrupt(path, pos):
    data = bytearray(path.read_bytes())
    data[pos] ^= 0x01
    path.write_bytes(bytes(data))


def test_corrupted_payload_detected(tmp_path, small_ds):
    path = tmp_path / "g.dmg"
    datagen.write_dataset(small_ds, path)
    index = json.loads((tmp_path / "g.dmg.index.json").read_text())
    b = index["blocks"][3]
    _corrupt(path, b["offset"] + b["length"] // 2)
    with pytest.raises(datagen.ChecksumMismatch, match="block 3"):
        datagen.read_dataset(path)


def test_corrupted_header_detected(tmp_path, small_ds):
    path = tmp_path / "g.dmg"
    datagen.write_dataset(small_ds, path)
    _corrupt(path, storage._HEAD.size + 3)
    with pytest.raises(datagen.ChecksumMismatch, match="header"):
        datagen.read_dataset(path)


def test_schema_version_and_magic(tmp_path, small_ds):
    path = tmp_path / "g.dmg"
    datagen.write_dataset(small_ds, path)
    data = bytearray(path.read_bytes())
    data[4] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(datagen.SchemaVersionMismatch):
        datagen.read_dataset(path)
    path.write_bytes(b"nope" + bytes(data[4:]))
    with pytest.raises(datagen.DatasetError):
        datagen.read_dataset(path)
    datagen.write_dataset(small_ds, path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(datagen.DatasetError):
        datagen.read_dataset(path)
    with pytest.raises(OSError):
        datagen.read_dataset(tmp_path / "missing.dmg")


def test_source_round_trip(tmp_path, stack_src):
    path = tmp_path / "s.dmg"
    datagen.write_source(stack_src, path, seed=7)
    back = datagen.read_source(path)
    assert back.spec.digest() == stack_src.spec.digest()
    assert back.segments == stack_src.segments
    for a, b in zip(back.demos[0].steps, stack_src.demos[0].steps):
        assert a.ee_pose == b.ee_pose and a.object_poses == b.object_poses and a.gripper == b.gripper and a.t == b.t
    with pytest.raises(datagen.DatasetError):
        datagen.read_dataset(path)
    index = json.loads((tmp_path / "s.dmg.index.json").read_text())
    assert index["kind"] == "source" and len(index["blocks"][0]["dmp"]) == 2
