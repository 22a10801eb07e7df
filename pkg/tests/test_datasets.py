import filecmp
import struct

import numpy as np
import pandas as pd
import pytest

from milkit.datasets import (
    ProcessedMILDataset,
    SyntheticSpec,
    bag_rule,
    decode_array,
    encode_array,
    generate,
    load_bag,
    read_array,
    save_dataset,
    write_array,
)
from milkit.datasets.array_file import read_shape
from milkit.exceptions import ArrayFileError, DatasetError, GeneratorError
from tests.conftest import random_bags


def test_array_file_header_layout(tmp_path):
    path = tmp_path / "a.milt"
    write_array(np.array([[1.0, 2.0]], dtype=np.float32), path)
    data = path.read_bytes()

    assert len(data) == 23 + 8
    assert data[:7] == b"MILT\x01\x01\x02"
    assert struct.unpack("<2Q", data[7:23]) == (1, 2)
    np.testing.assert_array_equal(read_array(path), [[1.0, 2.0]])


def test_array_file_payload_size():
    data = encode_array(np.zeros((3, 4), dtype=np.float32))
    assert len(data) - (7 + 16) == 48


@pytest.mark.parametrize("array", [
    np.array(1.0, dtype=np.float32),
    np.arange(12, dtype=np.int64).reshape(3, 4),
    np.array([0, 1, 1], dtype=np.uint8),
    np.zeros((0, 5), dtype=np.float32),
])
def test_array_file_round_trip_is_bit_exact(array):
    restored = decode_array(encode_array(array))
    assert restored.dtype == array.dtype
    assert restored.shape == array.shape
    assert restored.tobytes() == array.tobytes()


def test_array_file_booleans_come_back_as_uint8():
    restored = decode_array(encode_array(np.array([True, False])))
    assert restored.dtype == np.uint8
    np.testing.assert_array_equal(restored, [1, 0])


def test_array_file_rejects_unsupported_input():
    with pytest.raises(ArrayFileError, match="unsupported dtype"):
        encode_array(np.zeros(2, dtype=np.float64))
    with pytest.raises(ArrayFileError, match="NaN"):
        encode_array(np.array([np.inf], dtype=np.float32))


def test_array_file_decode_errors():
    data = encode_array(np.ones((2, 2), dtype=np.float32))
    with pytest.raises(ArrayFileError, match="unrecognized array file"):
        decode_array(b"NOPE" + data[4:])
    with pytest.raises(ArrayFileError, match="unrecognized array file"):
        decode_array(data[:4] + b"\x02" + data[5:])
    with pytest.raises(ArrayFileError, match="unrecognized array file"):
        decode_array(data[:5] + b"\x09" + data[6:])
    with pytest.raises(ArrayFileError, match="unrecognized array file"):
        decode_array(b"MIL")
    with pytest.raises(ArrayFileError, match="corrupt array file"):
        decode_array(data[:-1])
    with pytest.raises(ArrayFileError, match="corrupt array file"):
        decode_array(data[:10])


def test_read_shape_reads_header_only(tmp_path):
    path = tmp_path / "a.milt"
    write_array(np.zeros((5, 3), dtype=np.float32), path)
    assert read_shape(path) == (5, 3)


def test_save_and_load_random_datasets(tmp_path, rng):
    for i in range(50):
        sizes = rng.integers(1, 10, size=rng.integers(1, 6)).tolist()
        bags = random_bags(rng, sizes, d=int(rng.integers(1, 6)), graph=bool(rng.integers(0, 2)))
        dataset = save_dataset(bags, tmp_path / f"ds{i}")

        assert dataset.bag_ids == tuple(bag.bag_id for bag in bags)
        assert list(dataset) == bags
        for bag in bags:
            assert load_bag(dataset, bag.bag_id) == bag


def test_manifest_format(tmp_path, rng):
    bags = random_bags(rng, [2, 3], d=2)
    save_dataset(bags, tmp_path)
    text = (tmp_path / "manifest.csv").read_text()
    assert text.splitlines()[0] == "bag_id,label"
    assert len(text.splitlines()) == 3

    labels = read_array(tmp_path / "labels" / "b0.milt")
    assert labels.shape == () and labels.dtype == np.float32


def test_load_bag_with_required_fields_only(tmp_path, rng):
    (tmp_path / "features").mkdir()
    (tmp_path / "labels").mkdir()
    write_array(rng.standard_normal((5, 3)).astype(np.float32), tmp_path / "features" / "b0.milt")
    write_array(np.array(1.0, dtype=np.float32), tmp_path / "labels" / "b0.milt")
    pd.DataFrame({"bag_id": ["b0"], "label": [1]}).to_csv(tmp_path / "manifest.csv", index=False)

    dataset = ProcessedMILDataset(tmp_path)
    bag = dataset.load_bag("b0")
    assert bag.features.shape == (5, 3)
    assert bag.coords is None and bag.inst_labels is None and bag.adjacency is None
    assert dataset.fields == {"features", "labels"}
    assert dataset.data_dim == 3


def test_load_bag_errors(tmp_path, rng):
    dataset = save_dataset(random_bags(rng, [4, 3], d=2), tmp_path)
    with pytest.raises(DatasetError, match="unknown bag_id"):
        dataset.load_bag("missing")

    write_array(np.zeros(7, dtype=np.uint8), tmp_path / "inst_labels" / "b0.milt")
    with pytest.raises(DatasetError, match="field length mismatch"):
        dataset.load_bag("b0")

    flipped = 1.0 - dataset.label_of("b1")
    write_array(np.array(flipped, dtype=np.float32), tmp_path / "labels" / "b1.milt")
    with pytest.raises(DatasetError, match="disagrees with manifest"):
        dataset.load_bag("b1")


def test_save_dataset_errors(tmp_path, rng):
    with pytest.raises(DatasetError, match="empty dataset"):
        save_dataset([], tmp_path)
    bags = random_bags(rng, [2, 2], d=2)
    with pytest.raises(DatasetError, match="duplicate bag_id"):
        save_dataset([bags[0], bags[0]], tmp_path)


def test_saving_over_an_existing_dataset_drops_stale_files(tmp_path, rng):
    save_dataset(random_bags(rng, [7, 4], d=3, graph=True), tmp_path)
    replacement = random_bags(rng, [6], d=3, graph=False)
    dataset = save_dataset(replacement, tmp_path)

    assert list(dataset) == replacement
    assert "coords" not in dataset.fields and "adjacency" not in dataset.fields
    assert not (tmp_path / "coords").exists()
    assert sorted(p.name for p in (tmp_path / "features").iterdir()) == ["b0.milt"]


def test_manifest_bag_ids_must_be_safe_names(tmp_path):
    (tmp_path / "features").mkdir()
    pd.DataFrame({"bag_id": ["../outside"], "label": [0]}).to_csv(tmp_path / "manifest.csv", index=False)
    with pytest.raises(DatasetError, match=r"must match \[A-Za-z0-9_-\]"):
        ProcessedMILDataset(tmp_path)


def test_data_dim_rejects_one_dimensional_features(tmp_path):
    (tmp_path / "features").mkdir()
    write_array(np.zeros(4, dtype=np.float32), tmp_path / "features" / "b0.milt")
    pd.DataFrame({"bag_id": ["b0"], "label": [0]}).to_csv(tmp_path / "manifest.csv", index=False)
    with pytest.raises(DatasetError, match="features must be 2-D"):
        ProcessedMILDataset(tmp_path).data_dim


def test_dataset_missing_manifest(tmp_path):
    with pytest.raises(DatasetError, match="manifest.csv"):
        ProcessedMILDataset(tmp_path)


def test_generate_is_deterministic(toy_spec):
    assert generate(toy_spec) == generate(toy_spec)


def test_same_spec_gives_byte_identical_directories(tmp_path, toy_spec):
    save_dataset(generate(toy_spec), tmp_path / "a")
    save_dataset(generate(toy_spec), tmp_path / "b")
    comparison = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not comparison.diff_files and not comparison.left_only and not comparison.right_only
    for sub in comparison.subdirs.values():
        assert not sub.diff_files and not sub.left_only and not sub.right_only
    assert (tmp_path / "a" / "features" / "bag_00000.milt").read_bytes() == \
        (tmp_path / "b" / "features" / "bag_00000.milt").read_bytes()


@pytest.mark.parametrize("kind, extra", [
    ("gaussian_witness", {}),
    ("count_threshold", {"threshold_k": 3}),
    ("distractor", {}),
])
def test_generated_labels_follow_the_instance_rule(kind, extra):
    spec = SyntheticSpec(kind=kind, n_bags=60, mean_bag_size=10, witness_rate=0.2, seed=3, **extra)
    bags = generate(spec)

    assert len(bags) == 60
    assert [bag.bag_id for bag in bags][:2] == ["bag_00000", "bag_00001"]
    for bag in bags:
        assert bag.label == bag_rule(spec, bag.inst_labels)
        if bag.label:
            assert bag.inst_labels.sum() >= (extra.get("threshold_k", 1))


def test_count_threshold_negatives_carry_decoys():
    spec = SyntheticSpec(kind="count_threshold", n_bags=40, mean_bag_size=10, witness_rate=0.2,
                         threshold_k=3, class_separation=10.0, seed=5)
    for bag in generate(spec):
        if bag.label == 0:
            assert bag.inst_labels.sum() == 0
            assert (bag.features[:, 0] > 5).sum() >= 1


def test_generated_bags_carry_grid_graph(toy_bags):
    for bag in toy_bags:
        assert bag.coords.shape == (bag.n_instances, 2)
        assert bag.adjacency.shape == (bag.n_instances, bag.n_instances)


@pytest.mark.parametrize("kwargs", [
    {"witness_rate": 0.05, "mean_bag_size": 10},
    {"kind": "count_threshold", "threshold_k": 50, "mean_bag_size": 10, "witness_rate": 0.2},
    {"kind": "distractor", "feature_dim": 1},
])
def test_infeasible_specs(kwargs):
    with pytest.raises(GeneratorError, match="infeasible witness configuration"):
        generate(SyntheticSpec(**kwargs))
