import pytest

from core.config import RunSettings
from core.errors import DataError
from pipelines.splits import (
    read_split_manifest,
    split_dataset,
    split_sizes,
    write_split_manifest,
)

DEFAULT_FRACTIONS = RunSettings().fractions()


def test_split_sizes():
    assert split_sizes(4, DEFAULT_FRACTIONS) == {
        "train_pseudo": 1, "train_det": 1, "val_pseudo": 1, "val_det": 1,
    }
    fractions = {"train_pseudo": 0.1, "train_det": 0.1, "val_pseudo": 0.4, "val_det": 0.4}
    assert split_sizes(10, fractions) == {"train_pseudo": 1, "train_det": 1, "val_pseudo": 4, "val_det": 4}
    assert split_sizes(10, {"a": 0.5, "b": 0.2}) == {"a": 5, "b": 2}


def test_split_dataset_partition():
    names = [f"seq_{i:04d}" for i in range(10)]
    splits = split_dataset(names, DEFAULT_FRACTIONS, seed=3)
    assert list(splits) == list(DEFAULT_FRACTIONS)
    flat = [n for group in splits.values() for n in group]
    assert sorted(flat) == names
    assert len(set(flat)) == len(flat)
    assert splits == split_dataset(list(reversed(names)), DEFAULT_FRACTIONS, seed=3)


def test_too_few_sequences():
    with pytest.raises(DataError):
        split_dataset(["a", "b"], DEFAULT_FRACTIONS, seed=0)


def test_manifest_round_trip(tmp_path):
    splits = split_dataset([f"seq_{i:04d}" for i in range(6)], DEFAULT_FRACTIONS, seed=1)
    path = write_split_manifest(splits, tmp_path / "out" / "splits")
    assert read_split_manifest(path) == splits


def test_manifest_errors(tmp_path):
    path = tmp_path / "splits"
    path.write_text("seq_a train_pseudo\nseq_a val_det\n", encoding="utf-8")
    with pytest.raises(DataError, match="twice"):
        read_split_manifest(path)
    path.write_text("seq_a test\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_split_manifest(path)
    with pytest.raises(DataError):
        read_split_manifest(tmp_path / "missing")
