"""Fixtures partagees"""

import pytest

from core.scene import generate_sequence
from core.scene_io import write_sequence
from tests.factories import SMALL_SCENE


@pytest.fixture(scope="session")
def small_sequence():
    return generate_sequence(SMALL_SCENE, 7)


@pytest.fixture
def sequence_dir(tmp_path, small_sequence):
    return write_sequence(small_sequence, tmp_path / "seq")


@pytest.fixture
def sequence_root(tmp_path):
    """Dossier de trois sequences seq_0000..seq_0002 (graines 0, 1, 2)"""
    root = tmp_path / "sequences"
    for i in range(3):
        write_sequence(generate_sequence(SMALL_SCENE, i), root / f"seq_{i:04d}")
    return root
