import numpy as np
import pytest

from core.errors import ModelFormatError
from core.mpn import MpnConfig, MpnModel
from core.model_io import MAGIC, load_model, save_model
from tests.factories import TINY_FEATURES


def saved_model(tmp_path):
    model = MpnModel(TINY_FEATURES.node_dim, TINY_FEATURES.edge_dim,
                     MpnConfig(hidden_node=6, hidden_edge=7, layers=2, activation="tanh", init_seed=4),
                     TINY_FEATURES.echo())
    model.params["cls.b"] += 0.1234567890123
    return model, save_model(model, tmp_path / "models" / "mpn.txt")


def test_round_trip_is_exact(tmp_path):
    model, path = saved_model(tmp_path)
    loaded = load_model(path)
    assert loaded.cfg == model.cfg
    assert loaded.metadata == model.metadata
    assert (loaded.node_dim, loaded.edge_dim) == (model.node_dim, model.edge_dim)
    for name, value in model.params.items():
        np.testing.assert_array_equal(loaded.params[name], value)


def test_header(tmp_path):
    _, path = saved_model(tmp_path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == MAGIC
    assert "activation=tanh" in lines
    assert "meta.k=6" in lines


def test_truncated_file(tmp_path):
    _, path = saved_model(tmp_path)
    lines = path.read_text(encoding="utf-8").splitlines()
    path.write_text("\n".join(lines[:-3]) + "\n", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_missing_tensor(tmp_path):
    _, path = saved_model(tmp_path)
    text = path.read_text(encoding="utf-8")
    path.write_text(text[:text.index("TENSOR cls.W")], encoding="utf-8")
    with pytest.raises(ModelFormatError, match="cls.W"):
        load_model(path)


def test_not_a_model(tmp_path):
    path = tmp_path / "other.txt"
    path.write_text("hello\n", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        load_model(path)
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "missing.txt")
