import pytest

from core.config import RunConfig
from core.errors import DataError
from core.mpn import MpnModel
from core.preprocess import FilterConfig
from core.run_ledger import RunLedger
from core.scene import HORIZON
from core.scene_io import frame_filename, read_filtered_frame
from core.training import train
from experiment_router import ExperimentRouter
from motion_cluster import main
from pipelines.baseline_runner import run_baseline
from pipelines.dataset import graph_dataset, label_filename, list_sequences, preprocess_sequence
from pipelines.evaluator import evaluate_labels
from pipelines.experiments import (
    LEARNED,
    ORACLE_XF,
    PEDESTRIAN_HEAVY,
    SCALING_PERCENTS,
    graph_variants,
    pedestrian_scene,
)
from pipelines.frame_executor import FrameExecutor
from pipelines.labeler import label_frames
from tests.factories import SMALL_SCENE, TINY_FEATURES, TINY_MPN, TINY_RUN, TINY_TRAIN

NO_LEDGER = RunConfig().with_section("run", ledger="")

SCENE_FLAGS = [
    "--set", "scene.num_frames=4",
    "--set", "scene.ground_points=300",
    "--set", "scene.num_structures=1",
    "--set", "scene.density=5",
]
SMALL_SCENE_FLAGS = SCENE_FLAGS + ["--set", "run.ledger="]


def test_preprocess_writes_every_frame(sequence_dir, tmp_path):
    out = tmp_path / "filtered"
    stats = preprocess_sequence(sequence_dir, out, FilterConfig(), FrameExecutor(1))
    assert stats.frames == SMALL_SCENE.num_frames
    assert stats.after_static <= stats.after_ground <= stats.after_range <= stats.raw_points
    frame = read_filtered_frame(out / frame_filename(3), 3)
    assert frame.trajectories.shape == (len(frame.points), HORIZON + 1, 3)


def test_preprocess_independent_of_jobs(sequence_dir, tmp_path):
    for jobs in (1, 3):
        preprocess_sequence(sequence_dir, tmp_path / f"jobs{jobs}", FilterConfig(), FrameExecutor(jobs))
    for i in range(SMALL_SCENE.num_frames):
        name = frame_filename(i)
        assert (tmp_path / "jobs1" / name).read_text() == (tmp_path / "jobs3" / name).read_text()


def test_train_label_evaluate(sequence_root, tmp_path):
    executor = FrameExecutor(2)
    graphs = graph_dataset(list_sequences(sequence_root)[:2], FilterConfig(), TINY_FEATURES, executor, stride=2)
    assert graphs
    model = MpnModel(TINY_FEATURES.node_dim, TINY_FEATURES.edge_dim, TINY_MPN, TINY_FEATURES.echo())
    result = train(model, graphs, TINY_TRAIN)
    assert len(result.history) == TINY_TRAIN.epochs

    labels_root = tmp_path / "labels"
    total = label_frames(model, sequence_root, labels_root, NO_LEDGER, executor)
    assert total >= 0
    for seq in ("seq_0000", "seq_0001", "seq_0002"):
        for i in range(SMALL_SCENE.num_frames):
            assert (labels_root / seq / label_filename(i)).is_file()

    report = evaluate_labels(labels_root, sequence_root, NO_LEDGER, executor)
    assert report.frames == 3 * SMALL_SCENE.num_frames
    for t in report.thresholds:
        assert 0.0 <= report.f1(t) <= 1.0


def test_baseline_then_missing_labels(sequence_root, tmp_path):
    executor = FrameExecutor(1)
    out = tmp_path / "dbscan"
    run_baseline(sequence_root, out, NO_LEDGER, executor)
    report = evaluate_labels(out, sequence_root, NO_LEDGER, executor)
    tp, fp, _ = report.tp_fp_fn(0.4)
    assert tp + fp <= report.totals.predictions

    (out / "seq_0001" / label_filename(2)).unlink()
    with pytest.raises(DataError, match="seq_0001 frame 2"):
        evaluate_labels(out, sequence_root, NO_LEDGER, executor)


def test_oracle_table(sequence_root, tmp_path):
    router = ExperimentRouter()
    try:
        result, paths = router.run("t8", sequence_root, tmp_path / "reports", NO_LEDGER, gnuplot=True)
    finally:
        router.close()
    assert result.table == "t8_oracle"
    assert len(result.rows) == 1 + 3 * 2 * 2
    assert [p.name for p in paths] == ["t8_oracle.csv", "t8_oracle.txt", "t8_oracle.gp"]


def run_table(table: str, root, out):
    router = ExperimentRouter()
    try:
        return router.run(table, root, out, TINY_RUN)
    finally:
        router.close()


def test_oracle_table_trend(sequence_root, tmp_path):
    result, _ = run_table("t8", sequence_root, tmp_path)
    by_setting = {}
    for x_f, iou, t, precision, recall, _ in result.rows[1:]:
        by_setting.setdefault((iou, t), []).append((int(x_f), float(precision), float(recall)))
    for (iou, t), values in by_setting.items():
        assert [v[0] for v in values] == list(ORACLE_XF)
        recalls = [v[2] for v in values]
        assert all(b <= a for a, b in zip(recalls, recalls[1:])), (iou, t, recalls)
        if iou == "seg":
            precisions = [v[1] for v in values]
            assert all(b >= a for a, b in zip(precisions, precisions[1:])), (t, precisions)


def test_quality_table_is_reproducible(sequence_root, tmp_path):
    first, _ = run_table("t3", sequence_root, tmp_path / "a")
    run_table("t3", sequence_root, tmp_path / "b")
    for name in ("t3_pseudo_quality.csv", "t3_pseudo_quality.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    main_rows = [row for row in first.rows[1:] if len(row) == 8]
    noisy = {row[0] for row in main_rows if row[1] == "noisy"}
    oracle = {row[0] for row in main_rows if row[1] == "oracle"}
    assert {f"{LEARNED}^{p}" for p in SCALING_PERCENTS} <= noisy
    assert LEARNED in oracle and not any("^" in m for m in oracle)
    assert all(0.0 <= float(row[6]) <= 1.0 for row in main_rows)
    assert first.rows[len(main_rows) + 1] == []


def test_graph_ablation_table(sequence_root, tmp_path):
    result, paths = run_table("t1", sequence_root, tmp_path)
    assert len(result.rows) == 1 + len(graph_variants(TINY_RUN.graph))
    assert {row[0] for row in result.rows[1:]} == {"knn", "node", "edge"}
    assert paths[0].name == "t1_graph_ablation.csv"


def test_inflation_table_uses_pedestrian_scene(sequence_root, tmp_path):
    scene = pedestrian_scene(TINY_RUN.scene)
    assert scene.num_pedestrians >= PEDESTRIAN_HEAVY > scene.num_vehicles + scene.num_cyclists
    result, _ = run_table("t2", sequence_root, tmp_path)
    per_setting = 2 * len(TINY_RUN.eval.thresholds)
    assert [row[1] for row in result.rows[1:]] == ["off"] * per_setting + ["on"] * per_setting


def test_cli_gen_and_eval(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["gen", "--out", "seqs", "--count", "2", "--seed", "4"] + SMALL_SCENE_FLAGS) == 0
    assert sorted(p.name for p in (tmp_path / "seqs").iterdir()) == ["seq_0000", "seq_0001"]
    assert main(["baseline", "--in", "seqs", "--out", "labels"] + SMALL_SCENE_FLAGS) == 0
    assert main(["eval", "--pred", "labels", "--gt", "seqs", "--report", "eval.csv", "--mode", "moving"]
                + SMALL_SCENE_FLAGS) == 0
    assert (tmp_path / "eval.csv").read_text().startswith("threshold,precision,recall,f1")
    # deux sequences pour quatre jeux non vides
    assert main(["split", "--in", "seqs"] + SMALL_SCENE_FLAGS) == 3
    assert not (tmp_path / "data").exists()


def test_cli_config_errors(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["dump-config", "--seed", "5", "--set", "run.ledger="]) == 0
    assert "run.seed = 5" in capsys.readouterr().out
    assert main(["dump-config", "--set", "run.nope=1"]) == 2
    assert main(["label", "--model", "missing.txt", "--in", "x", "--out", "y", "--set", "run.ledger="]) == 3


def test_cli_records_runs(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    ledger = tmp_path / "runs.db"
    assert main(["gen", "--out", "one", "--set", f"run.ledger={ledger}"] + SCENE_FLAGS) == 0
    assert main(["history", "--set", f"run.ledger={ledger}"]) == 0
    assert "gen" in capsys.readouterr().out
    db = RunLedger(str(ledger))
    try:
        runs = db.recall_runs()
        assert [r["command"] for r in runs] == ["gen"]
        assert runs[0]["status"] == "completed"
    finally:
        db.close()


def test_router_history_and_stats(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    ledger = tmp_path / "runs.db"
    assert main(["gen", "--out", "one", "--set", f"run.ledger={ledger}"] + SCENE_FLAGS) == 0
    assert main(["experiment", "t8", "--data", "missing", "--out", "reports",
                 "--set", f"run.ledger={ledger}"]) == 3
    cfg = RunConfig().with_section("run", ledger=str(ledger))
    router = ExperimentRouter()
    try:
        experiments = router.get_history(cfg)
        assert [(r["command"], r["status"]) for r in experiments] == [("experiment", "failed")]
        assert [r["command"] for r in router.get_history(cfg, command=None)] == ["experiment", "gen"]
        stats = router.get_stats(cfg)
        assert stats["commands"] == ["experiment", "gen"]
        assert stats["failed_count"] == 1
        assert router.get_history(NO_LEDGER, command=None) == []
        assert router.get_stats(NO_LEDGER)["runs_count"] == 0
    finally:
        router.close()
