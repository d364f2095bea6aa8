import pytest

from core.run_ledger import RunLedger


@pytest.fixture
def ledger():
    db = RunLedger(":memory:")
    yield db
    db.close()


def test_record_and_recall(ledger):
    first = ledger.record_run("gen", "a" * 64, seed=0, summary="3 sequences")
    second = ledger.record_run("train", "b" * 64, seed=1, summary="30 epochs", metadata={"loss": 0.25})
    assert second > first
    runs = ledger.recall_runs()
    assert [r["command"] for r in runs] == ["train", "gen"]
    assert runs[0]["metadata"] == {"loss": 0.25}
    assert [r["id"] for r in ledger.recall_runs(command="gen")] == [first]
    assert len(ledger.recall_runs(days=1)) == 2
    assert len(ledger.recall_runs(limit=1)) == 1


def test_search(ledger):
    ledger.record_run("eval", "c" * 64, summary="F1@0.4 = 0.8")
    ledger.record_run("label", "d" * 64, metadata={"frames": 12})
    assert [r["command"] for r in ledger.search("F1")] == ["eval"]
    assert [r["command"] for r in ledger.search("frames")] == ["label"]
    assert ledger.search("nothing") == []


def test_stats(ledger):
    assert ledger.get_stats()["runs_count"] == 0
    ledger.record_run("train", "e" * 64)
    ledger.record_run("train", "e" * 64, status="failed", summary="exit 4")
    ledger.record_run("eval", "f" * 64)
    stats = ledger.get_stats()
    assert stats["runs_count"] == 3
    assert stats["failed_count"] == 1
    assert stats["commands"] == ["eval", "train"]
    assert stats["last_activity"] is not None


def test_file_ledger_creates_parent(tmp_path):
    db = RunLedger(str(tmp_path / "data" / "runs.db"))
    db.record_run("gen", "0" * 64)
    db.close()
    assert db.conn is None
    reopened = RunLedger(str(tmp_path / "data" / "runs.db"))
    assert reopened.get_stats()["runs_count"] == 1
    reopened.close()
