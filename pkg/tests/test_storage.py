"""Tests for the SQLite run ledger."""

import numpy as np
import pytest

from lowres_pose.storage import Database


@pytest.fixture
def db(tmp_path):
    return Database(str(tmp_path / "nested" / "ledger.db"))


def test_start_and_finish_run(db):
    """Test a run moves from running to completed."""
    run_id = db.start_run("train", {"epochs": 2, "loss": {"kind": "mse"}}, seed=3)
    run = db.get_run(run_id)
    assert run["status"] == "running"
    assert run["seed"] == 3
    assert run["config"] == {"epochs": 2, "loss": {"kind": "mse"}}
    assert run["completed_at"] is None

    db.finish_run(run_id)
    run = db.get_run(run_id)
    assert run["status"] == "completed"
    assert run["error_message"] is None
    assert run["completed_at"] is not None


def test_failed_run_keeps_error(db):
    """Test the error message is stored with the final status."""
    run_id = db.start_run("train")
    db.finish_run(run_id, "diverged", "Training diverged at epoch 1")
    run = db.get_run(run_id)
    assert run["status"] == "diverged"
    assert run["error_message"] == "Training diverged at epoch 1"
    assert run["config"] is None


def test_unknown_run(db):
    """Test an unknown id returns None."""
    assert db.get_run("missing") is None


def test_list_runs_filters_and_orders(db):
    """Test newest first, optionally filtered by command."""
    first = db.start_run("train")
    db.start_run("analyze")
    third = db.start_run("train")
    assert [r["run_id"] for r in db.list_runs("train")] == [third, first]
    assert len(db.list_runs()) == 3
    assert len(db.list_runs(limit=1)) == 1


def test_events(db):
    """Test events come back in insertion order with parsed details."""
    run_id = db.start_run("train")
    db.log_event(run_id, "epoch", {"epoch": 1, "loss": np.float32(0.5)})
    db.log_event(run_id, "checkpoint")
    db.log_event(run_id, "epoch", {"epoch": 2, "ap": np.array([0.25])})
    epochs = db.get_events(run_id, "epoch")
    assert [e["details"]["epoch"] for e in epochs] == [1, 2]
    assert epochs[0]["details"]["loss"] == 0.5
    assert epochs[1]["details"]["ap"] == [0.25]
    assert [e["event_type"] for e in db.get_events(run_id)] == ["epoch", "checkpoint", "epoch"]
    assert db.get_events(run_id, "checkpoint")[0]["details"] is None


def test_ledger_persists_across_instances(tmp_path):
    """Test a second handle on the same file sees earlier runs."""
    path = str(tmp_path / "ledger.db")
    run_id = Database(path).start_run("analyze")
    assert Database(path).get_run(run_id)["command"] == "analyze"
