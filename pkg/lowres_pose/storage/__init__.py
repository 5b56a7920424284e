"""Run ledger persistence."""

from lowres_pose.storage.database import Database, get_db, reset_db

__all__ = ["Database", "get_db", "reset_db"]
