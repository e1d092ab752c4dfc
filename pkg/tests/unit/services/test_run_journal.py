"""
Run journal and artifact writer unit tests
"""

import json
import shutil
import tempfile
import unittest
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

from app.constants import Verdict
from core.io.artifacts import (
    config_digest,
    dumps,
    read_frame,
    reproducibility_header,
    write_frame,
    write_json,
)
from core.services.run_journal import RunJournal, StageEvent


class TestRunJournal(unittest.TestCase):
    """Run journal tests"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.journal = RunJournal(run="h3z", max_entries=5)

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_record_returns_sequential_ids(self):
        first = self.journal.record("bfs", StageEvent.STAGE_STARTED, "BFS to radius 8")
        second = self.journal.record("bfs", StageEvent.STAGE_COMPLETED, "BFS finished", radius=8)
        self.assertEqual(first, "h3z_1")
        self.assertEqual(second, "h3z_2")
        self.assertEqual(self.journal.entries[1].radius, 8)

    def test_entries_are_bounded(self):
        for r in range(8):
            self.journal.record("discrepancy", StageEvent.STAGE_COMPLETED, f"D({r})", radius=r)
        self.assertEqual(len(self.journal.entries), 5)
        self.assertEqual(self.journal.entries[0].radius, 3)

    def test_filters(self):
        self.journal.record("bfs", StageEvent.STAGE_COMPLETED, "BFS finished", radius=8)
        self.journal.record("discrepancy", StageEvent.POINTS_SKIPPED, "3 points skipped", radius=8, status="skipped")
        self.journal.record("discrepancy", StageEvent.STAGE_COMPLETED, "D(8)", radius=8)
        self.assertEqual(len(self.journal.get_entries(stage="discrepancy")), 2)
        self.assertEqual(len(self.journal.get_entries(event=StageEvent.POINTS_SKIPPED)), 1)
        self.assertEqual(len(self.journal.get_entries(radius=8, limit=2)), 2)

    def test_failures_and_stats(self):
        self.journal.record("bfs", StageEvent.BUDGET_EXHAUSTED, "budget", status="failed")
        self.journal.record("discrepancy", StageEvent.STAGE_FAILED, "gap too wide", radius=12)
        self.journal.record("output", StageEvent.ARTIFACT_WRITTEN, "written")
        stats = self.journal.stats()
        self.assertEqual(stats["total_entries"], 3)
        self.assertEqual(stats["failures"], 2)
        self.assertEqual(stats["by_stage"]["bfs"], 1)
        self.assertEqual(stats["by_event"]["artifact_written"], 1)

    def test_export(self):
        self.journal.record("setup", StageEvent.STAGE_COMPLETED, "ready", {"generators": [[1, 0, 0]]})
        path = self.journal.export(Path(self.temp_dir) / "journal.json", {"seed": 7})
        data = json.loads(path.read_text(encoding="utf-8"))
        self.assertEqual(data["run"], "h3z")
        self.assertEqual(data["header"]["seed"], 7)
        self.assertEqual(data["entries"][0]["event"], "stage_completed")
        self.assertEqual(data["entries"][0]["details"]["generators"], [[1, 0, 0]])


class TestArtifacts(unittest.TestCase):
    """JSON/CSV writer tests"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_encoder_handles_numeric_types(self):
        data = json.loads(dumps({
            "array": np.array([1.5, 2.0]),
            "int": np.int64(3),
            "half": Fraction(1, 2),
            "whole": Fraction(4, 2),
            "verdict": Verdict.SINGULAR,
            "flag": np.bool_(True),
        }))
        self.assertEqual(data["array"], [1.5, 2.0])
        self.assertEqual(data["int"], 3)
        self.assertEqual(data["half"], 0.5)
        self.assertEqual(data["whole"], 2)
        self.assertEqual(data["verdict"], "singular")
        self.assertTrue(data["flag"])

    def test_header_is_deterministic_except_timestamp(self):
        stamp = datetime(2024, 6, 1, tzinfo=timezone.utc)
        a = reproducibility_header("converge", 5, {"schedule": [4, 8]}, timestamp=stamp)
        b = reproducibility_header("converge", 5, {"schedule": [4, 8]}, timestamp=stamp)
        self.assertEqual(a, b)
        self.assertEqual(a["config_digest"], config_digest({"schedule": [4, 8]}))
        self.assertNotEqual(a["config_digest"], config_digest({"schedule": [4, 9]}))
        self.assertEqual(a["timestamp"], "2024-06-01T00:00:00+00:00")

    def test_write_json_replaces_and_cleans_backup(self):
        path = Path(self.temp_dir) / "fit.json"
        write_json(path, {"alpha": 1.0})
        write_json(path, {"alpha": 0.5})
        self.assertEqual(json.loads(path.read_text(encoding="utf-8")), {"alpha": 0.5})
        self.assertFalse(path.with_suffix(".json.bak").exists())

    def test_write_json_restores_on_failure(self):
        path = Path(self.temp_dir) / "fit.json"
        write_json(path, {"alpha": 1.0})
        with self.assertRaises(TypeError):
            write_json(path, {"bad": object()})
        self.assertEqual(json.loads(path.read_text(encoding="utf-8")), {"alpha": 1.0})

    def test_frame_round_trip_skips_header(self):
        path = Path(self.temp_dir) / "profile.csv"
        frame = pd.DataFrame({"n": [4, 8], "D": [1.25, 0.5]})
        write_frame(path, frame, {"seed": 3, "tool": "nilpotent-cone-lab"})
        lines = path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "# seed: 3")
        back = read_frame(path)
        self.assertEqual(back["n"].tolist(), [4, 8])
        self.assertEqual(back["D"].tolist(), [1.25, 0.5])


if __name__ == "__main__":
    unittest.main()
