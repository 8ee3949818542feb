"""Run registry tests against a throwaway SQLite file."""

import database


class TestRunRegistry:
    def test_save_and_fetch(self, tmp_db):
        database.init_db()
        first = database.save_run("abc", "certify", 0, {"exit_code": 0}, seed=1, out_dir="runs/a")
        second = database.save_run("def", "scan-N", 1, {"exit_code": 1})
        assert second > first
        runs = database.fetch_runs()
        assert [r["id"] for r in runs] == [second, first]
        assert runs[1]["out_dir"] == "runs/a"

    def test_filter_by_command(self, tmp_db):
        database.init_db()
        database.save_run("abc", "certify", 0, {})
        database.save_run("abc", "scan-N", 0, {})
        runs = database.fetch_runs(command="scan-N")
        assert len(runs) == 1
        assert runs[0]["command"] == "scan-N"

    def test_manifest_round_trip(self, tmp_db):
        database.init_db()
        run_id = database.save_run("abc", "certify", 0, {"artifacts": {"report.json": "00ff"}})
        run = database.get_run_by_id(run_id)
        assert run["manifest"]["artifacts"]["report.json"] == "00ff"
        assert database.get_run_by_id(run_id + 100) is None

    def test_runs_with_hash(self, tmp_db):
        database.init_db()
        database.save_run("abc", "certify", 0, {})
        database.save_run("xyz", "certify", 0, {})
        database.save_run("abc", "certify", 1, {})
        runs = database.runs_with_hash("abc")
        assert [r["exit_code"] for r in runs] == [0, 1]
