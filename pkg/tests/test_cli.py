import json

from click.testing import CliRunner

from prevent import config
from prevent.cli import main


class TestRunCommand:
    def test_run_with_auto_consent(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "run", "--scenario", "S3", "--auto-consent", "5", "--out", str(tmp_path),
        ])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["completed"] is True
        assert payload["final_action"] == "halt_await_consent"
        assert (tmp_path / "s3_skilled_13.trace.ldjson").exists()

    def test_run_nse_failure(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, [
            "run", "--scenario", "S5", "--mode", "nse", "--out", str(tmp_path),
        ])
        assert result.exit_code == 0
        payload = json.loads(result.output)
        assert payload["failure_mode"] == "unsafe_manipulation"

    def test_unknown_scenario_fails_cleanly(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["run", "--scenario", "S99", "--out", str(tmp_path)])
        assert result.exit_code != 0


class TestExperimentCommand:
    def test_fig7_writes_reports(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(main, ["experiment", "fig7", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "fig7.csv").exists()
        assert (tmp_path / "fig7_report.txt").exists()
        assert "multi_modal: FP=0 FN=0" in result.output


class TestValidateCommand:
    def test_shipped_tree_ok(self):
        runner = CliRunner()
        tree = str(config.data_path("trees", "cin.bt"))
        result = runner.invoke(main, ["validate", tree])
        assert result.exit_code == 0
        assert "ok" in result.output

    def test_bad_tree_rejected(self, tmp_path):
        bad = tmp_path / "bad.bt"
        bad.write_text("btdsl 1\nsequence { }\n", encoding="utf-8")
        runner = CliRunner()
        result = runner.invoke(main, ["validate", str(bad)])
        assert result.exit_code == 1

    def test_unbound_leaf_flagged(self, tmp_path):
        tree = tmp_path / "custom.bt"
        tree.write_text("btdsl 1\nsequence { action NotARealLeaf }\n", encoding="utf-8")
        runner = CliRunner()
        result = runner.invoke(main, ["validate", str(tree)])
        assert result.exit_code == 1
        assert "NotARealLeaf" in result.output
