import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from app.index import app as cli
from app.models.report import BenchmarkResult
from app.services.detector import brute_force_cusum


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def _records(text: str):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def _simulate(runner, tmp_path, *args, name="sim"):
    series, labels = tmp_path / f"{name}.csv", tmp_path / f"{name}.json"
    result = runner.invoke(cli, ["simulate", *args, "--output", str(series), "--labels", str(labels)])
    assert result.exit_code == 0, result.stderr
    return series, labels


class TestRoot:

    def test_version(self, runner):
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "1.0.0" in result.stdout

    def test_lists_commands(self, runner):
        result = runner.invoke(cli, ["--help"])
        for command in ("detect", "simulate", "eval", "export-plot", "benchmark"):
            assert command in result.stdout


class TestSimulate:

    def test_deterministic(self, runner, tmp_path):
        first, first_labels = _simulate(runner, tmp_path, "--kind", "connection", "--length", "100", "--seed", "7", name="a")
        second, second_labels = _simulate(runner, tmp_path, "--kind", "connection", "--length", "100", "--seed", "7", name="b")
        assert first.read_bytes() == second.read_bytes()
        assert first_labels.read_bytes() == second_labels.read_bytes()

    def test_gaussian_segments(self, runner, tmp_path):
        series, labels = _simulate(runner, tmp_path, "--kind", "gaussian", "--segments", "2", "--length", "100")
        assert len(json.loads(labels.read_text())) == 1
        assert pd.read_csv(series).shape == (100, 3)

    def test_speed_label(self, runner, tmp_path):
        series, labels = _simulate(runner, tmp_path, "--kind", "speed", "--at", "50")
        assert json.loads(labels.read_text()) == [50]
        assert list(pd.read_csv(series).columns) == ["x0", "x1", "x2", "x3", "x4"]

    def test_synthetic_preset(self, runner, tmp_path):
        series, _ = _simulate(runner, tmp_path, "--kind", "speed", "--preset", "synthetic", "--seed", "2")
        values = pd.read_csv(series).to_numpy()
        # 平衡起始、無雜訊: 變化點前為等速直線運動
        assert np.allclose(np.diff(values[:50], n=2, axis=0), 0.0, atol=1e-9)

    def test_unwritable_output(self, runner, tmp_path):
        result = runner.invoke(cli, ["simulate", "--kind", "speed", "--output", str(tmp_path / "no" / "x.csv")])
        assert result.exit_code == 2
        assert json.loads(result.stderr)["error"]["code"] == "OUTPUT_NOT_WRITABLE"


class TestDetect:

    def test_constant_input_emits_summary_only(self, runner, write_csv):
        path = write_csv(np.ones((50, 3)))
        result = runner.invoke(cli, ["detect", str(path), "--window", "5"])
        assert result.exit_code == 0, result.stderr
        records = _records(result.stdout)
        assert [record["type"] for record in records] == ["summary"]
        assert records[0]["events"] == 0
        assert records[0]["rows"] == 50

    def test_two_regime_detection(self, runner, tmp_path):
        series, labels = _simulate(runner, tmp_path, "--kind", "gaussian", "--length", "400", "--seed", "3")
        truth = json.loads(labels.read_text())[0]
        result = runner.invoke(cli, ["detect", str(series), "--window", "20", "--auto-threshold", "3"])
        assert result.exit_code == 0, result.stderr
        records = _records(result.stdout)
        events = [record for record in records if record["type"] == "event"]
        assert records[-1]["events"] == len(events)
        assert records[-1]["auto_k"] == 3.0
        assert 0 < truth < records[-1]["rows"]
        for event in events:
            assert event["window"] == [event["index"], event["index"] + 19]

    @pytest.mark.parametrize("metric", ["le", "lc"])
    def test_metric_passthrough(self, runner, tmp_path, metric):
        series, _ = _simulate(runner, tmp_path, "--kind", "location", "--seed", "1")
        result = runner.invoke(cli, ["detect", str(series), "--window", "5", "--metric", metric])
        assert result.exit_code == 0, result.stderr
        assert _records(result.stdout)[-1]["metric"] == metric

    def test_dataset_preset(self, runner, write_csv, rng):
        path = write_csv(rng.standard_normal((60, 3)))
        result = runner.invoke(cli, ["detect", str(path), "--dataset", "hasc", "--threshold", "1e9"])
        summary = _records(result.stdout)[-1]
        assert (summary["window"], summary["lag"]) == (20, 5)
        assert summary["windows_consumed"] == (60 - 20) // 5 + 1

    def test_missing_window_is_config_error(self, runner, write_csv, rng):
        result = runner.invoke(cli, ["detect", str(write_csv(rng.standard_normal((10, 2))))])
        assert result.exit_code == 2
        assert json.loads(result.stderr)["status"] == "error"

    def test_threshold_and_auto_conflict(self, runner, write_csv, rng):
        path = write_csv(rng.standard_normal((10, 2)))
        result = runner.invoke(cli, ["detect", str(path), "--window", "5", "--threshold", "1", "--auto-threshold", "3"])
        assert result.exit_code == 2

    def test_invalid_window_value(self, runner, write_csv, rng):
        result = runner.invoke(cli, ["detect", str(write_csv(rng.standard_normal((10, 2)))), "--window", "1"])
        assert result.exit_code == 2
        error = json.loads(result.stderr)["error"]
        assert error["code"] == "VALIDATION_ERROR"
        assert error["details"][0]["field"] == "window"

    def test_parse_error_exit_code(self, runner, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n3,x\n")
        result = runner.invoke(cli, ["detect", str(path), "--window", "2"])
        assert result.exit_code == 3
        assert json.loads(result.stderr)["error"]["code"] == "PARSE_ERROR"

    def test_short_stream_cannot_calibrate(self, runner, write_csv, rng):
        path = write_csv(rng.standard_normal((9, 3)))
        result = runner.invoke(cli, ["detect", str(path), "--window", "5", "--auto-threshold", "3"])
        assert result.exit_code == 2
        error = json.loads(result.stderr)["error"]
        assert error["code"] == "THRESHOLD_CALIBRATION"
        assert error["details"] == {"collected": 3, "required": 10}

    def test_short_row_names_field_count(self, runner, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("a,b\n1,2\n3\n")
        result = runner.invoke(cli, ["detect", str(path), "--window", "2"])
        assert result.exit_code == 3
        error = json.loads(result.stderr)["error"]
        assert "第 3 列" in error["message"]
        assert "欄位數不足" in error["message"]

    def test_resume_from_state(self, runner, tmp_path):
        series, _ = _simulate(runner, tmp_path, "--kind", "gaussian", "--length", "300", "--seed", "8")
        header, *rows = series.read_text().splitlines()
        head, tail = tmp_path / "head.csv", tmp_path / "tail.csv"
        head.write_text("\n".join([header, *rows[:137]]) + "\n")
        tail.write_text("\n".join([header, *rows[137:]]) + "\n")
        state = tmp_path / "state.json"
        flags = ["--window", "20", "--lag", "2", "--auto-threshold", "2"]

        whole = _records(runner.invoke(cli, ["detect", str(series), *flags]).stdout)
        first = _records(runner.invoke(cli, ["detect", str(head), *flags, "--state-out", str(state)]).stdout)
        second = _records(runner.invoke(cli, ["detect", str(tail), *flags, "--state-in", str(state)]).stdout)

        def events(records):
            return [record for record in records if record["type"] == "event"]

        assert events(first) + events(second) == events(whole)
        assert second[-1]["rows"] == 300


class TestExportPlot:

    def test_trace_export(self, runner, tmp_path):
        series, _ = _simulate(runner, tmp_path, "--kind", "gaussian", "--length", "200", "--seed", "5")
        events = tmp_path / "events.ndjson"
        result = runner.invoke(cli, ["detect", str(series), "--window", "10", "--threshold", "0.5", "--trace", "--output", str(events)])
        assert result.exit_code == 0, result.stderr
        summary = _records(events.read_text())[-1]

        trace = tmp_path / "trace.csv"
        result = runner.invoke(cli, ["export-plot", str(events), "--output", str(trace)])
        assert result.exit_code == 0, result.stderr
        table = pd.read_csv(trace)
        assert list(table.columns) == ["t", "d_t", "r_prev", "D", "y", "rho", "event"]
        assert len(table) == summary["windows_scored"]

        segment = []
        for row in table.itertuples(index=False):
            segment.append(row.D)
            assert row.y == pytest.approx(brute_force_cusum(segment)[-1], abs=1e-9)
            if row.event:
                segment = []

    def test_missing_trace_is_config_error(self, runner, tmp_path, write_csv, rng):
        events = tmp_path / "events.ndjson"
        runner.invoke(cli, ["detect", str(write_csv(rng.standard_normal((30, 2)))), "--window", "5", "--output", str(events)])
        result = runner.invoke(cli, ["export-plot", str(events), "--output", str(tmp_path / "trace.csv")])
        assert result.exit_code == 2
        assert json.loads(result.stderr)["error"]["code"] == "TRACE_MISSING"


class TestEval:

    @staticmethod
    def _events_file(tmp_path, index: int):
        path = tmp_path / "events.ndjson"
        lines = [
            {"type": "event", "index": index, "cusum": 2.0, "score": 1.0, "window": [index, index + 9]},
            {
                "type": "summary", "metric": "lc", "window": 10, "lag": 1, "threshold": 1.0, "rows": 100,
                "windows_consumed": 91, "windows_scored": 89, "events": 1, "runtime_seconds": 0.5,
            },
        ]
        path.write_text("".join(json.dumps(line) + "\n" for line in lines))
        return path

    @staticmethod
    def _labels(tmp_path, labels):
        path = tmp_path / "labels.json"
        path.write_text(json.dumps(labels))
        return path

    def test_perfect_detection(self, runner, tmp_path):
        report = tmp_path / "report.json"
        result = runner.invoke(cli, [
            "eval", "--events", str(self._events_file(tmp_path, 50)),
            "--labels", str(self._labels(tmp_path, [50])), "--output", str(report),
        ])
        assert result.exit_code == 0, result.stderr
        [payload] = json.loads(report.read_text())
        assert payload["best"]["f1"] == 1.0
        assert payload["best"]["average_delay"] == 0.0
        assert "1.000" in result.stdout

    def test_not_available_delay(self, runner, tmp_path):
        result = runner.invoke(cli, [
            "eval", "--events", str(self._events_file(tmp_path, 45)),
            "--labels", str(self._labels(tmp_path, [50])),
        ])
        assert result.exit_code == 0, result.stderr
        assert "N.A." in result.stdout

    def test_report_round_trips(self, runner, tmp_path):
        report = tmp_path / "report.json"
        runner.invoke(cli, [
            "eval", "--events", str(self._events_file(tmp_path, 50)),
            "--labels", str(self._labels(tmp_path, [50])), "--output", str(report),
        ])
        [payload] = json.loads(report.read_text())
        parsed = BenchmarkResult.model_validate(payload)
        assert parsed.model_dump(mode="json") == payload

    def test_label_mismatch(self, runner, tmp_path):
        result = runner.invoke(cli, [
            "eval", "--events", str(self._events_file(tmp_path, 50)),
            "--labels", str(self._labels(tmp_path, [500])),
        ])
        assert result.exit_code == 2
        assert json.loads(result.stderr)["error"]["code"] == "LABEL_MISMATCH"

    def test_requires_exactly_one_source(self, runner, tmp_path):
        result = runner.invoke(cli, ["eval", "--labels", str(self._labels(tmp_path, [50]))])
        assert result.exit_code == 2

    def test_live_series_with_grid(self, runner, tmp_path):
        series, labels = _simulate(runner, tmp_path, "--kind", "connection", "--seed", "2")
        result = runner.invoke(cli, [
            "eval", "--series", str(series), "--labels", str(labels),
            "--dataset", "synthetic", "--grid", "0.1,1,10",
        ])
        assert result.exit_code == 0, result.stderr
        assert "synthetic" in result.stdout


class TestBenchmark:

    def test_small_suite(self, runner, tmp_path):
        report = tmp_path / "bench.json"
        result = runner.invoke(cli, [
            "benchmark", "--kind", "speed", "--runs", "2", "--seed", "0", "--grid", "0.5,5", "--output", str(report),
        ])
        assert result.exit_code == 0, result.stderr
        [payload] = json.loads(report.read_text())
        assert payload["dataset"] == "speed"
        assert payload["runs"] == 2
        assert payload["best"]["f1"] >= payload["default"]["f1"]
        assert "speed" in result.stdout
