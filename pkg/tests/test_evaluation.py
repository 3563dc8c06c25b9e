import pytest

from app.exceptions import ValidationException
from app.models.config import ChangeKind, ChangeSpec, DetectorConfig, EvalConfig, SpringConfig
from app.models.report import ChangeEvent
from app.services.evaluation import (
    BenchmarkDataset,
    average_delay,
    evaluate,
    evaluate_runs,
    f1,
    match_detections,
    render_table,
    run_benchmark,
)
from app.services.simulator import simulate_springs

CFG = EvalConfig(window=10)


def _event(tau_hat: int, window: int = 10) -> ChangeEvent:
    return ChangeEvent.at(tau_hat, window, cusum_value=1.0, score=0.5)


class TestMatching:

    def test_containment(self):
        matching = match_detections([_event(45)], [50], CFG)
        assert (matching.true_positives, matching.false_positives, matching.false_negatives) == (1, 0, 0)

    def test_miss(self):
        matching = match_detections([_event(60)], [50], CFG)
        assert (matching.true_positives, matching.false_positives, matching.false_negatives) == (0, 1, 1)

    def test_one_to_one(self):
        matching = match_detections([_event(45)], [50, 52], CFG)
        assert (matching.true_positives, matching.false_positives, matching.false_negatives) == (1, 0, 1)

    def test_counts_are_consistent(self, rng):
        for _ in range(50):
            events = [_event(int(t)) for t in sorted(rng.integers(0, 200, size=int(rng.integers(0, 8))))]
            truth = sorted(set(rng.integers(1, 200, size=int(rng.integers(0, 6))).tolist()))
            matching = match_detections(events, truth, CFG)
            assert matching.true_positives + matching.false_negatives == len(truth)
            assert matching.true_positives + matching.false_positives == len(events)

    def test_disjoint_spans_order_insensitive(self, rng):
        events = [_event(t) for t in (0, 20, 40, 60, 80)]
        truth = [5, 25, 70, 99]
        expected = match_detections(events, truth, CFG)
        for _ in range(10):
            shuffled = list(rng.permutation(len(events)))
            matching = match_detections([events[idx] for idx in shuffled], truth, CFG)
            assert matching.true_positives == expected.true_positives
            assert matching.false_positives == expected.false_positives


class TestDelay:

    def test_zero_delay(self):
        assert average_delay(match_detections([_event(50)], [50], CFG), CFG) == 0.0

    def test_mean_of_qualifying(self):
        late = [
            ChangeEvent(tau_hat=54, cusum_value=1.0, score=0.5, window_span=(50, 63)),
            ChangeEvent(tau_hat=108, cusum_value=1.0, score=0.5, window_span=(100, 117)),
        ]
        matching = match_detections(late, [50, 100], CFG)
        assert average_delay(matching, CFG) == 6.0

    def test_beyond_cap_is_not_available(self):
        # 視窗包含 τ=0，但延遲 25 > 2W
        wide = ChangeEvent(tau_hat=25, cusum_value=1.0, score=0.5, window_span=(0, 30))
        matching = match_detections([wide], [0], CFG)
        assert matching.true_positives == 1
        assert average_delay(matching, CFG) is None

    def test_early_detection_matches_without_delay(self):
        matching = match_detections([_event(45)], [50], CFG)
        assert matching.true_positives == 1
        assert average_delay(matching, CFG) is None


class TestF1:

    def test_perfect(self):
        assert f1(1, 0, 0) == (1.0, 1.0, 1.0)

    def test_nothing_right(self):
        assert f1(0, 5, 3)[2] == 0.0

    def test_mixed(self):
        precision, recall, score = f1(7, 3, 1)
        assert precision == pytest.approx(0.7)
        assert recall == pytest.approx(0.875)
        assert score == pytest.approx(0.7778, abs=1e-4)

    def test_null_stream(self):
        report = evaluate([_event(10), _event(40)], [], CFG)
        assert report.f1 == 0.0
        assert report.false_positives == 2

    def test_pooled_runs(self):
        report, per_run = evaluate_runs([([_event(45)], [50]), ([_event(10)], [80])], CFG)
        assert (report.true_positives, report.false_positives, report.false_negatives) == (1, 1, 1)
        assert per_run == [1.0, 0.0]


class TestBenchmark:

    @pytest.fixture
    def dataset(self) -> BenchmarkDataset:
        streams = [
            simulate_springs(SpringConfig(), 100, [ChangeSpec(kind=ChangeKind.CONNECTION, at=50)], seed=seed)
            for seed in range(3)
        ]
        return BenchmarkDataset.from_streams("connection", streams, DetectorConfig(window=5, auto_k=3.0))

    def test_single_point_grid_best_at_least_default(self, dataset):
        [result] = run_benchmark([dataset], grid=[1.0], max_workers=2)
        assert result.best.f1 >= result.default.f1
        assert result.runs == 3
        assert result.grid == [1.0]

    def test_empty_grid_best_equals_default(self, dataset):
        [result] = run_benchmark([dataset], grid=[])
        assert result.best == result.default
        assert result.best_threshold is None

    def test_unlabeled_dataset_is_skipped(self, dataset):
        unlabeled = BenchmarkDataset("unlabeled", dataset.frames, None, dataset.config)
        assert run_benchmark([unlabeled], grid=[1.0]) == []

    def test_grid_must_be_positive(self, dataset):
        with pytest.raises(ValidationException):
            run_benchmark([dataset], grid=[0.0])

    def test_render_table(self, dataset):
        [result] = run_benchmark([dataset], grid=[1e9])
        table = render_table([result])
        header = table.splitlines()[0]
        for column in ("dataset", "F1(default)", "F1(best)", "avg delay", "runtime"):
            assert column in header
        assert "connection" in table

    def test_not_available_delay(self, dataset):
        [result] = run_benchmark([dataset], grid=[])
        no_delay = result.model_copy(update={"best": result.best.model_copy(update={"average_delay": None})})
        assert "N.A." in render_table([no_delay])
