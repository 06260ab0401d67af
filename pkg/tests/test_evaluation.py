import numpy as np
import pytest

from rankfuse.core_index import EmbeddingRecord
from rankfuse.errors import ValidationError
from rankfuse.evaluation import (
    DEFAULT_SWEEP_WEIGHTS,
    EvalReport,
    confusion,
    confusion_csv,
    evaluate,
    format_report,
    format_sweep_table,
    split,
    split_bundle,
    sweep_csv,
    topk_accuracy,
    weight_sweep,
)
from rankfuse.ingest import gen_synthetic


def flat_records(class_counts, dim=2):
    records = []
    next_id = 0
    rng = np.random.default_rng(71)
    for label, count in class_counts.items():
        for _ in range(count):
            records.append(EmbeddingRecord(
                id=next_id, label=label,
                vector=rng.normal(size=dim).astype(np.float32),
            ))
            next_id += 1
    return records


class TestSplit:
    def test_twelve_items_five_sixths(self):
        db, q = split(flat_records({"a": 12}), 5.0 / 6.0, seed=0)
        assert len(db) == 10
        assert len(q) == 2

    def test_stratified_thirds(self):
        db, q = split(flat_records({"a": 30, "b": 30, "c": 30}),
                      2.0 / 3.0, seed=0)
        for label in "abc":
            assert sum(1 for r in db if r.label == label) == 20
            assert sum(1 for r in q if r.label == label) == 10

    def test_deterministic(self):
        records = flat_records({"a": 20, "b": 10})
        first = split(records, 0.75, seed=5)
        second = split(records, 0.75, seed=5)
        assert [r.id for r in first[0]] == [r.id for r in second[0]]
        assert [r.id for r in first[1]] == [r.id for r in second[1]]

    def test_seed_changes_partition(self):
        records = flat_records({"a": 40})
        first = split(records, 0.5, seed=1)
        second = split(records, 0.5, seed=2)
        assert [r.id for r in first[0]] != [r.id for r in second[0]]

    def test_disjoint_and_exhaustive(self):
        records = flat_records({"a": 13, "b": 7})
        db, q = split(records, 0.7, seed=3)
        db_ids = {r.id for r in db}
        q_ids = {r.id for r in q}
        assert db_ids & q_ids == set()
        assert db_ids | q_ids == {r.id for r in records}

    def test_tiny_class_rejected(self):
        with pytest.raises(ValidationError, match="at least 2"):
            split(flat_records({"a": 10, "b": 1}), 0.5, seed=0)

    def test_fraction_bounds(self):
        records = flat_records({"a": 4})
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ValidationError):
                split(records, bad, seed=0)

    def test_both_sides_nonempty_at_extremes(self):
        db, q = split(flat_records({"a": 2}), 0.99, seed=0)
        assert len(db) == 1 and len(q) == 1


class TestTopkAccuracy:
    def test_two_of_three(self):
        lists = [
            ["A", "B", "C", "D", "E"],
            ["D", "E", "F", "G", "H"],
            ["C", "A", "B", "D", "E"],
        ]
        assert topk_accuracy(lists, ["A", "B", "C"], 5) == pytest.approx(2 / 3)

    def test_perfect_top1(self):
        lists = [["A", "X"], ["B", "X"]]
        assert topk_accuracy(lists, ["A", "B"], 1) == 1.0

    def test_nesting(self):
        rng = np.random.default_rng(72)
        labels = ["a", "b", "c"]
        lists = [[labels[int(j)] for j in rng.integers(0, 3, size=5)]
                 for _ in range(40)]
        truths = [labels[int(j)] for j in rng.integers(0, 3, size=40)]
        accs = [topk_accuracy(lists, truths, k) for k in range(1, 6)]
        assert all(a <= b for a, b in zip(accs, accs[1:]))

    def test_k_too_large(self):
        with pytest.raises(ValidationError):
            topk_accuracy([["A"]], ["A"], 2)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            topk_accuracy([["A"]], ["A", "B"], 1)


class TestConfusion:
    def test_all_correct_is_diagonal(self):
        matrix = confusion(["a", "b", "a"], ["a", "b", "a"], ["a", "b"])
        np.testing.assert_array_equal(matrix, [[2, 0], [0, 1]])

    def test_hand_count(self):
        matrix = confusion(["A", "B", "B"], ["A", "A", "B"], ["A", "B"])
        np.testing.assert_array_equal(matrix, [[1, 1], [0, 1]])

    def test_trace_identity(self):
        rng = np.random.default_rng(73)
        labels = ["a", "b", "c", "d"]
        for _ in range(50):
            n = int(rng.integers(1, 60))
            truths = [labels[int(j)] for j in rng.integers(0, 4, size=n)]
            preds = [labels[int(j)] for j in rng.integers(0, 4, size=n)]
            matrix = confusion(preds, truths, labels)
            top1 = topk_accuracy([[p] for p in preds], truths, 1)
            assert np.trace(matrix) / n == pytest.approx(top1)
            assert matrix.sum() == n

    def test_unknown_label(self):
        with pytest.raises(ValidationError):
            confusion(["z"], ["a"], ["a", "b"])


@pytest.fixture(scope="module")
def synth_split():
    bundle = gen_synthetic(classes=3, per_class=40, dim=16, cluster_sep=3.0,
                           clinical_noise=0.05, seed=13)
    return split_bundle(bundle, seed=1)


class TestEvaluate:
    def test_report_shape(self, synth_split):
        db, cases = synth_split
        report = evaluate(db, cases, "cbir")
        assert report.mode == "cbir"
        assert report.weights_used is None
        assert len(report.per_query) == len(cases)
        assert report.confusion.shape == (3, 3)
        assert int(report.confusion.sum()) == len(cases)
        assert report.top1 <= report.top5

    def test_trace_equals_top1(self, synth_split):
        db, cases = synth_split
        report = evaluate(db, cases, "cbidr", weights=(0.5, 0.5))
        assert np.trace(report.confusion) / len(cases) == pytest.approx(
            report.top1
        )

    def test_weights_recorded_for_fused_mode(self, synth_split):
        db, cases = synth_split
        report = evaluate(db, cases, "cbidr", weights=(0.7, 0.3))
        assert report.weights_used == (0.7, 0.3)

    def test_concurrent_equals_serial(self, synth_split):
        db, cases = synth_split
        serial = evaluate(db, cases, "cbidr", weights=(0.5, 0.5))
        threaded = evaluate(db, cases, "cbidr", weights=(0.5, 0.5),
                            workers=8)
        assert format_report(serial) == format_report(threaded)
        assert serial.per_query == threaded.per_query

    def test_empty_cases_rejected(self, synth_split):
        db, _ = synth_split
        with pytest.raises(ValidationError):
            evaluate(db, [], "cbir")

    def test_unknown_mode_rejected(self, synth_split):
        db, cases = synth_split
        with pytest.raises(ValidationError):
            evaluate(db, cases, "both")

    def test_invariant_enforced_on_construction(self):
        with pytest.raises(ValidationError):
            EvalReport(top1=0.9, top5=0.5, per_query=((0, "a", ("a",)),),
                       confusion=np.array([[1]]), class_labels=("a",),
                       weights_used=None, mode="cbir", k=5)


class TestWeightSweep:
    def test_default_grid(self, synth_split):
        db, cases = synth_split
        rows = weight_sweep(db, cases)
        assert [r.weights for r in rows] == list(DEFAULT_SWEEP_WEIGHTS)
        assert len(rows) == 5

    def test_deterministic(self, synth_split):
        db, cases = synth_split
        first = weight_sweep(db, cases)
        second = weight_sweep(db, cases)
        assert format_sweep_table(first) == format_sweep_table(second)

    def test_separable_data_scores_one(self):
        bundle = gen_synthetic(classes=2, per_class=24, dim=8,
                               cluster_sep=40.0, clinical_noise=0.0, seed=14)
        db, cases = split_bundle(bundle, seed=3)
        rows = weight_sweep(db, cases)
        assert rows[0].weights == (0.5, 0.5)
        assert rows[0].top1 == 1.0


class TestRendering:
    def test_report_has_percentages(self, synth_split):
        db, cases = synth_split
        text = format_report(evaluate(db, cases, "cbir"))
        assert "top-1 accuracy:" in text
        assert "%" in text
        assert "confusion" in text
        for label in ("c0", "c1", "c2"):
            assert label in text

    def test_two_decimal_places(self):
        report = EvalReport(
            top1=1 / 3, top5=2 / 3,
            per_query=((0, "a", ("a",)), (1, "a", ("b",)), (2, "b", ("b",))),
            confusion=np.array([[1, 1], [0, 1]]), class_labels=("a", "b"),
            weights_used=(0.5, 0.5), mode="cbidr", k=5,
        )
        text = format_report(report)
        assert "33.33%" in text
        assert "66.67%" in text

    def test_confusion_csv(self):
        report = EvalReport(
            top1=0.5, top5=0.5,
            per_query=((0, "a", ("a",)), (1, "b", ("a",))),
            confusion=np.array([[1, 0], [1, 0]]), class_labels=("a", "b"),
            weights_used=None, mode="cbir", k=1,
        )
        text = confusion_csv(report)
        assert text.splitlines() == ["true\\predicted,a,b", "a,1,0", "b,1,0"]

    def test_sweep_csv_shape(self, synth_split):
        db, cases = synth_split
        text = sweep_csv(weight_sweep(db, cases))
        lines = text.splitlines()
        assert lines[0] == "w_image,w_clinical,top1_percent,top5_percent"
        assert len(lines) == 6
        assert lines[1].startswith("0.5,0.5,")
