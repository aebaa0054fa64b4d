import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blurscope.errors import (
    EmptyDataset,
    EmptyInput,
    EmptyMatrix,
    LengthMismatch,
    NoNegatives,
    NoPositives,
    SingleClassDataset,
)
from blurscope.evaluation import (
    ConfusionMatrix,
    Method,
    MetricsReport,
    accuracy,
    build_confusion,
    evaluate,
    format_comparison,
    format_report,
    laplacian_classifier,
    oracle_classifier,
    sensitivity,
    specificity,
    split_dataset,
)
from blurscope.imageio import Label, LabeledDataset, LabeledSample
from blurscope.laplacian import calibrate_dataset

B, S = Label.BLURRY, Label.SHARP

TABLE1 = ConfusionMatrix(tp=111, fp=71, fn=7, tn=211)
TABLE2 = ConfusionMatrix(tp=87, fp=65, fn=44, tn=204)


def fake_dataset(n_blurry, n_sharp):
    samples = [LabeledSample(f"b{i}.pgm", B) for i in range(n_blurry)]
    samples += [LabeledSample(f"s{i}.pgm", S) for i in range(n_sharp)]
    return LabeledDataset(tuple(samples))


matrices = st.builds(
    ConfusionMatrix,
    st.integers(0, 500), st.integers(0, 500), st.integers(0, 500), st.integers(0, 500),
).filter(lambda cm: cm.positives > 0 and cm.negatives > 0)


class TestConfusion:
    def test_all_correct(self):
        truths = [B, B, B, S, S]
        assert build_confusion(truths, truths) == ConfusionMatrix(3, 0, 0, 2)

    def test_inverted(self):
        truths = [B, S, B, S]
        flipped = [S if t is B else B for t in truths]
        cm = build_confusion(flipped, truths)
        assert cm.tp == 0 and cm.tn == 0

    def test_table1_layout(self):
        preds = [B] * 111 + [B] * 71 + [S] * 7 + [S] * 211
        truths = [B] * 111 + [S] * 71 + [B] * 7 + [S] * 211
        assert build_confusion(preds, truths) == TABLE1

    def test_errors(self):
        with pytest.raises(LengthMismatch):
            build_confusion([B], [B, S])
        with pytest.raises(EmptyInput):
            build_confusion([], [])


class TestMetrics:
    def test_table1(self):
        assert round(sensitivity(TABLE1), 3) == 0.941
        assert round(specificity(TABLE1), 3) == 0.748
        assert accuracy(TABLE1) == 322 / 400 == 0.805

    def test_table2(self):
        assert round(sensitivity(TABLE2), 3) == 0.664
        assert round(specificity(TABLE2), 3) == 0.758
        assert accuracy(TABLE2) == 291 / 400 == 0.7275

    def test_perfect(self):
        assert sensitivity(ConfusionMatrix(5, 3, 0, 1)) == 1.0
        assert specificity(ConfusionMatrix(5, 0, 2, 1)) == 1.0
        assert accuracy(ConfusionMatrix(4, 0, 0, 6)) == 1.0

    def test_undefined(self):
        with pytest.raises(NoPositives):
            sensitivity(ConfusionMatrix(0, 1, 0, 1))
        with pytest.raises(NoNegatives):
            specificity(ConfusionMatrix(1, 0, 1, 0))
        with pytest.raises(EmptyMatrix):
            accuracy(ConfusionMatrix(0, 0, 0, 0))

    @given(matrices)
    def test_accuracy_identity(self, cm):
        p, n = cm.positives, cm.negatives
        combined = (sensitivity(cm) * p + specificity(cm) * n) / (p + n)
        assert combined == pytest.approx(accuracy(cm), abs=1e-12)

    @given(matrices)
    def test_label_flip_duality(self, cm):
        f = cm.flipped()
        assert sensitivity(f) == specificity(cm)
        assert specificity(f) == sensitivity(cm)
        assert accuracy(f) == accuracy(cm)

    @given(matrices)
    def test_report_recomputable(self, cm):
        r = MetricsReport.from_confusion(Method.CNN, "x", cm)
        assert r.is_consistent()
        back = MetricsReport.from_json(r.to_json())
        assert back == r


class TestSplit:
    def test_eighty_twenty(self):
        split = split_dataset(fake_dataset(500, 500), 0.8, seed=1)
        assert (len(split.train), len(split.validation)) == (800, 200)

    def test_all_train(self):
        ds = fake_dataset(3, 4)
        split = split_dataset(ds, 1.0, seed=0)
        assert len(split.train) == 7 and len(split.validation) == 0

    def test_deterministic(self):
        ds = fake_dataset(30, 20)
        assert split_dataset(ds, 0.8, 5) == split_dataset(ds, 0.8, 5)
        assert split_dataset(ds, 0.8, 5) != split_dataset(ds, 0.8, 6)

    def test_partition_many(self):
        import random

        rnd = random.Random(0)
        for _ in range(100):
            n = rnd.randint(1, 60)
            ds = fake_dataset(n // 2, n - n // 2)
            frac = rnd.choice([0.1, 0.5, 0.8, 1.0])
            split = split_dataset(ds, frac, rnd.randint(0, 10**6))
            train, val = list(split.train), list(split.validation)
            assert len(train) + len(val) == n
            assert set(train).isdisjoint(val)
            assert set(train) | set(val) == set(ds)
            assert len(train) == int(n * frac)

    def test_stratified(self):
        ds = fake_dataset(50, 150)
        split = split_dataset(ds, 0.8, 3, stratified=True)
        assert split.train.count(B) == 40 and split.train.count(S) == 120
        assert split.validation.count(B) == 10

    def test_empty(self):
        with pytest.raises(EmptyDataset):
            split_dataset(LabeledDataset(), 0.8, 0)


class TestEvaluate:
    def test_oracle(self):
        r = evaluate(oracle_classifier, fake_dataset(3, 5), Method.ORACLE)
        assert (r.sensitivity, r.specificity, r.accuracy) == (1.0, 1.0, 1.0)

    def test_constant_blurry(self):
        r = evaluate(lambda s: B, fake_dataset(4, 4))
        assert (r.sensitivity, r.specificity, r.accuracy) == (1.0, 0.0, 0.5)

    def test_single_class(self):
        with pytest.raises(SingleClassDataset):
            evaluate(oracle_classifier, fake_dataset(3, 0))

    def test_parallel_counts_match(self):
        ds = fake_dataset(7, 9)
        cls = lambda s: B if s.path.startswith("b1") or s.path.startswith("s") else S  # noqa: E731
        assert evaluate(cls, ds, workers=4) == evaluate(cls, ds)

    def test_classifier_errors_propagate(self):
        def boom(sample):
            raise RuntimeError(sample.path)

        with pytest.raises(RuntimeError):
            evaluate(boom, fake_dataset(1, 1))

    def test_laplacian_on_validation(self, corpus_split):
        model = calibrate_dataset(corpus_split.train)
        r = evaluate(laplacian_classifier(model), corpus_split.validation, Method.LAPLACIAN)
        assert r.accuracy >= 0.95


class TestReportOutput:
    def test_json_keys_and_precision(self):
        r = MetricsReport.from_confusion(Method.LAPLACIAN, "table1", TABLE1)
        d = json.loads(r.to_json())
        assert list(d) == ["method", "dataset_id", "tp", "fp", "fn", "tn",
                           "sensitivity", "specificity", "accuracy"]
        assert d["tp"] == 111 and d["method"] == "laplacian"
        assert '"sensitivity": 0.94067796610169496' in r.to_json()

    def test_table_layout(self):
        text = format_report(MetricsReport.from_confusion(Method.LAPLACIAN, "t1", TABLE1))
        lines = text.splitlines()
        assert any(line.split()[-2:] == ["111", "71"] for line in lines)
        assert any(line.split()[-2:] == ["7", "211"] for line in lines)
        assert "sensitivity 0.941" in text
        assert "specificity 0.748" in text
        assert "accuracy    0.805" in text

    def test_comparison_deltas(self):
        a = MetricsReport.from_confusion(Method.LAPLACIAN, "t", TABLE1)
        b = MetricsReport.from_confusion(Method.CNN, "t", TABLE2)
        text = format_comparison(a, b)
        assert text.count("method:") == 2
        assert "sensitivity -0.277" in text
        assert "specificity +0.010" in text  # 204/269 - 211/282
        assert "accuracy    -0.078" in text
