import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from multiview.core import MultiviewDataset, decision_scores, zero_one_risk
from multiview.core import accuracy as model_accuracy
from multiview.errors import DataError, UsageError
from multiview.services.datasets import MulticlassDataset, SplitSpec, split_dataset, stratified_split
from multiview.services.evaluation import (
    FUSION_TRAIN_SHARE,
    ExperimentConfig,
    MetricReport,
    accuracy,
    aggregate,
    evaluate_methods,
    f1_score,
    fit_method,
    learning_curve,
    run_baseline,
    run_method,
    write_results,
)
from multiview.services.trainer import TrainConfig, fit
from multiview.services.weak_learners import build_pool, train_tree
from multiview.tests.helpers import separable_dataset


def three_classes(per_class=20, seed=0):
    """View 0 places class k around 5k, view 1 is noise."""
    rng = np.random.default_rng(seed)
    classes = np.repeat(["x", "y", "z"], per_class)
    offsets = np.repeat([0.0, 5.0, 10.0], per_class)
    left = np.column_stack([offsets + 0.1 * rng.standard_normal(classes.size), rng.standard_normal(classes.size)])
    right = rng.standard_normal((classes.size, 2))
    return MulticlassDataset(views=(left, right), classes=classes, view_names=("signal", "noise"))


FAST = ExperimentConfig(train=TrainConfig(T=2), depths=(1, 2), baseline_depth=1)


class MetricTests(SimpleTestCase):
    def test_f1(self):
        self.assertEqual(f1_score([1, 1, -1, -1], [1, -1, 1, -1]), 0.5)
        self.assertEqual(f1_score([1, -1], [1, -1]), 1.0)
        self.assertEqual(f1_score([-1, -1], [-1, -1]), 0.0)
        self.assertEqual(f1_score([1, 1], [-1, -1]), 0.0)
        # TP=2, FP=1, FN=1
        self.assertAlmostEqual(f1_score([1, 1, 1, -1, -1], [1, 1, -1, 1, -1]), 2 / 3, places=15)

    def test_accuracy(self):
        self.assertEqual(accuracy([1, 1, -1, -1], [1, -1, 1, -1]), 0.5)

    def test_accuracy_complements_zero_one_risk(self):
        train, test = separable_dataset(m=30, seed=5), separable_dataset(m=30, seed=6)
        model, _ = fit(train, build_pool(train, seed=0), TrainConfig(T=3))
        # a zero score predicts +1 but is a zero-one error, the only way the two can disagree
        scores = decision_scores(model, test.views)
        ties = float(np.mean((scores == 0.0) & (test.labels == 1)))
        self.assertAlmostEqual(model_accuracy(model, test) + zero_one_risk(model, test), 1.0 + ties, places=12)

    def test_bad_pairs(self):
        with self.assertRaises(DataError):
            accuracy([1, -1], [1])
        with self.assertRaises(DataError):
            f1_score([], [])

    def test_report(self):
        report = MetricReport(accuracy=[0.5, 0.7], f1=[0.4, 0.4])
        self.assertAlmostEqual(report.accuracy_mean, 0.6, places=15)
        self.assertAlmostEqual(report.accuracy_std, math.sqrt(0.02), places=15)
        self.assertEqual(report.f1_std, 0.0)
        self.assertEqual(MetricReport(accuracy=[0.9], f1=[0.8]).accuracy_std, 0.0)
        self.assertEqual(report.to_dict()["repetitions"], 2)


class MethodTests(SimpleTestCase):
    def test_uniform_vote_of_identical_voters(self):
        data = separable_dataset(m=20, seed=2)
        twin = MultiviewDataset(views=(data.views[0], data.views[0]), labels=data.labels)
        predictor = fit_method("mv_uniform", twin, ExperimentConfig(depths=(1,)), seed=0)
        stump = train_tree(data.views[0], data.labels, 1, rng_seed=0)
        np.testing.assert_array_equal(predictor(twin), stump.predict(data.views[0]))

    def test_every_method_labels_with_signs(self):
        data = separable_dataset(m=20, seed=3)
        for method in ("mono", "concat", "fusion", "mv_uniform", "mwmvc2"):
            labels = fit_method(method, data, FAST, seed=1)(data)
            self.assertEqual(labels.shape, (20,))
            self.assertTrue(set(labels.tolist()) <= {-1, 1}, method)

    def test_mono_picks_the_informative_view(self):
        data = separable_dataset(m=20, seed=4)
        predictor = fit_method("mono", data, FAST, seed=0)
        self.assertEqual(accuracy(predictor(data), data.labels), 1.0)

    def test_concat_matches_mono_on_identical_views(self):
        data = separable_dataset(m=24, seed=6)
        copies = MultiviewDataset(views=(data.views[0],) * 3, labels=data.labels)
        cfg = ExperimentConfig(baseline_depth=2)
        mono = fit_method("mono", copies, cfg, seed=4)(copies)
        concat = fit_method("concat", copies, cfg, seed=4)(copies)
        self.assertEqual(accuracy(concat, copies.labels), accuracy(mono, copies.labels))

    def test_fusion_splits_sixty_forty_by_label(self):
        data = separable_dataset(m=40, seed=7)
        with mock.patch("multiview.services.evaluation.train_tree", wraps=train_tree) as spy:
            fit_method("fusion", data, FAST, seed=3)
        first, second = stratified_split(np.arange(data.m), data.labels, 3, train_size=FUSION_TRAIN_SHARE)
        self.assertEqual((first.size, second.size), (24, 16))

        view_calls, meta_call = spy.call_args_list[:-1], spy.call_args_list[-1]
        self.assertEqual(len(view_calls), data.V)
        for v, call in enumerate(view_calls):
            np.testing.assert_array_equal(call.args[0], data.views[v][first])
            self.assertEqual(int(np.sum(call.args[1] == 1)), 12)
        np.testing.assert_array_equal(meta_call.args[1], data.labels[second])
        self.assertEqual(int(np.sum(meta_call.args[1] == 1)), 8)

    def test_fusion_is_seeded(self):
        data, test = separable_dataset(m=40, seed=8), separable_dataset(m=40, seed=9)
        first = fit_method("fusion", data, FAST, seed=5)(test)
        again = fit_method("fusion", data, FAST, seed=5)(test)
        np.testing.assert_array_equal(first, again)

    def test_unknown_method(self):
        with self.assertRaises(UsageError):
            fit_method("boosting", separable_dataset(), FAST, seed=0)
        with self.assertRaises(UsageError):
            run_method("boosting", three_classes(), "x", SplitSpec(m_train=10), FAST)

    def test_config_validation(self):
        with self.assertRaises(UsageError):
            ExperimentConfig(depths=())
        with self.assertRaises(UsageError):
            ExperimentConfig(baseline_depth=0)


class ExperimentTests(SimpleTestCase):
    spec = SplitSpec(m_train=10, test_fraction=0.25, repetitions=2, seed=3)

    def test_easy_class_is_learnt(self):
        report = run_method("mono", three_classes(), "x", self.spec, FAST)
        self.assertEqual(report.repetitions, 2)
        self.assertEqual(report.accuracy_mean, 1.0)

    def test_constant_classifier_scores_half_on_training_folds(self):
        spec = SplitSpec(m_train=20, test_fraction=0.25, repetitions=3, seed=3)
        for rep in range(spec.repetitions):
            train = split_dataset(three_classes(), "y", spec, rep).train
            self.assertAlmostEqual(accuracy(np.ones(train.m, dtype=int), train.labels), 0.5, delta=0.05)

    def test_baselines_only(self):
        report = run_baseline("concat", three_classes(), "x", self.spec, FAST)
        self.assertEqual(len(report.f1), 2)
        with self.assertRaises(UsageError):
            run_baseline("mwmvc2", three_classes(), "x", self.spec, FAST)

    def test_repetitions_are_reproducible(self):
        first = run_method("mwmvc2", three_classes(), "y", self.spec, FAST)
        again = run_method("mwmvc2", three_classes(), "y", self.spec, FAST)
        self.assertEqual(first.to_dict(), again.to_dict())

    def test_evaluate_methods(self):
        raw, summary = evaluate_methods(three_classes(), ["x", "z"], ["mono", "mwmvc2"], self.spec, FAST)
        self.assertEqual(len(raw), 2 * 2 * 2)
        self.assertEqual(list(raw.columns), ["method", "positive_class", "rep", "accuracy", "f1"])
        self.assertEqual(summary["classes"], ["x", "z"])
        self.assertEqual(set(summary["macro"]), {"mono", "mwmvc2"})
        mono = summary["per_class"]["mono"]
        expected = (mono["x"]["accuracy"]["mean"] + mono["z"]["accuracy"]["mean"]) / 2
        self.assertAlmostEqual(summary["macro"]["mono"]["accuracy"], expected, places=15)

    def test_learning_curve(self):
        curve = learning_curve(three_classes(), "x", [4, 8], ["mono", "mv_uniform"], self.spec, FAST)
        self.assertEqual(len(curve), 2 * 2 * 2)
        self.assertEqual(sorted(set(curve["m"])), [4, 8])

    def test_learning_curve_rejects_oversized_training_sets(self):
        with self.assertRaises(DataError) as ctx:
            learning_curve(three_classes(), "x", [4, 1000], ["mono"], self.spec, FAST)
        self.assertIn("limit 30", str(ctx.exception))


class AggregateTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(0)
        self.raw = pd.DataFrame({
            "method": ["b"] * 3 + ["a"] * 3 + ["c"],
            "m": [10] * 7,
            "rep": [0, 1, 2, 0, 1, 2, 0],
            "accuracy": rng.random(7),
            "f1": rng.random(7),
        })

    def test_means_match_raw_rows(self):
        table = aggregate(self.raw, ["method", "m"])
        self.assertEqual(table["method"].tolist(), ["b", "a", "c"])
        for _, row in table.iterrows():
            values = self.raw[self.raw["method"] == row["method"]]
            self.assertAlmostEqual(row["accuracy_mean"], values["accuracy"].mean(), delta=1e-12)
            self.assertAlmostEqual(row["f1_mean"], values["f1"].mean(), delta=1e-12)
        self.assertEqual(table["repetitions"].tolist(), [3, 3, 1])
        self.assertEqual(table.loc[2, "accuracy_std"], 0.0)

    def test_written_files_are_deterministic(self):
        table = aggregate(self.raw, ["method", "m"])
        outputs = []
        for _ in range(2):
            tmp = tempfile.TemporaryDirectory()
            self.addCleanup(tmp.cleanup)
            paths = write_results(self.raw, table, Path(tmp.name), summary={"classes": ["x"]})
            outputs.append({name: path.read_bytes() for name, path in paths.items()})
        self.assertEqual(outputs[0], outputs[1])
        self.assertEqual(set(outputs[0]), {"raw", "aggregate", "summary"})

    def test_written_floats_read_back_exactly(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        paths = write_results(self.raw, aggregate(self.raw, ["method"]), Path(tmp.name))
        again = pd.read_csv(paths["raw"], float_precision="round_trip")
        np.testing.assert_array_equal(again["accuracy"].to_numpy(), self.raw["accuracy"].to_numpy())
