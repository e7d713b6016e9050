import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from multiview.core import (
    LOGISTIC_SCALE,
    MarginMatrix,
    MultiviewDataset,
    MvModel,
    VoteWeights,
    decision_scores,
    logistic_loss,
    logistic_risk,
    predict,
    predict_labels,
    vote_score,
    zero_one_loss,
    zero_one_risk,
)
from multiview.errors import DataError
from multiview.tests.helpers import constant_model

finite_margins = arrays(np.float64, st.integers(1, 40), elements=st.floats(-50, 50, allow_nan=False))


class VoteScoreTests(SimpleTestCase):
    def test_single_unit_voter(self):
        model = constant_model([[1]], rho=[1.0], pi=[[1.0]])
        self.assertEqual(vote_score(model, [np.zeros(1)]), 1.0)

    def test_symmetric_cancellation_predicts_positive(self):
        model = constant_model([[1], [-1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]])
        score = vote_score(model, [np.zeros(1), np.zeros(1)])
        self.assertEqual(score, 0.0)
        self.assertEqual(predict_labels(np.array([score]))[0], 1)

    def test_weighted_double_vote(self):
        model = constant_model([[1, -1], [-1]], rho=[0.75, 0.25], pi=[[2.0, -1.0], [0.5]])
        self.assertEqual(vote_score(model, [np.zeros(1), np.zeros(1)]), 2.125)

    def test_dimension_mismatch_is_a_data_error(self):
        model = constant_model([[1], [1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]], dims=[2, 1])
        with self.assertRaises(DataError):
            vote_score(model, [np.zeros(3), np.zeros(1)])
        with self.assertRaises(DataError):
            vote_score(model, [np.zeros(2)])

    def test_scalar_view_is_a_data_error(self):
        model = constant_model([[1], [1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]])
        with self.assertRaises(DataError):
            decision_scores(model, [np.float64(1.0), np.zeros((1, 1))])
        with self.assertRaises(DataError):
            decision_scores(model, [np.zeros((1, 1)), np.zeros(1)])

    def test_empty_batch_scores_nothing(self):
        model = constant_model([[1], [1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]])
        scores = decision_scores(model, [np.empty((0, 1)), np.empty((0, 1))])
        self.assertEqual(scores.shape, (0,))

    def test_scaling_one_view_scales_its_contribution(self):
        base = constant_model([[1, -1], [1]], rho=[0.4, 0.6], pi=[[0.3, 0.2], [0.7]])
        scaled = constant_model([[1, -1], [1]], rho=[0.4, 0.6], pi=[[0.9, 0.6], [0.7]])
        x = [np.zeros(1), np.zeros(1)]
        view_one = 0.4 * (0.3 - 0.2)
        self.assertAlmostEqual(vote_score(scaled, x) - vote_score(base, x), 2 * view_one, places=12)

    def test_positive_rescaling_keeps_predictions(self):
        views = (np.linspace(-1, 1, 7).reshape(-1, 1), np.linspace(1, -1, 7).reshape(-1, 1))
        model = constant_model([[1, -1], [-1]], rho=[0.7, 0.3], pi=[[0.5, 0.1], [0.4]])
        rescaled = constant_model([[1, -1], [-1]], rho=[0.7, 0.3], pi=[[5.0, 1.0], [4.0]])
        np.testing.assert_array_equal(predict(model, views), predict(rescaled, views))


class RiskTests(SimpleTestCase):
    def test_zero_one_counts_zero_margin_as_error(self):
        self.assertEqual(zero_one_loss([1.0, -1.0, 2.0, 0.0]), 0.5)
        self.assertEqual(zero_one_loss(np.zeros(5)), 1.0)

    def test_logistic_touches_zero_one_at_zero_margin(self):
        self.assertAlmostEqual(logistic_loss(np.zeros(3)), 1.0, places=15)

    def test_logistic_scalar_value(self):
        self.assertAlmostEqual(logistic_loss([1.0]), LOGISTIC_SCALE * math.log1p(math.exp(-1.0)), places=15)
        self.assertAlmostEqual(logistic_loss([1.0]), 0.4519, places=4)

    def test_logistic_large_margin_vanishes(self):
        self.assertEqual(logistic_loss([1e6]), 0.0)
        self.assertTrue(math.isfinite(logistic_loss([-1e6])))

    def test_empty_dataset_is_an_error(self):
        with self.assertRaises(DataError):
            zero_one_loss([])
        with self.assertRaises(DataError):
            logistic_loss([])

    def test_model_risks_on_dataset(self):
        model = constant_model([[1], [1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]])
        data = MultiviewDataset(views=(np.zeros((4, 1)), np.zeros((4, 1))), labels=[1, 1, -1, 1])
        self.assertEqual(zero_one_risk(model, data), 0.25)
        self.assertLessEqual(zero_one_risk(model, data), logistic_risk(model, data))

    @settings(max_examples=200, deadline=None)
    @given(finite_margins)
    def test_zero_one_is_bounded_by_logistic(self, margins):
        self.assertLessEqual(zero_one_loss(margins), logistic_loss(margins) + 1e-12)


class DomainTypeTests(SimpleTestCase):
    def test_dataset_needs_two_views(self):
        with self.assertRaises(DataError):
            MultiviewDataset(views=(np.zeros((2, 1)),), labels=[1, -1])

    def test_dataset_rejects_bad_labels_and_shapes(self):
        with self.assertRaises(DataError):
            MultiviewDataset(views=(np.zeros((2, 1)), np.zeros((2, 1))), labels=[1, 0])
        with self.assertRaises(DataError):
            MultiviewDataset(views=(np.zeros((2, 1)), np.zeros((3, 1))), labels=[1, -1])
        with self.assertRaises(DataError):
            MultiviewDataset(views=(np.zeros((2, 1)), np.zeros((2, 0))), labels=[1, -1])
        with self.assertRaises(DataError):
            MultiviewDataset(views=(np.zeros((0, 1)), np.zeros((0, 1))), labels=[])

    def test_dataset_is_read_only_and_named(self):
        data = MultiviewDataset(views=(np.zeros((2, 1)), np.ones((2, 3))), labels=[1, -1])
        self.assertEqual(data.view_names, ("view_1", "view_2"))
        self.assertEqual(data.dims, (1, 3))
        with self.assertRaises(ValueError):
            data.views[0][0, 0] = 5.0

    def test_rho_must_lie_on_the_simplex(self):
        with self.assertRaises(DataError):
            VoteWeights(pi=(np.ones(1), np.ones(1)), rho=np.array([0.6, 0.6]))
        with self.assertRaises(DataError):
            VoteWeights(pi=(np.ones(1), np.ones(1)), rho=np.array([1.5, -0.5]))

    def test_uniform_weights(self):
        weights = VoteWeights.uniform([2, 4])
        np.testing.assert_array_equal(weights.rho, [0.5, 0.5])
        np.testing.assert_array_equal(weights.pi[1], [0.25] * 4)

    def test_margin_entries_must_be_signs(self):
        with self.assertRaises(DataError):
            MarginMatrix(blocks=(np.array([[1.0], [0.0]]),))
        with self.assertRaises(DataError):
            MarginMatrix(blocks=(np.ones((2, 1)), np.ones((3, 1))))

    def test_model_pool_and_weights_must_agree(self):
        good = constant_model([[1, 1], [1]], rho=[0.5, 0.5], pi=[[0.5, 0.5], [1.0]])
        with self.assertRaises(DataError):
            MvModel(pools=good.pools, weights=VoteWeights.uniform([1, 1]))


class ModelFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_weights_survive_a_save_load_cycle_bit_exactly(self):
        pi = [[0.1 + 0.2, -1 / 3], [math.pi / 7]]
        model = constant_model([[1, -1], [1]], rho=[1 / 3, 2 / 3], pi=pi)
        path = model.save(self.dir / "model.json")
        loaded = MvModel.load(path)
        np.testing.assert_array_equal(loaded.weights.rho, model.weights.rho)
        for a, b in zip(loaded.weights.pi, model.weights.pi):
            np.testing.assert_array_equal(a, b)
        self.assertEqual(loaded.to_dict(), model.to_dict())

    def test_document_layout(self):
        model = constant_model([[1], [-1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]])
        payload = json.loads(model.save(self.dir / "model.json").read_text())
        self.assertEqual(set(payload), {"version", "V", "view_names", "trees", "pi", "rho", "metadata"})
        self.assertEqual(payload["V"], 2)
        self.assertEqual(payload["trees"][1][0]["tree"]["root"], {"leaf": -1})

    def test_corrupted_model_reports_location(self):
        path = self.dir / "model.json"
        path.write_text('{\n  "version": 1,\n  "V": ]\n}\n')
        with self.assertRaises(DataError) as ctx:
            MvModel.load(path)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn(str(path), str(ctx.exception))

    def test_unknown_version_is_rejected(self):
        model = constant_model([[1], [-1]], rho=[0.5, 0.5], pi=[[1.0], [1.0]])
        payload = model.to_dict()
        payload["version"] = 99
        path = self.dir / "model.json"
        path.write_text(json.dumps(payload))
        with self.assertRaises(DataError):
            MvModel.load(path)
